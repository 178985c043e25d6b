//! The controlled computer: screenshots in, mouse and keyboard events out.
//!
//! [`VncEnv`] drives a real desktop over RFB; [`MemoryDesktop`] is an
//! in-process stand-in with the same contract, used by tests and replays.

mod events;
pub mod keysym;
mod memory;
pub mod rfb;
mod screenshot;
mod vnc;

use std::time::{Duration, SystemTime};

use thiserror::Error;

use crate::action::Action;

pub use events::{plan_device_events, DeviceEvent, DOUBLE_CLICK_DELAY, DRAG_STEPS};
pub use memory::MemoryDesktop;
pub use screenshot::Screenshot;
pub use vnc::VncEnv;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("timed out connecting to {0}")]
    ConnectTimeout(String),
    #[error("protocol handshake mismatch: {0}")]
    HandshakeMismatch(String),
    #[error("authentication failed: {0}")]
    AuthFailed(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("timed out waiting for the server")]
    Timeout,
    #[error("{0:?} is not a device action")]
    NotADeviceAction(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error(transparent)]
    UnknownKey(#[from] keysym::UnknownKeyName),
    #[error("image error: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Computes a reward from the state before and after a step.
///
/// The hook only sees shared references, so it cannot alter the screenshots.
pub trait RewardHook: Send + Sync {
    fn reward(&self, before: &Screenshot, after: &Screenshot, executed: &[Action]) -> f64;
}

/// The default reward: always zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroReward;

impl RewardHook for ZeroReward {
    fn reward(&self, _: &Screenshot, _: &Screenshot, _: &[Action]) -> f64 {
        0.0
    }
}

impl<F> RewardHook for F
where
    F: Fn(&Screenshot, &Screenshot, &[Action]) -> f64 + Send + Sync,
{
    fn reward(&self, before: &Screenshot, after: &Screenshot, executed: &[Action]) -> f64 {
        self(before, after, executed)
    }
}

/// The state sandwich around one batch of executed actions.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub before: Screenshot,
    pub after: Screenshot,
    pub executed: Vec<Action>,
    pub first_event_at: Option<SystemTime>,
    pub last_event_at: Option<SystemTime>,
    pub wall_time: Duration,
    pub reward: f64,
}

/// A desktop the agent can observe and act on.
///
/// Operations on one environment are strictly sequential.
pub trait Environment: Send {
    /// Framebuffer width and height in pixels.
    fn screen_size(&self) -> (u32, u32);

    fn capture(&mut self) -> Result<Screenshot, EnvError>;

    /// Captures the before state, performs `actions` in order, waits the
    /// settle delay and captures the after state.
    fn execute(
        &mut self,
        actions: &[Action],
        reward: &dyn RewardHook,
    ) -> Result<StepOutcome, EnvError>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn screen_size(&self) -> (u32, u32) {
        (**self).screen_size()
    }

    fn capture(&mut self) -> Result<Screenshot, EnvError> {
        (**self).capture()
    }

    fn execute(
        &mut self,
        actions: &[Action],
        reward: &dyn RewardHook,
    ) -> Result<StepOutcome, EnvError> {
        (**self).execute(actions, reward)
    }
}

/// Low-level device the step runner sends events to.
pub(crate) trait Device {
    fn capture(&mut self) -> Result<Screenshot, EnvError>;
    fn pointer(&mut self, mask: u8, x: u16, y: u16) -> Result<(), EnvError>;
    fn key(&mut self, down: bool, keysym: u32) -> Result<(), EnvError>;
}

/// Shared `execute` implementation: before capture, events, settle, after capture.
pub(crate) fn run_step<D: Device>(
    device: &mut D,
    pointer: &mut (u16, u16),
    settle: Duration,
    actions: &[Action],
    reward: &dyn RewardHook,
) -> Result<StepOutcome, EnvError> {
    let events = plan_device_events(actions, pointer)?;
    let started = std::time::Instant::now();
    let before = device.capture()?;
    let mut first_event_at = None;
    let mut last_event_at = None;
    for event in &events {
        match *event {
            DeviceEvent::Pointer { mask, x, y } => device.pointer(mask, x, y)?,
            DeviceEvent::Key { down, keysym } => device.key(down, keysym)?,
            DeviceEvent::Pause(d) => {
                std::thread::sleep(d);
                continue;
            }
        }
        let now = SystemTime::now();
        first_event_at.get_or_insert(now);
        last_event_at = Some(now);
    }
    std::thread::sleep(settle);
    let after = device.capture()?;
    let reward = reward.reward(&before, &after, actions);
    Ok(StepOutcome {
        before,
        after,
        executed: actions.to_vec(),
        first_event_at,
        last_event_at,
        wall_time: started.elapsed(),
        reward,
    })
}
