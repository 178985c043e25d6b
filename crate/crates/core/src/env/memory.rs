use std::time::{Duration, SystemTime};

use super::{
    run_step, Device, DeviceEvent, EnvError, Environment, RewardHook, Screenshot, StepOutcome,
};
use crate::action::Action;

/// An in-process desktop: a fixed framebuffer that records every device
/// event it receives. Pointer button presses paint a white dot so before
/// and after screenshots differ.
#[derive(Debug, Clone)]
pub struct MemoryDesktop {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    pointer: (u16, u16),
    settle: Duration,
    events: Vec<(SystemTime, DeviceEvent)>,
    executed: Vec<Vec<Action>>,
}

impl MemoryDesktop {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0x30; width as usize * height as usize * 3],
            pointer: (0, 0),
            settle: Duration::ZERO,
            events: Vec::new(),
            executed: Vec::new(),
        }
    }

    pub fn with_settle_delay(mut self, settle: Duration) -> Self {
        self.settle = settle;
        self
    }

    /// Device events received so far, with the time each was sent.
    pub fn events(&self) -> &[(SystemTime, DeviceEvent)] {
        &self.events
    }

    /// Each executed batch of actions, in order.
    pub fn executed(&self) -> &[Vec<Action>] {
        &self.executed
    }
}

struct Surface<'a>(&'a mut MemoryDesktop);

impl Device for Surface<'_> {
    fn capture(&mut self) -> Result<Screenshot, EnvError> {
        Ok(Screenshot::new(
            self.0.width,
            self.0.height,
            self.0.pixels.clone(),
        ))
    }

    fn pointer(&mut self, mask: u8, x: u16, y: u16) -> Result<(), EnvError> {
        let d = &mut *self.0;
        d.events
            .push((SystemTime::now(), DeviceEvent::Pointer { mask, x, y }));
        if mask & 0b111 != 0 && (x as u32) < d.width && (y as u32) < d.height {
            let i = (y as usize * d.width as usize + x as usize) * 3;
            d.pixels[i..i + 3].copy_from_slice(&[255, 255, 255]);
        }
        Ok(())
    }

    fn key(&mut self, down: bool, keysym: u32) -> Result<(), EnvError> {
        self.0
            .events
            .push((SystemTime::now(), DeviceEvent::Key { down, keysym }));
        Ok(())
    }
}

impl Environment for MemoryDesktop {
    fn screen_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn capture(&mut self) -> Result<Screenshot, EnvError> {
        Surface(self).capture()
    }

    fn execute(
        &mut self,
        actions: &[Action],
        reward: &dyn RewardHook,
    ) -> Result<StepOutcome, EnvError> {
        let mut pointer = self.pointer;
        let settle = self.settle;
        let outcome = run_step(&mut Surface(self), &mut pointer, settle, actions, reward)?;
        self.pointer = pointer;
        self.executed.push(actions.to_vec());
        Ok(outcome)
    }
}
