use std::time::Duration;

use super::rfb::{RfbClient, RfbConfig};
use super::{run_step, Device, EnvError, Environment, RewardHook, Screenshot, StepOutcome};
use crate::action::Action;

/// A desktop controlled over RFB.
///
/// The pointer position is tracked client-side, starting at (0, 0), so
/// scrolls and drags start from wherever the last mouse action left it.
#[derive(Debug)]
pub struct VncEnv {
    client: RfbClient,
    pointer: (u16, u16),
    settle: Duration,
}

impl VncEnv {
    pub fn connect(config: &RfbConfig) -> Result<Self, EnvError> {
        Ok(Self {
            client: RfbClient::connect(config)?,
            pointer: (0, 0),
            settle: config.settle_delay,
        })
    }

    pub fn client(&self) -> &RfbClient {
        &self.client
    }

    pub fn pointer(&self) -> (u16, u16) {
        self.pointer
    }
}

impl Device for RfbClient {
    fn capture(&mut self) -> Result<Screenshot, EnvError> {
        RfbClient::capture(self)
    }

    fn pointer(&mut self, mask: u8, x: u16, y: u16) -> Result<(), EnvError> {
        self.pointer_event(mask, x, y)
    }

    fn key(&mut self, down: bool, keysym: u32) -> Result<(), EnvError> {
        self.key_event(down, keysym)
    }
}

impl Environment for VncEnv {
    fn screen_size(&self) -> (u32, u32) {
        (self.client.width() as u32, self.client.height() as u32)
    }

    fn capture(&mut self) -> Result<Screenshot, EnvError> {
        self.client.capture()
    }

    fn execute(
        &mut self,
        actions: &[Action],
        reward: &dyn RewardHook,
    ) -> Result<StepOutcome, EnvError> {
        run_step(
            &mut self.client,
            &mut self.pointer,
            self.settle,
            actions,
            reward,
        )
    }
}
