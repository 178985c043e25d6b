use std::time::Duration;

use super::{keysym, EnvError};
use crate::action::{Action, MouseButton, MousePosition};

/// Pause between the two clicks of a double click.
pub const DOUBLE_CLICK_DELAY: Duration = Duration::from_millis(80);

/// Number of interpolated pointer moves emitted during a drag.
pub const DRAG_STEPS: u32 = 10;

const WHEEL_UP: u8 = 1 << 3;
const WHEEL_DOWN: u8 = 1 << 4;

/// One wire-level input event, or a pause between events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceEvent {
    Pointer { mask: u8, x: u16, y: u16 },
    Key { down: bool, keysym: u32 },
    Pause(Duration),
}

fn button_mask(b: MouseButton) -> u8 {
    match b {
        MouseButton::Left => 1,
        MouseButton::Middle => 1 << 1,
        MouseButton::Right => 1 << 2,
    }
}

fn coords(p: MousePosition) -> Result<(u16, u16), EnvError> {
    match (u16::try_from(p.width), u16::try_from(p.height)) {
        (Ok(x), Ok(y)) => Ok((x, y)),
        _ => Err(EnvError::InvalidAction(format!(
            "position ({}, {}) exceeds the protocol range",
            p.width, p.height
        ))),
    }
}

fn lerp(a: u16, b: u16, i: u32, n: u32) -> u16 {
    let (a, b) = (a as i64, b as i64);
    (a + (b - a) * i as i64 / n as i64) as u16
}

/// Translates actions into device events, tracking the pointer position
/// across actions. Plan and evaluate actions are rejected.
pub fn plan_device_events(
    actions: &[Action],
    pointer: &mut (u16, u16),
) -> Result<Vec<DeviceEvent>, EnvError> {
    let mut out = Vec::new();
    for action in actions {
        match action {
            Action::MouseMove { position } => {
                let (x, y) = coords(*position)?;
                out.push(DeviceEvent::Pointer { mask: 0, x, y });
                *pointer = (x, y);
            }
            Action::MouseClick { button, position }
            | Action::MouseDoubleClick { button, position } => {
                let (x, y) = coords(*position)?;
                let mask = button_mask(*button);
                let clicks = if matches!(action, Action::MouseDoubleClick { .. }) {
                    2
                } else {
                    1
                };
                for i in 0..clicks {
                    if i > 0 {
                        out.push(DeviceEvent::Pause(DOUBLE_CLICK_DELAY));
                    }
                    out.push(DeviceEvent::Pointer { mask, x, y });
                    out.push(DeviceEvent::Pointer { mask: 0, x, y });
                }
                *pointer = (x, y);
            }
            Action::MouseScrollUp { repeat } | Action::MouseScrollDown { repeat } => {
                let wheel = if matches!(action, Action::MouseScrollUp { .. }) {
                    WHEEL_UP
                } else {
                    WHEEL_DOWN
                };
                let (x, y) = *pointer;
                for _ in 0..*repeat {
                    out.push(DeviceEvent::Pointer { mask: wheel, x, y });
                    out.push(DeviceEvent::Pointer { mask: 0, x, y });
                }
            }
            Action::MouseDrag {
                button,
                end_position,
            } => {
                let (sx, sy) = *pointer;
                let (ex, ey) = coords(*end_position)?;
                let mask = button_mask(*button);
                out.push(DeviceEvent::Pointer { mask, x: sx, y: sy });
                for i in 1..=DRAG_STEPS {
                    out.push(DeviceEvent::Pointer {
                        mask,
                        x: lerp(sx, ex, i, DRAG_STEPS),
                        y: lerp(sy, ey, i, DRAG_STEPS),
                    });
                }
                out.push(DeviceEvent::Pointer {
                    mask: 0,
                    x: ex,
                    y: ey,
                });
                *pointer = (ex, ey);
            }
            Action::KeyboardPress { .. } | Action::KeyboardText { .. } => {
                let plan = keysym::plan_key_events(action)?;
                out.extend(plan.events.into_iter().map(|e| DeviceEvent::Key {
                    down: e.down,
                    keysym: e.keysym,
                }));
            }
            Action::Wait { seconds } => {
                let d = Duration::try_from_secs_f64(*seconds).map_err(|_| {
                    EnvError::InvalidAction(format!("wait time {seconds} is not a valid duration"))
                })?;
                out.push(DeviceEvent::Pause(d));
            }
            Action::Plan { .. } | Action::Evaluate { .. } => {
                return Err(EnvError::NotADeviceAction(action.serialize()));
            }
        }
    }
    Ok(out)
}
