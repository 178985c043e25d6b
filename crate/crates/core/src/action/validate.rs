use std::fmt;

use super::{Action, MousePosition};
use crate::env::keysym;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    PositionOutOfBounds {
        position: MousePosition,
        screen: (u32, u32),
    },
    NonPositiveScroll(u32),
    InvalidWait(f64),
    UnknownKeyName(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PositionOutOfBounds { position, screen } => write!(
                f,
                "position ({}, {}) is outside the {}x{} screen",
                position.width, position.height, screen.0, screen.1
            ),
            Violation::NonPositiveScroll(n) => write!(f, "scroll repeat must be positive, got {n}"),
            Violation::InvalidWait(s) => {
                write!(f, "wait time must be a non-negative number, got {s}")
            }
            Violation::UnknownKeyName(k) => write!(f, "unknown key name {k:?}"),
        }
    }
}

/// Checks an action against a screen of the given size.
pub fn validate_for_screen(action: &Action, width: u32, height: u32) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some(p) = action.mouse_position() {
        if p.width >= width || p.height >= height {
            out.push(Violation::PositionOutOfBounds {
                position: p,
                screen: (width, height),
            });
        }
    }
    match action {
        Action::MouseScrollUp { repeat } | Action::MouseScrollDown { repeat } if *repeat == 0 => {
            out.push(Violation::NonPositiveScroll(*repeat));
        }
        Action::Wait { seconds } if !(seconds.is_finite() && *seconds >= 0.0) => {
            out.push(Violation::InvalidWait(*seconds));
        }
        Action::KeyboardPress { .. } | Action::KeyboardText { .. } => {
            if let Err(keysym::UnknownKeyName(name)) = keysym::plan_key_events(action) {
                out.push(Violation::UnknownKeyName(name));
            }
        }
        _ => {}
    }
    out
}
