//! The agent's action space and its JSON function-call wire format.
//!
//! Every action an agent can emit is one variant of [`Action`]. Actions travel
//! as JSON objects inside fenced code blocks of a model response; [`parse_response`]
//! extracts them and [`Action::to_json`] writes the canonical form back out.

mod keys;
mod parse;
mod validate;

use std::fmt;

use serde_json::{json, Map, Value};

pub use keys::{attribute_keys, AttributeKeySet, Category};
pub use parse::{
    extract_blocks, parse_action_object, parse_response, raw_objects, ObjectError, ParseFault,
    ParseOutcome,
};
pub use validate::{validate_for_screen, Violation};

/// Pixel coordinate relative to the top-left corner of the screen.
///
/// The field names follow the wire format: `width` is the x offset and
/// `height` is the y offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MousePosition {
    pub width: u32,
    pub height: u32,
}

impl MousePosition {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MouseButton {
    Left,
    Middle,
    Right,
}

impl MouseButton {
    pub fn as_str(self) -> &'static str {
        match self {
            MouseButton::Left => "left",
            MouseButton::Middle => "middle",
            MouseButton::Right => "right",
        }
    }

    pub fn from_wire(s: &str) -> Option<Self> {
        match s {
            "left" => Some(MouseButton::Left),
            "middle" => Some(MouseButton::Middle),
            "right" => Some(MouseButton::Right),
            _ => None,
        }
    }
}

/// Outcome judged by the agent in the reflecting phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Situation {
    SubTaskSuccess,
    NeedRetry,
    NeedReformulate,
}

impl Situation {
    pub const ALL: [Situation; 3] = [
        Situation::SubTaskSuccess,
        Situation::NeedRetry,
        Situation::NeedReformulate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Situation::SubTaskSuccess => "sub_task_success",
            Situation::NeedRetry => "need_retry",
            Situation::NeedReformulate => "need_reformulate",
        }
    }

    pub fn from_wire(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

impl fmt::Display for Situation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One action of the agent's action space.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    MouseMove {
        position: MousePosition,
    },
    MouseClick {
        button: MouseButton,
        position: MousePosition,
    },
    MouseDoubleClick {
        button: MouseButton,
        position: MousePosition,
    },
    MouseScrollUp {
        repeat: u32,
    },
    MouseScrollDown {
        repeat: u32,
    },
    /// Drags from the current pointer position to `end_position`.
    MouseDrag {
        button: MouseButton,
        end_position: MousePosition,
    },
    KeyboardPress {
        key: String,
    },
    KeyboardText {
        text: String,
    },
    Wait {
        seconds: f64,
    },
    Plan {
        element: String,
    },
    Evaluate {
        situation: Situation,
        advice: Option<String>,
    },
}

/// Top-level `action_type` of an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Mouse,
    Keyboard,
    Wait,
    Plan,
    Evaluate,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Mouse,
        ActionKind::Keyboard,
        ActionKind::Wait,
        ActionKind::Plan,
        ActionKind::Evaluate,
    ];

    pub fn wire_name(self) -> &'static str {
        match self {
            ActionKind::Mouse => "MouseAction",
            ActionKind::Keyboard => "KeyboardAction",
            ActionKind::Wait => "WaitAction",
            ActionKind::Plan => "PlanAction",
            ActionKind::Evaluate => "EvaluateSubTaskAction",
        }
    }

    pub fn from_wire(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.wire_name() == s)
    }
}

/// Second-level type of a mouse action (`mouse_action_type`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MouseActionType {
    Move,
    Click,
    DoubleClick,
    ScrollUp,
    ScrollDown,
    Drag,
}

impl MouseActionType {
    pub const ALL: [MouseActionType; 6] = [
        MouseActionType::Move,
        MouseActionType::Click,
        MouseActionType::DoubleClick,
        MouseActionType::ScrollUp,
        MouseActionType::ScrollDown,
        MouseActionType::Drag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MouseActionType::Move => "move",
            MouseActionType::Click => "click",
            MouseActionType::DoubleClick => "double_click",
            MouseActionType::ScrollUp => "scroll_up",
            MouseActionType::ScrollDown => "scroll_down",
            MouseActionType::Drag => "drag",
        }
    }

    pub fn from_wire(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::MouseMove { .. }
            | Action::MouseClick { .. }
            | Action::MouseDoubleClick { .. }
            | Action::MouseScrollUp { .. }
            | Action::MouseScrollDown { .. }
            | Action::MouseDrag { .. } => ActionKind::Mouse,
            Action::KeyboardPress { .. } | Action::KeyboardText { .. } => ActionKind::Keyboard,
            Action::Wait { .. } => ActionKind::Wait,
            Action::Plan { .. } => ActionKind::Plan,
            Action::Evaluate { .. } => ActionKind::Evaluate,
        }
    }

    pub fn mouse_action_type(&self) -> Option<MouseActionType> {
        Some(match self {
            Action::MouseMove { .. } => MouseActionType::Move,
            Action::MouseClick { .. } => MouseActionType::Click,
            Action::MouseDoubleClick { .. } => MouseActionType::DoubleClick,
            Action::MouseScrollUp { .. } => MouseActionType::ScrollUp,
            Action::MouseScrollDown { .. } => MouseActionType::ScrollDown,
            Action::MouseDrag { .. } => MouseActionType::Drag,
            _ => return None,
        })
    }

    pub fn mouse_button(&self) -> Option<MouseButton> {
        match self {
            Action::MouseClick { button, .. }
            | Action::MouseDoubleClick { button, .. }
            | Action::MouseDrag { button, .. } => Some(*button),
            _ => None,
        }
    }

    /// Target position of a mouse action; the end position for drags.
    pub fn mouse_position(&self) -> Option<MousePosition> {
        match self {
            Action::MouseMove { position }
            | Action::MouseClick { position, .. }
            | Action::MouseDoubleClick { position, .. } => Some(*position),
            Action::MouseDrag { end_position, .. } => Some(*end_position),
            _ => None,
        }
    }

    /// Device actions are the ones the environment can execute.
    pub fn is_device_action(&self) -> bool {
        matches!(
            self.kind(),
            ActionKind::Mouse | ActionKind::Keyboard | ActionKind::Wait
        )
    }

    /// Canonical JSON object with the wire key order.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("action_type".into(), self.kind().wire_name().into());
        match self {
            Action::MouseMove { position } => {
                m.insert("mouse_action_type".into(), "move".into());
                m.insert("mouse_position".into(), position_json(*position));
            }
            Action::MouseClick { button, position }
            | Action::MouseDoubleClick { button, position } => {
                let t = self.mouse_action_type().map(MouseActionType::as_str);
                m.insert("mouse_action_type".into(), t.unwrap_or_default().into());
                m.insert("mouse_button".into(), button.as_str().into());
                m.insert("mouse_position".into(), position_json(*position));
            }
            Action::MouseScrollUp { repeat } | Action::MouseScrollDown { repeat } => {
                let t = self.mouse_action_type().map(MouseActionType::as_str);
                m.insert("mouse_action_type".into(), t.unwrap_or_default().into());
                m.insert("scroll_repeat".into(), (*repeat).into());
            }
            Action::MouseDrag {
                button,
                end_position,
            } => {
                m.insert("mouse_action_type".into(), "drag".into());
                m.insert("mouse_button".into(), button.as_str().into());
                m.insert("mouse_position".into(), position_json(*end_position));
            }
            Action::KeyboardPress { key } => {
                m.insert("keyboard_action_type".into(), "press".into());
                m.insert("keyboard_key".into(), key.as_str().into());
            }
            Action::KeyboardText { text } => {
                m.insert("keyboard_action_type".into(), "text".into());
                m.insert("keyboard_text".into(), text.as_str().into());
            }
            Action::Wait { seconds } => {
                m.insert("wait_time".into(), json!(seconds));
            }
            Action::Plan { element } => {
                m.insert("element".into(), element.as_str().into());
            }
            Action::Evaluate { situation, advice } => {
                m.insert("situation".into(), situation.as_str().into());
                if let Some(advice) = advice {
                    m.insert("advice".into(), advice.as_str().into());
                }
            }
        }
        Value::Object(m)
    }

    /// Compact canonical JSON text of this action.
    pub fn serialize(&self) -> String {
        self.to_json().to_string()
    }
}

impl serde::Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = Map::<String, Value>::deserialize(d)?;
        parse_action_object(&map)
            .map(|(a, _)| a)
            .map_err(|e| serde::de::Error::custom(e.reason))
    }
}

impl serde::Serialize for Situation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for Situation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Situation::from_wire(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown situation {s:?}")))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn position_json(p: MousePosition) -> Value {
    json!({ "width": p.width, "height": p.height })
}

/// Compact canonical JSON array of several actions.
pub fn serialize_actions(actions: &[Action]) -> String {
    Value::Array(actions.iter().map(Action::to_json).collect()).to_string()
}

/// Wraps actions into a fenced block, the shape models are asked to answer in.
pub fn to_response_text(actions: &[Action]) -> String {
    format!("```json\n{}\n```", serialize_actions(actions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serializes_keyboard_press() {
        let a = Action::KeyboardPress {
            key: "Ctrl+A".into(),
        };
        assert_eq!(
            a.serialize(),
            r#"{"action_type":"KeyboardAction","keyboard_action_type":"press","keyboard_key":"Ctrl+A"}"#
        );
    }

    #[test]
    fn serializes_wait() {
        assert_eq!(
            Action::Wait { seconds: 1.0 }.serialize(),
            r#"{"action_type":"WaitAction","wait_time":1.0}"#
        );
    }

    #[test]
    fn serializes_evaluate_without_advice() {
        let a = Action::Evaluate {
            situation: Situation::SubTaskSuccess,
            advice: None,
        };
        assert_eq!(
            a.serialize(),
            r#"{"action_type":"EvaluateSubTaskAction","situation":"sub_task_success"}"#
        );
    }

    #[test]
    fn serializes_click() {
        let a = Action::MouseClick {
            button: MouseButton::Left,
            position: MousePosition::new(10, 760),
        };
        assert_eq!(
            a.serialize(),
            r#"{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":10,"height":760}}"#
        );
    }

    #[test]
    fn drag_reports_end_position() {
        let a = Action::MouseDrag {
            button: MouseButton::Left,
            end_position: MousePosition::new(3, 4),
        };
        assert_eq!(a.mouse_position(), Some(MousePosition::new(3, 4)));
        assert!(a.is_device_action());
        assert!(!Action::Plan {
            element: "x".into()
        }
        .is_device_action());
    }
}
