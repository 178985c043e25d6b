use serde_json::{Map, Value};

/// The seven attribute categories tracked by the function-call success metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Plan,
    ActionType,
    MouseActionType,
    MouseButton,
    MousePosition,
    KeyboardKeysOrText,
    ReflectingSituation,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Plan,
        Category::ActionType,
        Category::MouseActionType,
        Category::MouseButton,
        Category::MousePosition,
        Category::KeyboardKeysOrText,
        Category::ReflectingSituation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Plan => "plan",
            Category::ActionType => "action_type",
            Category::MouseActionType => "mouse_action_type",
            Category::MouseButton => "mouse_button",
            Category::MousePosition => "mouse_position",
            Category::KeyboardKeysOrText => "keyboard_keys_or_text",
            Category::ReflectingSituation => "reflecting_situation",
        }
    }
}

/// Which attribute keys a raw action object supplies, regardless of values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AttributeKeySet {
    pub plan: bool,
    pub action_type: bool,
    pub mouse_action_type: bool,
    pub mouse_button: bool,
    pub mouse_position: bool,
    pub keyboard_keys_or_text: bool,
    pub reflecting_situation: bool,
}

impl AttributeKeySet {
    pub fn contains(&self, c: Category) -> bool {
        match c {
            Category::Plan => self.plan,
            Category::ActionType => self.action_type,
            Category::MouseActionType => self.mouse_action_type,
            Category::MouseButton => self.mouse_button,
            Category::MousePosition => self.mouse_position,
            Category::KeyboardKeysOrText => self.keyboard_keys_or_text,
            Category::ReflectingSituation => self.reflecting_situation,
        }
    }

    pub fn set(&mut self, c: Category, on: bool) {
        let slot = match c {
            Category::Plan => &mut self.plan,
            Category::ActionType => &mut self.action_type,
            Category::MouseActionType => &mut self.mouse_action_type,
            Category::MouseButton => &mut self.mouse_button,
            Category::MousePosition => &mut self.mouse_position,
            Category::KeyboardKeysOrText => &mut self.keyboard_keys_or_text,
            Category::ReflectingSituation => &mut self.reflecting_situation,
        };
        *slot = on;
    }

    pub fn iter(&self) -> impl Iterator<Item = Category> + '_ {
        Category::ALL.into_iter().filter(|c| self.contains(*c))
    }

    pub fn is_empty(&self) -> bool {
        self.iter().next().is_none()
    }
}

fn is_str(obj: &Map<String, Value>, key: &str) -> bool {
    matches!(obj.get(key), Some(Value::String(_)))
}

fn is_int(v: Option<&Value>) -> bool {
    matches!(v, Some(Value::Number(n)) if n.is_i64() || n.is_u64())
}

/// Reports the attribute keys present in a raw (possibly malformed) action object.
pub fn attribute_keys(raw: &Map<String, Value>) -> AttributeKeySet {
    let mouse_position = match raw.get("mouse_position") {
        Some(Value::Object(p)) => is_int(p.get("width")) && is_int(p.get("height")),
        _ => false,
    };
    AttributeKeySet {
        plan: is_str(raw, "element"),
        action_type: is_str(raw, "action_type"),
        mouse_action_type: is_str(raw, "mouse_action_type"),
        mouse_button: is_str(raw, "mouse_button"),
        mouse_position,
        keyboard_keys_or_text: is_str(raw, "keyboard_key") || is_str(raw, "keyboard_text"),
        reflecting_situation: is_str(raw, "situation"),
    }
}
