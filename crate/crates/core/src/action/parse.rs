use serde_json::{Map, Value};

use super::{Action, ActionKind, MouseActionType, MouseButton, MousePosition, Situation};

/// A JSON block that could not be turned into actions.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParseFault {
    pub block_index: usize,
    pub raw_text: String,
    /// Required keys absent from the block's objects, in first-seen order.
    pub missing_keys: Vec<String>,
    pub reason: String,
}

/// Result of scanning a model response for function calls.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    /// Actions in document order.
    pub actions: Vec<Action>,
    pub faults: Vec<ParseFault>,
    /// Non-fatal coercions, e.g. a fractional coordinate truncated to an integer.
    pub notes: Vec<String>,
    /// Number of candidate blocks examined.
    pub block_count: usize,
}

impl ParseOutcome {
    pub fn is_clean(&self) -> bool {
        self.faults.is_empty() && !self.actions.is_empty()
    }
}

/// Why a single JSON object is not a valid action.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObjectError {
    pub missing_keys: Vec<String>,
    pub reason: String,
}

impl ObjectError {
    fn missing(keys: &[&str]) -> Self {
        Self {
            missing_keys: keys.iter().map(|k| k.to_string()).collect(),
            reason: format!("missing required keys: {}", keys.join(", ")),
        }
    }

    fn invalid(reason: impl Into<String>) -> Self {
        Self {
            missing_keys: Vec::new(),
            reason: reason.into(),
        }
    }
}

/// A candidate block of JSON text found in a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block<'a> {
    pub text: &'a str,
    pub fenced: bool,
}

/// Finds every fenced code block (```` ```json ```` or bare ```` ``` ````) in order.
/// When the text has no fence at all, the whole text is the single candidate.
pub fn extract_blocks(text: &str) -> Vec<Block<'_>> {
    const FENCE: &str = "```";
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(FENCE) {
        let after = &rest[start + FENCE.len()..];
        let tag_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
            .unwrap_or(after.len());
        let body = &after[tag_len..];
        match body.find(FENCE) {
            Some(end) => {
                blocks.push(Block {
                    text: body[..end].trim(),
                    fenced: true,
                });
                rest = &body[end + FENCE.len()..];
            }
            None => {
                // unterminated fence: take the remainder
                blocks.push(Block {
                    text: body.trim(),
                    fenced: true,
                });
                rest = "";
            }
        }
    }
    if blocks.is_empty() {
        blocks.push(Block {
            text: text.trim(),
            fenced: false,
        });
    }
    blocks
}

fn decode_block(block: &Block<'_>) -> Option<Value> {
    if let Ok(v) = serde_json::from_str::<Value>(block.text) {
        return Some(v);
    }
    if block.fenced {
        return None;
    }
    // Unfenced prose may still embed a JSON array or object.
    let start = block.text.find(['[', '{'])?;
    let close = if block.text[start..].starts_with('[') {
        ']'
    } else {
        '}'
    };
    let end = block.text.rfind(close)?;
    if end <= start {
        return None;
    }
    serde_json::from_str(&block.text[start..=end]).ok()
}

/// Every JSON object found in the response's blocks, including ones that are
/// not valid actions. Used by the function-call success metric.
pub fn raw_objects(text: &str) -> Vec<Map<String, Value>> {
    let mut out = Vec::new();
    for block in extract_blocks(text) {
        match decode_block(&block) {
            Some(Value::Object(m)) => out.push(m),
            Some(Value::Array(items)) => out.extend(items.into_iter().filter_map(|v| match v {
                Value::Object(m) => Some(m),
                _ => None,
            })),
            _ => {}
        }
    }
    out
}

/// Extracts all function calls from a model response. Never fails: anything
/// that cannot become an action is reported as a [`ParseFault`].
///
/// A block yields actions only if every object in it is a valid action;
/// otherwise the whole block becomes exactly one fault.
pub fn parse_response(text: &str) -> ParseOutcome {
    let blocks = extract_blocks(text);
    let mut outcome = ParseOutcome {
        block_count: blocks.len(),
        ..Default::default()
    };
    for (index, block) in blocks.iter().enumerate() {
        let fault = |missing_keys: Vec<String>, reason: String| ParseFault {
            block_index: index,
            raw_text: block.text.to_string(),
            missing_keys,
            reason,
        };
        if block.text.is_empty() {
            outcome.faults.push(fault(Vec::new(), "empty block".into()));
            continue;
        }
        let Some(value) = decode_block(block) else {
            let reason = if block.fenced {
                "block is not valid JSON"
            } else {
                "no parseable block"
            };
            outcome.faults.push(fault(Vec::new(), reason.into()));
            continue;
        };
        let items = match value {
            Value::Array(items) => items,
            obj @ Value::Object(_) => vec![obj],
            _ => {
                let reason = "block is neither an object nor an array of objects";
                outcome.faults.push(fault(Vec::new(), reason.into()));
                continue;
            }
        };
        if items.is_empty() {
            outcome
                .faults
                .push(fault(Vec::new(), "empty action list".into()));
            continue;
        }

        let multi = items.len() > 1;
        let mut actions = Vec::new();
        let mut notes = Vec::new();
        let mut missing: Vec<String> = Vec::new();
        let mut reasons = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let result = match item {
                Value::Object(obj) => parse_action_object(obj),
                _ => Err(ObjectError::invalid("element is not an object")),
            };
            match result {
                Ok((action, mut n)) => {
                    actions.push(action);
                    notes.append(&mut n);
                }
                Err(e) => {
                    for k in e.missing_keys {
                        if !missing.contains(&k) {
                            missing.push(k);
                        }
                    }
                    reasons.push(if multi {
                        format!("object {i}: {}", e.reason)
                    } else {
                        e.reason
                    });
                }
            }
        }
        if reasons.is_empty() {
            outcome.actions.extend(actions);
            outcome.notes.extend(notes);
        } else {
            outcome.faults.push(fault(missing, reasons.join("; ")));
        }
    }
    outcome
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    obj.get(key).filter(|v| !v.is_null())
}

fn get_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<Option<&'a str>, ObjectError> {
    match get(obj, key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(ObjectError::invalid(format!("{key} must be a string"))),
    }
}

/// Non-negative integer; reals are truncated toward zero with a note.
fn as_count(value: &Value, key: &str, notes: &mut Vec<String>) -> Result<u32, ObjectError> {
    let Value::Number(n) = value else {
        return Err(ObjectError::invalid(format!("{key} must be an integer")));
    };
    if let Some(u) = n.as_u64() {
        return u32::try_from(u).map_err(|_| ObjectError::invalid(format!("{key} is too large")));
    }
    if n.is_i64() {
        return Err(ObjectError::invalid(format!("{key} must not be negative")));
    }
    let f = n.as_f64().unwrap_or(f64::NAN);
    let t = f.trunc();
    if !(0.0..=u32::MAX as f64).contains(&t) {
        return Err(ObjectError::invalid(format!("{key} is out of range")));
    }
    notes.push(format!("{key} {f} truncated to {t}"));
    Ok(t as u32)
}

fn position(
    obj: &Map<String, Value>,
    key: &str,
    notes: &mut Vec<String>,
) -> Result<MousePosition, ObjectError> {
    let Some(v) = get(obj, key) else {
        return Err(ObjectError::missing(&[key]));
    };
    let Value::Object(p) = v else {
        return Err(ObjectError::invalid(format!("{key} must be an object")));
    };
    let wk = format!("{key}.width");
    let hk = format!("{key}.height");
    let (w, h) = (get(p, "width"), get(p, "height"));
    let mut missing = Vec::new();
    if w.is_none() {
        missing.push(wk.as_str());
    }
    if h.is_none() {
        missing.push(hk.as_str());
    }
    if !missing.is_empty() {
        return Err(ObjectError::missing(&missing));
    }
    Ok(MousePosition {
        width: as_count(w.unwrap(), &wk, notes)?,
        height: as_count(h.unwrap(), &hk, notes)?,
    })
}

fn button(obj: &Map<String, Value>) -> Result<Option<MouseButton>, ObjectError> {
    match get_str(obj, "mouse_button")? {
        None => Ok(None),
        Some(s) => MouseButton::from_wire(s)
            .map(Some)
            .ok_or_else(|| ObjectError::invalid(format!("unknown mouse_button {s:?}"))),
    }
}

fn require_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, ObjectError> {
    get_str(obj, key)?.ok_or_else(|| ObjectError::missing(&[key]))
}

/// Converts one JSON object into an action, returning any coercion notes.
pub fn parse_action_object(obj: &Map<String, Value>) -> Result<(Action, Vec<String>), ObjectError> {
    let mut notes = Vec::new();
    let action_type = require_str(obj, "action_type")?;
    let kind = ActionKind::from_wire(action_type)
        .ok_or_else(|| ObjectError::invalid(format!("unknown action_type {action_type:?}")))?;
    let action = match kind {
        ActionKind::Mouse => {
            let t = require_str(obj, "mouse_action_type")?;
            let t = MouseActionType::from_wire(t)
                .ok_or_else(|| ObjectError::invalid(format!("unknown mouse_action_type {t:?}")))?;
            match t {
                MouseActionType::Move => Action::MouseMove {
                    position: position(obj, "mouse_position", &mut notes)?,
                },
                MouseActionType::Click | MouseActionType::DoubleClick => {
                    let b = button(obj)?;
                    let (button, position) = match (b, position(obj, "mouse_position", &mut notes))
                    {
                        (Some(b), Ok(p)) => (b, p),
                        (None, Ok(_)) => return Err(ObjectError::missing(&["mouse_button"])),
                        (None, Err(e)) if !e.missing_keys.is_empty() => {
                            let mut keys = vec!["mouse_button"];
                            keys.extend(e.missing_keys.iter().map(String::as_str));
                            return Err(ObjectError::missing(&keys));
                        }
                        (_, Err(e)) => return Err(e),
                    };
                    if t == MouseActionType::Click {
                        Action::MouseClick { button, position }
                    } else {
                        Action::MouseDoubleClick { button, position }
                    }
                }
                MouseActionType::ScrollUp | MouseActionType::ScrollDown => {
                    let Some(v) = get(obj, "scroll_repeat") else {
                        return Err(ObjectError::missing(&["scroll_repeat"]));
                    };
                    let repeat = as_count(v, "scroll_repeat", &mut notes)?;
                    if t == MouseActionType::ScrollUp {
                        Action::MouseScrollUp { repeat }
                    } else {
                        Action::MouseScrollDown { repeat }
                    }
                }
                MouseActionType::Drag => {
                    let end_position = position(obj, "mouse_position", &mut notes)?;
                    Action::MouseDrag {
                        button: button(obj)?.unwrap_or(MouseButton::Left),
                        end_position,
                    }
                }
            }
        }
        ActionKind::Keyboard => match require_str(obj, "keyboard_action_type")? {
            "press" => Action::KeyboardPress {
                key: require_str(obj, "keyboard_key")?.to_string(),
            },
            "text" => Action::KeyboardText {
                text: require_str(obj, "keyboard_text")?.to_string(),
            },
            other => {
                return Err(ObjectError::invalid(format!(
                    "unknown keyboard_action_type {other:?}"
                )))
            }
        },
        ActionKind::Wait => match get(obj, "wait_time") {
            None => return Err(ObjectError::missing(&["wait_time"])),
            Some(Value::Number(n)) => Action::Wait {
                seconds: n.as_f64().unwrap_or(f64::NAN),
            },
            Some(_) => return Err(ObjectError::invalid("wait_time must be a number")),
        },
        ActionKind::Plan => Action::Plan {
            element: require_str(obj, "element")?.to_string(),
        },
        ActionKind::Evaluate => {
            let s = require_str(obj, "situation")?;
            let situation = Situation::from_wire(s)
                .ok_or_else(|| ObjectError::invalid(format!("unknown situation {s:?}")))?;
            Action::Evaluate {
                situation,
                advice: get_str(obj, "advice")?.map(str::to_string),
            }
        }
    };
    Ok((action, notes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_click_from_prose_and_fence() {
        let text = "My plan is to click the Start button, so my action will be:\n```json \n[\n    {\"action_type\":\"MouseAction\",\"mouse_action_type\":\"click\",\"mouse_button\":\"left\",\"mouse_position\":{\"width\":10,\"height\":760} }\n]\n```";
        let out = parse_response(text);
        assert!(out.faults.is_empty(), "{:?}", out.faults);
        assert_eq!(
            out.actions,
            vec![Action::MouseClick {
                button: MouseButton::Left,
                position: MousePosition::new(10, 760)
            }]
        );
    }

    #[test]
    fn prose_only_is_one_fault() {
        let out = parse_response("I cannot help with that.");
        assert!(out.actions.is_empty());
        assert_eq!(out.faults.len(), 1);
        assert_eq!(out.faults[0].reason, "no parseable block");
    }

    #[test]
    fn missing_position_is_reported() {
        let out = parse_response(
            r#"```json [{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left"}] ```"#,
        );
        assert!(out.actions.is_empty());
        assert_eq!(out.faults.len(), 1);
        assert_eq!(out.faults[0].missing_keys, vec!["mouse_position"]);
    }

    #[test]
    fn inline_reflecting_block() {
        let out = parse_response(
            r#"```json  {"action_type":"EvaluateSubTaskAction", "situation": "sub_task_success"} ```"#,
        );
        assert_eq!(
            out.actions,
            vec![Action::Evaluate {
                situation: Situation::SubTaskSuccess,
                advice: None
            }]
        );
    }

    #[test]
    fn real_coordinates_are_truncated_with_note() {
        let out = parse_response(
            r#"```json {"action_type":"MouseAction","mouse_action_type":"move","mouse_position":{"width":10.9,"height":3}} ```"#,
        );
        assert_eq!(
            out.actions,
            vec![Action::MouseMove {
                position: MousePosition::new(10, 3)
            }]
        );
        assert_eq!(out.notes.len(), 1);
        assert!(out.faults.is_empty());
    }

    #[test]
    fn duplicate_keys_last_wins() {
        let out = parse_response(
            r#"```json {"action_type":"KeyboardAction","keyboard_action_type":"text","keyboard_text":"a","keyboard_text":"b"} ```"#,
        );
        assert_eq!(out.actions, vec![Action::KeyboardText { text: "b".into() }]);
    }

    #[test]
    fn mixed_block_is_one_fault() {
        let out = parse_response(
            r#"```json [{"action_type":"WaitAction","wait_time":1},{"action_type":"PlanAction"}] ```"#,
        );
        assert!(out.actions.is_empty());
        assert_eq!(out.faults.len(), 1);
        assert_eq!(out.faults[0].missing_keys, vec!["element"]);
        assert!(out.faults[0].reason.starts_with("object 1:"));
    }

    #[test]
    fn multiple_blocks_keep_document_order() {
        let text = "first\n```json\n{\"action_type\":\"PlanAction\",\"element\":\"a\"}\n```\nthen\n```\n{\"action_type\":\"PlanAction\",\"element\":\"b\"}\n```";
        let out = parse_response(text);
        assert_eq!(out.block_count, 2);
        let elems: Vec<_> = out
            .actions
            .iter()
            .map(|a| match a {
                Action::Plan { element } => element.as_str(),
                _ => "",
            })
            .collect();
        assert_eq!(elems, ["a", "b"]);
    }

    #[test]
    fn unfenced_json_is_accepted() {
        let out = parse_response(r#"Sure: {"action_type":"WaitAction","wait_time":0.5} done"#);
        assert_eq!(out.actions, vec![Action::Wait { seconds: 0.5 }]);
    }

    #[test]
    fn drag_without_button_defaults_to_left() {
        let out = parse_response(
            r#"{"action_type":"MouseAction","mouse_action_type":"drag","mouse_position":{"width":5,"height":6}}"#,
        );
        assert_eq!(
            out.actions,
            vec![Action::MouseDrag {
                button: MouseButton::Left,
                end_position: MousePosition::new(5, 6)
            }]
        );
    }

    #[test]
    fn unknown_action_type_is_a_fault() {
        let out = parse_response(r#"```json {"action_type":"TeleportAction"} ```"#);
        assert_eq!(out.faults.len(), 1);
        assert!(out.faults[0].missing_keys.is_empty());
        assert!(out.faults[0].reason.contains("unknown action_type"));
    }
}
