use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::bleu::{bleu1, chord_tokens, text_tokens};
use crate::action::{parse_action_object, Action, MousePosition, ObjectError};

/// Feasible region for a gold mouse position, edges inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl BBox {
    pub fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.left <= self.right && self.top <= self.bottom
    }

    pub fn contains(&self, p: MousePosition) -> bool {
        (self.left..=self.right).contains(&p.width) && (self.top..=self.bottom).contains(&p.height)
    }
}

/// A labeled action, optionally with a feasible bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldAction {
    pub action: Action,
    pub bbox: Option<BBox>,
}

impl GoldAction {
    pub fn new(action: Action) -> Self {
        Self { action, bbox: None }
    }

    pub fn with_bbox(action: Action, bbox: BBox) -> Self {
        Self {
            action,
            bbox: Some(bbox),
        }
    }

    /// Whether `p` counts as hitting this gold action's position.
    pub fn position_hit(&self, p: Option<MousePosition>) -> bool {
        match (self.action.mouse_position(), p) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(g), Some(p)) => match self.bbox {
                Some(b) => b.contains(p),
                None => g == p,
            },
        }
    }
}

impl GoldAction {
    /// Canonical action object plus an optional `bbox` key.
    pub fn to_json(&self) -> Value {
        let mut v = self.action.to_json();
        if let (Some(b), Value::Object(m)) = (self.bbox, &mut v) {
            m.insert(
                "bbox".into(),
                serde_json::to_value(b).expect("bbox serializes"),
            );
        }
        v
    }

    pub fn from_json(obj: &Map<String, Value>) -> Result<Self, ObjectError> {
        let (action, _) = parse_action_object(obj)?;
        let bbox = match obj.get("bbox") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let b: BBox = serde_json::from_value(v.clone()).map_err(|e| ObjectError {
                    missing_keys: Vec::new(),
                    reason: format!("bad bbox: {e}"),
                })?;
                if !b.is_valid() || action.mouse_position().is_none() {
                    return Err(ObjectError {
                        missing_keys: Vec::new(),
                        reason: "bbox must be ordered and attached to a positioned mouse action"
                            .into(),
                    });
                }
                Some(b)
            }
        };
        Ok(Self { action, bbox })
    }
}

impl From<Action> for GoldAction {
    fn from(action: Action) -> Self {
        Self::new(action)
    }
}

fn tokens(a: &Action) -> Vec<&str> {
    match a {
        Action::KeyboardPress { key } => chord_tokens(key),
        Action::KeyboardText { text } => text_tokens(text),
        Action::Plan { element } => text_tokens(element),
        _ => Vec::new(),
    }
}

/// BLEU-1 between the text payloads of two text-bearing actions. An empty
/// gold payload scores 1 against an empty prediction and 0 otherwise.
pub fn text_similarity(gold: &Action, pred: &Action) -> f64 {
    let (r, h) = (tokens(gold), tokens(pred));
    match bleu1(&r, &h) {
        Ok(b) => b,
        Err(_) => f64::from(h.is_empty()),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Similarity in `[0, 1]` between a gold and a predicted action. Actions of
/// different top-level types score 0.
pub fn action_similarity(gold: &GoldAction, pred: &Action) -> f64 {
    let g = &gold.action;
    if g.kind() != pred.kind() {
        return 0.0;
    }
    match g {
        Action::MouseMove { .. }
        | Action::MouseClick { .. }
        | Action::MouseDoubleClick { .. }
        | Action::MouseScrollUp { .. }
        | Action::MouseScrollDown { .. }
        | Action::MouseDrag { .. } => {
            let kind = f64::from(g.mouse_action_type() == pred.mouse_action_type());
            let button = match g.mouse_button() {
                None => 1.0,
                Some(b) => f64::from(pred.mouse_button() == Some(b)),
            };
            let position = f64::from(gold.position_hit(pred.mouse_position()));
            mean(&[1.0, kind, button, position])
        }
        Action::KeyboardPress { .. } | Action::KeyboardText { .. } | Action::Plan { .. } => {
            mean(&[1.0, text_similarity(g, pred)])
        }
        Action::Evaluate { situation, .. } => {
            let same = matches!(pred, Action::Evaluate { situation: s, .. } if s == situation);
            mean(&[1.0, f64::from(same)])
        }
        Action::Wait { .. } => 1.0,
    }
}
