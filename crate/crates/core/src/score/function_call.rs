use serde::Serialize;

use crate::action::{attribute_keys, raw_objects, Action, Category};

/// Per-category instance counts, indexed like [`Category::ALL`].
pub type CategoryCounts = [usize; 7];

fn idx(c: Category) -> usize {
    Category::ALL.iter().position(|x| *x == c).unwrap()
}

/// Attribute categories a gold action requires a response to supply.
/// Evaluate actions are counted under the reflecting category only.
pub fn expected_categories(gold: &Action) -> Vec<Category> {
    let mut out = Vec::new();
    match gold {
        Action::Plan { .. } => out.extend([Category::Plan, Category::ActionType]),
        Action::Evaluate { .. } => out.push(Category::ReflectingSituation),
        Action::KeyboardPress { .. } | Action::KeyboardText { .. } => {
            out.extend([Category::ActionType, Category::KeyboardKeysOrText])
        }
        Action::Wait { .. } => out.push(Category::ActionType),
        _ => {
            out.extend([Category::ActionType, Category::MouseActionType]);
            if gold.mouse_button().is_some() {
                out.push(Category::MouseButton);
            }
            if gold.mouse_position().is_some() {
                out.push(Category::MousePosition);
            }
        }
    }
    out
}

/// Per-category function-call counts over a set of responses.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FunctionCallReport {
    pub expected: CategoryCounts,
    pub supplied: CategoryCounts,
}

impl FunctionCallReport {
    /// Adds one step: the gold actions and the raw response text. Each
    /// expected instance succeeds if some response object supplies the key,
    /// so a category succeeds `min(expected, supplied)` times per step.
    pub fn add_step(&mut self, gold: &[Action], response: &str) {
        let mut expected = [0usize; 7];
        for g in gold {
            for c in expected_categories(g) {
                expected[idx(c)] += 1;
            }
        }
        let mut supplied = [0usize; 7];
        for obj in raw_objects(response) {
            let keys = attribute_keys(&obj);
            for c in keys.iter() {
                supplied[idx(c)] += 1;
            }
        }
        for k in 0..7 {
            self.expected[k] += expected[k];
            self.supplied[k] += expected[k].min(supplied[k]);
        }
    }

    /// Success proportion for one category, `None` if nothing was expected.
    pub fn proportion(&self, c: Category) -> Option<f64> {
        let k = idx(c);
        (self.expected[k] > 0).then(|| self.supplied[k] as f64 / self.expected[k] as f64)
    }

    pub fn proportions(&self) -> Vec<(Category, Option<f64>)> {
        Category::ALL
            .iter()
            .map(|c| (*c, self.proportion(*c)))
            .collect()
    }
}

/// Table of success proportions for `(gold actions, raw response)` steps.
pub fn function_call_success<'a>(
    steps: impl IntoIterator<Item = (&'a [Action], &'a str)>,
) -> FunctionCallReport {
    let mut r = FunctionCallReport::default();
    for (gold, response) in steps {
        r.add_step(gold, response);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{to_response_text, MouseButton, MousePosition, Situation};

    #[test]
    fn expected_sets() {
        let scroll = Action::MouseScrollDown { repeat: 1 };
        assert_eq!(
            expected_categories(&scroll),
            [Category::ActionType, Category::MouseActionType]
        );
        let mv = Action::MouseMove {
            position: MousePosition::new(1, 1),
        };
        assert_eq!(
            expected_categories(&mv),
            [
                Category::ActionType,
                Category::MouseActionType,
                Category::MousePosition
            ]
        );
        let ev = Action::Evaluate {
            situation: Situation::NeedRetry,
            advice: None,
        };
        assert_eq!(expected_categories(&ev), [Category::ReflectingSituation]);
    }

    #[test]
    fn perfect_and_prose() {
        let gold = vec![
            Action::MouseClick {
                button: MouseButton::Left,
                position: MousePosition::new(3, 4),
            },
            Action::KeyboardText { text: "x".into() },
        ];
        let r = function_call_success([(gold.as_slice(), to_response_text(&gold).as_str())]);
        for (c, p) in r.proportions() {
            match c {
                Category::Plan | Category::ReflectingSituation => assert_eq!(p, None),
                _ => assert_eq!(p, Some(1.0), "{c:?}"),
            }
        }
        let r = function_call_success([(gold.as_slice(), "Sorry, I can't.")]);
        assert_eq!(r.proportion(Category::MousePosition), Some(0.0));
        assert_eq!(r.proportion(Category::ActionType), Some(0.0));
    }
}
