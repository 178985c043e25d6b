use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::align::{best_alignment, Alignment};
use super::function_call::FunctionCallReport;
use super::similarity::{text_similarity, GoldAction};
use super::similarity_matrix;
use crate::action::{Action, ActionKind, Category};

#[derive(Debug, Default, Clone)]
struct Confusion(BTreeMap<&'static str, [usize; 3]>);

impl Confusion {
    fn tally(&mut self, gold: Option<&'static str>, pred: Option<&'static str>) {
        match (gold, pred) {
            (Some(g), Some(p)) if g == p => self.0.entry(g).or_default()[0] += 1,
            _ => {
                if let Some(p) = pred {
                    self.0.entry(p).or_default()[1] += 1;
                }
                if let Some(g) = gold {
                    self.0.entry(g).or_default()[2] += 1;
                }
            }
        }
    }

    fn macro_f1(&self) -> Option<f64> {
        if self.0.is_empty() {
            return None;
        }
        let sum: f64 = self
            .0
            .values()
            .map(|[tp, fp, fnn]| 2.0 * *tp as f64 / (2 * tp + fp + fnn) as f64)
            .sum();
        Some(sum / self.0.len() as f64)
    }
}

#[derive(Debug, Default, Clone)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Score of one gold/prediction step pair.
#[derive(Debug, Clone, Serialize)]
pub struct StepScore {
    pub label: String,
    pub gold_len: usize,
    pub pred_len: usize,
    pub cc_score: Option<f64>,
    /// `(gold index, pred index, similarity)` for every matched pair.
    pub pairs: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionCallRow {
    pub category: &'static str,
    pub expected: usize,
    pub succeeded: usize,
    pub proportion: Option<f64>,
}

/// CC-Score with its fine-grained columns. Columns without eligible pairs
/// are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub cc_score: Option<f64>,
    pub plan_bleu: Option<f64>,
    pub action_type_f1: Option<f64>,
    pub mouse_action_type_f1: Option<f64>,
    pub mouse_button_f1: Option<f64>,
    pub mouse_position_accuracy: Option<f64>,
    pub keyboard_bleu: Option<f64>,
    pub reflecting_situation_f1: Option<f64>,
    pub matched_pairs: usize,
    pub function_call: Vec<FunctionCallRow>,
    pub steps: Vec<StepScore>,
}

fn kind_label(a: &Action) -> Option<&'static str> {
    match a.kind() {
        ActionKind::Evaluate => None,
        k => Some(k.wire_name()),
    }
}

fn situation_label(a: &Action) -> Option<&'static str> {
    match a {
        Action::Evaluate { situation, .. } => Some(situation.as_str()),
        _ => None,
    }
}

fn is_mouse(a: &Action) -> bool {
    a.kind() == ActionKind::Mouse
}

/// Accumulates steps into a [`ScoreReport`].
#[derive(Debug, Default, Clone)]
pub struct ReportBuilder {
    steps: Vec<StepScore>,
    cc: Mean,
    plan: Mean,
    keyboard: Mean,
    position: Mean,
    action_type: Confusion,
    mouse_type: Confusion,
    mouse_button: Confusion,
    situation: Confusion,
    matched: usize,
    function_call: FunctionCallReport,
}

impl ReportBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Aligns one step and folds it into every column. Steps with no gold
    /// actions contribute their predictions as false positives only.
    pub fn add_step(
        &mut self,
        label: impl Into<String>,
        gold: &[GoldAction],
        pred: &[Action],
    ) -> &StepScore {
        let s = similarity_matrix(gold, pred);
        let Alignment { pairs, total } = best_alignment(&s);
        let cc_score = (!gold.is_empty()).then(|| total / gold.len() as f64);
        if let Some(c) = cc_score {
            self.cc.push(c);
        }
        let mut gold_hit = vec![false; gold.len()];
        let mut pred_hit = vec![false; pred.len()];
        for &(i, j) in &pairs {
            gold_hit[i] = true;
            pred_hit[j] = true;
            self.add_pair(&gold[i], &pred[j]);
        }
        self.matched += pairs.len();
        for (g, _) in gold.iter().zip(&gold_hit).filter(|(_, hit)| !**hit) {
            let g = &g.action;
            self.action_type.tally(kind_label(g), None);
            if is_mouse(g) {
                self.mouse_type
                    .tally(g.mouse_action_type().map(|t| t.as_str()), None);
                self.mouse_button
                    .tally(g.mouse_button().map(|b| b.as_str()), None);
            }
            self.situation.tally(situation_label(g), None);
        }
        for (p, _) in pred.iter().zip(&pred_hit).filter(|(_, hit)| !**hit) {
            self.action_type.tally(None, kind_label(p));
            if is_mouse(p) {
                self.mouse_type
                    .tally(None, p.mouse_action_type().map(|t| t.as_str()));
                self.mouse_button
                    .tally(None, p.mouse_button().map(|b| b.as_str()));
            }
            self.situation.tally(None, situation_label(p));
        }
        self.steps.push(StepScore {
            label: label.into(),
            gold_len: gold.len(),
            pred_len: pred.len(),
            cc_score,
            pairs: pairs.iter().map(|&(i, j)| (i, j, s[i][j])).collect(),
        });
        self.steps.last().unwrap()
    }

    fn add_pair(&mut self, gold: &GoldAction, pred: &Action) {
        let g = &gold.action;
        self.action_type.tally(kind_label(g), kind_label(pred));
        self.situation
            .tally(situation_label(g), situation_label(pred));
        match g.kind() {
            ActionKind::Mouse => {
                self.mouse_type.tally(
                    g.mouse_action_type().map(|t| t.as_str()),
                    pred.mouse_action_type().map(|t| t.as_str()),
                );
                self.mouse_button.tally(
                    g.mouse_button().map(|b| b.as_str()),
                    pred.mouse_button().map(|b| b.as_str()),
                );
                if g.mouse_position().is_some() {
                    self.position
                        .push(f64::from(gold.position_hit(pred.mouse_position())));
                }
            }
            ActionKind::Keyboard => self.keyboard.push(text_similarity(g, pred)),
            ActionKind::Plan => self.plan.push(text_similarity(g, pred)),
            _ => {}
        }
    }

    /// Records the raw response of a step for the function-call columns.
    pub fn add_response(&mut self, gold: &[Action], response: &str) {
        self.function_call.add_step(gold, response);
    }

    pub fn finish(self) -> ScoreReport {
        let fc = &self.function_call;
        ScoreReport {
            cc_score: self.cc.get(),
            plan_bleu: self.plan.get(),
            action_type_f1: self.action_type.macro_f1(),
            mouse_action_type_f1: self.mouse_type.macro_f1(),
            mouse_button_f1: self.mouse_button.macro_f1(),
            mouse_position_accuracy: self.position.get(),
            keyboard_bleu: self.keyboard.get(),
            reflecting_situation_f1: self.situation.macro_f1(),
            matched_pairs: self.matched,
            function_call: Category::ALL
                .iter()
                .enumerate()
                .map(|(k, c)| FunctionCallRow {
                    category: c.name(),
                    expected: fc.expected[k],
                    succeeded: fc.supplied[k],
                    proportion: fc.proportion(*c),
                })
                .collect(),
            steps: self.steps,
        }
    }
}

/// Builds a report from `(gold, prediction)` step pairs.
pub fn fine_grained_report<'a>(
    steps: impl IntoIterator<Item = (&'a [GoldAction], &'a [Action])>,
) -> ScoreReport {
    let mut b = ReportBuilder::new();
    for (k, (g, p)) in steps.into_iter().enumerate() {
        b.add_step(k.to_string(), g, p);
    }
    b.finish()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl ScoreReport {
    /// Columns in display order.
    pub fn columns(&self) -> [(&'static str, Option<f64>); 8] {
        [
            ("cc_score", self.cc_score),
            ("plan_bleu", self.plan_bleu),
            ("action_type_f1", self.action_type_f1),
            ("mouse_action_type_f1", self.mouse_action_type_f1),
            ("mouse_button_f1", self.mouse_button_f1),
            ("mouse_position_accuracy", self.mouse_position_accuracy),
            ("keyboard_bleu", self.keyboard_bleu),
            ("reflecting_situation_f1", self.reflecting_situation_f1),
        ]
    }

    /// Plain-text rendering with per-step alignments.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (name, v) in self.columns() {
            let _ = writeln!(out, "{name:<26}{}", cell(v));
        }
        let _ = writeln!(out, "{:<26}{}", "matched_pairs", self.matched_pairs);
        let _ = writeln!(
            out,
            "\nfunction call        expected  succeeded  proportion"
        );
        for r in &self.function_call {
            let _ = writeln!(
                out,
                "{:<21}{:>8}  {:>9}  {:>10}",
                r.category,
                r.expected,
                r.succeeded,
                cell(r.proportion)
            );
        }
        let _ = writeln!(
            out,
            "\nstep                          gold  pred  cc_score  pairs"
        );
        for s in &self.steps {
            let pairs: Vec<String> = s
                .pairs
                .iter()
                .map(|(i, j, v)| format!("{i}-{j}:{v:.2}"))
                .collect();
            let _ = writeln!(
                out,
                "{:<30}{:>4}  {:>4}  {:>8}  {}",
                s.label,
                s.gold_len,
                s.pred_len,
                cell(s.cc_score),
                pairs.join(" ")
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{MouseButton, MousePosition, Situation};
    use crate::score::BBox;

    fn click(x: u32, y: u32) -> Action {
        Action::MouseClick {
            button: MouseButton::Left,
            position: MousePosition::new(x, y),
        }
    }

    #[test]
    fn all_correct() {
        let gold = vec![
            GoldAction::new(Action::Plan {
                element: "Open browser".into(),
            }),
            GoldAction::with_bbox(click(5, 5), BBox::new(0, 0, 10, 10)),
            GoldAction::new(Action::KeyboardPress {
                key: "Return".into(),
            }),
            GoldAction::new(Action::Evaluate {
                situation: Situation::NeedRetry,
                advice: None,
            }),
        ];
        let pred: Vec<Action> = gold.iter().map(|g| g.action.clone()).collect();
        let r = fine_grained_report([(gold.as_slice(), pred.as_slice())]);
        for (name, v) in r.columns() {
            assert_eq!(v, Some(1.0), "{name}");
        }
        assert_eq!(r.matched_pairs, 4);
    }

    #[test]
    fn types_right_positions_wrong() {
        let gold = vec![
            GoldAction::with_bbox(click(5, 5), BBox::new(0, 0, 10, 10)),
            GoldAction::with_bbox(click(50, 50), BBox::new(40, 40, 60, 60)),
        ];
        let pred = vec![click(500, 5), click(5, 500)];
        let r = fine_grained_report([(gold.as_slice(), pred.as_slice())]);
        assert_eq!(r.mouse_position_accuracy, Some(0.0));
        assert_eq!(r.action_type_f1, Some(1.0));
        assert_eq!(r.cc_score, Some(0.75));
        assert_eq!(r.plan_bleu, None);
        assert_eq!(r.keyboard_bleu, None);
    }

    #[test]
    fn table_renders() {
        let gold = vec![GoldAction::new(click(1, 1))];
        let r = fine_grained_report([(gold.as_slice(), &[][..])]);
        let t = r.to_table();
        assert!(t.contains("cc_score"));
        assert_eq!(r.cc_score, Some(0.0));
        assert_eq!(r.action_type_f1, Some(0.0));
    }
}
