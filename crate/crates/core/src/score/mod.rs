//! CC-Score: per-action similarity, order-preserving alignment, the
//! normalized sequence score and the fine-grained report.

mod align;
mod bleu;
mod eval;

mod function_call;
mod report;
mod similarity;

pub use align::{best_alignment, Alignment};
pub use bleu::{bleu1, chord_tokens, text_tokens};
pub use eval::{evaluate_stores, DirEval};
pub use function_call::{
    expected_categories, function_call_success, CategoryCounts, FunctionCallReport,
};
pub use report::{fine_grained_report, FunctionCallRow, ReportBuilder, ScoreReport, StepScore};
pub use similarity::{action_similarity, text_similarity, BBox, GoldAction};

use crate::action::Action;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("gold action sequence is empty")]
    EmptyGold,
}

/// Rows are gold actions, columns are predictions.
pub fn similarity_matrix(gold: &[GoldAction], pred: &[Action]) -> Vec<Vec<f64>> {
    gold.iter()
        .map(|g| pred.iter().map(|p| action_similarity(g, p)).collect())
        .collect()
}

/// Total similarity of the best order-preserving alignment, divided by the
/// number of gold actions.
pub fn cc_score(gold: &[GoldAction], pred: &[Action]) -> Result<f64, ScoreError> {
    if gold.is_empty() {
        return Err(ScoreError::EmptyGold);
    }
    let al = best_alignment(&similarity_matrix(gold, pred));
    Ok(al.total / gold.len() as f64)
}
