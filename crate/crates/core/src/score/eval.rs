use serde::Serialize;

use super::{ReportBuilder, ScoreReport};
use crate::action::Action;
use crate::store::{Store, StoreError};

/// Result of scoring a prediction store against a gold store.
#[derive(Debug, Clone, Serialize)]
pub struct DirEval {
    pub report: ScoreReport,
    /// Gold sessions with no prediction session of the same id.
    pub missing_sessions: Vec<String>,
    /// `session/step` labels of gold steps with no predicted step.
    pub missing_steps: Vec<String>,
}

/// Pairs steps by session id and step index. A missing prediction scores as
/// an empty action list.
pub fn evaluate_stores(gold: &Store, pred: &Store) -> Result<DirEval, StoreError> {
    let mut b = ReportBuilder::new();
    let mut missing_sessions = Vec::new();
    let mut missing_steps = Vec::new();
    let pred_ids = pred.session_ids()?;
    for id in gold.session_ids()? {
        let g = gold.load_session(&id)?;
        let p = if pred_ids.contains(&id) {
            Some(pred.load_session(&id)?)
        } else {
            missing_sessions.push(id.clone());
            None
        };
        for gs in &g.steps {
            let label = format!("{id}/{:04}", gs.index());
            let ps = p.as_ref().and_then(|p| p.step(gs.index()));
            if ps.is_none() && p.is_some() {
                missing_steps.push(label.clone());
            }
            let pred_actions: Vec<Action> = ps
                .map(|s| s.actions.iter().map(|a| a.action.clone()).collect())
                .unwrap_or_default();
            let gold_plain: Vec<Action> = gs.actions.iter().map(|a| a.action.clone()).collect();
            b.add_step(label, &gs.actions, &pred_actions);
            b.add_response(&gold_plain, ps.map_or("", |s| s.effective_response()));
        }
    }
    Ok(DirEval {
        report: b.finish(),
        missing_sessions,
        missing_steps,
    })
}
