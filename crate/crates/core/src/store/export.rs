use std::collections::BTreeMap;

use serde::Serialize;

use super::read::LoadedStep;
use super::writer::step_indices;
use super::{read_json, step_dir_name, SessionManifest, Store, StoreError, MANIFEST, STEPS_DIR};
use crate::action::{Action, ActionKind};
use crate::gateway::PhaseTag;

/// A prompt with the original and the corrected response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreferencePair {
    pub session: String,
    pub step: u32,
    pub phase: PhaseTag,
    pub prompt: String,
    pub rejected: String,
    pub chosen: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExportItem {
    Pair(PreferencePair),
    Skipped {
        session: String,
        step: Option<u32>,
        reason: String,
    },
}

/// Every step whose golden response differs from the original, in session
/// and step order. Unreadable sessions and steps are reported, not fatal.
pub fn export_pairs(store: &Store) -> Result<Vec<ExportItem>, StoreError> {
    let mut out = Vec::new();
    for id in store.session_ids()? {
        let dir = store.session_dir(&id);
        let indices = match step_indices(&dir) {
            Ok(i) => i,
            Err(e) => {
                out.push(ExportItem::Skipped {
                    session: id,
                    step: None,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        for i in indices {
            match LoadedStep::load(dir.join(STEPS_DIR).join(step_dir_name(i))) {
                Ok(step) => match &step.golden {
                    Some(g) if *g != step.response => out.push(ExportItem::Pair(PreferencePair {
                        session: id.clone(),
                        step: i,
                        phase: step.meta.phase,
                        chosen: g.clone(),
                        rejected: step.response,
                        prompt: step.prompt,
                    })),
                    _ => {}
                },
                Err(e) => out.push(ExportItem::Skipped {
                    session: id.clone(),
                    step: Some(i),
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(out)
}

/// Summary of a sample of integers.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Distribution {
    pub count: usize,
    pub mean: Option<f64>,
    pub min: Option<usize>,
    pub max: Option<usize>,
    pub histogram: BTreeMap<usize, usize>,
}

impl Distribution {
    pub fn from_samples(samples: &[usize]) -> Self {
        let mut histogram = BTreeMap::new();
        for &s in samples {
            *histogram.entry(s).or_insert(0) += 1;
        }
        Self {
            count: samples.len(),
            mean: (!samples.is_empty())
                .then(|| samples.iter().sum::<usize>() as f64 / samples.len() as f64),
            min: samples.iter().copied().min(),
            max: samples.iter().copied().max(),
            histogram,
        }
    }
}

/// Dataset statistics. Text lengths are whitespace-separated word counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetStats {
    pub sessions: usize,
    pub steps: usize,
    pub steps_by_phase: BTreeMap<String, usize>,
    /// Actions in the effective responses, by label such as `mouse.click`.
    pub action_counts: BTreeMap<String, usize>,
    /// Plan actions per planning step that produced a plan.
    pub plan_length: Distribution,
    /// Device actions per subtask, summed over its retries.
    pub actions_per_subtask: Distribution,
    pub sessions_per_theme: BTreeMap<String, usize>,
    pub task_prompt_words: Distribution,
    pub response_words: Distribution,
    pub skipped: Vec<String>,
}

/// Statistics label of an action.
pub fn action_label(a: &Action) -> String {
    match a {
        Action::KeyboardPress { .. } => "keyboard.press".into(),
        Action::KeyboardText { .. } => "keyboard.text".into(),
        _ => match a.mouse_action_type() {
            Some(t) => format!("mouse.{}", t.as_str()),
            None => match a.kind() {
                ActionKind::Wait => "wait".into(),
                ActionKind::Plan => "plan".into(),
                _ => "evaluate".into(),
            },
        },
    }
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Walks every session under the store root.
pub fn dataset_stats(store: &Store) -> Result<DatasetStats, StoreError> {
    let mut st = DatasetStats::default();
    let mut plan_lengths = Vec::new();
    let mut per_subtask = Vec::new();
    let mut prompt_words = Vec::new();
    let mut response_words = Vec::new();
    for id in store.session_ids()? {
        let dir = store.session_dir(&id);
        let manifest: SessionManifest = match read_json(&dir.join(MANIFEST)) {
            Ok(m) => m,
            Err(e) => {
                st.skipped.push(format!("{id}: {e}"));
                continue;
            }
        };
        st.sessions += 1;
        *st.sessions_per_theme
            .entry(manifest.theme.clone().unwrap_or_else(|| "untagged".into()))
            .or_insert(0) += 1;
        prompt_words.push(words(&manifest.task_prompt));

        // (plan generation, subtask) -> device actions
        let mut subtasks: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut generation = 0usize;
        for i in step_indices(&dir)? {
            let step = match LoadedStep::load(dir.join(STEPS_DIR).join(step_dir_name(i))) {
                Ok(s) => s,
                Err(e) => {
                    st.skipped.push(format!("{id}/{}: {e}", step_dir_name(i)));
                    continue;
                }
            };
            st.steps += 1;
            *st.steps_by_phase
                .entry(step.meta.phase.as_str().to_string())
                .or_insert(0) += 1;
            response_words.push(words(step.effective_response()));
            for g in &step.actions {
                *st.action_counts.entry(action_label(&g.action)).or_insert(0) += 1;
            }
            match step.meta.phase {
                PhaseTag::Planning => {
                    let n = step
                        .actions
                        .iter()
                        .filter(|g| g.action.kind() == ActionKind::Plan)
                        .count();
                    if n > 0 {
                        plan_lengths.push(n);
                        generation += 1;
                    }
                }
                PhaseTag::Acting => {
                    let n = step
                        .actions
                        .iter()
                        .filter(|g| g.action.is_device_action())
                        .count();
                    let key = (generation, step.meta.subtask.unwrap_or(0));
                    *subtasks.entry(key).or_insert(0) += n;
                }
                PhaseTag::Reflecting => {}
            }
        }
        per_subtask.extend(subtasks.into_values());
    }
    st.plan_length = Distribution::from_samples(&plan_lengths);
    st.actions_per_subtask = Distribution::from_samples(&per_subtask);
    st.task_prompt_words = Distribution::from_samples(&prompt_words);
    st.response_words = Distribution::from_samples(&response_words);
    Ok(st)
}
