use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::writer::step_indices;
use super::{from_unix_ns, read_json, step_dir_name, unix_ns, SessionManifest, StoreError};
use super::{MANIFEST, STEPS_DIR};
use crate::action::{Action, ParseFault, ParseOutcome};
use crate::env::Screenshot;
use crate::gateway::{PhaseTag, TranscriptStep};
use crate::pipeline::{Evaluation, StepRecord};
use crate::score::GoldAction;

/// Contents of `meta.json`. Times are nanoseconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMeta {
    pub index: u32,
    pub phase: PhaseTag,
    #[serde(default)]
    pub subtask: Option<usize>,
    pub started_at_ns: u64,
    pub finished_at_ns: u64,
    #[serde(default)]
    pub first_event_at_ns: Option<u64>,
    #[serde(default)]
    pub last_event_at_ns: Option<u64>,
    #[serde(default)]
    pub before_captured_at_ns: u64,
    #[serde(default)]
    pub after_captured_at_ns: u64,
    #[serde(default)]
    pub reward: Option<f64>,
    #[serde(default)]
    pub executed: Vec<Action>,
    #[serde(default)]
    pub faults: Vec<ParseFault>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub block_count: usize,
}

impl StepMeta {
    pub fn from_record(r: &StepRecord) -> Self {
        Self {
            index: r.index,
            phase: r.phase,
            subtask: r.subtask,
            started_at_ns: unix_ns(r.started_at),
            finished_at_ns: unix_ns(r.finished_at),
            first_event_at_ns: r.first_event_at.map(unix_ns),
            last_event_at_ns: r.last_event_at.map(unix_ns),
            before_captured_at_ns: unix_ns(r.before.captured_at),
            after_captured_at_ns: unix_ns(r.after.captured_at),
            reward: r.reward,
            executed: r.executed.clone(),
            faults: r.outcome.faults.clone(),
            notes: r.outcome.notes.clone(),
            block_count: r.outcome.block_count,
        }
    }
}

/// One step read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedStep {
    pub dir: PathBuf,
    pub meta: StepMeta,
    pub prompt: String,
    pub response: String,
    pub golden: Option<String>,
    pub actions: Vec<GoldAction>,
    pub evaluation: Option<Evaluation>,
}

fn read_text(path: &Path) -> Result<String, StoreError> {
    Ok(std::fs::read_to_string(path)?)
}

fn corrupt(path: &Path, reason: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

impl LoadedStep {
    pub fn load(dir: PathBuf) -> Result<Self, StoreError> {
        let meta: StepMeta = read_json(&dir.join("meta.json"))?;
        let golden_path = dir.join("golden.txt");
        let golden = if golden_path.is_file() {
            Some(read_text(&golden_path)?)
        } else {
            None
        };
        let actions_path = dir.join("actions.json");
        let raw: Vec<Value> = read_json(&actions_path)?;
        let actions = raw
            .iter()
            .map(|v| {
                let obj = v
                    .as_object()
                    .ok_or_else(|| corrupt(&actions_path, "action is not an object"))?;
                GoldAction::from_json(obj).map_err(|e| corrupt(&actions_path, e.reason))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            prompt: read_text(&dir.join("prompt.txt"))?,
            response: read_text(&dir.join("response.txt"))?,
            golden,
            actions,
            evaluation: read_json(&dir.join("eval.json"))?,
            meta,
            dir,
        })
    }

    pub fn index(&self) -> u32 {
        self.meta.index
    }

    pub fn effective_response(&self) -> &str {
        self.golden.as_deref().unwrap_or(&self.response)
    }

    pub fn before_png(&self) -> Result<Vec<u8>, StoreError> {
        Ok(std::fs::read(self.dir.join("before.png"))?)
    }

    pub fn after_png(&self) -> Result<Vec<u8>, StoreError> {
        Ok(std::fs::read(self.dir.join("after.png"))?)
    }

    /// Rebuilds the in-memory record, decoding both screenshots.
    pub fn to_record(&self) -> Result<StepRecord, StoreError> {
        let shot = |name: &str, at: u64| -> Result<Screenshot, StoreError> {
            let path = self.dir.join(name);
            Screenshot::from_png(&std::fs::read(&path)?, from_unix_ns(at))
                .map_err(|e| corrupt(&path, e.to_string()))
        };
        let m = &self.meta;
        Ok(StepRecord {
            index: m.index,
            phase: m.phase,
            subtask: m.subtask,
            prompt: self.prompt.clone(),
            response: self.response.clone(),
            golden: self.golden.clone(),
            outcome: ParseOutcome {
                actions: self.actions.iter().map(|g| g.action.clone()).collect(),
                faults: m.faults.clone(),
                notes: m.notes.clone(),
                block_count: m.block_count,
            },
            executed: m.executed.clone(),
            before: shot("before.png", m.before_captured_at_ns)?,
            after: shot("after.png", m.after_captured_at_ns)?,
            evaluation: self.evaluation.clone(),
            reward: m.reward,
            started_at: from_unix_ns(m.started_at_ns),
            finished_at: from_unix_ns(m.finished_at_ns),
            first_event_at: m.first_event_at_ns.map(from_unix_ns),
            last_event_at: m.last_event_at_ns.map(from_unix_ns),
        })
    }
}

/// A session read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSession {
    pub dir: PathBuf,
    pub manifest: SessionManifest,
    pub steps: Vec<LoadedStep>,
}

impl LoadedSession {
    pub fn load(dir: PathBuf) -> Result<Self, StoreError> {
        let manifest = read_json(&dir.join(MANIFEST))?;
        let steps = step_indices(&dir)?
            .into_iter()
            .map(|i| LoadedStep::load(dir.join(STEPS_DIR).join(step_dir_name(i))))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            dir,
            manifest,
            steps,
        })
    }

    pub fn step(&self, index: u32) -> Option<&LoadedStep> {
        self.steps.iter().find(|s| s.index() == index)
    }

    /// The effective responses in step order, ready for a scripted replay.
    pub fn transcript(&self) -> Vec<TranscriptStep> {
        self.steps
            .iter()
            .map(|s| TranscriptStep {
                tag: s.meta.phase,
                response: Some(s.effective_response().to_string()),
            })
            .collect()
    }
}
