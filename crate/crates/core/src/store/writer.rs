use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde_json::Value;

use super::read::StepMeta;
use super::{
    read_json, step_dir_name, unix_ms, write_atomic, NewSession, SessionManifest, StoreError,
    MANIFEST, REQUEST_LOG, STEPS_DIR,
};
use crate::pipeline::{SessionState, StepRecord, StepSink};
use crate::score::{BBox, GoldAction};

/// Where a simulated crash interrupts a step write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// After this many step files have been written to the temporary directory.
    MidTempWrite(usize),
    /// After all files are written, before the rename.
    BeforeRename,
    /// After the rename, before the manifest is updated.
    AfterRename,
}

/// Appends steps to one session directory.
#[derive(Debug)]
pub struct SessionWriter {
    dir: PathBuf,
    manifest: SessionManifest,
    fault: Option<FaultPoint>,
}

fn is_step_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_digit())
}

/// Indices of complete step directories, sorted.
pub(crate) fn step_indices(dir: &Path) -> Result<Vec<u32>, StoreError> {
    let steps = dir.join(STEPS_DIR);
    let mut out = Vec::new();
    if !steps.is_dir() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(steps)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if is_step_name(&name) {
            if let Ok(i) = name.parse() {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn actions_json(record: &StepRecord) -> Vec<Value> {
    record
        .outcome
        .actions
        .iter()
        .map(|a| GoldAction::new(a.clone()).to_json())
        .collect()
}

fn pretty(v: &impl serde::Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

impl SessionWriter {
    pub(super) fn create(
        dir: PathBuf,
        id: String,
        new: NewSession,
        now: SystemTime,
    ) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir.join(STEPS_DIR))?;
        let manifest = SessionManifest {
            id,
            task_prompt: new.task_prompt,
            language: new.language,
            os: new.os,
            theme: new.theme,
            screen_width: new.screen.0,
            screen_height: new.screen.1,
            mode: new.mode,
            created_at_ms: unix_ms(now),
            finished_at_ms: None,
            final_phase: None,
            failure: None,
            step_count: 0,
        };
        let w = Self {
            dir,
            manifest,
            fault: None,
        };
        w.write_manifest()?;
        Ok(w)
    }

    pub(super) fn reopen(dir: PathBuf) -> Result<Self, StoreError> {
        let mut manifest: SessionManifest = read_json(&dir.join(MANIFEST))?;
        let steps = dir.join(STEPS_DIR);
        std::fs::create_dir_all(&steps)?;
        for entry in std::fs::read_dir(&steps)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with(".tmp-") {
                std::fs::remove_dir_all(entry.path())?;
            }
        }
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') && name.ends_with(".tmp") {
                std::fs::remove_file(entry.path())?;
            }
        }
        let count = step_indices(&dir)?.len() as u32;
        let w = if count != manifest.step_count {
            manifest.step_count = count;
            let w = Self {
                dir,
                manifest,
                fault: None,
            };
            w.write_manifest()?;
            w
        } else {
            Self {
                dir,
                manifest,
                fault: None,
            }
        };
        Ok(w)
    }

    pub fn id(&self) -> &str {
        &self.manifest.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &SessionManifest {
        &self.manifest
    }

    pub fn request_log_path(&self) -> PathBuf {
        self.dir.join(REQUEST_LOG)
    }

    /// Makes the next step write stop at `point` with [`StoreError::InjectedFault`].
    pub fn inject_fault(&mut self, point: Option<FaultPoint>) {
        self.fault = point;
    }

    fn check(&mut self, point: FaultPoint) -> Result<(), StoreError> {
        if self.fault == Some(point) {
            self.fault = None;
            return Err(StoreError::InjectedFault(point));
        }
        Ok(())
    }

    fn write_manifest(&self) -> Result<(), StoreError> {
        write_atomic(&self.dir.join(MANIFEST), &pretty(&self.manifest))
    }

    fn step_files(record: &StepRecord) -> Vec<(&'static str, Vec<u8>)> {
        let mut files = vec![
            ("before.png", record.before.to_png()),
            ("after.png", record.after.to_png()),
            ("prompt.txt", record.prompt.as_bytes().to_vec()),
            ("response.txt", record.response.as_bytes().to_vec()),
        ];
        if let Some(g) = &record.golden {
            files.push(("golden.txt", g.as_bytes().to_vec()));
        }
        files.push(("actions.json", pretty(&actions_json(record))));
        files.push(("eval.json", pretty(&record.evaluation)));
        files.push(("meta.json", pretty(&StepMeta::from_record(record))));
        files
    }

    /// Writes one step. The step directory appears complete or not at all.
    pub fn save_step(&mut self, record: &StepRecord) -> Result<PathBuf, StoreError> {
        let steps = self.dir.join(STEPS_DIR);
        let target = steps.join(step_dir_name(record.index));
        if target.exists() {
            return Err(StoreError::ConflictingStepId(record.index));
        }
        let tmp = steps.join(format!(
            ".tmp-{}-{:08x}",
            step_dir_name(record.index),
            rand::random::<u32>()
        ));
        std::fs::create_dir(&tmp)?;
        for (n, (name, bytes)) in Self::step_files(record).into_iter().enumerate() {
            self.check(FaultPoint::MidTempWrite(n))?;
            let mut f = std::fs::File::create(tmp.join(name))?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        self.check(FaultPoint::BeforeRename)?;
        std::fs::rename(&tmp, &target)?;
        self.check(FaultPoint::AfterRename)?;
        self.manifest.step_count = step_indices(&self.dir)?.len() as u32;
        self.write_manifest()?;
        Ok(target)
    }

    /// Records the final phase and failure reason of the session.
    pub fn finish(&mut self, state: &SessionState) -> Result<(), StoreError> {
        self.manifest.finished_at_ms = Some(unix_ms(SystemTime::now()));
        self.manifest.final_phase = Some(state.phase);
        self.manifest.failure = state.failure.clone();
        self.write_manifest()
    }

    /// Attaches a bounding box to action `action` of step `step`.
    pub fn annotate_bbox(&self, step: u32, action: usize, bbox: BBox) -> Result<(), StoreError> {
        annotate_bbox(&self.dir, step, action, bbox)
    }
}

/// Attaches a bounding box to one action of a saved step, rewriting
/// `actions.json` atomically. The box must be ordered, lie on the screen and
/// belong to a mouse action with a position.
pub fn annotate_bbox(
    session_dir: &Path,
    step: u32,
    action: usize,
    bbox: BBox,
) -> Result<(), StoreError> {
    let manifest: SessionManifest = read_json(&session_dir.join(MANIFEST))?;
    let path = session_dir
        .join(STEPS_DIR)
        .join(step_dir_name(step))
        .join("actions.json");
    if !path.is_file() {
        return Err(StoreError::UnknownStep(step));
    }
    let mut actions: Vec<Value> = read_json(&path)?;
    let obj = actions
        .get_mut(action)
        .and_then(Value::as_object_mut)
        .ok_or_else(|| StoreError::InvalidAnnotation(format!("no action {action}")))?;
    if !bbox.is_valid() {
        return Err(StoreError::InvalidAnnotation(
            "bbox corners are out of order".into(),
        ));
    }
    if bbox.right >= manifest.screen_width || bbox.bottom >= manifest.screen_height {
        return Err(StoreError::InvalidAnnotation(format!(
            "bbox exceeds the {}x{} screen",
            manifest.screen_width, manifest.screen_height
        )));
    }
    obj.insert(
        "bbox".into(),
        serde_json::to_value(bbox).expect("bbox serializes"),
    );
    GoldAction::from_json(obj).map_err(|e| StoreError::InvalidAnnotation(e.reason))?;
    write_atomic(&path, &pretty(&actions))
}

impl StepSink for SessionWriter {
    fn persist(&mut self, _state: &SessionState, record: &StepRecord) -> Result<(), String> {
        self.save_step(record)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }

    fn finish(&mut self, state: &SessionState) -> Result<(), String> {
        SessionWriter::finish(self, state).map_err(|e| e.to_string())
    }
}
