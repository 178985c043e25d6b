//! On-disk session format.
//!
//! ```text
//! <root>/<session id>/manifest.json
//! <root>/<session id>/requests.jsonl
//! <root>/<session id>/steps/0000/{before.png, after.png, prompt.txt, response.txt,
//!                                 golden.txt?, actions.json, eval.json, meta.json}
//! ```
//!
//! Steps are written into a temporary directory and renamed into place, so
//! a step directory is either complete or absent.

mod export;
mod read;
mod writer;

use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::pipeline::{Mode, Phase};

pub use export::{
    action_label, dataset_stats, export_pairs, DatasetStats, Distribution, ExportItem,
    PreferencePair,
};
pub use read::{LoadedSession, LoadedStep, StepMeta};
pub use writer::{annotate_bbox, FaultPoint, SessionWriter};

pub const MANIFEST: &str = "manifest.json";
pub const STEPS_DIR: &str = "steps";
pub const REQUEST_LOG: &str = "requests.jsonl";

/// File names of a step, in write order. `golden.txt` is optional.
pub const STEP_FILES: [&str; 8] = [
    "before.png",
    "after.png",
    "prompt.txt",
    "response.txt",
    "golden.txt",
    "actions.json",
    "eval.json",
    "meta.json",
];

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage is full")]
    StorageFull,
    #[error("step {0} already exists")]
    ConflictingStepId(u32),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown step {0}")]
    UnknownStep(u32),
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("injected fault at {0:?}")]
    InjectedFault(FaultPoint),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::StorageFull {
            StoreError::StorageFull
        } else {
            StoreError::Io(e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OsTag {
    #[default]
    Linux,
    Windows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub id: String,
    pub task_prompt: String,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub os: OsTag,
    /// Task theme tag used by the statistics, e.g. "office" or "web".
    #[serde(default)]
    pub theme: Option<String>,
    pub screen_width: u32,
    pub screen_height: u32,
    pub mode: Mode,
    pub created_at_ms: u64,
    #[serde(default)]
    pub finished_at_ms: Option<u64>,
    #[serde(default)]
    pub final_phase: Option<Phase>,
    #[serde(default)]
    pub failure: Option<String>,
    pub step_count: u32,
}

/// Parameters of a new session.
#[derive(Debug, Clone, PartialEq)]
pub struct NewSession {
    pub task_prompt: String,
    pub language: String,
    pub os: OsTag,
    pub theme: Option<String>,
    pub screen: (u32, u32),
    pub mode: Mode,
}

impl NewSession {
    pub fn new(task_prompt: impl Into<String>, screen: (u32, u32), mode: Mode) -> Self {
        Self {
            task_prompt: task_prompt.into(),
            language: "en".into(),
            os: OsTag::Linux,
            theme: None,
            screen,
            mode,
        }
    }
}

pub(crate) fn unix_ms(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub(crate) fn unix_ns(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos() as u64)
}

pub(crate) fn from_unix_ns(ns: u64) -> SystemTime {
    UNIX_EPOCH + std::time::Duration::from_nanos(ns)
}

pub fn step_dir_name(index: u32) -> String {
    format!("{index:04}")
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// A directory of sessions.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    /// Ids of every session directory, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&self.root)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') && entry.path().join(MANIFEST).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Creates a session with a fresh unique id.
    pub fn create_session(&self, new: NewSession) -> Result<SessionWriter, StoreError> {
        let now = SystemTime::now();
        loop {
            let id = format!("{}-{:06x}", unix_ms(now), rand::random::<u32>() & 0xFF_FFFF);
            match std::fs::create_dir(self.root.join(&id)) {
                Ok(()) => return SessionWriter::create(self.root.join(&id), id, new, now),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Reopens a session for writing, discarding unfinished step writes and
    /// bringing the manifest in line with the step directories.
    pub fn open_session(&self, id: &str) -> Result<SessionWriter, StoreError> {
        let dir = self.session_dir(id);
        if !dir.join(MANIFEST).is_file() {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        SessionWriter::reopen(dir)
    }

    pub fn load_session(&self, id: &str) -> Result<LoadedSession, StoreError> {
        let dir = self.session_dir(id);
        if !dir.join(MANIFEST).is_file() {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        LoadedSession::load(dir)
    }
}
