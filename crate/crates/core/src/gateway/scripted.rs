use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, CompletionRequest, GatewayError, PhaseTag};

/// One scripted response and the request it must answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub tag: PhaseTag,
    /// Substring the prompt text must contain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub response: String,
}

impl ScriptEntry {
    pub fn new(tag: PhaseTag, response: impl Into<String>) -> Self {
        Self {
            tag,
            contains: None,
            response: response.into(),
        }
    }

    pub fn expecting(mut self, needle: impl Into<String>) -> Self {
        self.contains = Some(needle.into());
        self
    }

    fn describe(&self) -> String {
        match &self.contains {
            Some(n) => format!("a {} request containing {n:?}", self.tag),
            None => format!("a {} request", self.tag),
        }
    }
}

pub type ScriptedExchange = Vec<ScriptEntry>;

/// Replays a fixed script in order. Running past the end is an error.
#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(entries: ScriptedExchange) -> Self {
        Self {
            entries,
            cursor: Mutex::new(0),
        }
    }

    /// Loads a JSON array of entries.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let entries = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(entries))
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap()
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.consumed()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut cursor = self.cursor.lock().unwrap();
        let Some(entry) = self.entries.get(*cursor) else {
            return Err(GatewayError::ScriptExhausted(self.entries.len()));
        };
        let text_ok = entry
            .contains
            .as_ref()
            .map_or(true, |n| request.text().contains(n.as_str()));
        if entry.tag != request.tag || !text_ok {
            return Err(GatewayError::MatcherMiss {
                index: *cursor,
                expected: entry.describe(),
                tag: request.tag,
            });
        }
        *cursor += 1;
        Ok(entry.response.clone())
    }
}

/// The recorded exchange of one stored step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptStep {
    pub tag: PhaseTag,
    /// The effective response: the corrected one if present, else the original.
    pub response: Option<String>,
}

/// Builds a script that replays a stored session step by step.
pub fn record_replay(
    steps: impl IntoIterator<Item = TranscriptStep>,
) -> Result<ScriptedExchange, GatewayError> {
    steps
        .into_iter()
        .enumerate()
        .map(|(i, s)| match s.response {
            Some(r) => Ok(ScriptEntry::new(s.tag, r)),
            None => Err(GatewayError::MalformedTranscript(format!(
                "step {i} has no response"
            ))),
        })
        .collect()
}
