use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use super::template::{Template, TemplateError};
use super::SessionState;
use crate::env::Screenshot;
use crate::gateway::{ChatTurn, Part, PhaseTag};

pub const DEFAULT_PLANNING: &str = include_str!("../../templates/planning.txt");
pub const DEFAULT_ACTING: &str = include_str!("../../templates/acting.txt");
pub const DEFAULT_REFLECTING: &str = include_str!("../../templates/reflecting.txt");

/// The three phase prompt templates.
#[derive(Debug, Clone)]
pub struct Templates {
    pub planning: Template,
    pub acting: Template,
    pub reflecting: Template,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            planning: Template::parse(DEFAULT_PLANNING).expect("built-in planning template"),
            acting: Template::parse(DEFAULT_ACTING).expect("built-in acting template"),
            reflecting: Template::parse(DEFAULT_REFLECTING).expect("built-in reflecting template"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateLoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: TemplateError },
}

impl Templates {
    /// Loads `planning.txt`, `acting.txt` and `reflecting.txt` from `dir`,
    /// keeping the built-in template for any file that does not exist.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, TemplateLoadError> {
        let mut t = Self::default();
        for (name, slot) in [
            ("planning.txt", &mut t.planning),
            ("acting.txt", &mut t.acting),
            ("reflecting.txt", &mut t.reflecting),
        ] {
            let path = dir.as_ref().join(name);
            match std::fs::read_to_string(&path) {
                Ok(src) => {
                    *slot = Template::parse(&src).map_err(|source| TemplateLoadError::Parse {
                        path: path.display().to_string(),
                        source,
                    })?
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(source) => {
                    return Err(TemplateLoadError::Io {
                        path: path.display().to_string(),
                        source,
                    })
                }
            }
        }
        Ok(t)
    }

    pub fn get(&self, tag: PhaseTag) -> &Template {
        match tag {
            PhaseTag::Planning => &self.planning,
            PhaseTag::Acting => &self.acting,
            PhaseTag::Reflecting => &self.reflecting,
        }
    }
}

/// Template variables for a phase. `advice` fills `advice_`.
pub fn prompt_vars(state: &SessionState, advice: Option<&str>) -> BTreeMap<String, Value> {
    let (w, h) = state.screen;
    let mut v = BTreeMap::new();
    v.insert("video_width".into(), json!(w));
    v.insert("video_height".into(), json!(h));
    v.insert("task_prompt".into(), json!(state.task_prompt));
    v.insert("sub_task_list".into(), json!(state.plan.subtasks));
    v.insert(
        "current_task".into(),
        json!(state.plan.current().unwrap_or_default()),
    );
    v.insert("advice_".into(), advice.map_or(Value::Null, |a| json!(a)));
    v
}

/// Renders the prompt text for `tag`.
pub fn render_text(
    templates: &Templates,
    tag: PhaseTag,
    state: &SessionState,
    advice: Option<&str>,
) -> Result<String, TemplateError> {
    templates.get(tag).render(&prompt_vars(state, advice))
}

/// Renders the prompt and attaches the screenshot as an image part.
pub fn render_prompt(
    templates: &Templates,
    tag: PhaseTag,
    state: &SessionState,
    advice: Option<&str>,
    screenshot: &Screenshot,
) -> Result<Vec<ChatTurn>, TemplateError> {
    let text = render_text(templates, tag, state, advice)?;
    Ok(vec![ChatTurn::user(vec![
        Part::Text(text),
        Part::Image {
            png: screenshot.to_png(),
            width: screenshot.width,
            height: screenshot.height,
        },
    ])])
}
