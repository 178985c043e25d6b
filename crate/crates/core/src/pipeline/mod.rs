//! The planning / acting / reflecting control loop.

mod prompts;
mod session;
pub mod template;

use std::fmt;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ParseOutcome, Situation};
use crate::env::Screenshot;
use crate::gateway::PhaseTag;

pub use prompts::{
    prompt_vars, render_prompt, render_text, TemplateLoadError, Templates, DEFAULT_ACTING,
    DEFAULT_PLANNING, DEFAULT_REFLECTING,
};
pub use session::{
    run_acting, run_planning, run_reflecting, run_session, AutoApprove, DecisionGate, GateDecision,
    NullObserver, Observer, PipelineError, PipelineEvent, Proposal, Session, StepSink, VecSink,
    EMPTY_ACTIONS_ADVICE,
};
pub use template::{Template, TemplateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Planning,
    Acting,
    Reflecting,
    Done,
    Failed,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Planning => "planning",
            Phase::Acting => "acting",
            Phase::Reflecting => "reflecting",
            Phase::Done => "done",
            Phase::Failed => "failed",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }

    pub fn tag(self) -> Option<PhaseTag> {
        match self {
            Phase::Planning => Some(PhaseTag::Planning),
            Phase::Acting => Some(PhaseTag::Acting),
            Phase::Reflecting => Some(PhaseTag::Reflecting),
            Phase::Done | Phase::Failed => None,
        }
    }

    /// Whether `self -> to` is a legal transition.
    pub fn can_move_to(self, to: Phase) -> bool {
        use Phase::*;
        match (self, to) {
            (_, Failed) => !self.is_terminal(),
            (Planning, Acting) | (Acting, Reflecting) => true,
            (Reflecting, Acting | Planning | Done) => true,
            // re-plan and re-act without leaving the phase
            (Planning, Planning) | (Acting, Acting) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Autonomous,
    Supervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    /// Retries allowed per subtask.
    pub max_retries: u32,
    /// Plan reformulations allowed per session.
    pub max_reformulations: u32,
    /// Extra planning requests when a response holds no plan.
    pub planning_reasks: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            max_retries: 3,
            max_reformulations: 3,
            planning_reasks: 1,
        }
    }
}

/// The subtask list and the index of the current subtask.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub subtasks: Vec<String>,
    pub cursor: usize,
}

impl Plan {
    pub fn new(subtasks: Vec<String>) -> Self {
        Self {
            subtasks,
            cursor: 0,
        }
    }

    pub fn current(&self) -> Option<&str> {
        self.subtasks.get(self.cursor).map(String::as_str)
    }

    pub fn is_complete(&self) -> bool {
        self.cursor >= self.subtasks.len()
    }
}

/// The judgement parsed from a reflecting response. `situation` is `None`
/// when no evaluate action could be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub situation: Option<Situation>,
    pub advice: Option<String>,
}

/// Everything observed and produced in one phase step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: u32,
    pub phase: PhaseTag,
    /// Subtask index the step worked on; `None` for planning.
    pub subtask: Option<usize>,
    pub prompt: String,
    pub response: String,
    /// Annotator-corrected response, if any.
    pub golden: Option<String>,
    /// Parse of the effective response.
    pub outcome: ParseOutcome,
    pub executed: Vec<Action>,
    pub before: Screenshot,
    pub after: Screenshot,
    pub evaluation: Option<Evaluation>,
    pub reward: Option<f64>,
    pub started_at: SystemTime,
    pub finished_at: SystemTime,
    pub first_event_at: Option<SystemTime>,
    pub last_event_at: Option<SystemTime>,
}

impl StepRecord {
    /// The golden response if present, else the original.
    pub fn effective_response(&self) -> &str {
        self.golden.as_deref().unwrap_or(&self.response)
    }
}

/// Mutable state of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub task_prompt: String,
    pub screen: (u32, u32),
    pub plan: Plan,
    pub phase: Phase,
    pub mode: Mode,
    pub budgets: Budgets,
    /// Retry count per subtask of the current plan.
    pub retries: Vec<u32>,
    pub reformulations: u32,
    /// Advice waiting to be injected into the next prompt.
    pub advice: Option<String>,
    /// Indices of persisted steps.
    pub history: Vec<u32>,
    /// Every phase the session has entered, in order.
    pub phases: Vec<Phase>,
    /// Reflecting responses without an evaluation, for the current subtask.
    pub unparsed_evaluations: u32,
    pub failure: Option<String>,
}

impl SessionState {
    pub fn new(
        task_prompt: impl Into<String>,
        screen: (u32, u32),
        mode: Mode,
        budgets: Budgets,
    ) -> Self {
        Self {
            task_prompt: task_prompt.into(),
            screen,
            plan: Plan::default(),
            phase: Phase::Planning,
            mode,
            budgets,
            retries: Vec::new(),
            reformulations: 0,
            advice: None,
            history: Vec::new(),
            phases: vec![Phase::Planning],
            unparsed_evaluations: 0,
            failure: None,
        }
    }

    pub fn current_retries(&self) -> u32 {
        self.retries.get(self.plan.cursor).copied().unwrap_or(0)
    }
}
