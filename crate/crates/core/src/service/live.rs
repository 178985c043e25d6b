use std::collections::BTreeMap;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::{broadcast, watch};

use super::{DeadlinePolicy, Service, SessionFactory};
use crate::env::Screenshot;
use crate::gateway::{JsonlLog, PhaseTag};
use crate::pipeline::{
    DecisionGate, GateDecision, Mode, Observer, Phase, PipelineEvent, Proposal, Session,
    SessionState, StepRecord, StepSink,
};
use crate::store::{NewSession, SessionWriter, StoreError};

/// A proposal waiting for an operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PendingView {
    pub step_id: u32,
    pub phase: PhaseTag,
    pub prompt: String,
    pub response: String,
    pub actions: Vec<Value>,
    /// Milliseconds left before the deadline policy applies.
    pub deadline_ms: Option<u64>,
}

/// Snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub id: String,
    pub task_prompt: String,
    pub mode: Mode,
    pub phase: Phase,
    pub plan: Vec<String>,
    pub cursor: usize,
    pub step_count: u32,
    pub retries: Vec<u32>,
    pub reformulations: u32,
    pub failure: Option<String>,
    pub pending: Option<PendingView>,
    /// Whether a session thread is attached in this process.
    pub live: bool,
}

/// Events on `/sessions/{id}/events`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServiceEvent {
    Phase {
        from: Phase,
        to: Phase,
    },
    Screenshot {
        width: u32,
        height: u32,
        digest: String,
    },
    DecisionRequired {
        step_id: u32,
        phase: PhaseTag,
    },
    DecisionApplied {
        step_id: u32,
        decision: String,
        by: String,
    },
    StepSaved {
        index: u32,
        phase: PhaseTag,
    },
    Finished {
        phase: Phase,
        failure: Option<String>,
    },
}

impl ServiceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ServiceEvent::Phase { .. } => "phase",
            ServiceEvent::Screenshot { .. } => "screenshot",
            ServiceEvent::DecisionRequired { .. } => "decision_required",
            ServiceEvent::DecisionApplied { .. } => "decision_applied",
            ServiceEvent::StepSaved { .. } => "step_saved",
            ServiceEvent::Finished { .. } => "finished",
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self, ServiceEvent::Finished { .. })
    }
}

/// Body of `POST /sessions/{id}/decision`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub step_id: u32,
    #[serde(flatten)]
    pub decision: DecisionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum DecisionKind {
    Approve,
    Edit {
        response: String,
    },
    Reject {
        advice: String,
    },
    Abort {
        #[serde(default)]
        reason: String,
    },
}

impl DecisionKind {
    pub fn name(&self) -> &'static str {
        match self {
            DecisionKind::Approve => "approve",
            DecisionKind::Edit { .. } => "edit",
            DecisionKind::Reject { .. } => "reject",
            DecisionKind::Abort { .. } => "abort",
        }
    }

    fn into_gate(self) -> GateDecision {
        match self {
            DecisionKind::Approve => GateDecision::Approve,
            DecisionKind::Edit { response } => GateDecision::Edit { response },
            DecisionKind::Reject { advice } => GateDecision::Reject { advice },
            DecisionKind::Abort { reason } => GateDecision::Abort(if reason.is_empty() {
                "aborted by operator".into()
            } else {
                reason
            }),
        }
    }
}

/// Outcome of submitting a decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Submit {
    Applied,
    /// The same decision was already applied to this step.
    Repeated,
    /// A different decision was already applied to this step.
    Conflict(String),
    /// No proposal with this step id is waiting.
    NotPending,
}

struct Pending {
    view: PendingView,
    since: Instant,
    reply: Sender<GateDecision>,
}

/// A session running in this process.
pub struct LiveSession {
    pub id: String,
    view: watch::Sender<SessionView>,
    events: broadcast::Sender<ServiceEvent>,
    pending: Mutex<Option<Pending>>,
    decided: Mutex<BTreeMap<u32, DecisionKind>>,
    screenshot: Mutex<Option<Screenshot>>,
    deadline: DeadlinePolicy,
}

impl LiveSession {
    fn new(id: String, view: SessionView, deadline: DeadlinePolicy) -> Self {
        Self {
            id,
            view: watch::channel(view).0,
            events: broadcast::channel(256).0,
            pending: Mutex::new(None),
            decided: Mutex::new(BTreeMap::new()),
            screenshot: Mutex::new(None),
            deadline,
        }
    }

    pub fn view(&self) -> SessionView {
        let mut v = self.view.borrow().clone();
        v.pending = self.pending();
        v
    }

    pub fn watch(&self) -> watch::Receiver<SessionView> {
        self.view.subscribe()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServiceEvent> {
        self.events.subscribe()
    }

    pub fn pending(&self) -> Option<PendingView> {
        self.pending.lock().unwrap().as_ref().map(|p| {
            let mut v = p.view.clone();
            v.deadline_ms = self
                .deadline
                .deadline()
                .map(|d| d.saturating_sub(p.since.elapsed()).as_millis() as u64);
            v
        })
    }

    pub fn screenshot(&self) -> Option<Screenshot> {
        self.screenshot.lock().unwrap().clone()
    }

    pub fn is_finished(&self) -> bool {
        self.view.borrow().phase.is_terminal()
    }

    fn emit(&self, e: ServiceEvent) {
        let _ = self.events.send(e);
    }

    /// Applies an operator decision. Idempotent per step id.
    pub fn submit(&self, req: DecisionRequest) -> Submit {
        let mut pending = self.pending.lock().unwrap();
        let mut decided = self.decided.lock().unwrap();
        if let Some(prev) = decided.get(&req.step_id) {
            return if *prev == req.decision {
                Submit::Repeated
            } else {
                Submit::Conflict(prev.name().to_string())
            };
        }
        match pending.as_ref() {
            Some(p) if p.view.step_id == req.step_id => {}
            _ => return Submit::NotPending,
        }
        let p = pending.take().expect("checked above");
        decided.insert(req.step_id, req.decision.clone());
        let name = req.decision.name().to_string();
        let _ = p.reply.send(req.decision.into_gate());
        self.emit(ServiceEvent::DecisionApplied {
            step_id: req.step_id,
            decision: name,
            by: "operator".into(),
        });
        Submit::Applied
    }

    fn update(&self, state: &SessionState, step_count: Option<u32>) {
        self.view.send_modify(|v| {
            v.phase = state.phase;
            v.plan = state.plan.subtasks.clone();
            v.cursor = state.plan.cursor;
            v.retries = state.retries.clone();
            v.reformulations = state.reformulations;
            v.failure = state.failure.clone();
            if let Some(n) = step_count {
                v.step_count = n;
            }
        });
    }
}

struct Gate {
    live: Arc<LiveSession>,
}

impl DecisionGate for Gate {
    fn decide(&self, proposal: &Proposal<'_>) -> GateDecision {
        let (tx, rx): (Sender<GateDecision>, Receiver<GateDecision>) = mpsc::channel();
        *self.live.screenshot.lock().unwrap() = Some(proposal.before.clone());
        *self.live.pending.lock().unwrap() = Some(Pending {
            view: PendingView {
                step_id: proposal.step_index,
                phase: proposal.phase,
                prompt: proposal.prompt.to_string(),
                response: proposal.response.to_string(),
                actions: proposal.actions.iter().map(|a| a.to_json()).collect(),
                deadline_ms: None,
            },
            since: Instant::now(),
            reply: tx,
        });
        self.live.emit(ServiceEvent::DecisionRequired {
            step_id: proposal.step_index,
            phase: proposal.phase,
        });
        let waited = match self.live.deadline.deadline() {
            None => rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
            Some(d) => rx.recv_timeout(d),
        };
        match waited {
            Ok(d) => d,
            Err(_) => {
                let mut pending = self.live.pending.lock().unwrap();
                if let Ok(d) = rx.try_recv() {
                    return d;
                }
                pending.take();
                let (kind, decision) = match self.live.deadline {
                    DeadlinePolicy::Approve(_) => (DecisionKind::Approve, GateDecision::Approve),
                    _ => (
                        DecisionKind::Abort {
                            reason: "decision deadline passed".into(),
                        },
                        GateDecision::Abort("decision deadline passed".into()),
                    ),
                };
                self.live
                    .decided
                    .lock()
                    .unwrap()
                    .insert(proposal.step_index, kind.clone());
                self.live.emit(ServiceEvent::DecisionApplied {
                    step_id: proposal.step_index,
                    decision: kind.name().into(),
                    by: "deadline".into(),
                });
                decision
            }
        }
    }
}

struct Forward {
    live: Arc<LiveSession>,
}

impl Observer for Forward {
    fn event(&self, event: &PipelineEvent) {
        let e = match event {
            PipelineEvent::Phase { from, to } => ServiceEvent::Phase {
                from: *from,
                to: *to,
            },
            PipelineEvent::Screenshot(s) => {
                let e = ServiceEvent::Screenshot {
                    width: s.width,
                    height: s.height,
                    digest: s.digest(),
                };
                *self.live.screenshot.lock().unwrap() = Some(s.clone());
                e
            }
            PipelineEvent::DecisionRequired { .. } => return,
            PipelineEvent::StepSaved { index, phase } => ServiceEvent::StepSaved {
                index: *index,
                phase: *phase,
            },
            PipelineEvent::Finished { phase, failure } => {
                self.live.view.send_modify(|v| {
                    v.phase = *phase;
                    v.failure = failure.clone();
                });
                ServiceEvent::Finished {
                    phase: *phase,
                    failure: failure.clone(),
                }
            }
        };
        self.live.emit(e);
    }
}

struct Sink {
    writer: SessionWriter,
    live: Arc<LiveSession>,
}

impl StepSink for Sink {
    fn persist(&mut self, state: &SessionState, record: &StepRecord) -> Result<(), String> {
        self.writer.persist(state, record)?;
        self.live
            .update(state, Some(self.writer.manifest().step_count));
        Ok(())
    }

    fn finish(&mut self, state: &SessionState) -> Result<(), String> {
        self.live.update(state, None);
        self.writer.finish(state).map_err(|e| e.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("environment unreachable: {0}")]
    EnvUnreachable(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Creates the session directory and starts the session thread.
pub(crate) fn start_session(
    service: &Arc<Service>,
    new: NewSession,
) -> Result<Arc<LiveSession>, StartError> {
    let cfg = &service.config;
    let env = cfg
        .factory
        .environment()
        .map_err(|e| StartError::EnvUnreachable(e.to_string()))?;
    let screen = env.screen_size();
    let mode = new.mode;
    let task = new.task_prompt.clone();
    let writer = cfg.store.create_session(NewSession { screen, ..new })?;
    let id = writer.id().to_string();
    let gateway = {
        let gw = SessionFactory::gateway(&*cfg.factory);
        match JsonlLog::open(writer.request_log_path()) {
            Ok(log) => gw.relogged(Arc::new(log)),
            Err(e) => {
                tracing::warn!("request log for {id} unavailable: {e}");
                gw
            }
        }
    };
    let state = SessionState::new(&task, screen, mode, cfg.budgets);
    let live = Arc::new(LiveSession::new(
        id.clone(),
        SessionView {
            id: id.clone(),
            task_prompt: task,
            mode,
            phase: state.phase,
            plan: Vec::new(),
            cursor: 0,
            step_count: 0,
            retries: Vec::new(),
            reformulations: 0,
            failure: None,
            pending: None,
            live: true,
        },
        cfg.deadline,
    ));
    service
        .sessions
        .lock()
        .unwrap()
        .insert(id.clone(), live.clone());
    let templates = cfg.templates.clone();
    let thread_live = live.clone();
    std::thread::Builder::new()
        .name(format!("session-{id}"))
        .spawn(move || {
            let mut env = env;
            let mut sink = Sink {
                writer,
                live: thread_live.clone(),
            };
            let gate = Gate {
                live: thread_live.clone(),
            };
            let observer = Forward {
                live: thread_live.clone(),
            };
            let end = Session::new(state, &mut *env, &gateway, &mut sink, &templates)
                .with_gate(&gate)
                .with_observer(&observer)
                .run();
            tracing::info!(session = %thread_live.id, phase = %end.phase, "session finished");
        })
        .map_err(|e| StartError::Store(StoreError::Io(e)))?;
    Ok(live)
}
