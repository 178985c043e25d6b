use std::time::SystemTime;

use super::prompts::{render_text, Templates};
use super::template::TemplateError;
use super::{Budgets, Evaluation, Mode, Phase, Plan, SessionState, StepRecord};
use crate::action::{
    parse_response, validate_for_screen, Action, ParseFault, ParseOutcome, Situation,
};
use crate::env::{EnvError, Environment, RewardHook, Screenshot, ZeroReward};
use crate::gateway::{ChatTurn, CompletionRequest, Gateway, GatewayError, Part, PhaseTag};

/// Advice injected after an acting response without executable actions.
pub const EMPTY_ACTIONS_ADVICE: &str =
    "Your last answer contained no executable action. Reply with mouse or keyboard actions in the JSON format shown above.";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("execution failed: {0}")]
    Env(#[from] EnvError),
    #[error("no plan produced")]
    NoPlanProduced,
    #[error("retry budget exceeded on subtask {subtask}")]
    RetryBudgetExceeded { subtask: usize },
    #[error("reformulation budget exceeded")]
    ReformulationBudgetExceeded,
    #[error("could not persist step: {0}")]
    Persist(String),
    #[error("aborted: {0}")]
    Aborted(String),
    #[error("expected phase {expected}, session is in {actual}")]
    WrongPhase { expected: Phase, actual: Phase },
}

/// Receives every step before the session moves on.
pub trait StepSink {
    fn persist(&mut self, state: &SessionState, record: &StepRecord) -> Result<(), String>;

    fn finish(&mut self, _state: &SessionState) -> Result<(), String> {
        Ok(())
    }
}

/// Keeps records in memory.
#[derive(Debug, Default)]
pub struct VecSink {
    pub records: Vec<StepRecord>,
    pub finished: Option<SessionState>,
}

impl StepSink for VecSink {
    fn persist(&mut self, _: &SessionState, record: &StepRecord) -> Result<(), String> {
        self.records.push(record.clone());
        Ok(())
    }

    fn finish(&mut self, state: &SessionState) -> Result<(), String> {
        self.finished = Some(state.clone());
        Ok(())
    }
}

/// What the model proposed in a supervised step.
#[derive(Debug, Clone, Copy)]
pub struct Proposal<'a> {
    pub step_index: u32,
    pub phase: PhaseTag,
    pub prompt: &'a str,
    pub response: &'a str,
    pub actions: &'a [Action],
    pub before: &'a Screenshot,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateDecision {
    Approve,
    /// Replace the response with a corrected one.
    Edit {
        response: String,
    },
    Reject {
        advice: String,
    },
    Abort(String),
}

/// Human decision point consulted in supervised mode.
pub trait DecisionGate {
    fn decide(&self, proposal: &Proposal<'_>) -> GateDecision;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AutoApprove;

impl DecisionGate for AutoApprove {
    fn decide(&self, _: &Proposal<'_>) -> GateDecision {
        GateDecision::Approve
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineEvent {
    Phase {
        from: Phase,
        to: Phase,
    },
    Screenshot(Screenshot),
    DecisionRequired {
        step: u32,
        phase: PhaseTag,
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

pub trait Observer {
    fn event(&self, event: &PipelineEvent);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NullObserver;

impl Observer for NullObserver {
    fn event(&self, _: &PipelineEvent) {}
}

impl<F: Fn(&PipelineEvent)> Observer for F {
    fn event(&self, event: &PipelineEvent) {
        self(event)
    }
}

/// One running session and everything it talks to.
pub struct Session<'a> {
    pub state: SessionState,
    env: &'a mut dyn Environment,
    gateway: &'a Gateway,
    sink: &'a mut dyn StepSink,
    templates: &'a Templates,
    gate: &'a dyn DecisionGate,
    observer: &'a dyn Observer,
    reward: &'a dyn RewardHook,
}

fn split_device_actions(outcome: &mut ParseOutcome, screen: (u32, u32)) -> Vec<Action> {
    let mut keep = Vec::new();
    for a in std::mem::take(&mut outcome.actions) {
        let problem = if !a.is_device_action() {
            Some(format!(
                "{} is not executable while acting",
                a.kind().wire_name()
            ))
        } else {
            let v = validate_for_screen(&a, screen.0, screen.1);
            (!v.is_empty()).then(|| {
                v.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; ")
            })
        };
        match problem {
            Some(reason) => outcome.faults.push(ParseFault {
                block_index: outcome.block_count,
                raw_text: a.serialize(),
                missing_keys: Vec::new(),
                reason,
            }),
            None => keep.push(a.clone()),
        }
        outcome.actions.push(a);
    }
    keep
}

impl<'a> Session<'a> {
    pub fn new(
        state: SessionState,
        env: &'a mut dyn Environment,
        gateway: &'a Gateway,
        sink: &'a mut dyn StepSink,
        templates: &'a Templates,
    ) -> Self {
        Self {
            state,
            env,
            gateway,
            sink,
            templates,
            gate: &AutoApprove,
            observer: &NullObserver,
            reward: &ZeroReward,
        }
    }

    pub fn with_gate(mut self, gate: &'a dyn DecisionGate) -> Self {
        self.gate = gate;
        self
    }

    pub fn with_observer(mut self, observer: &'a dyn Observer) -> Self {
        self.observer = observer;
        self
    }

    pub fn with_reward(mut self, reward: &'a dyn RewardHook) -> Self {
        self.reward = reward;
        self
    }

    fn transition(&mut self, to: Phase) {
        let from = self.state.phase;
        debug_assert!(from.can_move_to(to), "illegal transition {from} -> {to}");
        self.state.phase = to;
        self.state.phases.push(to);
        self.observer.event(&PipelineEvent::Phase { from, to });
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), PipelineError> {
        if self.state.phase == expected {
            Ok(())
        } else {
            Err(PipelineError::WrongPhase {
                expected,
                actual: self.state.phase,
            })
        }
    }

    fn next_index(&self) -> u32 {
        self.state.history.len() as u32
    }

    fn capture(&mut self) -> Result<Screenshot, PipelineError> {
        let shot = self.env.capture()?;
        self.observer
            .event(&PipelineEvent::Screenshot(shot.clone()));
        Ok(shot)
    }

    /// Renders the phase prompt, consuming any pending advice, and asks the model.
    fn ask(&mut self, tag: PhaseTag, shot: &Screenshot) -> Result<(String, String), PipelineError> {
        let advice = self.state.advice.take();
        let prompt = render_text(self.templates, tag, &self.state, advice.as_deref())?;
        let request = CompletionRequest {
            tag,
            turns: vec![ChatTurn::user(vec![
                Part::Text(prompt.clone()),
                Part::Image {
                    png: shot.to_png(),
                    width: shot.width,
                    height: shot.height,
                },
            ])],
        };
        let response = self.gateway.complete(&request)?;
        Ok((prompt, response))
    }

    fn consult(&self, proposal: Proposal<'_>) -> GateDecision {
        if self.state.mode != Mode::Supervised {
            return GateDecision::Approve;
        }
        self.observer.event(&PipelineEvent::DecisionRequired {
            step: proposal.step_index,
            phase: proposal.phase,
        });
        self.gate.decide(&proposal)
    }

    fn persist(&mut self, record: StepRecord) -> Result<StepRecord, PipelineError> {
        self.sink
            .persist(&self.state, &record)
            .map_err(PipelineError::Persist)?;
        self.state.history.push(record.index);
        self.observer.event(&PipelineEvent::StepSaved {
            index: record.index,
            phase: record.phase,
        });
        Ok(record)
    }

    fn record(
        &self,
        phase: PhaseTag,
        prompt: String,
        response: String,
        shot: &Screenshot,
        started_at: SystemTime,
    ) -> StepRecord {
        StepRecord {
            index: self.next_index(),
            phase,
            subtask: (phase != PhaseTag::Planning).then_some(self.state.plan.cursor),
            outcome: ParseOutcome::default(),
            prompt,
            response,
            golden: None,
            executed: Vec::new(),
            before: shot.clone(),
            after: shot.clone(),
            evaluation: None,
            reward: None,
            started_at,
            finished_at: SystemTime::now(),
            first_event_at: None,
            last_event_at: None,
        }
    }

    /// Re-runs acting on the current subtask, charging the retry budget.
    fn retry(&mut self, advice: Option<String>) -> Result<(), PipelineError> {
        let c = self.state.plan.cursor;
        if self.state.retries[c] >= self.state.budgets.max_retries {
            return Err(PipelineError::RetryBudgetExceeded { subtask: c });
        }
        self.state.retries[c] += 1;
        self.state.advice = advice;
        self.transition(Phase::Acting);
        Ok(())
    }

    /// Produces a plan; on success the session is in `Acting` at cursor 0.
    pub fn run_planning(&mut self) -> Result<Plan, PipelineError> {
        self.expect_phase(Phase::Planning)?;
        let mut reasks = 0;
        loop {
            let started = SystemTime::now();
            let shot = self.capture()?;
            let (prompt, response) = self.ask(PhaseTag::Planning, &shot)?;
            let mut rec = self.record(PhaseTag::Planning, prompt, response, &shot, started);
            rec.outcome = parse_response(&rec.response);
            let decision = self.consult(Proposal {
                step_index: rec.index,
                phase: PhaseTag::Planning,
                prompt: &rec.prompt,
                response: &rec.response,
                actions: &rec.outcome.actions,
                before: &shot,
            });
            match decision {
                GateDecision::Approve => {}
                GateDecision::Edit { response } => {
                    rec.outcome = parse_response(&response);
                    rec.golden = Some(response);
                }
                GateDecision::Reject { advice } => {
                    self.persist(rec)?;
                    if self.state.reformulations >= self.state.budgets.max_reformulations {
                        return Err(PipelineError::ReformulationBudgetExceeded);
                    }
                    self.state.reformulations += 1;
                    self.state.advice = Some(advice);
                    self.transition(Phase::Planning);
                    continue;
                }
                GateDecision::Abort(why) => return Err(PipelineError::Aborted(why)),
            }
            let subtasks: Vec<String> = rec
                .outcome
                .actions
                .iter()
                .filter_map(|a| match a {
                    Action::Plan { element } => Some(element.clone()),
                    _ => None,
                })
                .collect();
            rec.finished_at = SystemTime::now();
            self.persist(rec)?;
            if subtasks.is_empty() {
                if reasks < self.state.budgets.planning_reasks {
                    reasks += 1;
                    self.transition(Phase::Planning);
                    continue;
                }
                return Err(PipelineError::NoPlanProduced);
            }
            self.state.retries = vec![0; subtasks.len()];
            self.state.plan = Plan::new(subtasks);
            self.state.unparsed_evaluations = 0;
            self.transition(Phase::Acting);
            return Ok(self.state.plan.clone());
        }
    }

    /// Asks for and executes actions for the current subtask.
    pub fn run_acting(&mut self) -> Result<StepRecord, PipelineError> {
        self.expect_phase(Phase::Acting)?;
        let started = SystemTime::now();
        let shot = self.capture()?;
        let (prompt, response) = self.ask(PhaseTag::Acting, &shot)?;
        let mut rec = self.record(PhaseTag::Acting, prompt, response, &shot, started);
        rec.outcome = parse_response(&rec.response);
        let mut actions = split_device_actions(&mut rec.outcome, self.state.screen);
        let decision = self.consult(Proposal {
            step_index: rec.index,
            phase: PhaseTag::Acting,
            prompt: &rec.prompt,
            response: &rec.response,
            actions: &actions,
            before: &shot,
        });
        match decision {
            GateDecision::Approve => {}
            GateDecision::Edit { response } => {
                rec.outcome = parse_response(&response);
                actions = split_device_actions(&mut rec.outcome, self.state.screen);
                rec.golden = Some(response);
            }
            GateDecision::Reject { advice } => {
                let rec = self.persist(rec)?;
                self.retry(Some(advice))?;
                return Ok(rec);
            }
            GateDecision::Abort(why) => return Err(PipelineError::Aborted(why)),
        }
        if actions.is_empty() {
            let rec = self.persist(rec)?;
            self.retry(Some(EMPTY_ACTIONS_ADVICE.to_string()))?;
            return Ok(rec);
        }
        let out = self.env.execute(&actions, self.reward)?;
        self.observer
            .event(&PipelineEvent::Screenshot(out.after.clone()));
        rec.before = out.before;
        rec.after = out.after;
        rec.executed = out.executed;
        rec.reward = Some(out.reward);
        rec.first_event_at = out.first_event_at;
        rec.last_event_at = out.last_event_at;
        rec.finished_at = SystemTime::now();
        let rec = self.persist(rec)?;
        self.transition(Phase::Reflecting);
        Ok(rec)
    }

    /// Judges the current subtask and moves to the next phase.
    pub fn run_reflecting(&mut self) -> Result<Evaluation, PipelineError> {
        self.expect_phase(Phase::Reflecting)?;
        let started = SystemTime::now();
        let shot = self.capture()?;
        let (prompt, response) = self.ask(PhaseTag::Reflecting, &shot)?;
        let mut rec = self.record(PhaseTag::Reflecting, prompt, response, &shot, started);
        rec.outcome = parse_response(&rec.response);
        let mut rejected = None;
        match self.consult(Proposal {
            step_index: rec.index,
            phase: PhaseTag::Reflecting,
            prompt: &rec.prompt,
            response: &rec.response,
            actions: &rec.outcome.actions,
            before: &shot,
        }) {
            GateDecision::Approve => {}
            GateDecision::Edit { response } => {
                rec.outcome = parse_response(&response);
                rec.golden = Some(response);
            }
            GateDecision::Reject { advice } => rejected = Some(advice),
            GateDecision::Abort(why) => return Err(PipelineError::Aborted(why)),
        }
        let evaluation = match rejected {
            Some(advice) => Evaluation {
                situation: Some(Situation::NeedRetry),
                advice: Some(advice),
            },
            None => rec
                .outcome
                .actions
                .iter()
                .find_map(|a| match a {
                    Action::Evaluate { situation, advice } => Some(Evaluation {
                        situation: Some(*situation),
                        advice: advice.clone(),
                    }),
                    _ => None,
                })
                .unwrap_or(Evaluation {
                    situation: None,
                    advice: None,
                }),
        };
        rec.evaluation = Some(evaluation.clone());
        rec.finished_at = SystemTime::now();
        self.persist(rec)?;
        match evaluation.situation {
            Some(Situation::SubTaskSuccess) => {
                self.state.plan.cursor += 1;
                self.state.unparsed_evaluations = 0;
                let next = if self.state.plan.is_complete() {
                    Phase::Done
                } else {
                    Phase::Acting
                };
                self.transition(next);
            }
            Some(Situation::NeedRetry) => self.retry(evaluation.advice.clone())?,
            Some(Situation::NeedReformulate) => {
                if self.state.reformulations >= self.state.budgets.max_reformulations {
                    return Err(PipelineError::ReformulationBudgetExceeded);
                }
                self.state.reformulations += 1;
                self.state.plan = Plan::default();
                self.state.retries.clear();
                self.state.advice = evaluation.advice.clone();
                self.transition(Phase::Planning);
            }
            None => {
                if self.state.unparsed_evaluations >= 1 {
                    return Err(PipelineError::RetryBudgetExceeded {
                        subtask: self.state.plan.cursor,
                    });
                }
                self.state.unparsed_evaluations += 1;
                self.retry(None)?;
            }
        }
        Ok(evaluation)
    }

    fn fail(&mut self, err: PipelineError) {
        tracing::warn!("session failed: {err}");
        self.state.failure = Some(err.to_string());
        if !self.state.phase.is_terminal() {
            self.transition(Phase::Failed);
        }
    }

    /// Runs phases until the session is done or has failed.
    pub fn run(mut self) -> SessionState {
        while !self.state.phase.is_terminal() {
            let r = match self.state.phase {
                Phase::Planning => self.run_planning().map(|_| ()),
                Phase::Acting => self.run_acting().map(|_| ()),
                Phase::Reflecting => self.run_reflecting().map(|_| ()),
                Phase::Done | Phase::Failed => unreachable!(),
            };
            if let Err(e) = r {
                self.fail(e);
            }
        }
        if let Err(e) = self.sink.finish(&self.state) {
            tracing::warn!("could not finalize session: {e}");
            self.state
                .failure
                .get_or_insert(format!("could not finalize session: {e}"));
        }
        self.observer.event(&PipelineEvent::Finished {
            phase: self.state.phase,
            failure: self.state.failure.clone(),
        });
        self.state
    }
}

pub fn run_planning(session: &mut Session<'_>) -> Result<Plan, PipelineError> {
    session.run_planning()
}

pub fn run_acting(session: &mut Session<'_>) -> Result<StepRecord, PipelineError> {
    session.run_acting()
}

pub fn run_reflecting(session: &mut Session<'_>) -> Result<Evaluation, PipelineError> {
    session.run_reflecting()
}

/// Runs a whole session with the built-in templates and default budgets.
pub fn run_session(
    task_prompt: &str,
    env: &mut dyn Environment,
    gateway: &Gateway,
    sink: &mut dyn StepSink,
    mode: Mode,
    gate: &dyn DecisionGate,
) -> SessionState {
    let templates = Templates::default();
    let state = SessionState::new(task_prompt, env.screen_size(), mode, Budgets::default());
    Session::new(state, env, gateway, sink, &templates)
        .with_gate(gate)
        .run()
}
