use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use screenagent::action::{Action, MouseButton, MousePosition, Situation};
use screenagent::env::{Environment, MemoryDesktop};
use screenagent::gateway::{
    ChatBackend, CompletionRequest, Gateway, GatewayError, PhaseTag, ScriptEntry, ScriptedBackend,
};
use screenagent::pipeline::{
    render_prompt, Budgets, DecisionGate, GateDecision, Mode, Phase, PipelineEvent, Proposal,
    Session, SessionState, StepRecord, StepSink, Templates, VecSink, EMPTY_ACTIONS_ADVICE,
};

const PLAN2: &str = r#"Sure.
```json
[
    {"action_type": "PlanAction", "element": "Open Notebook"},
    {"action_type": "PlanAction", "element": "Write a brief paragraph about AI in the notebook"}
]
```"#;
const PLAN_WEB: &str = r#"```json
[
    {"action_type": "PlanAction", "element": "Open web browser."},
    {"action_type": "PlanAction", "element": "Search in your browser for \"What's the deal with the Wheat Field Circle?\""},
    {"action_type": "PlanAction", "element": "Open the first search result"},
    {"action_type": "PlanAction", "element": "Browse the content of the page"},
    {"action_type": "PlanAction", "element": "Answer the question \"What's the deal with the Wheat Field Circle?\" according to the content."}
]
```"#;
const CLICK: &str = r#"My plan is to click the Start button, it's on the left bottom corner, so my action will be:
```json
[
    {"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":10,"height":760} }
]
```"#;
const DOUBLE: &str = r#"```json
[
    {"action_type":"MouseAction","mouse_action_type":"double_click","mouse_button":"left","mouse_position":{"width":60,"height":135} }
]
```"#;
const SUCCESS: &str =
    r#"```json  {"action_type":"EvaluateSubTaskAction", "situation": "sub_task_success"} ```"#;
const RETRY_ADVICE: &str = "I don't think you're clicking in the right place.";
const RETRY: &str = r#"```json  {"action_type":"EvaluateSubTaskAction", "situation": "need_retry", "advice": "I don't think you're clicking in the right place."} ```"#;
const REFORMULATE_ADVICE: &str =
    "I think the current plan is not suitable for the current situation, because the system does not have .... installed";
const REFORMULATE: &str = r#"```json  {"action_type":"EvaluateSubTaskAction", "situation": "need_reformulate", "advice": "I think the current plan is not suitable for the current situation, because the system does not have .... installed"} ```"#;

fn script(entries: &[(PhaseTag, &str)]) -> Gateway {
    let entries = entries
        .iter()
        .map(|(t, r)| ScriptEntry::new(*t, *r))
        .collect();
    Gateway::new(Arc::new(ScriptedBackend::new(entries)), 1)
}

use PhaseTag::{Acting as A, Planning as P, Reflecting as R};

struct Run {
    state: SessionState,
    records: Vec<StepRecord>,
    desktop: MemoryDesktop,
}

fn run_with(gw: &Gateway, mode: Mode, gate: Option<&dyn DecisionGate>) -> Run {
    let mut desktop = MemoryDesktop::new(1024, 768);
    let mut sink = VecSink::default();
    let templates = Templates::default();
    let state = SessionState::new(
        "Write a brief paragraph about artificial intelligence in a notebook",
        (1024, 768),
        mode,
        Budgets::default(),
    );
    let mut session = Session::new(state, &mut desktop, gw, &mut sink, &templates);
    if let Some(g) = gate {
        session = session.with_gate(g);
    }
    let state = session.run();
    Run {
        state,
        records: sink.records,
        desktop,
    }
}

fn run(entries: &[(PhaseTag, &str)]) -> Run {
    run_with(&script(entries), Mode::Autonomous, None)
}

fn phases(r: &Run) -> Vec<PhaseTag> {
    r.records.iter().map(|s| s.phase).collect()
}

#[test]
fn two_subtasks_finish_in_five_steps() {
    let t = Instant::now();
    let r = run(&[
        (P, PLAN2),
        (A, CLICK),
        (R, SUCCESS),
        (A, DOUBLE),
        (R, SUCCESS),
    ]);
    assert_eq!(r.state.phase, Phase::Done, "{:?}", r.state.failure);
    assert_eq!(r.records.len(), 5);
    assert_eq!(phases(&r), [P, A, R, A, R]);
    assert_eq!(
        r.state.phases,
        [
            Phase::Planning,
            Phase::Acting,
            Phase::Reflecting,
            Phase::Acting,
            Phase::Reflecting,
            Phase::Done
        ]
    );
    assert_eq!(r.state.plan.cursor, 2);
    assert_eq!(r.desktop.executed().len(), 2);
    assert!(t.elapsed() < Duration::from_secs(5));
    assert!(r.records[0]
        .prompt
        .contains("you need to give a plan to accomplish this goal"));
    assert!(r.records[1]
        .prompt
        .contains("The current subtask is \"Open Notebook\"."));
    assert!(r.records[1].prompt.contains(
        "    1. Open Notebook\n    2. Write a brief paragraph about AI in the notebook\n"
    ));
    assert!(r.records[2]
        .prompt
        .contains("act as a reward model to judge whether or not this image meets the goal"));
    assert!(r.records[3]
        .prompt
        .contains("The current subtask is \"Write a brief paragraph about AI in the notebook\""));
}

#[test]
fn retry_adds_two_steps_and_injects_advice_once() {
    let r = run(&[
        (P, PLAN2),
        (A, CLICK),
        (R, RETRY),
        (A, CLICK),
        (R, SUCCESS),
        (A, DOUBLE),
        (R, SUCCESS),
    ]);
    assert_eq!(r.state.phase, Phase::Done);
    assert_eq!(r.records.len(), 7);
    assert_eq!(r.state.retries, [1, 0]);
    let needle =
        format!("Here are some suggestions for performing this subtask: \"{RETRY_ADVICE}\".");
    assert!(r.records[3].prompt.contains(&needle));
    assert_eq!(
        r.records
            .iter()
            .filter(|s| s.prompt.contains(&needle))
            .count(),
        1
    );
    assert!(!r.records[1].prompt.contains("Here are some suggestions"));
}

#[test]
fn reformulate_returns_to_planning_with_new_plan() {
    let plan1 = r#"```json
[{"action_type": "PlanAction", "element": "Install a text editor"}]
```"#;
    let r = run(&[
        (P, PLAN2),
        (A, CLICK),
        (R, REFORMULATE),
        (P, plan1),
        (A, CLICK),
        (R, SUCCESS),
    ]);
    assert_eq!(r.state.phase, Phase::Done, "{:?}", r.state.failure);
    assert_eq!(r.state.plan.subtasks, ["Install a text editor"]);
    assert_eq!(phases(&r), [P, A, R, P, A, R]);
    assert!(r
        .state
        .phases
        .windows(2)
        .any(|w| w == [Phase::Reflecting, Phase::Planning]));
    let needle = format!("Here are some suggestions for making a plan: {REFORMULATE_ADVICE}");
    assert!(r.records[3].prompt.contains(&needle));
    assert_eq!(r.state.reformulations, 1);
}

#[test]
fn retry_budget_exceeded_fails() {
    let mut s = vec![(P, PLAN2)];
    for _ in 0..4 {
        s.extend([(A, CLICK), (R, RETRY)]);
    }
    let r = run(&s);
    assert_eq!(r.state.phase, Phase::Failed);
    assert_eq!(r.state.retries[0], 3);
    assert!(r.state.failure.as_deref().unwrap().contains("retry budget"));
    assert_eq!(r.records.len(), 9);
}

#[test]
fn script_exhausted_fails_with_records_intact() {
    let r = run(&[(P, PLAN2), (A, CLICK)]);
    assert_eq!(r.state.phase, Phase::Failed);
    assert_eq!(r.records.len(), 2);
    assert!(r
        .state
        .failure
        .as_deref()
        .unwrap()
        .contains("script exhausted"));
}

#[test]
fn prose_plan_is_asked_again_then_fails() {
    let r = run(&[(P, "I would open a browser."), (P, "Still no JSON.")]);
    assert_eq!(r.state.phase, Phase::Failed);
    assert_eq!(r.records.len(), 2);
    assert_eq!(r.state.failure.as_deref(), Some("no plan produced"));
}

#[test]
fn web_search_plan_has_five_steps() {
    let r = run(&[(P, PLAN_WEB)]);
    assert_eq!(r.state.plan.subtasks.len(), 5);
    assert_eq!(r.state.plan.subtasks[0], "Open web browser.");
    assert_eq!(r.state.plan.cursor, 0);
}

#[test]
fn acting_filters_non_device_actions() {
    let mixed = r#"Here you go.
```json
[{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":5,"height":6}}]
```
And also
```json
{"action_type":"EvaluateSubTaskAction","situation":"sub_task_success"}
```"#;
    let r = run(&[
        (P, PLAN2),
        (A, mixed),
        (R, SUCCESS),
        (A, DOUBLE),
        (R, SUCCESS),
    ]);
    assert_eq!(r.state.phase, Phase::Done);
    let click = Action::MouseClick {
        button: MouseButton::Left,
        position: MousePosition::new(5, 6),
    };
    assert_eq!(r.desktop.executed()[0], [click]);
    assert_eq!(r.records[1].outcome.faults.len(), 1);
    assert!(r.records[1].outcome.faults[0]
        .reason
        .contains("EvaluateSubTaskAction"));
    let dbl = Action::MouseDoubleClick {
        button: MouseButton::Left,
        position: MousePosition::new(60, 135),
    };
    assert_eq!(r.desktop.executed()[1], [dbl]);
}

#[test]
fn empty_action_set_retries_with_advice() {
    let r = run(&[
        (P, PLAN2),
        (A, "I am not sure."),
        (A, CLICK),
        (R, SUCCESS),
        (A, CLICK),
        (R, SUCCESS),
    ]);
    assert_eq!(r.state.phase, Phase::Done);
    assert_eq!(r.state.retries, [1, 0]);
    assert!(r.records[2].prompt.contains(EMPTY_ACTIONS_ADVICE));
    assert!(r.records[1].executed.is_empty());
}

#[test]
fn out_of_bounds_actions_are_not_executed() {
    let far = r#"```json
{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":5000,"height":6}}
```"#;
    let r = run(&[(P, PLAN2), (A, far), (A, CLICK)]);
    assert_eq!(r.desktop.executed().len(), 1);
    assert!(r.records[1].outcome.faults[0]
        .reason
        .contains("outside the 1024x768 screen"));
}

#[test]
fn unparseable_evaluation_retries_once_then_fails() {
    let r = run(&[
        (P, PLAN2),
        (A, CLICK),
        (R, "Looks fine to me"),
        (A, CLICK),
        (R, "Yes"),
    ]);
    assert_eq!(r.state.phase, Phase::Failed);
    assert_eq!(r.records.len(), 5);
    assert_eq!(r.records[2].evaluation.as_ref().unwrap().situation, None);
}

#[test]
fn sessions_are_deterministic() {
    let s = [
        (P, PLAN2),
        (A, CLICK),
        (R, RETRY),
        (A, CLICK),
        (R, SUCCESS),
        (A, DOUBLE),
        (R, SUCCESS),
    ];
    let a = run(&s);
    let b = run(&s);
    let key = |r: &Run| -> Vec<(String, String, Vec<Action>)> {
        r.records
            .iter()
            .map(|s| (s.prompt.clone(), s.response.clone(), s.executed.clone()))
            .collect()
    };
    assert_eq!(key(&a), key(&b));
}

struct FailingSink {
    ok: usize,
    seen: usize,
}

impl StepSink for FailingSink {
    fn persist(&mut self, _: &SessionState, _: &StepRecord) -> Result<(), String> {
        self.seen += 1;
        if self.seen > self.ok {
            Err("disk full".into())
        } else {
            Ok(())
        }
    }
}

#[test]
fn persistence_failure_stops_before_progress() {
    let gw = script(&[
        (P, PLAN2),
        (A, CLICK),
        (R, SUCCESS),
        (A, DOUBLE),
        (R, SUCCESS),
    ]);
    let mut desktop = MemoryDesktop::new(1024, 768);
    let mut sink = FailingSink { ok: 1, seen: 0 };
    let templates = Templates::default();
    let state = SessionState::new("t", (1024, 768), Mode::Autonomous, Budgets::default());
    let state = Session::new(state, &mut desktop, &gw, &mut sink, &templates).run();
    assert_eq!(state.phase, Phase::Failed);
    assert_eq!(state.history, [0]);
    assert_eq!(sink.seen, 2);
}

struct ScriptedGate {
    decisions: Mutex<Vec<GateDecision>>,
    seen: Mutex<Vec<(u32, PhaseTag, usize)>>,
}

impl DecisionGate for ScriptedGate {
    fn decide(&self, p: &Proposal<'_>) -> GateDecision {
        self.seen
            .lock()
            .unwrap()
            .push((p.step_index, p.phase, p.actions.len()));
        let mut d = self.decisions.lock().unwrap();
        if d.is_empty() {
            GateDecision::Approve
        } else {
            d.remove(0)
        }
    }
}

#[test]
fn supervised_edit_and_reject() {
    let edited = r#"```json
[{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":12,"height":700}}]
```"#;
    let gate = ScriptedGate {
        decisions: Mutex::new(vec![
            GateDecision::Approve,
            GateDecision::Reject {
                advice: "Use the taskbar icon instead.".into(),
            },
            GateDecision::Edit {
                response: edited.into(),
            },
        ]),
        seen: Mutex::new(Vec::new()),
    };
    let gw = script(&[
        (P, PLAN2),
        (A, CLICK),
        (A, CLICK),
        (R, SUCCESS),
        (A, DOUBLE),
        (R, SUCCESS),
    ]);
    let r = run_with(&gw, Mode::Supervised, Some(&gate));
    assert_eq!(r.state.phase, Phase::Done, "{:?}", r.state.failure);
    // rejected step executes nothing, edited step executes the edit
    assert_eq!(r.desktop.executed().len(), 2);
    let edit = Action::MouseClick {
        button: MouseButton::Left,
        position: MousePosition::new(12, 700),
    };
    assert_eq!(r.desktop.executed()[0], [edit]);
    assert!(r.records[1].executed.is_empty());
    assert!(r.records[2].prompt.contains(
        "Here are some suggestions for performing this subtask: \"Use the taskbar icon instead.\"."
    ));
    assert_eq!(r.records[2].golden.as_deref(), Some(edited));
    assert_eq!(r.records[2].response, CLICK);
    assert_eq!(r.state.retries[0], 1);
    assert_eq!(gate.seen.lock().unwrap().len(), 6);
}

#[test]
fn supervised_reject_during_reflecting_is_a_retry() {
    let gate = ScriptedGate {
        decisions: Mutex::new(vec![
            GateDecision::Approve,
            GateDecision::Approve,
            GateDecision::Reject {
                advice: "The window did not open.".into(),
            },
        ]),
        seen: Mutex::new(Vec::new()),
    };
    let gw = script(&[
        (P, PLAN2),
        (A, CLICK),
        (R, SUCCESS),
        (A, CLICK),
        (R, SUCCESS),
        (A, CLICK),
        (R, SUCCESS),
    ]);
    let r = run_with(&gw, Mode::Supervised, Some(&gate));
    assert_eq!(r.state.phase, Phase::Done);
    assert_eq!(
        r.records[2].evaluation.as_ref().unwrap().situation,
        Some(Situation::NeedRetry)
    );
    assert!(r.records[3].prompt.contains("The window did not open."));
}

#[test]
fn observer_sees_transitions_in_order() {
    let gw = script(&[
        (P, PLAN2),
        (A, CLICK),
        (R, SUCCESS),
        (A, DOUBLE),
        (R, SUCCESS),
    ]);
    let events = Mutex::new(Vec::new());
    let observer = |e: &PipelineEvent| {
        if let PipelineEvent::Phase { to, .. } = e {
            events.lock().unwrap().push(*to);
        }
    };
    let mut desktop = MemoryDesktop::new(1024, 768);
    let mut sink = VecSink::default();
    let templates = Templates::default();
    let state = SessionState::new("t", (1024, 768), Mode::Autonomous, Budgets::default());
    Session::new(state, &mut desktop, &gw, &mut sink, &templates)
        .with_observer(&observer)
        .run();
    assert_eq!(
        *events.lock().unwrap(),
        [
            Phase::Acting,
            Phase::Reflecting,
            Phase::Acting,
            Phase::Reflecting,
            Phase::Done
        ]
    );
}

#[test]
fn render_prompt_attaches_screenshot() {
    let mut d = MemoryDesktop::new(8, 6);
    let shot = d.capture().unwrap();
    let mut state = SessionState::new(
        "search the web",
        (8, 6),
        Mode::Autonomous,
        Budgets::default(),
    );
    state.plan.subtasks = vec!["Open web browser.".into()];
    let turns = render_prompt(
        &Templates::default(),
        PhaseTag::Acting,
        &state,
        Some("Try again."),
        &shot,
    )
    .unwrap();
    assert_eq!(turns.len(), 1);
    let text = turns[0].text();
    assert!(text.contains("video width: 8, video height: 6"));
    assert!(text.contains("Here are some suggestions for performing this subtask: \"Try again.\"."));
    assert_eq!(turns[0].parts.len(), 2);
}

const SMALL_CLICK: &str = r#"```json
{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":10,"height":20}}
```"#;

/// Answers planning with a fixed plan, acting with a click and reflecting
/// from a queue (success once the queue is empty).
struct Policy {
    subtasks: usize,
    verdicts: Mutex<Vec<u8>>,
}

impl ChatBackend for Policy {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        Ok(match req.tag {
            PhaseTag::Planning => {
                let items: Vec<String> = (0..self.subtasks)
                    .map(|i| format!(r#"{{"action_type":"PlanAction","element":"step {i}"}}"#))
                    .collect();
                format!("```json\n[{}]\n```", items.join(","))
            }
            PhaseTag::Acting => SMALL_CLICK.to_string(),
            PhaseTag::Reflecting => {
                let mut v = self.verdicts.lock().unwrap();
                let next = if v.is_empty() { 0 } else { v.remove(0) };
                match next {
                    0 => SUCCESS.to_string(),
                    1 => r#"```json {"action_type":"EvaluateSubTaskAction","situation":"need_retry","advice":"advice-retry"} ```"#.to_string(),
                    2 => r#"```json {"action_type":"EvaluateSubTaskAction","situation":"need_reformulate","advice":"advice-reform"} ```"#.to_string(),
                    _ => "no idea".to_string(),
                }
            }
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transitions_and_budgets_hold(subtasks in 1usize..4, verdicts in proptest::collection::vec(0u8..4, 0..14)) {
        let backend = Arc::new(Policy { subtasks, verdicts: Mutex::new(verdicts) });
        let gw = Gateway::new(backend, 1);
        let mut desktop = MemoryDesktop::new(64, 48);
        let mut sink = VecSink::default();
        let templates = Templates::default();
        let state = SessionState::new("t", (64, 48), Mode::Autonomous, Budgets::default());
        let state = Session::new(state, &mut desktop, &gw, &mut sink, &templates).run();
        prop_assert!(state.phase.is_terminal());
        for w in state.phases.windows(2) {
            prop_assert!(w[0].can_move_to(w[1]), "{:?} -> {:?}", w[0], w[1]);
        }
        prop_assert!(state.retries.iter().all(|r| *r <= state.budgets.max_retries));
        // advice reaches the next prompt and no other
        let recs = &sink.records;
        for (k, rec) in recs.iter().enumerate() {
            if let (Some(adv), Some(next)) = (rec.evaluation.as_ref().and_then(|e| e.advice.as_ref()), recs.get(k + 1)) {
                prop_assert!(next.prompt.contains(adv.as_str()));
            }
            for adv in ["advice-retry", "advice-reform"] {
                if rec.prompt.contains(adv) {
                    let prev = k.checked_sub(1).and_then(|j| recs[j].evaluation.as_ref());
                    prop_assert_eq!(prev.and_then(|e| e.advice.as_deref()), Some(adv));
                }
            }
        }
        prop_assert_eq!(state.history.len(), sink.records.len());
    }
}
