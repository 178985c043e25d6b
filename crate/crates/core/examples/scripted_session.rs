//! Run a full plan/act/reflect session against an in-memory desktop with a
//! scripted model, writing every step to a session store.
//!
//! `cargo run --example scripted_session -- /tmp/sessions`

use std::sync::Arc;

use screenagent::env::MemoryDesktop;
use screenagent::gateway::{Gateway, PhaseTag, ScriptEntry, ScriptedBackend};
use screenagent::pipeline::{run_session, AutoApprove, Mode};
use screenagent::store::{NewSession, Store};

const PLAN: &str = r#"```json
[
    {"action_type": "PlanAction", "element": "Open Notebook"},
    {"action_type": "PlanAction", "element": "Type a greeting"}
]
```"#;
const OPEN: &str = r#"```json
[{"action_type":"MouseAction","mouse_action_type":"double_click","mouse_button":"left","mouse_position":{"width":60,"height":135}}]
```"#;
const TYPE: &str = r#"```json
[{"action_type":"KeyboardAction","keyboard_action_type":"text","keyboard_text":"Hello!"}]
```"#;
const RETRY: &str = r#"```json {"action_type":"EvaluateSubTaskAction","situation":"need_retry","advice":"double click the icon, not the label"} ```"#;
const OK: &str =
    r#"```json {"action_type":"EvaluateSubTaskAction","situation":"sub_task_success"} ```"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "sessions".into());
    let script = [
        (PhaseTag::Planning, PLAN),
        (PhaseTag::Acting, OPEN),
        (PhaseTag::Reflecting, RETRY),
        (PhaseTag::Acting, OPEN),
        (PhaseTag::Reflecting, OK),
        (PhaseTag::Acting, TYPE),
        (PhaseTag::Reflecting, OK),
    ];
    let backend = ScriptedBackend::new(
        script
            .iter()
            .map(|(t, r)| ScriptEntry::new(*t, *r))
            .collect(),
    );
    let gateway = Gateway::new(Arc::new(backend), 1);
    let mut desktop = MemoryDesktop::new(800, 600);

    let store = Store::open(&root)?;
    let task = "Open Notebook and type a greeting";
    let mut writer = store.create_session(NewSession::new(task, (800, 600), Mode::Autonomous))?;
    let state = run_session(
        task,
        &mut desktop,
        &gateway,
        &mut writer,
        Mode::Autonomous,
        &AutoApprove,
    );
    writer.finish(&state)?;

    println!("session {} ended {:?}", writer.id(), state.phase);
    println!("phases: {:?}", state.phases);
    for step in store.load_session(writer.id())?.steps {
        println!(
            "  step {} {:?} {} actions",
            step.index(),
            step.meta.phase,
            step.actions.len()
        );
    }
    Ok(())
}
