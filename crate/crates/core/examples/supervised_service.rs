//! Start the control service, create a supervised session over HTTP and
//! approve each proposal the way the annotation console would.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use screenagent::env::{EnvError, Environment, MemoryDesktop};
use screenagent::gateway::{Gateway, PhaseTag, ScriptEntry, ScriptedBackend};
use screenagent::service::{RunningService, ServiceConfig, SessionFactory};
use screenagent::store::Store;

struct Demo;

impl SessionFactory for Demo {
    fn environment(&self) -> Result<Box<dyn Environment>, EnvError> {
        Ok(Box::new(MemoryDesktop::new(640, 480)))
    }

    fn gateway(&self) -> Gateway {
        let entries = vec![
            ScriptEntry::new(
                PhaseTag::Planning,
                r#"```json [{"action_type":"PlanAction","element":"Open the browser"}] ```"#,
            ),
            ScriptEntry::new(
                PhaseTag::Acting,
                r#"```json [{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":20,"height":460}}] ```"#,
            ),
            ScriptEntry::new(
                PhaseTag::Reflecting,
                r#"```json {"action_type":"EvaluateSubTaskAction","situation":"sub_task_success"} ```"#,
            ),
        ];
        Gateway::new(Arc::new(ScriptedBackend::new(entries)), 1)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("screenagent-demo-{}", std::process::id()));
    let config = ServiceConfig::new(Store::open(&dir)?, Arc::new(Demo));
    let addr: SocketAddr = "127.0.0.1:0".parse()?;
    let server = RunningService::start(config, addr)?;
    println!("listening on {}", server.url("/"));

    let http = reqwest::blocking::Client::new();
    let post = |path: &str, body: Value| -> Result<Value, reqwest::Error> {
        let text = http
            .post(server.url(path))
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()?
            .text()?;
        Ok(serde_json::from_str(&text).unwrap_or(Value::Null))
    };
    let get = |path: &str| -> Result<(u16, Value), reqwest::Error> {
        let r = http.get(server.url(path)).send()?;
        let status = r.status().as_u16();
        let text = r.text()?;
        Ok((status, serde_json::from_str(&text).unwrap_or(Value::Null)))
    };

    let created = post(
        "/sessions",
        json!({"task_prompt": "open the browser", "mode": "supervised"}),
    )?;
    let id = created["id"].as_str().unwrap_or_default().to_string();
    println!("created {id}");

    loop {
        let (_, view) = get(&format!("/sessions/{id}"))?;
        if matches!(view["phase"].as_str(), Some("done" | "failed")) {
            println!("finished in phase {}", view["phase"]);
            break;
        }
        let (status, pending) = get(&format!("/sessions/{id}/pending"))?;
        if status == 200 {
            println!(
                "approving step {} ({})",
                pending["step_id"], pending["phase"]
            );
            post(
                &format!("/sessions/{id}/decision"),
                json!({"step_id": pending["step_id"], "decision": "approve"}),
            )?;
        }
        std::thread::sleep(Duration::from_millis(20));
    }

    let (_, step) = get(&format!("/sessions/{id}/steps/1"))?;
    println!("step 1 actions: {}", step["actions"]);
    server.stop();
    std::fs::remove_dir_all(dir)?;
    Ok(())
}
