//! Parse a model response into actions, report faults, and print the canonical form.

use screenagent::action::{parse_response, to_response_text, validate_for_screen};

const RESPONSE: &str = r#"I will open the start menu first.
```json
[
    {"action_type": "MouseAction", "mouse_action_type": "click", "mouse_button": "left", "mouse_position": {"width": 10, "height": 760}},
    {"action_type": "KeyboardAction", "keyboard_action_type": "text", "keyboard_text": "notepad"},
    {"action_type": "KeyboardAction", "keyboard_action_type": "press", "keyboard_key": "Enter"},
    {"action_type": "WaitAction", "wait_time": 1.5}
]
```
And a broken one:
```json
{"action_type": "MouseAction", "mouse_action_type": "click"}
```"#;

fn main() {
    let out = parse_response(RESPONSE);
    println!("{} blocks, {} actions", out.block_count, out.actions.len());
    for a in &out.actions {
        let problems = validate_for_screen(a, 1024, 768);
        println!("  {}  {:?}", a.serialize(), problems);
    }
    for f in &out.faults {
        println!(
            "fault in block {}: missing {:?} ({})",
            f.block_index, f.missing_keys, f.reason
        );
    }
    for n in &out.notes {
        println!("note: {n}");
    }
    println!("\ncanonical:\n{}", to_response_text(&out.actions));
}
