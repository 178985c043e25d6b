//! JSON function-call examples from the prompt templates and the answer
//! templates, with `int`/`float`/`{{ var }}` placeholders instantiated.

pub const SAMPLE_RESPONSES: &[(&str, &str)] = &[
    (
        "planning: web search",
        r#"```json 
[
    {"action_type": "PlanAction", "element": "Open web browser."},
    {"action_type": "PlanAction", "element": "Search in your browser for \"What's the deal with the Wheat Field Circle?\""},
    {"action_type": "PlanAction", "element": "Open the first search result"},
    {"action_type": "PlanAction", "element": "Browse the content of the page"},
    {"action_type": "PlanAction", "element": "Answer the question \"What's the deal with the Wheat Field Circle?\" according to the content."}
]
```"#,
    ),
    (
        "planning: notebook",
        r#"```json
[
    {"action_type": "PlanAction", "element": "Open Notebook"},
    {"action_type": "PlanAction", "element": "Write a brief paragraph about AI in the notebook"}
]
```"#,
    ),
    (
        "acting: option list",
        r#"```json
[
    {"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":100,"height":200} },
    {"action_type":"MouseAction","mouse_action_type":"double_click","mouse_button":"left","mouse_position":{"width":300,"height":400} },
    {"action_type":"MouseAction","mouse_action_type":"scroll_up","scroll_repeat":3},
    {"action_type":"MouseAction","mouse_action_type":"scroll_down","scroll_repeat":5},
    {"action_type":"MouseAction","mouse_action_type":"move","mouse_position":{"width":12,"height":34} },
    {"action_type":"MouseAction","mouse_action_type":"drag","mouse_button":"left","mouse_position":{"width":56,"height":78} },
    {"action_type":"KeyboardAction","keyboard_action_type":"press","keyboard_key":"KeyName in keysymdef"},
    {"action_type":"KeyboardAction","keyboard_action_type":"press","keyboard_key":"Ctrl+A"},
    {"action_type":"KeyboardAction","keyboard_action_type":"text","keyboard_text": "Hello, world!"},
    {"action_type":"WaitAction","wait_time":1.5}
]
```"#,
    ),
    (
        "acting: start button",
        r#"My plan is to click the Start button, it's on the left bottom corner, so my action will be:
```json 
[
    {"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":10,"height":760} }
]
```"#,
    ),
    (
        "acting: mousepad",
        r#"Another example, my plan is to open Notepad and I see Mousepad app on the screen, so my action will be:
```json
[
    {"action_type":"MouseAction","mouse_action_type":"double_click","mouse_button":"left","mouse_position":{"width":60,"height":135} }
]
```"#,
    ),
    (
        "reflecting: success",
        r#"```json  {"action_type":"EvaluateSubTaskAction", "situation": "sub_task_success"} ```"#,
    ),
    (
        "reflecting: retry",
        r#"```json  {"action_type":"EvaluateSubTaskAction", "situation": "need_retry", "advice": "I don't think you're clicking in the right place."} ```"#,
    ),
    (
        "reflecting: reformulate",
        r#"```json  {"action_type":"EvaluateSubTaskAction", "situation": "need_reformulate", "advice": "I think the current plan is not suitable for the current situation, because the system does not have .... installed"} ```"#,
    ),
    (
        "answer: click object",
        r#"My plan is to click the red umbrella, so my action will be:
```json 
[
    {"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":320,"height":240}}
]
```"#,
    ),
    (
        "answer: drag box",
        r#"My plan is to drag draw a box of the red umbrella, so my action will be:
```json 
[
    {"action_type":"MouseAction","mouse_action_type":"move","mouse_position":{"width":280,"height":200}},
    {"action_type":"MouseAction","mouse_action_type":"drag","mouse_button":"left","mouse_position":{"width":360,"height":280}}
]
```"#,
    ),
    (
        "answer: web click",
        r#"To finish "buy shoes", I need to finish the current_task"open the menu" by this action:
```json 
[
    {"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":64,"height":32}}
]
```"#,
    ),
    (
        "answer: web type",
        r#"To finish "buy shoes", I need to finish the current_task"search for shoes" by this action:
```json 
[
    {"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":400,"height":90}},
    {"action_type":"KeyboardAction","keyboard_action_type":"text","keyboard_text":"red shoes"},
    {"action_type":"KeyboardAction","keyboard_action_type":"press","keyboard_key":"Enter"}
]
```"#,
    ),
    (
        "answer: web plan",
        r#"I can see a shop page about shopping shoes, and I'm now targeting buy red shoes.
Based on the screen I'm seeing I've set up some detailed plans for this goal:
```json 
[
    {"action_type":"PlanAction", "element":"Search for red shoes"},
    {"action_type":"PlanAction", "element":"Open the first result"}
]
```"#,
    ),
];

const CLICK_POS: &str = r#""mouse_position":{"width":1,"height":2}"#;

/// Malformed responses and the `missing_keys` of their single fault.
pub fn malformed() -> Vec<(String, Vec<&'static str>)> {
    let m = |body: &str| format!("```json\n{body}\n```");
    vec![
        (
            m(&format!(
                r#"{{"mouse_action_type":"click","mouse_button":"left",{CLICK_POS}}}"#
            )),
            vec!["action_type"],
        ),
        (
            m(&format!(
                r#"{{"action_type":"MouseAction","mouse_button":"left",{CLICK_POS}}}"#
            )),
            vec!["mouse_action_type"],
        ),
        (
            m(r#"{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left"}"#),
            vec!["mouse_position"],
        ),
        (
            m(&format!(
                r#"{{"action_type":"MouseAction","mouse_action_type":"click",{CLICK_POS}}}"#
            )),
            vec!["mouse_button"],
        ),
        (
            m(r#"{"action_type":"MouseAction","mouse_action_type":"click"}"#),
            vec!["mouse_button", "mouse_position"],
        ),
        (
            m(
                r#"{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{"width":1}}"#,
            ),
            vec!["mouse_position.height"],
        ),
        (
            m(
                r#"{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left","mouse_position":{}}"#,
            ),
            vec!["mouse_position.width", "mouse_position.height"],
        ),
        (
            m(
                r#"{"action_type":"MouseAction","mouse_action_type":"double_click","mouse_position":{"height":3}}"#,
            ),
            vec!["mouse_button", "mouse_position.width"],
        ),
        (
            m(r#"{"action_type":"MouseAction","mouse_action_type":"move"}"#),
            vec!["mouse_position"],
        ),
        (
            m(r#"{"action_type":"MouseAction","mouse_action_type":"drag","mouse_button":"left"}"#),
            vec!["mouse_position"],
        ),
        (
            m(r#"{"action_type":"MouseAction","mouse_action_type":"scroll_up"}"#),
            vec!["scroll_repeat"],
        ),
        (
            m(
                r#"{"action_type":"MouseAction","mouse_action_type":"scroll_down","scroll_repeat":null}"#,
            ),
            vec!["scroll_repeat"],
        ),
        (
            m(r#"{"action_type":"KeyboardAction","keyboard_key":"Return"}"#),
            vec!["keyboard_action_type"],
        ),
        (
            m(r#"{"action_type":"KeyboardAction","keyboard_action_type":"press"}"#),
            vec!["keyboard_key"],
        ),
        (
            m(r#"{"action_type":"KeyboardAction","keyboard_action_type":"text"}"#),
            vec!["keyboard_text"],
        ),
        (m(r#"{"action_type":"WaitAction"}"#), vec!["wait_time"]),
        (m(r#"[{"action_type":"PlanAction"}]"#), vec!["element"]),
        (
            m(r#"{"action_type":"EvaluateSubTaskAction","advice":"try again"}"#),
            vec!["situation"],
        ),
        (
            m(&format!(
                r#"[{{"action_type":"PlanAction"}},{{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left",{CLICK_POS}}},{{"action_type":"WaitAction"}}]"#
            )),
            vec!["element", "wait_time"],
        ),
        (
            m(
                r#"[{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left"},{"action_type":"MouseAction","mouse_action_type":"move"}]"#,
            ),
            vec!["mouse_position"],
        ),
    ]
}
