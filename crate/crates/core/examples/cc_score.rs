//! Score predicted actions against gold annotations.

use screenagent::action::{Action, MouseButton, MousePosition};
use screenagent::score::{
    best_alignment, bleu1, cc_score, chord_tokens, function_call_success, similarity_matrix,
    text_tokens, BBox, GoldAction,
};

fn click(x: u32, y: u32) -> Action {
    Action::MouseClick {
        button: MouseButton::Left,
        position: MousePosition::new(x, y),
    }
}

fn main() {
    let gold = vec![
        GoldAction::with_bbox(click(12, 758), BBox::new(0, 740, 40, 767)),
        GoldAction::new(Action::KeyboardText {
            text: "hello world".into(),
        }),
        GoldAction::new(Action::KeyboardPress {
            key: "Ctrl+S".into(),
        }),
    ];
    let pred = vec![
        click(10, 760),
        Action::KeyboardText {
            text: "hello".into(),
        },
        Action::KeyboardPress {
            key: "Ctrl+C".into(),
        },
    ];

    let s = similarity_matrix(&gold, &pred);
    for row in &s {
        println!("{row:.3?}");
    }
    let a = best_alignment(&s);
    println!("alignment {:?} total {:.4}", a.pairs, a.total);
    println!("cc-score {:.4}", cc_score(&gold, &pred).unwrap());

    let b = bleu1(&text_tokens("hello world"), &text_tokens("hello")).unwrap();
    let c = bleu1(&chord_tokens("Ctrl+S"), &chord_tokens("Ctrl+C")).unwrap();
    println!("bleu-1 text {b:.6} chord {c}");

    let plain: Vec<Action> = gold.iter().map(|g| g.action.clone()).collect();
    let response = r#"```json [{"action_type":"MouseAction","mouse_action_type":"click","mouse_button":"left"},{"action_type":"KeyboardAction","keyboard_action_type":"text","keyboard_text":"hello"}] ```"#;
    let report = function_call_success([(plain.as_slice(), response)]);
    for (cat, p) in report.proportions() {
        println!(
            "{:<24} {}",
            cat.name(),
            p.map_or("-".into(), |p| format!("{p:.3}"))
        );
    }
}
