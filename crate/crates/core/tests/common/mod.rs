#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use serde_json::Value;

pub mod corpus;

pub fn unhex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

/// Byte fixtures produced by `tests/fixtures/gen_rfb_fixtures.py`.
pub fn rfb_fixtures() -> Value {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/rfb_fixtures.json"
    );
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn fixture_bytes(v: &Value) -> Vec<u8> {
    unhex(v.as_str().expect("hex string"))
}

#[derive(Debug, Clone)]
pub enum Step {
    Send(Vec<u8>),
    /// Read exactly this many bytes from the client.
    Expect(usize),
}

/// A TCP peer that plays a fixed server script and returns the bytes the
/// client sent at each `Expect` step.
pub struct ScriptedPeer {
    pub port: u16,
    rx: mpsc::Receiver<Vec<Vec<u8>>>,
}

impl ScriptedPeer {
    pub fn spawn(steps: Vec<Step>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut got = Vec::new();
            for step in steps {
                match step {
                    Step::Send(b) => {
                        if s.write_all(&b).is_err() {
                            break;
                        }
                    }
                    Step::Expect(n) => {
                        let mut b = vec![0u8; n];
                        if s.read_exact(&mut b).is_err() {
                            break;
                        }
                        got.push(b);
                    }
                }
            }
            // keep the socket open until the client is done
            let mut sink = Vec::new();
            let _ = s.read_to_end(&mut sink);
            let _ = tx.send(got);
        });
        Self { port, rx }
    }

    pub fn received(self) -> Vec<Vec<u8>> {
        self.rx.recv().unwrap()
    }
}

/// Server script for a None-security 3.8 handshake ending in `server_init`,
/// followed by the client's SetPixelFormat + SetEncodings (28 bytes).
pub fn handshake_steps(server_init: Vec<u8>) -> Vec<Step> {
    vec![
        Step::Send(b"RFB 003.008\n".to_vec()),
        Step::Expect(12),
        Step::Send(vec![1, 1]),
        Step::Expect(1),
        Step::Send(vec![0, 0, 0, 0]),
        Step::Expect(1),
        Step::Send(server_init),
        Step::Expect(28),
    ]
}

/// Best total over every order-preserving matching, each summed in index
/// order starting from 0.0.
pub fn brute_force_alignment(s: &[Vec<f64>]) -> f64 {
    fn go(s: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
        if acc > *best {
            *best = acc;
        }
        let m = s.first().map_or(0, Vec::len);
        for ii in i..s.len() {
            for jj in j..m {
                go(s, ii + 1, jj + 1, acc + s[ii][jj], best);
            }
        }
    }
    let mut best = 0.0;
    go(s, 0, 0, 0.0, &mut best);
    best
}

pub mod strategies {
    use proptest::prelude::*;
    use screenagent::action::{Action, MouseButton, MousePosition, Situation};

    pub fn button() -> impl Strategy<Value = MouseButton> {
        prop_oneof![
            Just(MouseButton::Left),
            Just(MouseButton::Middle),
            Just(MouseButton::Right)
        ]
    }

    pub fn position() -> impl Strategy<Value = MousePosition> {
        (0u32..1920, 0u32..1080).prop_map(|(w, h)| MousePosition::new(w, h))
    }

    pub fn key() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("Return".to_string()),
            Just("Ctrl+A".to_string()),
            Just("Ctrl+Shift+T".to_string()),
            Just("Alt+F4".to_string()),
            Just("a".to_string()),
            Just("F5".to_string()),
            Just("Ctrl++".to_string()),
        ]
    }

    pub fn situation() -> impl Strategy<Value = Situation> {
        prop_oneof![
            Just(Situation::SubTaskSuccess),
            Just(Situation::NeedRetry),
            Just(Situation::NeedReformulate)
        ]
    }

    pub fn words() -> impl Strategy<Value = String> {
        proptest::collection::vec("[a-z]{1,6}", 1..5).prop_map(|w| w.join(" "))
    }

    pub fn device_action() -> impl Strategy<Value = Action> {
        prop_oneof![
            position().prop_map(|position| Action::MouseMove { position }),
            (button(), position())
                .prop_map(|(button, position)| Action::MouseClick { button, position }),
            (button(), position())
                .prop_map(|(button, position)| Action::MouseDoubleClick { button, position }),
            (1u32..20).prop_map(|repeat| Action::MouseScrollUp { repeat }),
            (1u32..20).prop_map(|repeat| Action::MouseScrollDown { repeat }),
            (button(), position()).prop_map(|(button, end_position)| Action::MouseDrag {
                button,
                end_position
            }),
            key().prop_map(|key| Action::KeyboardPress { key }),
            "[ -~]{0,20}".prop_map(|text| Action::KeyboardText { text }),
            (0u32..100).prop_map(|t| Action::Wait {
                seconds: t as f64 / 4.0
            }),
        ]
    }

    pub fn action() -> impl Strategy<Value = Action> {
        prop_oneof![
            4 => device_action(),
            1 => words().prop_map(|element| Action::Plan { element }),
            1 => (situation(), proptest::option::of(words()))
                .prop_map(|(situation, advice)| Action::Evaluate { situation, advice }),
        ]
    }
}
