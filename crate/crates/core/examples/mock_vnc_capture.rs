//! Drive the bundled mock RFB server: connect, click, type and save a screenshot.
//!
//! `cargo run --example mock_vnc_capture -- out.png`

use std::time::Duration;

use screenagent::action::{Action, MouseButton, MousePosition};
use screenagent::env::rfb::mock::{MockConfig, MockRfbServer};
use screenagent::env::rfb::RfbConfig;
use screenagent::env::{Environment, VncEnv, ZeroReward};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "capture.png".into());
    let server =
        MockRfbServer::spawn(MockConfig::solid(320, 200, [40, 90, 160]).with_password("demo"))?;
    let config = RfbConfig::new("127.0.0.1", server.port())
        .with_password("demo")
        .with_settle_delay(Duration::from_millis(50));
    let mut env = VncEnv::connect(&config)?;
    println!("connected, screen {:?}", env.screen_size());

    let actions = [
        Action::MouseClick {
            button: MouseButton::Left,
            position: MousePosition::new(10, 190),
        },
        Action::KeyboardText { text: "hi".into() },
        Action::KeyboardPress {
            key: "Enter".into(),
        },
    ];
    let step = env.execute(&actions, &ZeroReward)?;
    println!(
        "before {} after {} in {:?}",
        step.before.digest(),
        step.after.digest(),
        step.wall_time
    );
    println!(
        "{} bytes of input reached the server",
        server.input_bytes().len()
    );
    step.after.save_png(&out)?;
    println!("wrote {out}");
    Ok(())
}
