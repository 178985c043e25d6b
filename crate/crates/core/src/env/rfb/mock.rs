//! A small in-process RFB server for tests, examples and offline demos.
//!
//! It serves a fixed RGB framebuffer with Raw encoding, honours
//! SetPixelFormat, and logs every byte and message the client sends after
//! the handshake.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::SystemTime;

use super::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockAuth {
    None,
    Password(String),
}

#[derive(Debug, Clone)]
pub struct MockConfig {
    /// The 12-byte ProtocolVersion the server announces.
    pub version: [u8; 12],
    pub auth: MockAuth,
    pub width: u16,
    pub height: u16,
    /// RGB8 framebuffer, `width * height * 3` bytes.
    pub framebuffer: Vec<u8>,
    /// When set, each update is sent as two messages split at this row.
    pub split_at_row: Option<u16>,
    /// Paint a small white square where a pointer button goes down.
    pub paint_clicks: bool,
    pub name: String,
}

impl MockConfig {
    pub fn solid(width: u16, height: u16, rgb: [u8; 3]) -> Self {
        let framebuffer = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self {
            version: *PROTOCOL_VERSION_3_8,
            auth: MockAuth::None,
            width,
            height,
            framebuffer,
            split_at_row: None,
            paint_clicks: false,
            name: "mock".into(),
        }
    }

    pub fn with_password(mut self, password: impl Into<String>) -> Self {
        self.auth = MockAuth::Password(password.into());
        self
    }

    pub fn with_version(mut self, version: &[u8; 12]) -> Self {
        self.version = *version;
        self
    }
}

/// A decoded client-to-server message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientMessage {
    SetPixelFormat(PixelFormat),
    SetEncodings(Vec<i32>),
    FramebufferUpdateRequest {
        incremental: bool,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    KeyEvent {
        down: bool,
        keysym: u32,
    },
    PointerEvent {
        mask: u8,
        x: u16,
        y: u16,
    },
    ClientCutText(String),
}

#[derive(Debug, Clone)]
pub struct LoggedMessage {
    pub message: ClientMessage,
    pub bytes: Vec<u8>,
    pub received_at: SystemTime,
}

#[derive(Debug, Default)]
struct Shared {
    framebuffer: Vec<u8>,
    log: Vec<LoggedMessage>,
    auth_failures: usize,
    connections: usize,
}

/// Handle to a running mock server. The listener thread stops when the
/// process exits; each accepted connection is served on its own thread.
#[derive(Debug, Clone)]
pub struct MockRfbServer {
    addr: SocketAddr,
    shared: Arc<Mutex<Shared>>,
}

impl MockRfbServer {
    pub fn spawn(config: MockConfig) -> io::Result<Self> {
        assert_eq!(
            config.framebuffer.len(),
            config.width as usize * config.height as usize * 3
        );
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Mutex::new(Shared {
            framebuffer: config.framebuffer.clone(),
            ..Default::default()
        }));
        let config = Arc::new(config);
        let s = shared.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let (s, config) = (s.clone(), config.clone());
                thread::spawn(move || {
                    let _ = serve(stream, &config, &s);
                });
            }
        });
        Ok(Self { addr, shared })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Every message received after the handshake, in order.
    pub fn messages(&self) -> Vec<LoggedMessage> {
        self.shared.lock().unwrap().log.clone()
    }

    /// Concatenated raw bytes of all logged messages.
    pub fn received_bytes(&self) -> Vec<u8> {
        self.messages().into_iter().flat_map(|m| m.bytes).collect()
    }

    /// Raw bytes of input events (key and pointer) only.
    pub fn input_bytes(&self) -> Vec<u8> {
        self.messages()
            .into_iter()
            .filter(|m| {
                matches!(
                    m.message,
                    ClientMessage::KeyEvent { .. } | ClientMessage::PointerEvent { .. }
                )
            })
            .flat_map(|m| m.bytes)
            .collect()
    }

    pub fn clear_log(&self) {
        self.shared.lock().unwrap().log.clear();
    }

    pub fn set_framebuffer(&self, rgb: Vec<u8>) {
        let mut s = self.shared.lock().unwrap();
        assert_eq!(rgb.len(), s.framebuffer.len());
        s.framebuffer = rgb;
    }

    pub fn framebuffer(&self) -> Vec<u8> {
        self.shared.lock().unwrap().framebuffer.clone()
    }

    pub fn auth_failures(&self) -> usize {
        self.shared.lock().unwrap().auth_failures
    }

    pub fn connections(&self) -> usize {
        self.shared.lock().unwrap().connections
    }
}

fn read_n(stream: &mut TcpStream, n: usize) -> io::Result<Vec<u8>> {
    let mut b = vec![0u8; n];
    stream.read_exact(&mut b)?;
    Ok(b)
}

fn failure_reason(reason: &str) -> Vec<u8> {
    let mut out = (reason.len() as u32).to_be_bytes().to_vec();
    out.extend_from_slice(reason.as_bytes());
    out
}

fn serve(mut stream: TcpStream, config: &MockConfig, shared: &Mutex<Shared>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    shared.lock().unwrap().connections += 1;
    stream.write_all(&config.version)?;
    let client_version: [u8; 12] = read_n(&mut stream, 12)?.try_into().unwrap();
    let minor = parse_version(&client_version).map(|v| v.1).unwrap_or(0);

    let security = match config.auth {
        MockAuth::None => SECURITY_NONE,
        MockAuth::Password(_) => SECURITY_VNC_AUTH,
    };
    if minor >= 7 {
        stream.write_all(&[1, security])?;
        let chosen = read_n(&mut stream, 1)?[0];
        if chosen != security {
            stream.write_all(&1u32.to_be_bytes())?;
            if minor >= 8 {
                stream.write_all(&failure_reason("unsupported security type"))?;
            }
            return Ok(());
        }
    } else {
        stream.write_all(&(security as u32).to_be_bytes())?;
    }

    match &config.auth {
        MockAuth::None => {
            if minor >= 8 {
                stream.write_all(&0u32.to_be_bytes())?;
            }
        }
        MockAuth::Password(password) => {
            let challenge: [u8; 16] = rand::random();
            stream.write_all(&challenge)?;
            let response = read_n(&mut stream, 16)?;
            if response != vnc_auth_response(password, &challenge) {
                shared.lock().unwrap().auth_failures += 1;
                stream.write_all(&1u32.to_be_bytes())?;
                if minor >= 8 {
                    stream.write_all(&failure_reason("Authentication failed"))?;
                }
                return Ok(());
            }
            stream.write_all(&0u32.to_be_bytes())?;
        }
    }

    let _shared_flag = read_n(&mut stream, 1)?;
    let mut pf = PixelFormat::default();
    let mut init = Vec::new();
    init.extend_from_slice(&config.width.to_be_bytes());
    init.extend_from_slice(&config.height.to_be_bytes());
    init.extend_from_slice(&pf.to_bytes());
    init.extend(failure_reason(&config.name));
    stream.write_all(&init)?;

    loop {
        let (message, bytes) = match read_message(&mut stream) {
            Ok(m) => m,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        };
        {
            let mut s = shared.lock().unwrap();
            if config.paint_clicks {
                if let ClientMessage::PointerEvent { mask, x, y } = message {
                    if mask & 0b111 != 0 {
                        paint(&mut s.framebuffer, config.width, config.height, x, y);
                    }
                }
            }
            s.log.push(LoggedMessage {
                message: message.clone(),
                bytes,
                received_at: SystemTime::now(),
            });
        }
        match message {
            ClientMessage::SetPixelFormat(p) => pf = p,
            ClientMessage::FramebufferUpdateRequest { .. } => {
                let fb = shared.lock().unwrap().framebuffer.clone();
                for update in encode_updates(config, &fb, &pf) {
                    stream.write_all(&update)?;
                }
            }
            _ => {}
        }
    }
}

fn paint(fb: &mut [u8], w: u16, h: u16, x: u16, y: u16) {
    for dy in 0..3u16 {
        for dx in 0..3u16 {
            let (px, py) = (
                x.saturating_add(dx).saturating_sub(1),
                y.saturating_add(dy).saturating_sub(1),
            );
            if px < w && py < h {
                let i = (py as usize * w as usize + px as usize) * 3;
                fb[i..i + 3].copy_from_slice(&[255, 255, 255]);
            }
        }
    }
}

fn encode_rect(config: &MockConfig, fb: &[u8], pf: &PixelFormat, y0: u16, rows: u16) -> Vec<u8> {
    let mut out = vec![server_msg::FRAMEBUFFER_UPDATE, 0];
    out.extend_from_slice(&1u16.to_be_bytes());
    for v in [0, y0, config.width, rows] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&ENCODING_RAW.to_be_bytes());
    let w = config.width as usize;
    for y in y0 as usize..(y0 + rows) as usize {
        for x in 0..w {
            let i = (y * w + x) * 3;
            pf.encode([fb[i], fb[i + 1], fb[i + 2]], &mut out);
        }
    }
    out
}

fn encode_updates(config: &MockConfig, fb: &[u8], pf: &PixelFormat) -> Vec<Vec<u8>> {
    match config.split_at_row {
        Some(split) if split > 0 && split < config.height => vec![
            encode_rect(config, fb, pf, 0, split),
            encode_rect(config, fb, pf, split, config.height - split),
        ],
        _ => vec![encode_rect(config, fb, pf, 0, config.height)],
    }
}

fn read_message(stream: &mut TcpStream) -> io::Result<(ClientMessage, Vec<u8>)> {
    let mut t = [0u8; 1];
    stream.read_exact(&mut t)?;
    let mut bytes = t.to_vec();
    let mut take = |n: usize, bytes: &mut Vec<u8>| -> io::Result<Vec<u8>> {
        let b = read_n(stream, n)?;
        bytes.extend_from_slice(&b);
        Ok(b)
    };
    let msg = match t[0] {
        client_msg::SET_PIXEL_FORMAT => {
            let b = take(19, &mut bytes)?;
            ClientMessage::SetPixelFormat(PixelFormat::from_bytes(b[3..19].try_into().unwrap()))
        }
        client_msg::SET_ENCODINGS => {
            let b = take(3, &mut bytes)?;
            let n = u16::from_be_bytes([b[1], b[2]]) as usize;
            let e = take(n * 4, &mut bytes)?;
            ClientMessage::SetEncodings(
                e.chunks_exact(4)
                    .map(|c| i32::from_be_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        }
        client_msg::FRAMEBUFFER_UPDATE_REQUEST => {
            let b = take(9, &mut bytes)?;
            let u = |i: usize| u16::from_be_bytes([b[i], b[i + 1]]);
            ClientMessage::FramebufferUpdateRequest {
                incremental: b[0] != 0,
                x: u(1),
                y: u(3),
                width: u(5),
                height: u(7),
            }
        }
        client_msg::KEY_EVENT => {
            let b = take(7, &mut bytes)?;
            ClientMessage::KeyEvent {
                down: b[0] != 0,
                keysym: u32::from_be_bytes(b[3..7].try_into().unwrap()),
            }
        }
        client_msg::POINTER_EVENT => {
            let b = take(5, &mut bytes)?;
            ClientMessage::PointerEvent {
                mask: b[0],
                x: u16::from_be_bytes([b[1], b[2]]),
                y: u16::from_be_bytes([b[3], b[4]]),
            }
        }
        client_msg::CLIENT_CUT_TEXT => {
            let b = take(7, &mut bytes)?;
            let len = u32::from_be_bytes(b[3..7].try_into().unwrap()) as usize;
            let text = take(len, &mut bytes)?;
            ClientMessage::ClientCutText(String::from_utf8_lossy(&text).into_owned())
        }
        other => {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unknown client message type {other}"),
            ))
        }
    };
    Ok((msg, bytes))
}
