use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, SystemTime};

use tracing::debug;

use super::*;
use crate::env::{EnvError, Screenshot};

/// Connection settings for an RFB server.
#[derive(Debug, Clone, PartialEq)]
pub struct RfbConfig {
    pub host: String,
    pub port: u16,
    pub password: Option<String>,
    pub pixel_format: PixelFormat,
    pub connect_timeout: Duration,
    /// Read timeout for every server response after connecting.
    pub io_timeout: Duration,
    /// Pause between the last device event and the after-action screenshot.
    pub settle_delay: Duration,
    /// Accept RFB 3.3 servers, whose security negotiation differs.
    pub allow_rfb33: bool,
}

impl RfbConfig {
    pub fn new(host: impl Into<String>, port: u16) -> Self {
        Self {
            host: host.into(),
            port,
            password: None,
            pixel_format: PixelFormat::default(),
            connect_timeout: Duration::from_secs(10),
            io_timeout: Duration::from_secs(10),
            settle_delay: Duration::from_millis(500),
            allow_rfb33: false,
        }
    }

    pub fn with_password(mut self, password: impl Into<String>) -> Self {
        self.password = Some(password.into());
        self
    }

    pub fn with_settle_delay(mut self, d: Duration) -> Self {
        self.settle_delay = d;
        self
    }

    pub fn address(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.connect_timeout.is_zero() || self.io_timeout.is_zero() {
            return Err(EnvError::InvalidAction("timeouts must be positive".into()));
        }
        if !self.pixel_format.is_supported() {
            return Err(EnvError::InvalidAction(
                "preferred pixel format is not a supported true-colour format".into(),
            ));
        }
        Ok(())
    }
}

fn map_io(e: io::Error) -> EnvError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => EnvError::Timeout,
        io::ErrorKind::UnexpectedEof => EnvError::Protocol("server closed the connection".into()),
        _ => EnvError::Io(e),
    }
}

/// A connected RFB session.
#[derive(Debug)]
pub struct RfbClient {
    stream: TcpStream,
    width: u16,
    height: u16,
    name: String,
    minor_version: u32,
    pixel_format: PixelFormat,
    framebuffer: Vec<u8>,
}

impl RfbClient {
    /// Performs the full handshake: version, security, ClientInit (shared),
    /// ServerInit, then declares the pixel format and Raw encoding.
    pub fn connect(config: &RfbConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let addr = config.address();
        let mut last_err = None;
        let mut stream = None;
        for sa in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&sa, config.connect_timeout) {
                Ok(s) => {
                    stream = Some(s);
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        let stream = match (stream, last_err) {
            (Some(s), _) => s,
            (None, Some(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock
                ) =>
            {
                return Err(EnvError::ConnectTimeout(addr))
            }
            (None, Some(e)) => return Err(EnvError::Io(e)),
            (None, None) => {
                return Err(EnvError::Io(io::Error::new(
                    io::ErrorKind::NotFound,
                    format!("{addr} did not resolve"),
                )))
            }
        };
        stream.set_read_timeout(Some(config.io_timeout))?;
        stream.set_write_timeout(Some(config.io_timeout))?;
        stream.set_nodelay(true)?;
        let mut client = Self {
            stream,
            width: 0,
            height: 0,
            name: String::new(),
            minor_version: 8,
            pixel_format: config.pixel_format,
            framebuffer: Vec::new(),
        };
        client.handshake(config).map_err(|e| match e {
            EnvError::Timeout => EnvError::ConnectTimeout(addr.clone()),
            e => e,
        })?;
        Ok(client)
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Negotiated protocol minor version (3.x).
    pub fn minor_version(&self) -> u32 {
        self.minor_version
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), EnvError> {
        self.stream.read_exact(buf).map_err(map_io)
    }

    fn read_u8(&mut self) -> Result<u8, EnvError> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b)?;
        Ok(b[0])
    }

    fn read_u16(&mut self) -> Result<u16, EnvError> {
        let mut b = [0u8; 2];
        self.read_exact(&mut b)?;
        Ok(u16::from_be_bytes(b))
    }

    fn read_u32(&mut self) -> Result<u32, EnvError> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_be_bytes(b))
    }

    fn read_string(&mut self) -> Result<String, EnvError> {
        let len = self.read_u32()? as usize;
        if len > 1 << 20 {
            return Err(EnvError::Protocol(format!(
                "string of {len} bytes is too long"
            )));
        }
        let mut b = vec![0u8; len];
        self.read_exact(&mut b)?;
        Ok(String::from_utf8_lossy(&b).into_owned())
    }

    fn skip(&mut self, n: usize) -> Result<(), EnvError> {
        io::copy(&mut (&mut self.stream).take(n as u64), &mut io::sink()).map_err(map_io)?;
        Ok(())
    }

    fn send(&mut self, bytes: &[u8]) -> Result<(), EnvError> {
        self.stream.write_all(bytes).map_err(map_io)
    }

    fn handshake(&mut self, config: &RfbConfig) -> Result<(), EnvError> {
        let mut version = [0u8; 12];
        self.read_exact(&mut version)?;
        let (major, minor) = parse_version(&version).ok_or_else(|| {
            EnvError::HandshakeMismatch(format!(
                "not an RFB server: {:?}",
                String::from_utf8_lossy(&version)
            ))
        })?;
        if major != 3 {
            return Err(EnvError::HandshakeMismatch(format!(
                "unsupported protocol version {major}.{minor}"
            )));
        }
        // 3.4-3.6 are treated as 3.3; 3.9+ negotiates down to 3.8.
        self.minor_version = match minor {
            m if m >= 8 => 8,
            7 => 7,
            _ => 3,
        };
        if self.minor_version == 3 && !config.allow_rfb33 {
            return Err(EnvError::HandshakeMismatch(format!(
                "server speaks RFB 3.{minor}; enable allow_rfb33 to downgrade"
            )));
        }
        let reply = match self.minor_version {
            8 => PROTOCOL_VERSION_3_8,
            7 => PROTOCOL_VERSION_3_7,
            _ => PROTOCOL_VERSION_3_3,
        };
        self.send(reply)?;
        debug!(minor = self.minor_version, "rfb version negotiated");

        let security = if self.minor_version == 3 {
            let t = self.read_u32()?;
            if t == SECURITY_INVALID as u32 {
                let reason = self.read_string()?;
                return Err(EnvError::HandshakeMismatch(format!(
                    "server refused: {reason}"
                )));
            }
            u8::try_from(t).map_err(|_| EnvError::Protocol(format!("security type {t}")))?
        } else {
            let count = self.read_u8()?;
            if count == 0 {
                let reason = self.read_string()?;
                return Err(EnvError::HandshakeMismatch(format!(
                    "server refused: {reason}"
                )));
            }
            let mut types = vec![0u8; count as usize];
            self.read_exact(&mut types)?;
            let chosen = if config.password.is_some() && types.contains(&SECURITY_VNC_AUTH) {
                SECURITY_VNC_AUTH
            } else if types.contains(&SECURITY_NONE) {
                SECURITY_NONE
            } else if types.contains(&SECURITY_VNC_AUTH) {
                SECURITY_VNC_AUTH
            } else {
                return Err(EnvError::HandshakeMismatch(format!(
                    "no supported security type among {types:?}"
                )));
            };
            self.send(&[chosen])?;
            chosen
        };

        match security {
            SECURITY_NONE => {
                if self.minor_version == 8 {
                    self.read_security_result()?;
                }
            }
            SECURITY_VNC_AUTH => {
                let mut challenge = [0u8; 16];
                self.read_exact(&mut challenge)?;
                let password = config
                    .password
                    .as_deref()
                    .ok_or_else(|| EnvError::AuthFailed("server requires a password".into()))?;
                self.send(&vnc_auth_response(password, &challenge))?;
                self.read_security_result()?;
            }
            other => {
                return Err(EnvError::HandshakeMismatch(format!(
                    "unsupported security type {other}"
                )))
            }
        }

        // ClientInit: request a shared session.
        self.send(&[1])?;

        self.width = self.read_u16()?;
        self.height = self.read_u16()?;
        let mut pf = [0u8; 16];
        self.read_exact(&mut pf)?;
        let server_pf = PixelFormat::from_bytes(&pf);
        self.name = self.read_string()?;
        debug!(
            width = self.width,
            height = self.height,
            name = %self.name,
            ?server_pf,
            "server init"
        );
        self.framebuffer = vec![0; self.width as usize * self.height as usize * 3];

        let mut init = set_pixel_format(&self.pixel_format);
        init.extend(set_encodings(&[ENCODING_RAW]));
        self.send(&init)
    }

    fn read_security_result(&mut self) -> Result<(), EnvError> {
        match self.read_u32()? {
            0 => Ok(()),
            _ => {
                let reason = if self.minor_version == 8 {
                    self.read_string()?
                } else {
                    "security handshake failed".to_string()
                };
                Err(EnvError::AuthFailed(reason))
            }
        }
    }

    pub fn pointer_event(&mut self, mask: u8, x: u16, y: u16) -> Result<(), EnvError> {
        self.send(&pointer_event(mask, x, y))
    }

    pub fn key_event(&mut self, down: bool, keysym: u32) -> Result<(), EnvError> {
        self.send(&key_event(down, keysym))
    }

    /// Requests a full, non-incremental update and assembles Raw rectangles
    /// until every pixel of the framebuffer has been received.
    pub fn capture(&mut self) -> Result<Screenshot, EnvError> {
        let (w, h) = (self.width, self.height);
        self.send(&framebuffer_update_request(false, 0, 0, w, h))?;
        let mut covered = vec![false; w as usize * h as usize];
        let mut remaining = covered.len();
        while remaining > 0 {
            match self.read_u8()? {
                server_msg::FRAMEBUFFER_UPDATE => {
                    self.skip(1)?;
                    let rects = self.read_u16()?;
                    for _ in 0..rects {
                        remaining -= self.read_rect(&mut covered)?;
                    }
                }
                server_msg::SET_COLOUR_MAP_ENTRIES => {
                    self.skip(3)?;
                    let n = self.read_u16()?;
                    self.skip(n as usize * 6)?;
                }
                server_msg::BELL => {}
                server_msg::SERVER_CUT_TEXT => {
                    self.skip(3)?;
                    let len = self.read_u32()?;
                    self.skip(len as usize)?;
                }
                t => {
                    return Err(EnvError::Protocol(format!(
                        "unknown server message type {t}"
                    )))
                }
            }
        }
        let mut shot = Screenshot::new(w as u32, h as u32, self.framebuffer.clone());
        shot.captured_at = SystemTime::now();
        Ok(shot)
    }

    /// Reads one rectangle; returns how many pixels became newly covered.
    fn read_rect(&mut self, covered: &mut [bool]) -> Result<usize, EnvError> {
        let x = self.read_u16()? as usize;
        let y = self.read_u16()? as usize;
        let rw = self.read_u16()? as usize;
        let rh = self.read_u16()? as usize;
        let encoding = self.read_u32()? as i32;
        if encoding != ENCODING_RAW {
            return Err(EnvError::Protocol(format!(
                "unsupported encoding {encoding}"
            )));
        }
        let (w, h) = (self.width as usize, self.height as usize);
        if x + rw > w || y + rh > h {
            return Err(EnvError::Protocol(format!(
                "rectangle {rw}x{rh}+{x}+{y} exceeds {w}x{h} framebuffer"
            )));
        }
        let bpp = self.pixel_format.bytes_per_pixel();
        let mut data = vec![0u8; rw * rh * bpp];
        self.read_exact(&mut data)?;
        let mut fresh = 0;
        for row in 0..rh {
            for col in 0..rw {
                let src = (row * rw + col) * bpp;
                let idx = (y + row) * w + (x + col);
                let rgb = self.pixel_format.decode(&data[src..src + bpp]);
                self.framebuffer[idx * 3..idx * 3 + 3].copy_from_slice(&rgb);
                if !covered[idx] {
                    covered[idx] = true;
                    fresh += 1;
                }
            }
        }
        Ok(fresh)
    }
}
