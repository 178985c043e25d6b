//! TOML run configuration.
//!
//! ```toml
//! store = "sessions"
//!
//! [env]
//! kind = "vnc"            # or "memory"
//! host = "127.0.0.1"
//! port = 5900
//! password_env = "VNC_PASSWORD"
//!
//! [model]
//! kind = "remote"
//! endpoint = "http://localhost:8000/v1/chat/completions"
//! model = "cogagent"
//! api_key_env = "MODEL_API_KEY"
//!
//! [run]
//! mode = "supervised"
//!
//! [serve]
//! addr = "127.0.0.1:8080"
//! token_env = "SCREENAGENT_TOKEN"
//! deadline = "abort"
//! deadline_secs = 300
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use crate::env::rfb::RfbConfig;
use crate::env::{EnvError, Environment, MemoryDesktop, VncEnv};
use crate::gateway::{BackendConfig, Gateway, GatewayError};
use crate::pipeline::{Budgets, Mode, Templates};
use crate::service::{DeadlinePolicy, ServiceConfig, SessionFactory};
use crate::store::{Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[default]
    Vnc,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub host: String,
    pub port: u16,
    /// Name of the environment variable holding the VNC password.
    pub password_env: Option<String>,
    pub connect_timeout_secs: f64,
    pub io_timeout_secs: f64,
    pub settle_ms: u64,
    pub allow_rfb33: bool,
    /// Screen size of the memory desktop.
    pub width: u32,
    pub height: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            kind: EnvKind::Vnc,
            host: "127.0.0.1".into(),
            port: 5900,
            password_env: None,
            connect_timeout_secs: 10.0,
            io_timeout_secs: 10.0,
            settle_ms: 500,
            allow_rfb33: false,
            width: 1024,
            height: 768,
        }
    }
}

impl EnvConfig {
    pub fn rfb(&self) -> Result<RfbConfig, EnvError> {
        let mut c = RfbConfig::new(self.host.clone(), self.port);
        if let Some(var) = &self.password_env {
            let pw = std::env::var(var).map_err(|_| {
                EnvError::AuthFailed(format!("environment variable {var} is not set"))
            })?;
            c = c.with_password(pw);
        }
        c.connect_timeout = Duration::from_secs_f64(self.connect_timeout_secs);
        c.io_timeout = Duration::from_secs_f64(self.io_timeout_secs);
        c.settle_delay = Duration::from_millis(self.settle_ms);
        c.allow_rfb33 = self.allow_rfb33;
        Ok(c)
    }

    pub fn connect(&self) -> Result<Box<dyn Environment>, EnvError> {
        match self.kind {
            EnvKind::Vnc => Ok(Box::new(VncEnv::connect(&self.rfb()?)?)),
            EnvKind::Memory => Ok(Box::new(
                MemoryDesktop::new(self.width, self.height)
                    .with_settle_delay(Duration::from_millis(self.settle_ms)),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub mode: Mode,
    pub budgets: Budgets,
    pub templates_dir: Option<PathBuf>,
    pub theme: Option<String>,
    pub language: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadlineKind {
    #[default]
    Wait,
    Approve,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct ServeSection {
    pub addr: String,
    pub token_env: Option<String>,
    pub console_dir: Option<PathBuf>,
    pub deadline: DeadlineKind,
    pub deadline_secs: f64,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8080".into(),
            token_env: None,
            console_dir: None,
            deadline: DeadlineKind::Wait,
            deadline_secs: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct Config {
    pub store: PathBuf,
    pub env: EnvConfig,
    pub model: BackendConfig,
    pub run: RunSection,
    pub serve: ServeSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            store: PathBuf::from("sessions"),
            env: EnvConfig::default(),
            model: BackendConfig::default(),
            run: RunSection::default(),
            serve: ServeSection::default(),
        }
    }
}

impl Config {
    /// Reads a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut c: Config = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut c.store);
        if let Some(p) = c.model.script.as_mut() {
            fix(p);
        }
        if let Some(p) = c.run.templates_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = c.serve.console_dir.as_mut() {
            fix(p);
        }
        Ok(c)
    }

    pub fn templates(&self) -> Result<Templates, ConfigError> {
        match &self.run.templates_dir {
            Some(dir) => Templates::from_dir(dir).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(Templates::default()),
        }
    }

    pub fn gateway(&self) -> Result<Gateway, ConfigError> {
        Ok(Gateway::new(self.model.build()?, self.model.max_in_flight))
    }

    pub fn deadline(&self) -> DeadlinePolicy {
        let d = Duration::from_secs_f64(self.serve.deadline_secs.max(0.0));
        match self.serve.deadline {
            DeadlineKind::Wait => DeadlinePolicy::Wait,
            DeadlineKind::Approve => DeadlinePolicy::Approve(d),
            DeadlineKind::Abort => DeadlinePolicy::Abort(d),
        }
    }

    pub fn service(&self) -> Result<ServiceConfig, ConfigError> {
        self.model.build()?;
        let factory = ConfiguredFactory {
            env: self.env.clone(),
            model: self.model.clone(),
        };
        let mut cfg = ServiceConfig::new(Store::open(&self.store)?, Arc::new(factory));
        cfg.templates = self.templates()?;
        cfg.budgets = self.run.budgets;
        cfg.console_dir = self.serve.console_dir.clone();
        cfg.deadline = self.deadline();
        if let Some(var) = &self.serve.token_env {
            cfg.token = Some(std::env::var(var).map_err(|_| {
                ConfigError::Invalid(format!("environment variable {var} is not set"))
            })?);
        }
        Ok(cfg)
    }
}

/// Builds environments and gateways from the config for each served session.
struct ConfiguredFactory {
    env: EnvConfig,
    model: BackendConfig,
}

impl SessionFactory for ConfiguredFactory {
    fn environment(&self) -> Result<Box<dyn Environment>, EnvError> {
        self.env.connect()
    }

    fn gateway(&self) -> Gateway {
        let backend = self
            .model
            .build()
            .expect("backend config validated at startup");
        Gateway::new(backend, self.model.max_in_flight)
    }
}
