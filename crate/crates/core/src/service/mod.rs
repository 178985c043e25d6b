//! HTTP control service: starts sessions, streams their progress over SSE
//! and takes operator decisions and bounding-box annotations.
//!
//! | route | |
//! |---|---|
//! | `POST /sessions` | start a session, `201 {"id"}` |
//! | `GET /sessions` | ids of stored sessions |
//! | `GET /sessions/{id}` | state snapshot |
//! | `GET /sessions/{id}/screenshot` | latest screenshot as PNG |
//! | `GET /sessions/{id}/pending` | the proposal awaiting a decision, or `204` |
//! | `POST /sessions/{id}/decision` | approve, edit, reject or abort |
//! | `GET /sessions/{id}/events` | server-sent events |
//! | `GET /sessions/{id}/steps/{step}` | a stored step |
//! | `GET /sessions/{id}/steps/{step}/{before,after}.png` | its screenshots |
//! | `POST /sessions/{id}/steps/{step}/bbox` | attach a bounding box to an action |

mod console;
mod live;
mod routes;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use crate::env::{EnvError, Environment};
use crate::gateway::Gateway;
use crate::pipeline::{Budgets, Templates};
use crate::store::Store;

pub use live::{
    DecisionKind, DecisionRequest, LiveSession, PendingView, ServiceEvent, SessionView, StartError,
    Submit,
};
pub use routes::router;

/// Supplies the environment and model gateway of each new session.
pub trait SessionFactory: Send + Sync + 'static {
    fn environment(&self) -> Result<Box<dyn Environment>, EnvError>;
    fn gateway(&self) -> Gateway;
}

/// What happens when an operator does not decide in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeadlinePolicy {
    /// Wait indefinitely.
    #[default]
    Wait,
    Approve(Duration),
    Abort(Duration),
}

impl DeadlinePolicy {
    pub fn deadline(self) -> Option<Duration> {
        match self {
            DeadlinePolicy::Wait => None,
            DeadlinePolicy::Approve(d) | DeadlinePolicy::Abort(d) => Some(d),
        }
    }
}

pub struct ServiceConfig {
    pub store: Store,
    pub factory: Arc<dyn SessionFactory>,
    pub templates: Templates,
    pub budgets: Budgets,
    /// Required as `Authorization: Bearer <token>` or `?access_token=` when set.
    pub token: Option<String>,
    /// Directory served at `/` for a browser console.
    pub console_dir: Option<PathBuf>,
    pub deadline: DeadlinePolicy,
}

impl ServiceConfig {
    pub fn new(store: Store, factory: Arc<dyn SessionFactory>) -> Self {
        Self {
            store,
            factory,
            templates: Templates::default(),
            budgets: Budgets::default(),
            token: None,
            console_dir: None,
            deadline: DeadlinePolicy::Wait,
        }
    }
}

/// Shared state behind the routes.
pub struct Service {
    pub(crate) config: ServiceConfig,
    pub(crate) sessions: std::sync::Mutex<std::collections::HashMap<String, Arc<LiveSession>>>,
}

impl Service {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            config,
            sessions: Default::default(),
        })
    }

    pub fn live(&self, id: &str) -> Option<Arc<LiveSession>> {
        self.sessions.lock().unwrap().get(id).cloned()
    }
}

/// A service running on its own runtime thread.
pub struct RunningService {
    pub addr: SocketAddr,
    pub service: Arc<Service>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningService {
    /// Binds `addr` and serves in a background thread.
    pub fn start(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<Self> {
        let service = Service::new(config);
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = rt.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let app = router(service.clone());
        let thread = std::thread::spawn(move || {
            rt.block_on(async move {
                tokio::select! {
                    _ = axum::serve(listener, app) => {}
                    _ = rx => {}
                }
            });
            rt.shutdown_timeout(Duration::from_millis(100));
        });
        Ok(Self {
            addr,
            service,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn stop(mut self) {
        self.halt();
    }

    fn halt(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        self.halt();
    }
}
