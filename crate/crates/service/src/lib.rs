//! HTTP service for interactive contour revision.
//!
//! A client uploads an image and an initial mask once, then posts clicks;
//! every click re-runs the model with all clicks so far and returns the
//! revised contour. Requests on one session are applied one at a time in
//! arrival order, while different sessions proceed concurrently.

pub mod api;
mod routes;
pub mod session;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use revise_core::network::RevisionNet;
use revise_core::training::load_model;

pub use routes::router;
use session::Session;

pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);
/// Largest accepted request body; a 256×256 float image is about 1.5 MB of JSON.
pub const DEFAULT_BODY_LIMIT: usize = 8 * 1024 * 1024;

/// The network currently serving requests.
#[derive(Debug)]
pub struct LoadedModel {
    pub net: RevisionNet<f32>,
    /// Where the weights came from, for diagnostics.
    pub source: String,
}

struct SessionEntry {
    session: Arc<tokio::sync::Mutex<Session>>,
    /// Milliseconds since the store's epoch.
    touched: AtomicU64,
}

/// Shared service state.
pub struct AppState {
    model: RwLock<Arc<LoadedModel>>,
    sessions: Mutex<HashMap<String, Arc<SessionEntry>>>,
    epoch: Instant,
    ttl: Duration,
    body_limit: usize,
}

impl AppState {
    pub fn new(net: RevisionNet<f32>, source: impl Into<String>, ttl: Duration) -> Arc<Self> {
        Arc::new(Self {
            model: RwLock::new(Arc::new(LoadedModel {
                net,
                source: source.into(),
            })),
            sessions: Mutex::new(HashMap::new()),
            epoch: Instant::now(),
            ttl,
            body_limit: DEFAULT_BODY_LIMIT,
        })
    }

    pub fn from_checkpoint(path: &Path, ttl: Duration) -> revise_core::Result<Arc<Self>> {
        Ok(Self::new(load_model(path)?, path.display().to_string(), ttl))
    }

    pub fn with_body_limit(self: Arc<Self>, limit: usize) -> Arc<Self> {
        let mut state = Arc::try_unwrap(self).unwrap_or_else(|_| panic!("configure the state before sharing it"));
        state.body_limit = limit;
        Arc::new(state)
    }

    pub fn body_limit(&self) -> usize {
        self.body_limit
    }

    /// The model for one request. A concurrent swap never affects a request
    /// that already holds its model.
    pub fn model(&self) -> Arc<LoadedModel> {
        self.model.read().expect("model lock").clone()
    }

    /// Replaces the model for subsequent requests.
    pub fn swap_model(&self, net: RevisionNet<f32>, source: impl Into<String>) {
        let next = Arc::new(LoadedModel {
            net,
            source: source.into(),
        });
        *self.model.write().expect("model lock") = next;
    }

    pub fn reload(&self, path: &PathBuf) -> revise_core::Result<()> {
        let net = load_model(path)?;
        self.swap_model(net, path.display().to_string());
        Ok(())
    }

    fn now_ms(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    fn expired(&self, entry: &SessionEntry, now: u64) -> bool {
        now.saturating_sub(entry.touched.load(Ordering::Relaxed)) > self.ttl.as_millis() as u64
    }

    pub(crate) fn insert(&self, session: Session) {
        let id = session.id.clone();
        let entry = Arc::new(SessionEntry {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            touched: AtomicU64::new(self.now_ms()),
        });
        self.sessions.lock().expect("session map").insert(id, entry);
    }

    /// Live session by id; refreshes its expiry clock.
    pub(crate) fn lookup(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<Session>>> {
        let now = self.now_ms();
        let mut map = self.sessions.lock().expect("session map");
        let entry = map.get(id)?.clone();
        if self.expired(&entry, now) {
            map.remove(id);
            return None;
        }
        entry.touched.store(now, Ordering::Relaxed);
        Some(entry.session.clone())
    }

    /// Drops every session idle for longer than the TTL; returns how many.
    pub fn purge_expired(&self) -> usize {
        let now = self.now_ms();
        let mut map = self.sessions.lock().expect("session map");
        let before = map.len();
        map.retain(|_, e| !self.expired(e, now));
        before - map.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session map").len()
    }
}

/// Serves `state` on `addr` until the process is stopped, purging idle
/// sessions once a minute.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let n = sweeper.purge_expired();
            if n > 0 {
                log::info!("expired {n} idle sessions");
            }
        }
    });
    axum::serve(listener, router(state)).await
}
