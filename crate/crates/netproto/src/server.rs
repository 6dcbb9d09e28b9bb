//! HTTP and WebSocket endpoints: the control socket the glove connects to,
//! the dashboard API, the telemetry stream, the cloud stub and static assets.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::Sender;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::{broadcast, oneshot};
use tower_http::services::ServeDir;
use wheelsim_core::Command;

use crate::cloud::CloudStub;
use crate::command::decode_text;
use crate::telemetry::{StatusSnapshot, TelemetryEvent};

pub const CONTROL_PATH: &str = "/ws/control";
/// Name of the simulated access point the chair serves on.
pub const NETWORK_NAME: &str = "SmartWheelchair";
const STREAM_CAPACITY: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: std::io::Error },
}

/// State shared between the simulation and the request handlers.
pub struct ApiState {
    running: AtomicBool,
    status: RwLock<StatusSnapshot>,
    commands: Mutex<Option<Sender<Command>>>,
    telemetry: broadcast::Sender<String>,
    frame_errors: AtomicU64,
    commands_accepted: AtomicU64,
    cloud_stub: Option<CloudStub>,
}

impl ApiState {
    pub fn new(cloud_stub: Option<CloudStub>) -> Arc<Self> {
        let (telemetry, _) = broadcast::channel(STREAM_CAPACITY);
        Arc::new(Self {
            running: AtomicBool::new(false),
            status: RwLock::new(StatusSnapshot::default()),
            commands: Mutex::new(None),
            telemetry,
            frame_errors: AtomicU64::new(0),
            commands_accepted: AtomicU64::new(0),
            cloud_stub,
        })
    }

    /// Route accepted commands into `tx` and mark the simulation running.
    pub fn attach(&self, tx: Sender<Command>) {
        *self.commands.lock().expect("state poisoned") = Some(tx);
        self.running.store(true, Ordering::SeqCst);
    }

    pub fn detach(&self) {
        self.running.store(false, Ordering::SeqCst);
        *self.commands.lock().expect("state poisoned") = None;
        self.status.write().expect("state poisoned").running = false;
    }

    pub fn is_running(&self) -> bool {
        self.running.load(Ordering::SeqCst)
    }

    pub fn set_status(&self, mut s: StatusSnapshot) {
        s.running = self.is_running();
        s.command_frame_errors = self.frame_errors();
        *self.status.write().expect("state poisoned") = s;
    }

    pub fn status(&self) -> StatusSnapshot {
        self.status.read().expect("state poisoned").clone()
    }

    /// Fan an event out to stream subscribers. Slow subscribers lose events.
    pub fn publish(&self, e: &TelemetryEvent) {
        let _ = self.telemetry.send(e.to_json_line().trim_end().to_string());
    }

    pub fn frame_errors(&self) -> u64 {
        self.frame_errors.load(Ordering::Relaxed)
    }

    pub fn commands_accepted(&self) -> u64 {
        self.commands_accepted.load(Ordering::Relaxed)
    }

    pub fn cloud_stub(&self) -> Option<&CloudStub> {
        self.cloud_stub.as_ref()
    }

    fn forward(&self, c: Command) -> bool {
        let guard = self.commands.lock().expect("state poisoned");
        match guard.as_ref() {
            Some(tx) if tx.send(c).is_ok() => {
                self.commands_accepted.fetch_add(1, Ordering::Relaxed);
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    pub bind: Option<SocketAddr>,
    /// Directory of built dashboard assets, served at `/`.
    pub assets_dir: Option<PathBuf>,
}

pub fn router(state: Arc<ApiState>, assets_dir: Option<PathBuf>) -> Router {
    let app = Router::new()
        .route(CONTROL_PATH, get(control_socket))
        .route("/api/status", get(status))
        .route("/api/command", post(command))
        .route("/api/stream", get(stream_socket))
        .route("/update", get(cloud_update))
        .with_state(state);
    match assets_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.task.await;
    }
}

/// Bind and start serving on the current tokio runtime.
pub async fn serve(config: ServerConfig, state: Arc<ApiState>) -> Result<ServerHandle, ServerError> {
    let addr = config.bind.unwrap_or_else(|| SocketAddr::from(([127, 0, 0, 1], 0)));
    let listener =
        tokio::net::TcpListener::bind(addr).await.map_err(|source| ServerError::BindFailure { addr, source })?;
    let addr = listener.local_addr().map_err(|source| ServerError::BindFailure { addr, source })?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state, config.assets_dir);
    let task = tokio::spawn(async move {
        let result = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
        if let Err(e) = result {
            tracing::error!(error = %e, "server stopped");
        }
    });
    tracing::info!(%addr, network = NETWORK_NAME, "command server listening");
    Ok(ServerHandle { addr, shutdown: Some(tx), task })
}

async fn control_socket(ws: WebSocketUpgrade, State(state): State<Arc<ApiState>>) -> Response {
    ws.on_upgrade(move |socket| control_session(socket, state))
}

async fn control_session(mut socket: WebSocket, state: Arc<ApiState>) {
    while let Some(Ok(msg)) = socket.recv().await {
        let decoded = match msg {
            Message::Text(t) => decode_text(t.as_str()),
            Message::Binary(_) => Err(crate::command::FrameError::InvalidFrame("binary frame".into())),
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        match decoded {
            Ok(c) => {
                state.forward(c);
            }
            Err(e) => {
                state.frame_errors.fetch_add(1, Ordering::Relaxed);
                tracing::debug!(error = %e, "control frame rejected");
            }
        }
    }
}

async fn status(State(state): State<Arc<ApiState>>) -> Response {
    if !state.is_running() {
        return (StatusCode::SERVICE_UNAVAILABLE, Json(serde_json::json!({"error": "simulation not running"})))
            .into_response();
    }
    Json(state.status()).into_response()
}

#[derive(Deserialize)]
struct CommandRequest {
    command: String,
}

async fn command(State(state): State<Arc<ApiState>>, body: String) -> Response {
    let parsed = serde_json::from_str::<CommandRequest>(&body)
        .map_err(|e| e.to_string())
        .and_then(|r| decode_text(&r.command).map_err(|e| e.to_string()));
    let c = match parsed {
        Ok(c) => c,
        Err(e) => return (StatusCode::BAD_REQUEST, Json(serde_json::json!({"error": e}))).into_response(),
    };
    if !state.is_running() || !state.forward(c) {
        return (StatusCode::SERVICE_UNAVAILABLE, Json(serde_json::json!({"error": "simulation not running"})))
            .into_response();
    }
    Json(serde_json::json!({"accepted": c.symbol().to_string()})).into_response()
}

async fn stream_socket(ws: WebSocketUpgrade, State(state): State<Arc<ApiState>>) -> Response {
    let rx = state.telemetry.subscribe();
    ws.on_upgrade(move |socket| stream_session(socket, rx))
}

async fn stream_session(mut socket: WebSocket, mut rx: broadcast::Receiver<String>) {
    loop {
        tokio::select! {
            event = rx.recv() => match event {
                Ok(line) => {
                    if socket.send(Message::Text(line.into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::debug!(dropped = n, "stream subscriber lagging");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn cloud_update(State(state): State<Arc<ApiState>>, RawQuery(q): RawQuery) -> Response {
    match state.cloud_stub() {
        Some(stub) => stub.handle_query(q.as_deref().unwrap_or("")).into_response(),
        None => StatusCode::NOT_FOUND.into_response(),
    }
}
