//! HTTP + SSE front end.
//!
//! One worker thread owns the [`Host`]; handlers send it closures and await
//! the reply, so the device never sees concurrent gestures.

use std::convert::Infallible;
use std::sync::mpsc;
use std::thread;

use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pocket_core::agent::AgentStep;
use pocket_core::device::{DeviceError, Gesture};
use pocket_core::replay::{ReplayError, Tier};
use pocket_core::runtime::RuntimeError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{broadcast, oneshot};
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use crate::{Host, HostError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerEvent {
    Step { session: String, step: AgentStep },
    Screen { app_id: Option<String>, activity: Option<String>, state_digest: String },
    Recording { active: bool },
    Replay { name: String, tier: Tier },
}

impl ServerEvent {
    fn kind(&self) -> &'static str {
        match self {
            Self::Step { .. } => "step",
            Self::Screen { .. } => "screen",
            Self::Recording { .. } => "recording",
            Self::Replay { .. } => "replay",
        }
    }
}

type Job = Box<dyn FnOnce(&mut Host) + Send>;

/// Handle to the worker thread plus the event channel.
#[derive(Clone)]
pub struct AppState {
    jobs: mpsc::Sender<Job>,
    events: broadcast::Sender<ServerEvent>,
}

impl AppState {
    /// Move `host` onto a dedicated thread. The thread exits once every
    /// handle is dropped.
    pub fn spawn(host: Host) -> Self {
        let (jobs, rx) = mpsc::channel::<Job>();
        thread::spawn(move || {
            let mut host = host;
            while let Ok(job) = rx.recv() {
                job(&mut host);
            }
        });
        let (events, _) = broadcast::channel(1024);
        Self { jobs, events }
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServerEvent> {
        self.events.subscribe()
    }

    /// Run `f` on the worker and wait for its result.
    pub async fn call<R, F>(&self, f: F) -> Result<R, ApiError>
    where
        R: Send + 'static,
        F: FnOnce(&mut Host, &broadcast::Sender<ServerEvent>) -> R + Send + 'static,
    {
        let (tx, rx) = oneshot::channel();
        let events = self.events.clone();
        self.jobs
            .send(Box::new(move |h: &mut Host| {
                let _ = tx.send(f(h, &events));
            }))
            .map_err(|_| ApiError::gone())?;
        rx.await.map_err(|_| ApiError::gone())
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn gone() -> Self {
        Self {
            status: StatusCode::SERVICE_UNAVAILABLE,
            message: "runtime worker stopped".into(),
        }
    }
}

impl From<HostError> for ApiError {
    fn from(e: HostError) -> Self {
        let status = match &e {
            HostError::Runtime(RuntimeError::Replay(ReplayError::UnknownBookmark(_))) => StatusCode::NOT_FOUND,
            HostError::Runtime(RuntimeError::Replay(ReplayError::NotRecording | ReplayError::AlreadyRecording(_)))
            | HostError::Runtime(RuntimeError::Device(DeviceError::NoForeground)) => StatusCode::CONFLICT,
            HostError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn to_value<T: Serialize>(v: T) -> ApiResult {
    serde_json::to_value(v).map(Json).map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })
}

fn screen_event(h: &Host) -> ServerEvent {
    let page = h.rt.device.current_page().ok();
    ServerEvent::Screen {
        app_id: page.as_ref().map(|p| p.app_id.clone()),
        activity: page.map(|p| p.activity),
        state_digest: h.rt.device.state_digest(),
    }
}

async fn observation(State(s): State<AppState>) -> ApiResult {
    let obs = s.call(|h, _| h.rt.device.snapshot().map_err(HostError::from)).await??;
    to_value(obs)
}

async fn gesture(State(s): State<AppState>, Json(g): Json<Gesture>) -> ApiResult {
    let out = s
        .call(move |h, ev| {
            let r = h.rt.gesture(&g).map_err(HostError::from)?;
            let screen = screen_event(h);
            let _ = ev.send(screen.clone());
            let ServerEvent::Screen { app_id, activity, state_digest } = screen else {
                unreachable!()
            };
            Ok::<_, HostError>(json!({
                "changed": r.changed,
                "app_id": app_id,
                "activity": activity,
                "state_digest": state_digest,
            }))
        })
        .await??;
    Ok(Json(out))
}

fn default_ui() -> String {
    "ui".into()
}

#[derive(Deserialize)]
struct QueryBody {
    text: String,
    #[serde(default = "default_ui")]
    session: String,
}

async fn query(State(s): State<AppState>, Json(b): Json<QueryBody>) -> ApiResult {
    let out = s
        .call(move |h, ev| {
            let session = b.session.clone();
            let mut on_step = |step: &AgentStep| {
                let _ = ev.send(ServerEvent::Step {
                    session: session.clone(),
                    step: step.clone(),
                });
            };
            let r = h.query(&b.session, &b.text, &mut on_step);
            let _ = ev.send(screen_event(h));
            r
        })
        .await??;
    to_value(json!({ "reports": out.0, "written": out.1 }))
}

#[derive(Deserialize)]
struct StartBody {
    #[serde(default = "default_ui")]
    session: String,
}

async fn record_start(State(s): State<AppState>, body: Option<Json<StartBody>>) -> ApiResult {
    let session = body.map(|b| b.0.session).unwrap_or_else(default_ui);
    s.call(move |h, ev| {
        h.record_start(&session)?;
        let _ = ev.send(ServerEvent::Recording { active: true });
        Ok::<_, HostError>(())
    })
    .await??;
    Ok(Json(json!({ "recording": true })))
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
struct StopBody {
    #[serde(default = "yes")]
    clone: bool,
    #[serde(default)]
    bookmark: Option<String>,
}

async fn record_stop(State(s): State<AppState>, body: Option<Json<StopBody>>) -> ApiResult {
    let b = body.map(|b| b.0).unwrap_or(StopBody {
        clone: true,
        bookmark: None,
    });
    let out = s
        .call(move |h, ev| {
            let r = h.record_stop(b.clone, b.bookmark.as_deref());
            let _ = ev.send(ServerEvent::Recording {
                active: h.rt.recorder.is_recording(),
            });
            r
        })
        .await??;
    to_value(out)
}

async fn replay(State(s): State<AppState>, Path(name): Path<String>) -> ApiResult {
    let out = s
        .call(move |h, ev| {
            let r = h.replay(&name)?;
            let _ = ev.send(ServerEvent::Replay {
                name,
                tier: r.tier_used,
            });
            let _ = ev.send(screen_event(h));
            Ok::<_, HostError>(r)
        })
        .await??;
    to_value(out)
}

async fn skills(State(s): State<AppState>) -> ApiResult {
    let cards = s.call(|h, _| h.rt.skills.cards().to_vec()).await?;
    to_value(cards)
}

async fn bookmarks(State(s): State<AppState>) -> ApiResult {
    let b = s.call(|h, _| h.rt.bookmarks.iter().cloned().collect::<Vec<_>>()).await?;
    to_value(b)
}

async fn memory_entries(State(s): State<AppState>) -> ApiResult {
    let e = s.call(|h, _| h.rt.memory.entries.clone()).await?;
    to_value(e)
}

async fn device_state(State(s): State<AppState>) -> ApiResult {
    let v = s
        .call(|h, _| {
            json!({
                "state_digest": h.rt.device.state_digest(),
                "clock": h.rt.device.clock(),
                "recording": h.rt.recorder.is_recording(),
                "foreground_app": h.rt.device.foreground_app(),
            })
        })
        .await?;
    Ok(Json(v))
}

fn event_stream(rx: broadcast::Receiver<ServerEvent>) -> impl Stream<Item = Result<Event, Infallible>> {
    BroadcastStream::new(rx).filter_map(|r| {
        let e = r.ok()?;
        let data = serde_json::to_string(&e).ok()?;
        Some(Ok(Event::default().event(e.kind()).data(data)))
    })
}

async fn events(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    Sse::new(event_stream(s.subscribe())).keep_alive(KeepAlive::default())
}

async fn cors(req: Request, next: Next) -> Response {
    let mut resp = if req.method() == Method::OPTIONS {
        StatusCode::NO_CONTENT.into_response()
    } else {
        next.run(req).await
    };
    let h = resp.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, OPTIONS"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("content-type"));
    resp
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/observation", get(observation))
        .route("/gesture", post(gesture))
        .route("/query", post(query))
        .route("/record/start", post(record_start))
        .route("/record/stop", post(record_stop))
        .route("/replay/{name}", post(replay))
        .route("/skills", get(skills))
        .route("/bookmarks", get(bookmarks))
        .route("/memory/entries", get(memory_entries))
        .route("/state", get(device_state))
        .route("/events", get(events))
        .layer(middleware::from_fn(cors))
        .with_state(state)
}

/// Bind `127.0.0.1:port`; a taken port is reported as [`HostError::PortInUse`].
pub async fn bind(port: u16) -> Result<tokio::net::TcpListener, HostError> {
    tokio::net::TcpListener::bind(("127.0.0.1", port)).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            HostError::PortInUse(port)
        } else {
            HostError::Io {
                path: format!("127.0.0.1:{port}"),
                detail: e.to_string(),
            }
        }
    })
}

/// Serve until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, host: Host) -> Result<(), HostError> {
    let app = router(AppState::spawn(host));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| HostError::Io {
            path: "server".into(),
            detail: e.to_string(),
        })
}
