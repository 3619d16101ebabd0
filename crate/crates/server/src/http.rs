//! HTTP and WebSocket front end over a shared [`Hub`].

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use backchannel_core::protocol::ServerFrame;
use backchannel_core::{ParticipantRole, PolicyOverrides, SessionId};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::mpsc;

use crate::hub::{Dispatch, Hub, HubError};

pub const HOST_KEY_HEADER: &str = "x-host-key";

type Outbox = mpsc::UnboundedSender<String>;

struct Shared {
    hub: Hub,
    /// Open sockets per meeting. Frames are queued while the lock is held,
    /// so every client sees them in emission order.
    sockets: BTreeMap<String, BTreeMap<SessionId, Outbox>>,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Mutex<Shared>>,
    epoch: Instant,
    tick: Duration,
}

impl AppState {
    pub fn new(hub: Hub) -> AppState {
        AppState::with_tick(hub, Duration::from_secs(1))
    }

    pub fn with_tick(hub: Hub, tick: Duration) -> AppState {
        AppState {
            shared: Arc::new(Mutex::new(Shared {
                hub,
                sockets: BTreeMap::new(),
            })),
            epoch: Instant::now(),
            tick,
        }
    }

    fn now(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Runs `f` against the hub and delivers whatever it dispatches.
    pub fn with_hub<T>(&self, f: impl FnOnce(&mut Hub) -> T) -> T {
        f(&mut self.lock().hub)
    }
}

impl Shared {
    fn deliver(&mut self, meeting: &str, d: &Dispatch) {
        if let Some(sockets) = self.sockets.get(meeting) {
            for frame in &d.broadcast {
                let text = frame.to_json();
                for tx in sockets.values() {
                    let _ = tx.send(text.clone());
                }
            }
            for (session, frame) in &d.private {
                if let Some(tx) = sockets.get(session) {
                    let _ = tx.send(frame.to_json());
                }
            }
        }
        if d.ended {
            // Dropping the senders closes every socket of the meeting.
            self.sockets.remove(meeting);
        }
    }
}

impl IntoResponse for HubError {
    fn into_response(self) -> Response {
        let status = match self {
            HubError::UnknownMeeting | HubError::UnknownSession => StatusCode::NOT_FOUND,
            HubError::Unauthorized => StatusCode::UNAUTHORIZED,
            HubError::ForbiddenFrame => StatusCode::FORBIDDEN,
            HubError::MalformedFrame(_) | HubError::InvalidPolicy(_) | HubError::Rejected(_) => {
                StatusCode::BAD_REQUEST
            }
        };
        (status, Json(json!({ "error": self.code(), "message": self.to_string() }))).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/meetings", post(create_meeting))
        .route("/meetings/{id}", get(inspect).delete(end_meeting))
        .route("/meetings/{id}/join", post(join))
        .route("/meetings/{id}/ws", get(connect))
        .with_state(state)
}

async fn create_meeting(State(app): State<AppState>, body: Bytes) -> Result<Response, HubError> {
    let overrides: PolicyOverrides = if body.iter().all(u8::is_ascii_whitespace) {
        PolicyOverrides::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| HubError::MalformedFrame(e.to_string()))?
    };
    let now = app.now();
    let (id, host_key) = app.lock().hub.create_meeting(&overrides, now)?;
    tokio::spawn(ticker(app.clone(), id.clone()));
    tracing::info!("meeting created");
    Ok((
        StatusCode::CREATED,
        Json(json!({ "meeting_id": id, "host_key": host_key })),
    )
        .into_response())
}

async fn ticker(app: AppState, id: String) {
    let mut interval = tokio::time::interval(app.tick);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    interval.tick().await;
    loop {
        interval.tick().await;
        let now = app.now();
        let mut shared = app.lock();
        match shared.hub.tick(&id, now) {
            Ok(d) => shared.deliver(&id, &d),
            Err(_) => return,
        }
    }
}

async fn inspect(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, HubError> {
    let snapshot = app.lock().hub.inspect(&id)?;
    Ok(Json(snapshot).into_response())
}

fn host_key(headers: &HeaderMap) -> Option<&str> {
    headers.get(HOST_KEY_HEADER).and_then(|v| v.to_str().ok())
}

async fn end_meeting(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<StatusCode, HubError> {
    let now = app.now();
    let mut shared = app.lock();
    let d = shared
        .hub
        .end_meeting(&id, host_key(&headers).unwrap_or(""), now)?;
    shared.deliver(&id, &d);
    tracing::info!("meeting ended");
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinRequest {
    role: ParticipantRole,
}

async fn join(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, HubError> {
    let req: JoinRequest =
        serde_json::from_slice(&body).map_err(|e| HubError::MalformedFrame(e.to_string()))?;
    let now = app.now();
    let mut shared = app.lock();
    let ticket = shared.hub.join(&id, req.role, host_key(&headers), now)?;
    shared.deliver(&id, &ticket.dispatch);
    Ok(Json(json!({ "session_token": ticket.token })).into_response())
}

#[derive(Deserialize)]
struct WsQuery {
    token: String,
}

async fn connect(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<WsQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, HubError> {
    let (session, _) = app.lock().hub.session(&id, &q.token)?;
    Ok(ws.on_upgrade(move |socket| client(app, id, q.token, session, socket)))
}

async fn client(app: AppState, id: String, token: String, session: SessionId, mut socket: WebSocket) {
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    {
        let mut shared = app.lock();
        if shared.hub.session(&id, &token).is_err() {
            return;
        }
        shared.sockets.entry(id.clone()).or_default().insert(session, tx.clone());
        // A fresh socket learns the current counts straight away.
        if let Ok(s) = shared.hub.inspect(&id) {
            let _ = tx.send(
                ServerFrame::Aggregate {
                    counts: s.counts,
                    audience: s.audience,
                }
                .to_json(),
            );
        }
    }
    drop(tx);
    loop {
        tokio::select! {
            outgoing = rx.recv() => match outgoing {
                Some(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                None => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => handle_text(&app, &id, &token, session, text.as_str()),
                Some(Ok(Message::Binary(_))) => {
                    handle_text(&app, &id, &token, session, "\u{0}binary")
                }
                Some(Ok(_)) => {}
                Some(Err(_)) | None => break,
            },
        }
    }
    let now = app.now();
    let mut shared = app.lock();
    if let Some(sockets) = shared.sockets.get_mut(&id) {
        sockets.remove(&session);
    }
    if let Ok(d) = shared.hub.leave(&id, &token, now) {
        shared.deliver(&id, &d);
    }
}

fn handle_text(app: &AppState, id: &str, token: &str, session: SessionId, text: &str) {
    let now = app.now();
    let mut shared = app.lock();
    match shared.hub.route_frame(id, token, text, now) {
        Ok(d) => shared.deliver(id, &d),
        Err(e) => {
            tracing::debug!("frame refused: {e}");
            if let Some(tx) = shared.sockets.get(id).and_then(|s| s.get(&session)) {
                let _ = tx.send(ServerFrame::error(e.code()).to_json());
            }
        }
    }
}
