//! Transports: a WebSocket endpoint carrying one session per connection, and
//! a request/response fallback for clients without sockets.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use tokio::net::TcpListener;

use crate::protocol::{decode_client, ClientMessage, ErrorCode, ServerMessage, CLIENT_SCHEMA, PROTOCOL_VERSION, SERVER_SCHEMA};
use crate::session::{LiveError, LiveService};

/// One client's view of the service: the session it is bound to, if any.
pub struct Connection {
    service: Arc<LiveService>,
    session: Option<String>,
}

impl Connection {
    pub fn new(service: Arc<LiveService>) -> Self {
        Connection { service, session: None }
    }

    pub fn attached(service: Arc<LiveService>, session: String) -> Self {
        Connection { service, session: Some(session) }
    }

    pub fn session(&self) -> Option<&str> {
        self.session.as_deref()
    }

    pub fn handle(&mut self, msg: ClientMessage) -> ServerMessage {
        self.try_handle(msg).unwrap_or_else(|e| ServerMessage::Error(e.reply()))
    }

    /// Decodes and handles one text frame.
    pub fn handle_text(&mut self, text: &str) -> ServerMessage {
        match decode_client(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => ServerMessage::Error(e),
        }
    }

    fn bound(&self) -> Result<&str, LiveError> {
        self.session.as_deref().ok_or(LiveError::NoSession)
    }

    fn try_handle(&mut self, msg: ClientMessage) -> Result<ServerMessage, LiveError> {
        Ok(match msg {
            ClientMessage::Create { config } => {
                let snap = self.service.create(&config)?;
                self.session = Some(snap.session.clone());
                ServerMessage::Snapshot(snap)
            }
            ClientMessage::Attach { session } => {
                let snap = self.service.snapshot(&session)?;
                self.session = Some(session);
                ServerMessage::Snapshot(snap)
            }
            ClientMessage::Act { action } => ServerMessage::Result(Box::new(self.service.submit(self.bound()?, action)?)),
            ClientMessage::Snapshot => ServerMessage::Snapshot(self.service.snapshot(self.bound()?)?),
            ClientMessage::Transcript => {
                let session = self.bound()?.to_string();
                let record = self.service.transcript(&session)?;
                ServerMessage::Transcript { version: PROTOCOL_VERSION, session, record: Box::new(record) }
            }
        })
    }
}

pub fn router(service: Arc<LiveService>) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/messages", post(post_message))
        .route("/schema/server", get(|| async { json(SERVER_SCHEMA.to_string()) }))
        .route("/schema/client", get(|| async { json(CLIENT_SCHEMA.to_string()) }))
        .with_state(service)
}

pub async fn serve(service: Arc<LiveService>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}

fn json(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn ws_upgrade(State(service): State<Arc<LiveService>>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| run_socket(socket, service))
}

async fn run_socket(mut socket: WebSocket, service: Arc<LiveService>) {
    let mut conn = Connection::new(service);
    while let Some(Ok(frame)) = socket.recv().await {
        let text = match frame {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            Message::Binary(_) => "binary frames are not supported".to_string(),
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        // helpers can take a while per tick; keep them off the async workers
        let (c, reply) = match tokio::task::spawn_blocking(move || {
            let reply = conn.handle_text(&text);
            (conn, reply)
        })
        .await
        {
            Ok(r) => r,
            Err(e) => {
                log::error!("session worker failed: {e}");
                break;
            }
        };
        conn = c;
        if socket.send(Message::Text(reply.to_json().into())).await.is_err() {
            break;
        }
    }
}

#[derive(Deserialize)]
struct SessionQuery {
    session: Option<String>,
}

async fn post_message(
    State(service): State<Arc<LiveService>>,
    Query(q): Query<SessionQuery>,
    body: String,
) -> Response {
    let reply = tokio::task::spawn_blocking(move || {
        let mut conn = match q.session {
            Some(id) => Connection::attached(service, id),
            None => Connection::new(service),
        };
        conn.handle_text(&body)
    })
    .await;
    match reply {
        Ok(msg) => {
            let status = match &msg {
                ServerMessage::Error(e) => status_of(e.code),
                _ => StatusCode::OK,
            };
            (status, json(msg.to_json())).into_response()
        }
        Err(_) => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}

fn status_of(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::BadMessage | ErrorCode::InvalidConfig | ErrorCode::NoSession | ErrorCode::IllegalAction => {
            StatusCode::BAD_REQUEST
        }
        ErrorCode::NotFound => StatusCode::NOT_FOUND,
        ErrorCode::SessionFinished | ErrorCode::Busy => StatusCode::CONFLICT,
        ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}
