#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use serde_json::{json, Value};
use tokio::net::TcpListener;

/// What the stub upstream answers.
#[derive(Debug, Clone)]
pub enum Reply {
    /// A well-formed chat completion with this content.
    Content(String),
    Status(u16),
    /// 200 with this raw body.
    Raw(String),
    /// Sleeps before answering with `Content("Legit")`.
    Slow(Duration),
}

#[derive(Debug, Clone)]
pub struct Captured {
    pub body: Value,
    pub authorization: Option<String>,
}

#[derive(Clone)]
struct StubState {
    reply: Reply,
    calls: Arc<Mutex<Vec<Captured>>>,
}

/// A chat-completions upstream that records every request it receives.
pub struct Stub {
    pub addr: SocketAddr,
    calls: Arc<Mutex<Vec<Captured>>>,
}

impl Stub {
    pub async fn start(reply: Reply) -> Stub {
        let calls = Arc::new(Mutex::new(Vec::new()));
        let state = StubState { reply, calls: calls.clone() };
        let app = Router::new().route("/v1/chat/completions", post(handler)).with_state(state);
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        Stub { addr, calls }
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn calls(&self) -> Vec<Captured> {
        self.calls.lock().unwrap().clone()
    }
}

async fn handler(State(state): State<StubState>, headers: HeaderMap, body: Bytes) -> Response {
    let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let authorization = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    state.calls.lock().unwrap().push(Captured { body, authorization });
    match state.reply {
        Reply::Content(text) => completion(&text),
        Reply::Status(code) => StatusCode::from_u16(code).unwrap().into_response(),
        Reply::Raw(raw) => (StatusCode::OK, raw).into_response(),
        Reply::Slow(d) => {
            tokio::time::sleep(d).await;
            completion("Legit")
        }
    }
}

fn completion(text: &str) -> Response {
    axum::Json(json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
    }))
    .into_response()
}

/// An address nothing listens on.
pub async fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/v1/chat/completions")
}
