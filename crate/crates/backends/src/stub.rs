//! In-process HTTP stand-ins for the tagging server and the completion
//! endpoint, for tests and local runs.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use opnote_core::{encode_labels, tokenize, RuleTagger};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use url::Url;

/// One request as the stub saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct Recorded {
    pub request_id: Option<String>,
    pub authorization: Option<String>,
    pub body: Value,
}

/// What the stub sends back.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: Value,
    pub delay: Duration,
}

impl Reply {
    pub fn ok(body: Value) -> Self {
        Self { status: 200, body, delay: Duration::ZERO }
    }

    pub fn status(status: u16) -> Self {
        Self { status, body: json!({"error": "stub failure"}), delay: Duration::ZERO }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    /// A completion response carrying `text`.
    pub fn completion(text: impl Into<String>) -> Self {
        Self::ok(json!({"text": text.into()}))
    }
}

/// Builds a reply from the request body and the zero-based request number.
pub type Responder = Arc<dyn Fn(&Value, usize) -> Reply + Send + Sync>;

struct Inner {
    responder: Responder,
    log: Mutex<Vec<Recorded>>,
}

pub struct StubServer {
    url: Url,
    inner: Arc<Inner>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl StubServer {
    /// Serves `POST /tag`.
    pub async fn tagger(responder: Responder) -> std::io::Result<Self> {
        Self::spawn(responder, "/tag").await
    }

    /// Serves `POST /v1/complete`; the returned URL points there.
    pub async fn completion(responder: Responder) -> std::io::Result<Self> {
        let mut s = Self::spawn(responder, "/v1/complete").await?;
        s.url = s.url.join("v1/complete").expect("valid path");
        Ok(s)
    }

    async fn spawn(responder: Responder, path: &str) -> std::io::Result<Self> {
        let inner = Arc::new(Inner { responder, log: Mutex::new(Vec::new()) });
        let app = Router::new().route(path, post(handle)).with_state(inner.clone());
        let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        let url = Url::parse(&format!("http://{addr}/")).expect("valid address");
        Ok(Self { url, inner, shutdown: Some(tx) })
    }

    pub fn url(&self) -> &Url {
        &self.url
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.inner.log.lock().expect("stub log").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

async fn handle(State(inner): State<Arc<Inner>>, headers: HeaderMap, body: Bytes) -> Response {
    let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let header = |name: &str| headers.get(name).and_then(|v| v.to_str().ok()).map(str::to_string);
    let index = {
        let mut log = inner.log.lock().expect("stub log");
        log.push(Recorded {
            request_id: header("x-request-id"),
            authorization: header("authorization"),
            body: body.clone(),
        });
        log.len() - 1
    };
    let reply = (inner.responder)(&body, index);
    if !reply.delay.is_zero() {
        tokio::time::sleep(reply.delay).await;
    }
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(reply.body)).into_response()
}

fn request_text(body: &Value) -> &str {
    body.get("text").and_then(Value::as_str).unwrap_or_default()
}

/// Labels every whitespace token `O`.
pub fn all_outside() -> Responder {
    Arc::new(|body, _| {
        let tokens = tokenize(request_text(body));
        let labels = vec!["O"; tokens.len()];
        Reply::ok(json!({"tokens": tokens, "labels": labels, "scores": vec![1.0; tokens.len()]}))
    })
}

/// Labels tokens with the spans the bundled rule tagger finds.
pub fn scripted_from_rules(tagger: RuleTagger) -> Responder {
    Arc::new(move |body, _| {
        let text = request_text(body);
        let tokens = tokenize(text);
        let spans = tagger.tag(text);
        match encode_labels(&spans, &tokens) {
            Ok(seq) => {
                let labels: Vec<String> = seq.labels.iter().map(ToString::to_string).collect();
                Reply::ok(json!({"tokens": seq.tokens, "labels": labels, "scores": vec![0.99; labels.len()]}))
            }
            Err(e) => Reply { status: 500, body: json!({"error": e.to_string()}), delay: Duration::ZERO },
        }
    })
}

/// Answers every completion with the same text.
pub fn fixed_completion(text: impl Into<String>) -> Responder {
    let text = text.into();
    Arc::new(move |_, _| Reply::completion(text.clone()))
}

/// Fails the first `n` requests with `status`, then defers to `then`.
pub fn failing_first(n: usize, status: u16, then: Responder) -> Responder {
    Arc::new(move |body, i| if i < n { Reply::status(status) } else { then(body, i) })
}

/// Last user message of a completion request.
pub fn last_user_message(body: &Value) -> &str {
    body.get("messages")
        .and_then(Value::as_array)
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
}
