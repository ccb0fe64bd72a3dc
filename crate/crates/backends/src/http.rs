//! JSON POST with per-attempt timeout, bounded retries and a stable request id.

use std::time::Duration;

use reqwest::{Client, StatusCode};
use serde::Serialize;
use serde_json::Value;
use url::Url;

use crate::config::RetryPolicy;
use crate::error::{BackendError, Result};

pub const REQUEST_ID_HEADER: &str = "x-request-id";

pub(crate) fn new_request_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

/// Posts `body` until it succeeds or the retry budget runs out. Every attempt
/// carries the same `request_id`. Connection failures, timeouts, 429 and 5xx
/// are retried; other statuses and malformed bodies are not.
pub(crate) async fn post_json<B: Serialize + ?Sized>(
    client: &Client,
    url: &Url,
    body: &B,
    request_id: &str,
    bearer: Option<&str>,
    policy: RetryPolicy,
) -> Result<Value> {
    let attempts_allowed = policy.max_retries + 1;
    let mut attempt = 0;
    loop {
        attempt += 1;
        let mut req = client
            .post(url.clone())
            .timeout(Duration::from_millis(policy.timeout_ms))
            .header(REQUEST_ID_HEADER, request_id)
            .json(body);
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let failure = match req.send().await {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    let bytes = resp.bytes().await.map_err(|e| transport(e, attempt))?;
                    return serde_json::from_slice(&bytes)
                        .map_err(|e| BackendError::Protocol(format!("response is not JSON: {e}")));
                }
                let body = resp.text().await.unwrap_or_default();
                let err = BackendError::Status { status: status.as_u16(), body: truncate(&body, 512) };
                if !retryable_status(status) {
                    return Err(err);
                }
                err
            }
            Err(e) => transport(e, attempt),
        };
        if attempt >= attempts_allowed {
            return Err(failure);
        }
        let delay = policy.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
        tracing::warn!(request_id, attempt, error = %failure, delay_ms = delay, "request failed, retrying");
        tokio::time::sleep(Duration::from_millis(delay)).await;
    }
}

fn retryable_status(status: StatusCode) -> bool {
    status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS
}

fn transport(e: reqwest::Error, attempts: u32) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout { attempts }
    } else {
        BackendError::Transport { attempts, message: e.without_url().to_string() }
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}
