//! HTTP routes.

use std::collections::HashMap;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::body::to_bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use opnote_backends::{BackendKind, Extractor, ExtractorConfig};
use opnote_core::corpus::read_corpus;
use opnote_core::{
    build_scene, evaluate, render_svg, GoldDocument, LanguageMode, MatchMode, OperationRecord, Prediction, Transcript,
    TranscriptId,
};
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::ApiError;
use crate::model::{RecordSummary, StoredRecord};
use crate::store::Store;

pub const OPENAPI: &str = include_str!("../resources/openapi.json");

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: Arc<dyn Store>,
    config: Config,
    token: Option<String>,
    extractors: Mutex<HashMap<(BackendKind, bool), Arc<Extractor>>>,
}

impl AppState {
    pub fn new(store: Arc<dyn Store>, config: Config, token: Option<String>) -> Self {
        Self { inner: Arc::new(Inner { store, config, token, extractors: Mutex::new(HashMap::new()) }) }
    }

    pub fn store(&self) -> &Arc<dyn Store> {
        &self.inner.store
    }

    /// Extractor for a backend and normalization choice, built on first use.
    fn extractor(&self, backend: BackendKind, normalize: bool) -> Result<Arc<Extractor>, ApiError> {
        let mut cache = self.inner.extractors.lock();
        if let Some(e) = cache.get(&(backend, normalize)) {
            return Ok(e.clone());
        }
        let config = ExtractorConfig { backend, normalize, ..self.inner.config.pipeline.clone() };
        let extractor = Arc::new(
            Extractor::new(config)
                .map_err(|e| ApiError::bad_request(format!("backend {backend} is not available: {e}")))?,
        );
        cache.insert((backend, normalize), extractor.clone());
        Ok(extractor)
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/transcripts", post(upload_transcript))
        .route("/api/transcripts/{id}", get(get_transcript))
        .route("/api/records", get(list_records))
        .route("/api/records:extract", post(extract_record))
        .route("/api/records/{id}", get(get_record).put(put_record))
        .route("/api/records/{id}/versions", get(list_versions))
        .route("/api/records/{id}/versions/{version}", get(get_version))
        .route("/api/records/{id}/image.svg", get(get_image))
        .route("/api/eval", post(run_eval))
        .route("/api/eval/{id}", get(get_report))
        .route("/api/openapi.json", get(openapi))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new().route("/healthz", get(|| async { "ok" })).merge(api).with_state(state)
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.inner.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if !given.is_some_and(|g| constant_time_eq(g.as_bytes(), token.as_bytes())) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn openapi() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadJson {
    text: String,
    #[serde(default)]
    language_mode: Option<LanguageMode>,
    #[serde(default)]
    source: Option<String>,
}

#[derive(Deserialize, Default)]
struct UploadQuery {
    language_mode: Option<String>,
}

async fn upload_transcript(
    State(state): State<AppState>,
    Query(query): Query<UploadQuery>,
    req: Request,
) -> Result<Response, ApiError> {
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(|v| v.split(';').next().unwrap_or_default().trim().to_ascii_lowercase())
        .unwrap_or_default();
    let is_json = match content_type.as_str() {
        "application/json" => true,
        "text/plain" => false,
        other => {
            return Err(ApiError::new(
                StatusCode::UNSUPPORTED_MEDIA_TYPE,
                format!("unsupported content type {other:?}; send text/plain or application/json"),
            ))
        }
    };
    let limit = state.inner.config.max_upload_bytes;
    let bytes = to_bytes(req.into_body(), limit)
        .await
        .map_err(|_| ApiError::bad_request(format!("body exceeds the upload limit of {limit} bytes")))?;
    let text = String::from_utf8(bytes.to_vec()).map_err(|_| ApiError::bad_request("body is not valid UTF-8"))?;

    let (text, mode, source) = if is_json {
        let body: UploadJson =
            serde_json::from_str(&text).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))?;
        (body.text, body.language_mode, body.source)
    } else {
        let mode = query
            .language_mode
            .map(|m| m.parse::<LanguageMode>())
            .transpose()
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        (text, mode, None)
    };
    if text.trim().is_empty() {
        return Err(ApiError::bad_request("transcript text is empty"));
    }
    let transcript = Transcript::new(text, mode.unwrap_or_default(), source.unwrap_or_else(|| "upload".into()))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (stored, created) = state.store().put_transcript(transcript)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    let body = json!({"transcript_id": stored.id, "language_mode": stored.language_mode});
    Ok((status, location(&format!("/api/transcripts/{}", stored.id)), Json(body)).into_response())
}

fn location(path: &str) -> [(header::HeaderName, HeaderValue); 1] {
    [(header::LOCATION, HeaderValue::from_str(path).unwrap_or(HeaderValue::from_static("/")))]
}

async fn get_transcript(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Transcript>, ApiError> {
    state
        .store()
        .transcript(&TranscriptId(id.clone()))
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("transcript {id} not found")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractRequest {
    transcript_id: TranscriptId,
    #[serde(default)]
    backend: Option<String>,
    #[serde(default)]
    normalize: Option<bool>,
}

async fn extract_record(
    State(state): State<AppState>,
    body: Result<Json<ExtractRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<StoredRecord>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let transcript = state
        .store()
        .transcript(&req.transcript_id)
        .ok_or_else(|| ApiError::not_found(format!("transcript {} not found", req.transcript_id)))?;
    let defaults = &state.inner.config.pipeline;
    let backend = match req.backend {
        Some(b) => b.parse::<BackendKind>().map_err(|e| ApiError::bad_request(e.to_string()))?,
        None => defaults.backend,
    };
    let extractor = state.extractor(backend, req.normalize.unwrap_or(defaults.normalize))?;
    let out = extractor.extract(&transcript).await?;
    let now = Utc::now();
    let stored = StoredRecord {
        record_id: format!("r-{}", uuid::Uuid::new_v4().simple()),
        transcript_id: transcript.id.clone(),
        record: out.record,
        backend_used: backend.into(),
        pipeline_trace: out.trace,
        version: 1,
        edited_by_human: false,
        spans: out.spans,
        structured_text: out.normalized.then_some(out.transcript.text),
        warnings: out.warnings,
        created_at: now,
        updated_at: now,
    };
    Ok(Json(state.store().create_record(stored)?))
}

async fn list_records(State(state): State<AppState>) -> Json<Vec<RecordSummary>> {
    Json(state.store().records().iter().map(RecordSummary::from).collect())
}

fn find(state: &AppState, id: &str) -> Result<StoredRecord, ApiError> {
    state.store().record(id).ok_or_else(|| ApiError::not_found(format!("record {id} not found")))
}

async fn get_record(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StoredRecord>, ApiError> {
    find(&state, &id).map(Json)
}

async fn list_versions(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<StoredRecord>>, ApiError> {
    state.store().versions(&id).map(Json).ok_or_else(|| ApiError::not_found(format!("record {id} not found")))
}

async fn get_version(
    State(state): State<AppState>,
    Path((id, version)): Path<(String, u64)>,
) -> Result<Json<StoredRecord>, ApiError> {
    state
        .store()
        .versions(&id)
        .and_then(|v| v.into_iter().find(|r| r.version == version))
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("record {id} has no version {version}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PutRequest {
    version: u64,
    record: Value,
}

async fn put_record(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<PutRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<StoredRecord>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::unprocessable(e.body_text()))?;
    find(&state, &id)?;
    let record = OperationRecord::from_json_value(&req.record)?;
    let violations = opnote_core::validate_record(&record);
    if !violations.is_empty() {
        let problems: Vec<Value> = violations.iter().map(|v| json!({"key": v.field, "message": v.message})).collect();
        return Err(ApiError::unprocessable("record is invalid").with("problems", problems));
    }
    Ok(Json(state.store().update_record(&id, req.version, record)?))
}

#[derive(Deserialize, Default)]
struct ImageQuery {
    version: Option<u64>,
}

async fn get_image(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ImageQuery>,
) -> Result<Response, ApiError> {
    let stored = match q.version {
        None => find(&state, &id)?,
        Some(v) => state
            .store()
            .versions(&id)
            .and_then(|all| all.into_iter().find(|r| r.version == v))
            .ok_or_else(|| ApiError::not_found(format!("record {id} has no version {v}")))?,
    };
    let svg = render_svg(&build_scene(&stored.record));
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/svg+xml"));
    Ok((headers, svg).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalRequest {
    /// Corpus directory (or its manifest file); predictions are the latest
    /// stored records of its transcripts.
    #[serde(default)]
    corpus: Option<PathBuf>,
    /// Stored records to compare, aligned by position.
    #[serde(default)]
    records: Option<RecordPairs>,
    #[serde(default)]
    gold: Option<Vec<Value>>,
    #[serde(default)]
    predictions: Option<Vec<Prediction>>,
    #[serde(default)]
    match_mode: MatchMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordPairs {
    gold: Vec<String>,
    pred: Vec<String>,
}

async fn run_eval(
    State(state): State<AppState>,
    body: Result<Json<EvalRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let (gold, pred) = match (req.corpus, req.records, req.gold, req.predictions) {
        (Some(path), None, None, None) => corpus_inputs(&state, &path)?,
        (None, Some(pairs), None, None) => record_inputs(&state, &pairs)?,
        (None, None, Some(gold), Some(pred)) => {
            let gold = gold
                .iter()
                .map(|g| GoldDocument::from_json_line(&g.to_string()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(ApiError::from)?;
            (gold, pred)
        }
        _ => return Err(ApiError::bad_request("give exactly one of corpus, records, or gold with predictions")),
    };
    let report = evaluate(&gold, &pred, req.match_mode)?;
    let id = format!("e-{}", uuid::Uuid::new_v4().simple());
    state.store().put_report(&id, &report)?;
    let mut resp = (location(&format!("/api/eval/{id}")), Json(report)).into_response();
    resp.headers_mut().insert("x-report-id", HeaderValue::from_str(&id).expect("ascii id"));
    Ok(resp)
}

fn corpus_inputs(state: &AppState, path: &FsPath) -> Result<(Vec<GoldDocument>, Vec<Prediction>), ApiError> {
    let mut dir = resolve_corpus(state, path)?;
    if dir.file_name().is_some_and(|n| n == opnote_core::corpus::MANIFEST_FILE) {
        dir.pop();
    }
    if !dir.join(opnote_core::corpus::MANIFEST_FILE).is_file() {
        return Err(ApiError::not_found(format!("no corpus manifest under {}", path.display())));
    }
    let gold = read_corpus(&dir)?;
    let mut pred = Vec::with_capacity(gold.len());
    for doc in &gold {
        let stored = state
            .store()
            .latest_for_transcript(&doc.transcript.id)
            .ok_or_else(|| ApiError::unprocessable(format!("no stored record for transcript {}", doc.transcript.id)))?;
        pred.push(Prediction { transcript_id: doc.transcript.id.clone(), spans: stored.spans, record: stored.record });
    }
    Ok((gold, pred))
}

fn resolve_corpus(state: &AppState, path: &FsPath) -> Result<PathBuf, ApiError> {
    match &state.inner.config.corpus_root {
        None => Ok(path.to_path_buf()),
        Some(root) => {
            let escapes = path.is_absolute() || path.components().any(|c| matches!(c, Component::ParentDir));
            if escapes {
                return Err(ApiError::bad_request("corpus path must be relative to the corpus root"));
            }
            Ok(root.join(path))
        }
    }
}

/// Record-only comparison: gold documents carry no spans, so only class
/// accuracy is reported.
fn record_inputs(state: &AppState, pairs: &RecordPairs) -> Result<(Vec<GoldDocument>, Vec<Prediction>), ApiError> {
    if pairs.gold.len() != pairs.pred.len() {
        return Err(ApiError::unprocessable(format!(
            "{} gold records but {} predictions",
            pairs.gold.len(),
            pairs.pred.len()
        )));
    }
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for (i, (g, p)) in pairs.gold.iter().zip(&pairs.pred).enumerate() {
        let g = find(state, g)?;
        let p = find(state, p)?;
        let transcript = state
            .store()
            .transcript(&g.transcript_id)
            .ok_or_else(|| ApiError::not_found(format!("transcript {} not found", g.transcript_id)))?;
        let id = TranscriptId(format!("pair-{i}"));
        let transcript = Transcript { id: id.clone(), ..transcript };
        gold.push(GoldDocument { transcript, gold_spans: Vec::new(), gold_record: g.record });
        pred.push(Prediction { transcript_id: id, spans: None, record: p.record });
    }
    Ok((gold, pred))
}

async fn get_report(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let report = state.store().report(&id).ok_or_else(|| ApiError::not_found(format!("report {id} not found")))?;
    Ok(Json(report).into_response())
}
