//! Few-shot completion client: structuring and language normalization.

mod extract;
mod prompt;

use std::fmt;

use opnote_core::{validate_record, LanguageMode, OperationRecord, Transcript};
use reqwest::Client;
use serde::Serialize;
use serde_json::Value;

pub use extract::{completion_text, first_json_object, strip_fences};
pub use prompt::{FewShotCase, PromptTemplate, NOT_MENTIONED};

use crate::config::LlmConfig;
use crate::error::{BackendError, Result};
use crate::http::{new_request_id, post_json};

#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn from_env(var: &str) -> Result<Self> {
        match std::env::var(var) {
            Ok(v) if !v.trim().is_empty() => Ok(Self(v)),
            _ => Err(BackendError::MissingApiKey(var.to_string())),
        }
    }

    fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    fn new(role: &str, content: impl Into<String>) -> Self {
        Self { role: role.into(), content: content.into() }
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
}

/// A structured record together with the model text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmOutcome {
    pub record: OperationRecord,
    pub raw: String,
    pub repaired: bool,
}

#[derive(Debug, Clone)]
pub struct LlmClient {
    client: Client,
    config: LlmConfig,
    template: PromptTemplate,
    shots: Vec<FewShotCase>,
    key: ApiKey,
}

impl LlmClient {
    /// Reads the key from the environment variable named in the config.
    pub fn new(config: LlmConfig) -> Result<Self> {
        let key = ApiKey::from_env(&config.api_key_env)?;
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: LlmConfig, key: ApiKey) -> Result<Self> {
        config.validate()?;
        let template = config.template()?;
        let shots = config.shots()?;
        let client = Client::builder().build().map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { client, config, template, shots, key })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    pub fn structure_prompt(&self, document: &str) -> String {
        self.template.structure_prompt(&self.shots, document)
    }

    async fn complete(&self, messages: &[Message]) -> Result<String> {
        let request_id = new_request_id();
        tracing::debug!(request_id, model = %self.config.model_name, messages = messages.len(), "completion request");
        let body = CompletionRequest { model: &self.config.model_name, messages, temperature: self.config.temperature };
        let value = post_json(
            &self.client,
            &self.config.endpoint_url,
            &body,
            &request_id,
            Some(self.key.expose()),
            self.config.retry(),
        )
        .await?;
        completion_text(&value)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol("completion response has no text field".into()))
    }

    /// Asks the model for the record of `transcript`. Unusable output is
    /// re-asked once when `repair_retry` is on, otherwise it is an error.
    pub async fn structure(&self, transcript: &Transcript) -> Result<LlmOutcome> {
        transcript.validate()?;
        let mut messages = vec![Message::new("user", self.structure_prompt(&transcript.text))];
        let raw = self.complete(&messages).await?;
        let problems = match parse_output(&raw) {
            Ok(record) => return Ok(LlmOutcome { record, raw, repaired: false }),
            Err(problems) => problems,
        };
        if !self.config.repair_retry {
            return Err(structuring_error(&problems, raw));
        }
        tracing::info!(problems = problems.len(), "model output unusable, asking once more");
        messages.push(Message::new("assistant", raw));
        messages.push(Message::new("user", self.template.repair_prompt(&problems)));
        let raw = self.complete(&messages).await?;
        match parse_output(&raw) {
            Ok(record) => Ok(LlmOutcome { record, raw, repaired: true }),
            Err(problems) => Err(structuring_error(&problems, raw)),
        }
    }

    /// Rewrites a mixed-language transcript into a single language.
    pub async fn normalize(&self, transcript: &Transcript) -> Result<Transcript> {
        if transcript.language_mode != LanguageMode::Mixed {
            return Err(BackendError::Precondition("normalization needs a MIXED transcript".into()));
        }
        transcript.validate()?;
        let messages = [Message::new("user", self.template.normalize_prompt(&transcript.text))];
        let raw = self.complete(&messages).await?;
        let text = strip_fences(&raw);
        if text.is_empty() {
            return Err(BackendError::Structuring { message: "model returned an empty rewrite".into(), raw });
        }
        let source = provenance(transcript, &self.config.model_name);
        Ok(Transcript::new(text, LanguageMode::Monolingual, source)?)
    }
}

fn provenance(original: &Transcript, model: &str) -> String {
    let step = format!("normalized from {} by {model}", original.id);
    if original.source.is_empty() {
        step
    } else {
        format!("{}; {step}", original.source)
    }
}

fn structuring_error(problems: &[String], raw: String) -> BackendError {
    BackendError::Structuring { message: problems.join("; "), raw }
}

/// Record from model text, or the list of problems found.
pub fn parse_output(raw: &str) -> std::result::Result<OperationRecord, Vec<String>> {
    let Some(mut value) = first_json_object(raw) else {
        return Err(vec!["no JSON object found in the output".into()]);
    };
    if let Value::Object(map) = &mut value {
        for v in map.values_mut() {
            if v.is_null() {
                *v = Value::String(NOT_MENTIONED.into());
            }
        }
    }
    let record = match OperationRecord::from_json_value(&value) {
        Ok(r) => r,
        Err(opnote_core::CoreError::Schema(issues)) => {
            return Err(issues.iter().map(|i| format!("{}: {}", i.key, i.message)).collect())
        }
        Err(e) => return Err(vec![e.to_string()]),
    };
    let violations = validate_record(&record);
    if violations.is_empty() {
        Ok(record)
    } else {
        Err(violations.iter().map(|v| v.to_string()).collect())
    }
}
