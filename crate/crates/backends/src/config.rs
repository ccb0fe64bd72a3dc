use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{BackendError, Result};
use crate::llm::{FewShotCase, PromptTemplate};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_BACKOFF_MS: u64 = 200;
pub const FEW_SHOT_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaggerBackend {
    #[default]
    Rule,
    Remote,
}

/// Which span tagger to run and, for the remote one, how to reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaggerConfig {
    #[serde(default)]
    pub backend: TaggerBackend,
    #[serde(default)]
    pub endpoint_url: Option<Url>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            backend: TaggerBackend::Rule,
            endpoint_url: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_retries: DEFAULT_MAX_RETRIES,
            backoff_ms: DEFAULT_BACKOFF_MS,
        }
    }
}

impl TaggerConfig {
    pub fn remote(endpoint: Url) -> Self {
        Self { backend: TaggerBackend::Remote, endpoint_url: Some(endpoint), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.backend, &self.endpoint_url) {
            (TaggerBackend::Remote, None) => {
                return Err(BackendError::Config("the remote tagger needs endpoint_url".into()))
            }
            (TaggerBackend::Rule, Some(_)) => {
                return Err(BackendError::Config("endpoint_url is only valid for the remote tagger".into()))
            }
            _ => {}
        }
        check_http(self.endpoint_url.as_ref())?;
        if self.timeout_ms == 0 {
            return Err(BackendError::Config("timeout_ms must be positive".into()));
        }
        if self.max_retries > 10 {
            return Err(BackendError::Config("max_retries must be at most 10".into()));
        }
        Ok(())
    }

    pub(crate) fn retry(&self) -> RetryPolicy {
        RetryPolicy { timeout_ms: self.timeout_ms, max_retries: self.max_retries, backoff_ms: self.backoff_ms }
    }
}

/// Settings for the few-shot completion client.
///
/// `prompt` and `few_shot` name a bundled resource (`en`, `ko`) or a file.
/// Inline `few_shot_cases` take precedence over `few_shot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint_url: Url,
    pub api_key_env: String,
    pub model_name: String,
    #[serde(default = "default_bundle")]
    pub prompt: String,
    #[serde(default = "default_bundle")]
    pub few_shot: String,
    #[serde(default)]
    pub few_shot_cases: Vec<FewShotCase>,
    #[serde(default)]
    pub temperature: f64,
    /// Re-ask once with the list of problems when the output is unusable.
    #[serde(default)]
    pub repair_retry: bool,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl LlmConfig {
    pub fn new(endpoint_url: Url, api_key_env: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url,
            api_key_env: api_key_env.into(),
            model_name: model_name.into(),
            prompt: default_bundle(),
            few_shot: default_bundle(),
            few_shot_cases: Vec::new(),
            temperature: 0.0,
            repair_retry: false,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_retries: DEFAULT_MAX_RETRIES,
            backoff_ms: DEFAULT_BACKOFF_MS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_http(Some(&self.endpoint_url))?;
        if self.api_key_env.trim().is_empty() {
            return Err(BackendError::Config("api_key_env must name an environment variable".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(BackendError::Config("model_name is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(BackendError::Config(format!("temperature {} is outside [0, 1]", self.temperature)));
        }
        if self.timeout_ms == 0 {
            return Err(BackendError::Config("timeout_ms must be positive".into()));
        }
        let cases = self.shots()?;
        if cases.len() != FEW_SHOT_COUNT {
            return Err(BackendError::Config(format!(
                "exactly {FEW_SHOT_COUNT} few-shot cases are required, found {}",
                cases.len()
            )));
        }
        for (i, case) in cases.iter().enumerate() {
            case.validate().map_err(|e| BackendError::Config(format!("few-shot case {}: {e}", i + 1)))?;
        }
        self.template()?;
        Ok(())
    }

    pub fn shots(&self) -> Result<Vec<FewShotCase>> {
        if !self.few_shot_cases.is_empty() {
            return Ok(self.few_shot_cases.clone());
        }
        FewShotCase::load(&self.few_shot)
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        PromptTemplate::load(&self.prompt)
    }

    pub(crate) fn retry(&self) -> RetryPolicy {
        RetryPolicy { timeout_ms: self.timeout_ms, max_retries: self.max_retries, backoff_ms: self.backoff_ms }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RetryPolicy {
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

fn check_http(url: Option<&Url>) -> Result<()> {
    match url {
        Some(u) if !matches!(u.scheme(), "http" | "https") => {
            Err(BackendError::Config(format!("unsupported URL scheme {:?}", u.scheme())))
        }
        _ => Ok(()),
    }
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}

fn default_backoff() -> u64 {
    DEFAULT_BACKOFF_MS
}

fn default_bundle() -> String {
    "en".into()
}

/// Resolves a bundled resource name or reads a file path.
pub(crate) fn bundled_or_file(name: &str, bundled: &[(&str, &'static str)]) -> Result<String> {
    if let Some((_, text)) = bundled.iter().find(|(n, _)| *n == name) {
        return Ok((*text).to_string());
    }
    let path = PathBuf::from(name);
    read_file(&path)
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| BackendError::Config(format!("cannot read {}: {e}", path.display())))
}
