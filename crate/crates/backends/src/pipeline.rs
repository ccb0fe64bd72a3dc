//! One entry point over all backends: optional normalization, tagging or
//! direct structuring, then validation.

use std::sync::Arc;
use std::time::Instant;

use opnote_core::structurer::{AuditEntry, MappingTable};
use opnote_core::{
    validate_record, EntitySpan, LanguagePack, OperationRecord, RuleTagger, Structurer, Transcript, TranscriptId,
};
use serde::{Deserialize, Serialize};

use crate::config::{LlmConfig, TaggerBackend, TaggerConfig};
use crate::error::{BackendError, Result};
use crate::llm::LlmClient;
use crate::remote::RemoteTagger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Rule,
    Remote,
    Llm,
}

impl std::str::FromStr for BackendKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rule" => Ok(BackendKind::Rule),
            "remote" => Ok(BackendKind::Remote),
            "llm" => Ok(BackendKind::Llm),
            other => Err(BackendError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Rule => "rule",
            BackendKind::Remote => "remote",
            BackendKind::Llm => "llm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorConfig {
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default = "default_pack")]
    pub lang_pack: String,
    /// Rewrite MIXED transcripts before extraction.
    #[serde(default)]
    pub normalize: bool,
    /// Keep going with the original text when normalization fails.
    #[serde(default)]
    pub normalize_passthrough: bool,
    #[serde(default)]
    pub tagger: TaggerConfig,
    #[serde(default)]
    pub llm: Option<LlmConfig>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Rule,
            lang_pack: default_pack(),
            normalize: false,
            normalize_passthrough: false,
            tagger: TaggerConfig::default(),
            llm: None,
        }
    }
}

fn default_pack() -> String {
    "en".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Normalize,
    Tag,
    Structure,
    LlmStructure,
    Validate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Input => "input",
            Stage::Normalize => "normalize",
            Stage::Tag => "tag",
            Stage::Structure => "structure",
            Stage::LlmStructure => "llm_structure",
            Stage::Validate => "validate",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub millis: f64,
}

/// A backend failure together with the pipeline stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {error}")]
pub struct ExtractError {
    pub stage: Stage,
    #[source]
    pub error: BackendError,
}

impl ExtractError {
    fn at(stage: Stage) -> impl FnOnce(BackendError) -> ExtractError {
        move |error| ExtractError { stage, error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    /// The transcript that was actually structured.
    pub transcript: Transcript,
    pub source_id: TranscriptId,
    pub normalized: bool,
    pub backend: BackendKind,
    pub spans: Option<Vec<EntitySpan>>,
    pub record: OperationRecord,
    pub audit: Vec<AuditEntry>,
    pub warnings: Vec<String>,
    pub trace: Vec<StageTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_model_output: Option<String>,
}

struct Tracer(Vec<StageTiming>);

impl Tracer {
    fn record<T>(&mut self, stage: Stage, started: Instant, value: T) -> T {
        self.0.push(StageTiming { stage, millis: started.elapsed().as_secs_f64() * 1000.0 });
        value
    }
}

#[derive(Debug, Clone)]
pub struct Extractor {
    config: ExtractorConfig,
    pack: Arc<LanguagePack>,
    tagger: RuleTagger,
    structurer: Structurer,
    remote: Option<RemoteTagger>,
    llm: Option<LlmClient>,
}

impl Extractor {
    pub fn new(config: ExtractorConfig) -> Result<Self> {
        let llm = match &config.llm {
            Some(c) if config.backend == BackendKind::Llm || config.normalize => Some(LlmClient::new(c.clone())?),
            _ => None,
        };
        Self::build(config, llm)
    }

    /// Like [`Extractor::new`] with an already built completion client.
    pub fn with_llm(config: ExtractorConfig, llm: LlmClient) -> Result<Self> {
        Self::build(config, Some(llm))
    }

    fn build(config: ExtractorConfig, llm: Option<LlmClient>) -> Result<Self> {
        let pack = LanguagePack::load(&config.lang_pack)?;
        let remote = match config.backend {
            BackendKind::Remote => {
                let tagger = TaggerConfig { backend: TaggerBackend::Remote, ..config.tagger.clone() };
                Some(RemoteTagger::new(tagger)?)
            }
            _ => None,
        };
        if llm.is_none() && (config.backend == BackendKind::Llm || config.normalize) {
            return Err(BackendError::Config("the llm backend and normalization need an [llm] section".into()));
        }
        Ok(Self {
            tagger: RuleTagger::new(pack.clone()),
            structurer: Structurer::new(pack.clone(), MappingTable::standard()),
            pack,
            remote,
            llm,
            config,
        })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn pack(&self) -> &Arc<LanguagePack> {
        &self.pack
    }

    pub async fn extract(&self, transcript: &Transcript) -> Result<Extraction, ExtractError> {
        let mut tracer = Tracer(Vec::new());
        transcript.validate().map_err(|e| ExtractError { stage: Stage::Input, error: e.into() })?;
        let mut warnings = Vec::new();
        let mut working = transcript.clone();
        let mut normalized = false;
        if self.config.normalize && transcript.language_mode == opnote_core::LanguageMode::Mixed {
            let llm = self.llm.as_ref().expect("checked at construction");
            let t0 = Instant::now();
            match llm.normalize(transcript).await {
                Ok(t) => {
                    working = t;
                    normalized = true;
                }
                Err(e) if self.config.normalize_passthrough => {
                    tracing::warn!(error = %e, "normalization failed, using the original text");
                    warnings.push(format!("normalization failed, original text used: {e}"));
                }
                Err(e) => return Err(ExtractError::at(Stage::Normalize)(e)),
            }
            tracer.record(Stage::Normalize, t0, ());
        }

        let (spans, record, audit, raw) = match self.config.backend {
            BackendKind::Rule | BackendKind::Remote => {
                let t0 = Instant::now();
                let spans = match &self.remote {
                    Some(remote) => remote.tag(&working).await.map_err(ExtractError::at(Stage::Tag))?,
                    None => self.tagger.tag(&working.text),
                };
                let spans = tracer.record(Stage::Tag, t0, spans);
                let t0 = Instant::now();
                let outcome = self
                    .structurer
                    .structure(&spans, &working.text)
                    .map_err(|e| ExtractError { stage: Stage::Structure, error: e.into() })?;
                let outcome = tracer.record(Stage::Structure, t0, outcome);
                (Some(spans), outcome.record, outcome.audit, None)
            }
            BackendKind::Llm => {
                let t0 = Instant::now();
                let llm = self.llm.as_ref().expect("checked at construction");
                let out = llm.structure(&working).await.map_err(ExtractError::at(Stage::LlmStructure))?;
                let out = tracer.record(Stage::LlmStructure, t0, out);
                if out.repaired {
                    warnings.push("model output was repaired on a second request".into());
                }
                (None, out.record, Vec::new(), Some(out.raw))
            }
        };
        let t0 = Instant::now();
        if let Some(v) = validate_record(&record).first() {
            let error = BackendError::Structuring { message: v.to_string(), raw: raw.unwrap_or_default() };
            return Err(ExtractError { stage: Stage::Validate, error });
        }
        tracer.record(Stage::Validate, t0, ());
        Ok(Extraction {
            source_id: transcript.id.clone(),
            transcript: working,
            normalized,
            backend: self.config.backend,
            spans,
            record,
            audit,
            warnings,
            trace: tracer.0,
            raw_model_output: raw,
        })
    }
}
