//! Extraction backends: the rule tagger, a remote token-classifier client,
//! a few-shot completion client and the mixed-language normalizer.

pub mod config;
pub mod error;
mod http;
pub mod llm;
pub mod pipeline;
pub mod remote;
#[cfg(feature = "stub")]
pub mod stub;

pub use config::{LlmConfig, TaggerBackend, TaggerConfig, FEW_SHOT_COUNT};
pub use error::{BackendError, Result};
pub use http::REQUEST_ID_HEADER;
pub use llm::{ApiKey, FewShotCase, LlmClient, LlmOutcome, PromptTemplate};
pub use pipeline::{BackendKind, ExtractError, Extraction, Extractor, ExtractorConfig, Stage, StageTiming};
pub use remote::{RemoteLabels, RemoteTagger};

use opnote_core::{EntitySpan, RuleTagger, Transcript};

/// Rule tagging of a transcript with the given tagger.
pub fn rule_tag(tagger: &RuleTagger, transcript: &Transcript) -> Vec<EntitySpan> {
    tagger.tag(&transcript.text)
}
