use chrono::{DateTime, Utc};
use opnote_backends::{BackendKind, StageTiming};
use opnote_core::{EntitySpan, OperationRecord, TranscriptId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BackendUsed {
    Rule,
    Remote,
    Llm,
}

impl From<BackendKind> for BackendUsed {
    fn from(k: BackendKind) -> Self {
        match k {
            BackendKind::Rule => BackendUsed::Rule,
            BackendKind::Remote => BackendUsed::Remote,
            BackendKind::Llm => BackendUsed::Llm,
        }
    }
}

/// One version of a persisted record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub record_id: String,
    pub transcript_id: TranscriptId,
    pub record: OperationRecord,
    pub backend_used: BackendUsed,
    pub pipeline_trace: Vec<StageTiming>,
    pub version: u64,
    pub edited_by_human: bool,
    /// Entity spans over `structured_text` (or the transcript when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<EntitySpan>>,
    /// The rewritten text, when the transcript was normalized first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured_text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl StoredRecord {
    /// The next version carrying a human correction.
    pub fn corrected(&self, record: OperationRecord) -> StoredRecord {
        StoredRecord {
            record,
            version: self.version + 1,
            edited_by_human: true,
            updated_at: Utc::now(),
            ..self.clone()
        }
    }
}

/// Listing entry for `GET /api/records`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub record_id: String,
    pub transcript_id: TranscriptId,
    pub version: u64,
    pub backend_used: BackendUsed,
    pub edited_by_human: bool,
    pub updated_at: DateTime<Utc>,
}

impl From<&StoredRecord> for RecordSummary {
    fn from(r: &StoredRecord) -> Self {
        Self {
            record_id: r.record_id.clone(),
            transcript_id: r.transcript_id.clone(),
            version: r.version,
            backend_used: r.backend_used,
            edited_by_human: r.edited_by_human,
            updated_at: r.updated_at,
        }
    }
}
