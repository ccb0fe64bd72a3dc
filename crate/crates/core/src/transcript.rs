use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LanguageMode {
    /// Narrative written in a single language.
    #[default]
    Monolingual,
    /// Narrative mixing languages, e.g. English terms transliterated into Hangul.
    Mixed,
}

impl std::str::FromStr for LanguageMode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "monolingual" | "mono" => Ok(LanguageMode::Monolingual),
            "mixed" => Ok(LanguageMode::Mixed),
            other => Err(CoreError::InvalidTranscript(format!("unknown language mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TranscriptId(pub String);

impl TranscriptId {
    /// Content address of a transcript: SHA-256 over mode and text, truncated.
    pub fn for_content(text: &str, mode: LanguageMode) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(match mode {
            LanguageMode::Monolingual => b"M\0".as_slice(),
            LanguageMode::Mixed => b"X\0".as_slice(),
        });
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        TranscriptId(format!("t-{}", hex::encode(&digest[..12])))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TranscriptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: TranscriptId,
    pub text: String,
    pub language_mode: LanguageMode,
    #[serde(default)]
    pub source: String,
    pub created_at: DateTime<Utc>,
}

impl Transcript {
    pub fn new(text: impl Into<String>, language_mode: LanguageMode, source: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CoreError::InvalidTranscript("text is empty".into()));
        }
        Ok(Self {
            id: TranscriptId::for_content(&text, language_mode),
            text,
            language_mode,
            source: source.into(),
            created_at: Utc::now(),
        })
    }

    /// Like [`Transcript::new`] but with a caller-chosen id and timestamp.
    pub fn with_id(
        id: TranscriptId,
        text: impl Into<String>,
        language_mode: LanguageMode,
        source: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> Result<Self> {
        let mut t = Self::new(text, language_mode, source)?;
        t.id = id;
        t.created_at = created_at;
        Ok(t)
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(CoreError::InvalidTranscript("text is empty".into()));
        }
        Ok(())
    }
}
