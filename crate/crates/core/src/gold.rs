//! Annotated documents: transcript, gold spans and gold record.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::record::{validate_record, OperationRecord};
use crate::span::{validate_spans, EntitySpan, StandoffSpan};
use crate::transcript::Transcript;

#[derive(Debug, Clone, PartialEq)]
pub struct GoldDocument {
    pub transcript: Transcript,
    pub gold_spans: Vec<EntitySpan>,
    pub gold_record: OperationRecord,
}

/// One line of a gold JSONL file; spans are stored standoff.
#[derive(Serialize, Deserialize)]
struct GoldLine {
    transcript: Transcript,
    gold_spans: Vec<StandoffSpan>,
    gold_record: OperationRecord,
}

impl GoldDocument {
    pub fn validate(&self) -> Result<()> {
        self.transcript.validate()?;
        validate_spans(&self.gold_spans, &self.transcript.text)?;
        let violations = validate_record(&self.gold_record);
        if let Some(v) = violations.first() {
            return Err(CoreError::Corpus(format!("gold record of {}: {v}", self.transcript.id)));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> Result<String> {
        let line = GoldLine {
            transcript: self.transcript.clone(),
            gold_spans: self.gold_spans.iter().map(EntitySpan::standoff).collect(),
            gold_record: self.gold_record.clone(),
        };
        Ok(serde_json::to_string(&line)?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let raw: GoldLine = serde_json::from_str(line)?;
        let spans = raw.gold_spans.into_iter().map(|s| s.resolve(&raw.transcript.text)).collect::<Result<Vec<_>>>()?;
        let doc = GoldDocument { transcript: raw.transcript, gold_spans: spans, gold_record: raw.gold_record };
        doc.validate()?;
        Ok(doc)
    }
}

pub fn read_gold_jsonl(reader: impl BufRead) -> Result<Vec<GoldDocument>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(GoldDocument::from_json_line(&line).map_err(|e| CoreError::Corpus(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_gold_jsonl(mut writer: impl Write, docs: &[GoldDocument]) -> Result<()> {
    for doc in docs {
        writeln!(writer, "{}", doc.to_json_line()?)?;
    }
    Ok(())
}
