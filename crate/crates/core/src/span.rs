//! Character-offset entity spans.
//!
//! Offsets count Unicode scalar values, not bytes, so the same span is
//! meaningful for Hangul and Latin text alike.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tags::Tag;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub tag: Tag,
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub surface: String,
}

impl EntitySpan {
    /// Builds a span and fills its surface from `text`.
    pub fn from_text(tag: Tag, start: usize, end: usize, text: &str) -> Result<Self> {
        let surface = char_slice(text, start, end)
            .ok_or_else(|| {
                CoreError::InvalidSpan(format!("{tag} [{start}, {end}) outside text of {} chars", text.chars().count()))
            })?
            .to_string();
        if start >= end {
            return Err(CoreError::InvalidSpan(format!("{tag} [{start}, {end}) is empty")));
        }
        Ok(Self { tag, start, end, surface })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn standoff(&self) -> StandoffSpan {
        StandoffSpan { tag: self.tag, start: self.start, end: self.end }
    }
}

/// A span without its surface, as stored in gold files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StandoffSpan {
    pub tag: Tag,
    pub start: usize,
    pub end: usize,
}

impl StandoffSpan {
    pub fn resolve(self, text: &str) -> Result<EntitySpan> {
        EntitySpan::from_text(self.tag, self.start, self.end, text)
    }
}

/// Slices `text` by character offsets. Returns `None` when out of range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.nth(start)?;
    let b_end = if end == start { b_start } else { indices.nth(end - start - 1)? };
    Some(&text[b_start..b_end])
}

/// Maps character offsets to byte offsets (length = chars + 1).
pub fn char_to_byte_table(text: &str) -> Vec<usize> {
    let mut table: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    table.push(text.len());
    table
}

/// Maps byte offsets on char boundaries to character offsets.
pub fn byte_to_char(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Checks span bounds, surfaces, ordering and overlap against `text`.
pub fn validate_spans(spans: &[EntitySpan], text: &str) -> Result<()> {
    let n_chars = text.chars().count();
    let table = char_to_byte_table(text);
    let mut prev_end = 0usize;
    for (i, span) in spans.iter().enumerate() {
        if span.start >= span.end || span.end > n_chars {
            return Err(CoreError::InvalidSpan(format!(
                "span #{i} {} [{}, {}) out of bounds for {n_chars} chars",
                span.tag, span.start, span.end
            )));
        }
        let slice = &text[table[span.start]..table[span.end]];
        if slice != span.surface {
            return Err(CoreError::InvalidSpan(format!(
                "span #{i} surface {:?} does not match text {:?}",
                span.surface, slice
            )));
        }
        if i > 0 && span.start < prev_end {
            return Err(CoreError::InvalidSpan(format!(
                "span #{i} {} [{}, {}) overlaps or precedes the previous span",
                span.tag, span.start, span.end
            )));
        }
        prev_end = span.end;
    }
    Ok(())
}
