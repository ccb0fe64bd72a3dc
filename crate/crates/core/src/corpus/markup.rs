//! Inline entity markup: `[[TAG:surface]]`.

use crate::error::{CoreError, Result};
use crate::span::EntitySpan;
use crate::tags::Tag;

/// Strips markup, returning plain text and the marked spans.
pub fn parse_markup(marked: &str) -> Result<(String, Vec<EntitySpan>)> {
    let mut text = String::with_capacity(marked.len());
    let mut spans = Vec::new();
    let mut chars = 0usize;
    let mut rest = marked;
    while let Some(open) = rest.find("[[") {
        let before = &rest[..open];
        text.push_str(before);
        chars += before.chars().count();
        let after = &rest[open + 2..];
        let colon =
            after.find(':').ok_or_else(|| CoreError::Corpus(format!("markup without tag separator in {marked:?}")))?;
        let tag: Tag = after[..colon].parse()?;
        let body = &after[colon + 1..];
        let close = body.find("]]").ok_or_else(|| CoreError::Corpus(format!("unclosed markup in {marked:?}")))?;
        let surface = &body[..close];
        if surface.contains("[[") {
            return Err(CoreError::Corpus(format!("nested markup in {marked:?}")));
        }
        let n = surface.chars().count();
        if n == 0 {
            return Err(CoreError::Corpus(format!("empty {tag} markup in {marked:?}")));
        }
        text.push_str(surface);
        spans.push(EntitySpan { tag, start: chars, end: chars + n, surface: surface.to_string() });
        chars += n;
        rest = &body[close + 2..];
    }
    if rest.contains("]]") {
        return Err(CoreError::Corpus(format!("stray markup close in {marked:?}")));
    }
    text.push_str(rest);
    Ok((text, spans))
}

/// Writes spans back as markup (inverse of [`parse_markup`]).
pub fn to_markup(text: &str, spans: &[EntitySpan]) -> String {
    let mut out = String::with_capacity(text.len() + spans.len() * 8);
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    for s in spans {
        out.extend(&chars[pos..s.start]);
        out.push_str("[[");
        out.push_str(s.tag.code());
        out.push(':');
        out.extend(&chars[s.start..s.end]);
        out.push_str("]]");
        pos = s.end;
    }
    out.extend(&chars[pos..]);
    out
}
