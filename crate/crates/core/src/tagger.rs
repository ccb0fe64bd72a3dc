//! Deterministic pattern tagger over a language pack's rules.

use std::sync::Arc;

use crate::pack::LanguagePack;
use crate::span::{byte_to_char, char_slice, EntitySpan};
use crate::tags::Tag;

/// Byte ranges of sentences: split after `.`, `!`, `?` followed by
/// whitespace, and at line breaks.
pub fn sentences(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let boundary = match c {
            '\n' => true,
            '.' | '!' | '?' => chars.peek().is_none_or(|(_, n)| n.is_whitespace()),
            _ => false,
        };
        if boundary {
            let end = i + c.len_utf8();
            if !text[start..end].trim().is_empty() {
                out.push((start, end));
            }
            start = end;
        }
    }
    if !text[start..].trim().is_empty() {
        out.push((start, text.len()));
    }
    out
}

/// A candidate match: (canonical byte start, canonical byte end, rule index).
type Candidate = (usize, usize, usize);

/// Applies pack rules per sentence and keeps a non-overlapping set of spans:
/// earliest start first, then longest, then earliest rule.
#[derive(Debug, Clone)]
pub struct RuleTagger {
    pack: Arc<LanguagePack>,
}

impl RuleTagger {
    pub fn new(pack: Arc<LanguagePack>) -> Self {
        Self { pack }
    }

    pub fn english() -> Self {
        Self::new(LanguagePack::english())
    }

    pub fn pack(&self) -> &Arc<LanguagePack> {
        &self.pack
    }

    pub fn tag(&self, text: &str) -> Vec<EntitySpan> {
        let canon = self.pack.canonicalize(text);
        let ctext = canon.text.as_str();
        let mut candidates: Vec<Candidate> = Vec::new();
        for (s, e) in sentences(ctext) {
            let sentence = &ctext[s..e];
            for (idx, rule) in self.pack.tagger_rules.iter().enumerate() {
                if rule.context.as_ref().is_some_and(|c| !c.is_match(sentence)) {
                    continue;
                }
                for caps in rule.pattern.captures_iter(sentence) {
                    let m = caps.name("e").unwrap_or_else(|| caps.get(0).expect("group 0"));
                    let (ms, me) = trim_range(sentence, m.start(), m.end());
                    if ms < me {
                        candidates.push((s + ms, s + me, idx));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| a.0.cmp(&b.0).then((b.1 - b.0).cmp(&(a.1 - a.0))).then(a.2.cmp(&b.2)));
        let mut spans = Vec::new();
        let mut covered_to = 0;
        for (s, e, idx) in candidates {
            if s < covered_to {
                continue;
            }
            covered_to = e;
            let (cs, ce) = (byte_to_char(ctext, s), byte_to_char(ctext, e));
            let (os, oe) = canon.to_original(cs, ce);
            let surface = char_slice(text, os, oe).expect("mapped range in bounds").to_string();
            spans.push(EntitySpan { tag: self.pack.tagger_rules[idx].tag, start: os, end: oe, surface });
        }
        spans
    }

    /// Tags of every rule, for diagnostics.
    pub fn rule_tags(&self) -> Vec<Tag> {
        self.pack.tagger_rules.iter().map(|r| r.tag).collect()
    }
}

fn trim_range(s: &str, start: usize, end: usize) -> (usize, usize) {
    let slice = &s[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead + trail >= slice.len() {
        return (start, start);
    }
    (start + lead, end - trail)
}
