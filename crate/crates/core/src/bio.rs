//! BIO label sequences and their conversion to and from entity spans.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};
use crate::span::{char_to_byte_table, EntitySpan};
use crate::tags::Tag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Outside,
    Begin(Tag),
    Inside(Tag),
}

impl Label {
    pub fn tag(self) -> Option<Tag> {
        match self {
            Label::Outside => None,
            Label::Begin(t) | Label::Inside(t) => Some(t),
        }
    }

    /// Every label over the tag set: `O` plus `B-`/`I-` per tag.
    pub fn alphabet() -> Vec<Label> {
        std::iter::once(Label::Outside)
            .chain(Tag::ALL.iter().flat_map(|t| [Label::Begin(*t), Label::Inside(*t)]))
            .collect()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Outside => f.write_str("O"),
            Label::Begin(t) => write!(f, "B-{t}"),
            Label::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for Label {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Label::Outside);
        }
        let bad = || CoreError::InvalidLabel(s.to_string());
        let (prefix, code) = s.split_once('-').ok_or_else(bad)?;
        let tag: Tag = code.parse().map_err(|_| bad())?;
        match prefix {
            "B" => Ok(Label::Begin(tag)),
            "I" => Ok(Label::Inside(tag)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Token offsets (character based, end exclusive) with one label per token.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelSequence {
    pub tokens: Vec<(usize, usize)>,
    pub labels: Vec<Label>,
}

impl LabelSequence {
    pub fn new(tokens: Vec<(usize, usize)>, labels: Vec<Label>) -> Result<Self> {
        let seq = Self { tokens, labels };
        seq.check_shape()?;
        Ok(seq)
    }

    pub fn outside(tokens: Vec<(usize, usize)>) -> Self {
        let labels = vec![Label::Outside; tokens.len()];
        Self { tokens, labels }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn check_shape(&self) -> Result<()> {
        if self.tokens.len() != self.labels.len() {
            return Err(CoreError::InvalidLabels(format!(
                "{} tokens but {} labels",
                self.tokens.len(),
                self.labels.len()
            )));
        }
        let mut prev_end = 0;
        for (i, &(s, e)) in self.tokens.iter().enumerate() {
            if s >= e {
                return Err(CoreError::InvalidLabels(format!("token #{i} [{s}, {e}) is empty")));
            }
            if i > 0 && s < prev_end {
                return Err(CoreError::InvalidLabels(format!(
                    "token #{i} [{s}, {e}) overlaps or precedes the previous token"
                )));
            }
            prev_end = e;
        }
        Ok(())
    }

    /// Checks shape and that every token lies inside a text of `n_chars`.
    pub fn validate(&self, n_chars: usize) -> Result<()> {
        self.check_shape()?;
        if let Some(&(s, e)) = self.tokens.last() {
            if e > n_chars {
                return Err(CoreError::InvalidLabels(format!("token [{s}, {e}) beyond text of {n_chars} chars")));
            }
        }
        Ok(())
    }
}

/// Splits on whitespace; alphanumeric runs form tokens and every other
/// character is its own token. Offsets are in characters.
pub fn tokenize(text: &str) -> Vec<(usize, usize)> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            run_start.get_or_insert(i);
            continue;
        }
        if let Some(s) = run_start.take() {
            tokens.push((s, i));
        }
        if !c.is_whitespace() {
            tokens.push((i, i + 1));
        }
    }
    if let Some(s) = run_start {
        tokens.push((s, n));
    }
    tokens
}

/// Rewrites every `I-X` that does not continue an `X` run as `B-X`.
pub fn repair_labels(seq: &LabelSequence) -> LabelSequence {
    let mut labels = Vec::with_capacity(seq.labels.len());
    let mut prev: Option<Tag> = None;
    for &label in &seq.labels {
        let fixed = match label {
            Label::Inside(t) if prev != Some(t) => Label::Begin(t),
            other => other,
        };
        prev = fixed.tag();
        labels.push(fixed);
    }
    LabelSequence { tokens: seq.tokens.clone(), labels }
}

/// Decodes maximal `B-X (I-X)*` runs into spans over `text`.
/// Malformed runs are repaired first.
pub fn decode_spans(seq: &LabelSequence, text: &str) -> Result<Vec<EntitySpan>> {
    let table = char_to_byte_table(text);
    seq.validate(table.len() - 1)?;
    let seq = repair_labels(seq);

    let mut spans = Vec::new();
    let mut open: Option<(Tag, usize, usize)> = None;
    let close = |open: &mut Option<(Tag, usize, usize)>, spans: &mut Vec<EntitySpan>| {
        if let Some((tag, start, end)) = open.take() {
            spans.push(EntitySpan { tag, start, end, surface: text[table[start]..table[end]].to_string() });
        }
    };
    for (&(s, e), &label) in seq.tokens.iter().zip(&seq.labels) {
        match label {
            Label::Outside => close(&mut open, &mut spans),
            Label::Begin(tag) => {
                close(&mut open, &mut spans);
                open = Some((tag, s, e));
            }
            Label::Inside(_) => {
                if let Some((_, _, end)) = open.as_mut() {
                    *end = e;
                }
            }
        }
    }
    close(&mut open, &mut spans);
    Ok(spans)
}

/// Encodes spans as BIO labels over `tokens`. Every span must start at a
/// token start and end at a token end.
pub fn encode_labels(spans: &[EntitySpan], tokens: &[(usize, usize)]) -> Result<LabelSequence> {
    let mut labels = vec![Label::Outside; tokens.len()];
    for span in spans {
        let misaligned = || CoreError::Alignment { tag: span.tag.to_string(), start: span.start, end: span.end };
        let first = tokens.binary_search_by_key(&span.start, |t| t.0).map_err(|_| misaligned())?;
        let last = tokens.binary_search_by_key(&span.end, |t| t.1).map_err(|_| misaligned())?;
        if last < first {
            return Err(misaligned());
        }
        if labels[first..=last].iter().any(|l| *l != Label::Outside) {
            return Err(CoreError::InvalidSpan(format!(
                "{} [{}, {}) overlaps another span",
                span.tag, span.start, span.end
            )));
        }
        labels[first] = Label::Begin(span.tag);
        for label in &mut labels[first + 1..=last] {
            *label = Label::Inside(span.tag);
        }
    }
    LabelSequence::new(tokens.to_vec(), labels)
}

pub fn read_label_jsonl(reader: impl BufRead) -> Result<Vec<LabelSequence>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: LabelSequence = serde_json::from_str(&line)?;
        seq.check_shape()?;
        out.push(seq);
    }
    Ok(out)
}

pub fn write_label_jsonl(mut writer: impl Write, seqs: &[LabelSequence]) -> Result<()> {
    for seq in seqs {
        serde_json::to_writer(&mut writer, seq)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &str) -> Vec<Label> {
        s.split_whitespace().map(|l| l.parse().unwrap()).collect()
    }

    #[test]
    fn tokenizer_keeps_offsets() {
        let text = "right lobe 1.3cm, 좌측";
        let toks = tokenize(text);
        let words: Vec<_> = toks.iter().map(|&(s, e)| crate::span::char_slice(text, s, e).unwrap()).collect();
        assert_eq!(words, ["right", "lobe", "1", ".", "3cm", ",", "좌측"]);
    }

    #[test]
    fn decode_basic_runs() {
        let text = "aa bb cc dd";
        let seq = LabelSequence::new(tokenize(text), labels("B-PAT I-PAT O B-DXN")).unwrap();
        let spans = decode_spans(&seq, text).unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].tag, spans[0].start, spans[0].end, spans[0].surface.as_str()), (Tag::Pat, 0, 5, "aa bb"));
        assert_eq!((spans[1].tag, spans[1].start, spans[1].end, spans[1].surface.as_str()), (Tag::Dxn, 9, 11, "dd"));
    }

    #[test]
    fn all_outside_decodes_to_nothing() {
        let text = "no entities here";
        let seq = LabelSequence::outside(tokenize(text));
        assert!(decode_spans(&seq, text).unwrap().is_empty());
    }

    #[test]
    fn three_token_run_is_one_span() {
        let text = "right lobe 1.3cm";
        let tokens = vec![(0, 5), (6, 10), (11, 16)];
        let seq = LabelSequence::new(tokens, labels("B-TMR I-TMR I-TMR")).unwrap();
        let spans = decode_spans(&seq, text).unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].surface, "right lobe 1.3cm");
    }

    #[test]
    fn repair_rules() {
        let seq = LabelSequence::new(vec![(0, 1), (2, 3)], labels("I-PAT I-PAT")).unwrap();
        assert_eq!(repair_labels(&seq).labels, labels("B-PAT I-PAT"));
        let seq = LabelSequence::new(vec![(0, 1), (2, 3)], labels("B-PAT I-DXN")).unwrap();
        assert_eq!(repair_labels(&seq).labels, labels("B-PAT B-DXN"));
        let valid = LabelSequence::new(vec![(0, 1), (2, 3), (4, 5)], labels("B-PAT I-PAT O")).unwrap();
        assert_eq!(repair_labels(&valid), valid);
    }

    #[test]
    fn encode_examples() {
        let text = "aa bb cc";
        let tokens = tokenize(text);
        assert_eq!(encode_labels(&[], &tokens).unwrap().labels, labels("O O O"));
        let span = EntitySpan::from_text(Tag::Sgm, 0, 5, text).unwrap();
        assert_eq!(encode_labels(&[span], &tokens).unwrap().labels, labels("B-SGM I-SGM O"));
    }

    #[test]
    fn encode_rejects_split_tokens() {
        let text = "thyroidectomy";
        let span = EntitySpan::from_text(Tag::Sgm, 0, 7, text).unwrap();
        assert!(matches!(encode_labels(&[span], &tokenize(text)), Err(CoreError::Alignment { .. })));
    }

    #[test]
    fn label_strings() {
        assert_eq!("B-PRT".parse::<Label>().unwrap(), Label::Begin(Tag::Prt));
        assert!("B-XXX".parse::<Label>().is_err());
        assert!("E-PAT".parse::<Label>().is_err());
        assert_eq!(Label::alphabet().len(), 37);
        let seq = LabelSequence::new(vec![(0, 2)], labels("I-ETC")).unwrap();
        let json = serde_json::to_string(&seq).unwrap();
        assert_eq!(json, r#"{"tokens":[[0,2]],"labels":["I-ETC"]}"#);
    }

    #[test]
    fn shape_errors() {
        assert!(LabelSequence::new(vec![(0, 1)], vec![]).is_err());
        assert!(LabelSequence::new(vec![(2, 3), (0, 1)], labels("O O")).is_err());
        let seq = LabelSequence::new(vec![(0, 9)], labels("O")).unwrap();
        assert!(decode_spans(&seq, "short").is_err());
    }
}
