//! Span-level tag metrics and record-level class accuracy.

mod emit;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::gold::GoldDocument;
use crate::record::{Field, OperationRecord};
use crate::span::EntitySpan;
use crate::tags::Tag;
use crate::transcript::TranscriptId;

pub use emit::{accuracy_markdown, emit_report, ReportFormat};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// How a predicted span is matched against gold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Tag and both offsets equal.
    #[default]
    Exact,
    /// Same tag and any character overlap, matched one-to-one.
    Overlap,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl SpanCounts {
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }

    fn add(&mut self, other: SpanCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagMetrics {
    pub tag: Tag,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl TagMetrics {
    pub fn from_counts(tag: Tag, counts: SpanCounts) -> Self {
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        TagMetrics { tag, precision, recall, f1: harmonic_f1(precision, recall), support: counts.support() }
    }

    /// Wraps already published scores, keeping their F1 as given.
    pub fn from_reported(tag: Tag, precision: f64, recall: f64, f1: f64, support: usize) -> Result<Self> {
        for (name, v) in [("precision", precision), ("recall", recall), ("f1", f1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CoreError::EvalAlignment(format!("{tag} {name} {v} outside [0, 1]")));
            }
        }
        Ok(TagMetrics { tag, precision, recall, f1, support })
    }
}

/// Spans of one document, keyed by transcript id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSpans {
    pub id: TranscriptId,
    pub spans: Vec<EntitySpan>,
}

fn by_id<'a, T>(
    items: &'a [T],
    id: impl Fn(&T) -> &TranscriptId,
    side: &str,
) -> Result<HashMap<&'a TranscriptId, &'a T>> {
    let mut map = HashMap::with_capacity(items.len());
    for item in items {
        if map.insert(id(item), item).is_some() {
            return Err(CoreError::EvalAlignment(format!("duplicate {side} document {}", id(item))));
        }
    }
    Ok(map)
}

fn match_document(gold: &[EntitySpan], pred: &[EntitySpan], mode: MatchMode) -> BTreeMap<Tag, SpanCounts> {
    let mut counts: BTreeMap<Tag, SpanCounts> = BTreeMap::new();
    let mut used = vec![false; gold.len()];
    for p in pred {
        let hit = gold.iter().enumerate().position(|(i, g)| {
            !used[i]
                && g.tag == p.tag
                && match mode {
                    MatchMode::Exact => g.start == p.start && g.end == p.end,
                    MatchMode::Overlap => g.overlaps(p),
                }
        });
        let c = counts.entry(p.tag).or_default();
        match hit {
            Some(i) => {
                used[i] = true;
                c.tp += 1;
            }
            None => c.fp += 1,
        }
    }
    for (g, u) in gold.iter().zip(&used) {
        if !u {
            counts.entry(g.tag).or_default().fn_ += 1;
        }
    }
    counts
}

/// TP/FP/FN per tag, summed over documents matched by id.
pub fn span_counts(
    gold: &[DocumentSpans],
    pred: &[DocumentSpans],
    mode: MatchMode,
) -> Result<BTreeMap<Tag, SpanCounts>> {
    if gold.len() != pred.len() {
        return Err(CoreError::EvalAlignment(format!("{} gold documents but {} predicted", gold.len(), pred.len())));
    }
    let preds = by_id(pred, |d| &d.id, "predicted")?;
    by_id(gold, |d| &d.id, "gold")?;
    let mut total: BTreeMap<Tag, SpanCounts> = Tag::ALL.iter().map(|t| (*t, SpanCounts::default())).collect();
    for g in gold {
        let p =
            preds.get(&g.id).ok_or_else(|| CoreError::EvalAlignment(format!("no prediction for document {}", g.id)))?;
        for (tag, c) in match_document(&g.spans, &p.spans, mode) {
            total.entry(tag).or_default().add(c);
        }
    }
    Ok(total)
}

/// Per-tag metrics for all 18 tags in reporting order.
pub fn span_metrics(gold: &[DocumentSpans], pred: &[DocumentSpans], mode: MatchMode) -> Result<Vec<TagMetrics>> {
    let counts = span_counts(gold, pred, mode)?;
    Ok(counts.into_iter().map(|(tag, c)| TagMetrics::from_counts(tag, c)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted means over tags with gold support.
pub fn macro_average(per_tag: &[TagMetrics]) -> Result<MacroScores> {
    let included: Vec<&TagMetrics> = per_tag.iter().filter(|m| m.support > 0).collect();
    if included.is_empty() {
        return Err(CoreError::EmptyMacro);
    }
    let n = included.len() as f64;
    let mean = |f: fn(&TagMetrics) -> f64| included.iter().map(|m| f(m)).sum::<f64>() / n;
    Ok(MacroScores { precision: mean(|m| m.precision), recall: mean(|m| m.recall), f1: mean(|m| m.f1) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub per_class: BTreeMap<Field, f64>,
    pub mean: f64,
    pub case_count: usize,
}

impl ClassAccuracy {
    /// Wraps published per-class percentages.
    pub fn from_reported(values: impl IntoIterator<Item = (Field, f64)>, case_count: usize) -> Result<Self> {
        let per_class: BTreeMap<Field, f64> = values.into_iter().collect();
        if per_class.is_empty() {
            return Err(CoreError::EvalAlignment("no class accuracies".into()));
        }
        if let Some((f, v)) = per_class.iter().find(|(_, v)| !(0.0..=100.0).contains(*v)) {
            return Err(CoreError::EvalAlignment(format!("{f} accuracy {v} outside [0, 100]")));
        }
        let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
        Ok(ClassAccuracy { per_class, mean, case_count })
    }
}

/// Percentage of cases where each class matches gold; both absent counts as a match.
pub fn record_accuracy(gold: &[OperationRecord], pred: &[OperationRecord]) -> Result<ClassAccuracy> {
    if gold.len() != pred.len() {
        return Err(CoreError::EvalAlignment(format!("{} gold records but {} predicted", gold.len(), pred.len())));
    }
    if gold.is_empty() {
        return Err(CoreError::EvalAlignment("no cases to score".into()));
    }
    let n = gold.len();
    let per_class = Field::ALL.iter().map(|&f| {
        let correct = gold.iter().zip(pred).filter(|(g, p)| g.field_json(f) == p.field_json(f)).count();
        (f, correct as f64 * 100.0 / n as f64)
    });
    ClassAccuracy::from_reported(per_class, n)
}

/// A system output for one gold document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub transcript_id: TranscriptId,
    /// Absent for backends that produce records directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<EntitySpan>>,
    pub record: OperationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub match_mode: MatchMode,
    pub case_count: usize,
    pub per_tag: Vec<TagMetrics>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
    pub per_class_accuracy: BTreeMap<Field, f64>,
    pub mean_accuracy: Option<f64>,
}

impl EvalReport {
    pub fn new(
        case_count: usize,
        match_mode: MatchMode,
        per_tag: Vec<TagMetrics>,
        accuracy: Option<ClassAccuracy>,
    ) -> Self {
        let macro_scores = macro_average(&per_tag).ok();
        let (per_class_accuracy, mean_accuracy) = match accuracy {
            Some(a) => (a.per_class, Some(a.mean)),
            None => (BTreeMap::new(), None),
        };
        EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            match_mode,
            case_count,
            per_tag,
            macro_precision: macro_scores.map(|m| m.precision),
            macro_recall: macro_scores.map(|m| m.recall),
            macro_f1: macro_scores.map(|m| m.f1),
            per_class_accuracy,
            mean_accuracy,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Scores predictions against gold documents, matched by transcript id.
/// Span metrics are reported only when every prediction carries spans.
pub fn evaluate(gold: &[GoldDocument], pred: &[Prediction], mode: MatchMode) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(CoreError::EvalAlignment(format!("{} gold documents but {} predicted", gold.len(), pred.len())));
    }
    let preds = by_id(pred, |p| &p.transcript_id, "predicted")?;
    let mut aligned = Vec::with_capacity(gold.len());
    for g in gold {
        let p = preds
            .get(&g.transcript.id)
            .ok_or_else(|| CoreError::EvalAlignment(format!("no prediction for document {}", g.transcript.id)))?;
        aligned.push(*p);
    }
    let gold_records: Vec<OperationRecord> = gold.iter().map(|g| g.gold_record.clone()).collect();
    let pred_records: Vec<OperationRecord> = aligned.iter().map(|p| p.record.clone()).collect();
    let accuracy = record_accuracy(&gold_records, &pred_records)?;

    let per_tag = if aligned.iter().all(|p| p.spans.is_some()) {
        let g: Vec<DocumentSpans> =
            gold.iter().map(|d| DocumentSpans { id: d.transcript.id.clone(), spans: d.gold_spans.clone() }).collect();
        let p: Vec<DocumentSpans> = aligned
            .iter()
            .map(|d| DocumentSpans { id: d.transcript_id.clone(), spans: d.spans.clone().unwrap_or_default() })
            .collect();
        span_metrics(&g, &p, mode)?
    } else {
        Vec::new()
    };
    Ok(EvalReport::new(gold.len(), mode, per_tag, Some(accuracy)))
}
