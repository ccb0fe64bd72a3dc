//! Entity spans to operation records.
//!
//! Each span's tag selects a parser through the [`MappingTable`]; parsers
//! produce typed [`Assignment`]s which [`resolve_conflicts`] folds into a
//! record. Content that cannot be placed in a class ends up in the notes.

pub mod parse;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CoreError, Result};
use crate::pack::LanguagePack;
use crate::record::{
    validate_record, DrainStatus, Field, FieldCodec, LymphNodeRemoval, Note, OperationRecord, Presence, Usage,
};
use crate::span::{char_slice, validate_spans, EntitySpan, StandoffSpan};
use crate::tags::Tag;

const STANDARD_MAPPING: &str = include_str!("../../resources/mapping.toml");

/// Parser identifiers usable in a mapping file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParserId {
    Demographics,
    Tumor,
    Diagnosis,
    Surgery,
    LymphNodeRemoval,
    Invasion,
    Enlargement,
    NeuralMonitor,
    Rln,
    Sln,
    Parathyroid,
    Bleeding,
    Drain,
    Note,
}

impl ParserId {
    /// Fields the parser can write.
    pub fn fields(self) -> &'static [Field] {
        use Field::*;
        match self {
            ParserId::Demographics => &[Age, Sex],
            ParserId::Tumor => &[TumorLocation, TumorSize],
            ParserId::Diagnosis => &[DiagnosisName],
            ParserId::Surgery => &[SurgeryMethod, ThyroidResectionRange],
            ParserId::LymphNodeRemoval => &[Field::LymphNodeRemoval],
            ParserId::Invasion => &[CapsularInvasion, ExtrathyroidalInvasion],
            ParserId::Enlargement => &[LymphNodeEnlargement],
            ParserId::NeuralMonitor => &[NeuralMonitorUse],
            ParserId::Rln => &[RlnRight, RlnLeft],
            ParserId::Sln => &[SlnRight, SlnLeft],
            ParserId::Parathyroid => {
                &[ParathyroidUpperRight, ParathyroidLowerRight, ParathyroidUpperLeft, ParathyroidLowerLeft]
            }
            ParserId::Bleeding => &[BleedingOnCleanup],
            ParserId::Drain => &[DrainInsertion],
            ParserId::Note => &[],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingSpec {
    atm_overrides_tmr: bool,
    rows: Vec<RowSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowSpec {
    tag: Tag,
    targets: Vec<String>,
    parser: ParserId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MappingRow {
    pub tag: Tag,
    pub targets: Vec<Field>,
    pub parser: ParserId,
}

/// Tag -> (record classes, parser), one row per tag.
#[derive(Debug, Clone)]
pub struct MappingTable {
    rows: Vec<MappingRow>,
    pub atm_overrides_tmr: bool,
}

impl MappingTable {
    /// The mapping shipped with the crate.
    pub fn standard() -> Arc<MappingTable> {
        static TABLE: OnceLock<Arc<MappingTable>> = OnceLock::new();
        TABLE
            .get_or_init(|| Arc::new(MappingTable::from_toml(STANDARD_MAPPING).expect("bundled mapping is valid")))
            .clone()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: MappingSpec = toml::from_str(text).map_err(|e| CoreError::Mapping(e.to_string()))?;
        let mut rows = Vec::with_capacity(spec.rows.len());
        for row in spec.rows {
            let mut targets = Vec::new();
            for key in &row.targets {
                let field = Field::from_key(key)
                    .ok_or_else(|| CoreError::Mapping(format!("{}: unknown record class {key:?}", row.tag)))?;
                if !row.parser.fields().contains(&field) {
                    return Err(CoreError::Mapping(format!(
                        "{}: parser {:?} cannot write {key:?}",
                        row.tag, row.parser
                    )));
                }
                targets.push(field);
            }
            rows.push(MappingRow { tag: row.tag, targets, parser: row.parser });
        }
        Self::new(rows, spec.atm_overrides_tmr)
    }

    /// Checks the structural invariants: every tag exactly once, every class
    /// targeted at least once.
    pub fn new(mut rows: Vec<MappingRow>, atm_overrides_tmr: bool) -> Result<Self> {
        for tag in Tag::ALL {
            let n = rows.iter().filter(|r| r.tag == tag).count();
            if n != 1 {
                return Err(CoreError::Mapping(format!("tag {tag} appears {n} times; expected once")));
            }
        }
        for field in Field::ALL {
            if !rows.iter().any(|r| r.targets.contains(field)) {
                return Err(CoreError::Mapping(format!("no tag targets {:?}", field.key())));
            }
        }
        rows.sort_by_key(|r| r.tag.index());
        Ok(Self { rows, atm_overrides_tmr })
    }

    pub fn row(&self, tag: Tag) -> &MappingRow {
        &self.rows[tag.index()]
    }

    pub fn rows(&self) -> &[MappingRow] {
        &self.rows
    }

    /// Tags whose rows target `field`.
    pub fn sources(&self, field: Field) -> Vec<Tag> {
        self.rows.iter().filter(|r| r.targets.contains(&field)).map(|r| r.tag).collect()
    }
}

/// A typed write of one value into one class, traced to its span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub field: Field,
    pub value: Value,
    pub span: StandoffSpan,
}

impl Assignment {
    fn new(field: Field, value: &impl FieldCodec, span: StandoffSpan) -> Self {
        Self { field, value: value.encode(), span }
    }
}

/// A write that did not survive into the record, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub field: String,
    pub value: Value,
    pub span: StandoffSpan,
    pub reason: String,
}

impl AuditEntry {
    fn from_assignment(a: &Assignment, reason: impl Into<String>) -> Self {
        Self { field: a.field.key().to_string(), value: a.value.clone(), span: a.span, reason: reason.into() }
    }
}

/// The structured record plus the audit trail of discarded writes.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureOutcome {
    pub record: OperationRecord,
    pub audit: Vec<AuditEntry>,
}

fn is_list(field: Field) -> bool {
    matches!(field, Field::TumorLocation | Field::TumorSize)
}

/// Folds writes into a record: later writes win for scalar classes, list
/// classes append in order. Overridden writes go to the audit trail.
pub fn resolve_conflicts(writes: &[Assignment]) -> (OperationRecord, Vec<AuditEntry>) {
    let mut record = OperationRecord::empty();
    let mut audit = Vec::new();
    for &field in Field::ALL {
        let mine: Vec<&Assignment> = writes.iter().filter(|a| a.field == field).collect();
        let Some(last) = mine.last() else { continue };
        let value = if is_list(field) {
            Value::Array(mine.iter().map(|a| a.value.clone()).collect())
        } else {
            for earlier in &mine[..mine.len() - 1] {
                audit.push(AuditEntry::from_assignment(earlier, "overridden by a later mention"));
            }
            last.value.clone()
        };
        if let Err(msg) = record.set_field_json(field, &value) {
            for a in &mine {
                audit.push(AuditEntry::from_assignment(a, format!("rejected: {msg}")));
            }
        }
    }
    (record, audit)
}

/// Runs the mapped parsers over spans and assembles the record.
#[derive(Debug, Clone)]
pub struct Structurer {
    pack: Arc<LanguagePack>,
    mapping: Arc<MappingTable>,
}

enum Parsed {
    Writes(Vec<Assignment>),
    Note(Note),
}

impl Structurer {
    pub fn new(pack: Arc<LanguagePack>, mapping: Arc<MappingTable>) -> Self {
        Self { pack, mapping }
    }

    pub fn english() -> Self {
        Self::new(LanguagePack::english(), MappingTable::standard())
    }

    pub fn pack(&self) -> &Arc<LanguagePack> {
        &self.pack
    }

    pub fn mapping(&self) -> &Arc<MappingTable> {
        &self.mapping
    }

    /// Structures `spans` found in `text`. Fails only if the spans are invalid
    /// for the text.
    pub fn structure(&self, spans: &[EntitySpan], text: &str) -> Result<StructureOutcome> {
        validate_spans(spans, text)?;
        let mut writes = Vec::new();
        let mut notes = Vec::new();
        let mut sources: Vec<(StandoffSpan, String)> = Vec::new();
        for span in spans {
            let surface = char_slice(text, span.start, span.end).expect("validated span");
            let row = self.mapping.row(span.tag);
            match self.parse(row, span.standoff(), surface)? {
                Parsed::Note(note) => notes.push((span.start, note)),
                Parsed::Writes(ws) => {
                    let kept: Vec<Assignment> = ws.into_iter().filter(|a| row.targets.contains(&a.field)).collect();
                    if kept.is_empty() {
                        notes.push((span.start, Note::unparsed(span.tag, surface)));
                    } else {
                        sources.push((span.standoff(), surface.to_string()));
                        writes.extend(kept);
                    }
                }
            }
        }

        let mut audit = Vec::new();
        if self.mapping.atm_overrides_tmr && writes.iter().any(|a| a.span.tag == Tag::Atm) {
            writes.retain(|a| {
                let superseded = a.span.tag == Tag::Tmr && is_list(a.field);
                if superseded {
                    audit.push(AuditEntry::from_assignment(a, "superseded by post-operative tumor findings"));
                }
                !superseded
            });
        }

        let (mut record, resolved_audit) = resolve_conflicts(&writes);
        audit.extend(resolved_audit);

        for violation in validate_record(&record) {
            let Some(field) = Field::from_key(&violation.field) else { continue };
            if !record.is_mentioned(field) {
                continue;
            }
            record.clear_field(field);
            for a in writes.iter().filter(|a| a.field == field) {
                audit.push(AuditEntry::from_assignment(a, violation.message.clone()));
                if let Some((span, surface)) = sources.iter().find(|(s, _)| *s == a.span) {
                    let note = Note::unparsed(span.tag, surface.clone());
                    if !notes.iter().any(|(start, n)| *start == span.start && *n == note) {
                        notes.push((span.start, note));
                    }
                }
            }
        }
        notes.sort_by_key(|(start, _)| *start);
        record.notes = notes.into_iter().map(|(_, n)| n).collect();
        Ok(StructureOutcome { record, audit })
    }

    fn parse(&self, row: &MappingRow, span: StandoffSpan, surface: &str) -> Result<Parsed> {
        use parse::*;
        let pack = &*self.pack;
        let canonical = pack.canonical_str(surface);
        let s = canonical.as_str();
        let mut w = Vec::new();
        match row.parser {
            ParserId::Note => return Ok(Parsed::Note(Note::new(row.tag, surface))),
            ParserId::Demographics => {
                let (age, sex) = parse_demographics(s, pack)?;
                if let Some(age) = age {
                    w.push(Assignment::new(Field::Age, &age, span));
                }
                if let Some(sex) = sex {
                    w.push(Assignment::new(Field::Sex, &sex, span));
                }
            }
            ParserId::Tumor => {
                for loc in parse_laterality(s, pack)? {
                    w.push(Assignment::new(Field::TumorLocation, &loc, span));
                }
                for size in parse_sizes(s, pack)? {
                    w.push(Assignment::new(Field::TumorSize, &size, span));
                }
            }
            ParserId::Diagnosis => {
                w.push(Assignment::new(Field::DiagnosisName, &parse_text(s, &pack.diagnosis)?, span));
            }
            ParserId::Bleeding => {
                w.push(Assignment::new(Field::BleedingOnCleanup, &parse_text(s, &pack.bleeding)?, span));
            }
            ParserId::Surgery => {
                if let Some(method) = pack.surgery_method.lookup(s) {
                    w.push(Assignment::new(Field::SurgeryMethod, &method.to_string(), span));
                }
                if let Some(range) = parse_range(s, pack)? {
                    w.push(Assignment::new(Field::ThyroidResectionRange, &range, span));
                }
            }
            ParserId::LymphNodeRemoval => {
                let v = if is_negated(s, pack) { LymphNodeRemoval::NotPerformed } else { LymphNodeRemoval::Performed };
                w.push(Assignment::new(Field::LymphNodeRemoval, &v, span));
            }
            ParserId::Invasion => {
                let v = if is_negated(s, pack) { Presence::Absent } else { Presence::Present };
                if pack.capsular.is_match(s) {
                    w.push(Assignment::new(Field::CapsularInvasion, &v, span));
                }
                if pack.extrathyroidal.is_match(s) {
                    w.push(Assignment::new(Field::ExtrathyroidalInvasion, &v, span));
                }
            }
            ParserId::Enlargement => {
                if pack.enlargement.is_match(s) {
                    let v = if is_negated(s, pack) { Presence::Absent } else { Presence::Present };
                    w.push(Assignment::new(Field::LymphNodeEnlargement, &v, span));
                }
            }
            ParserId::NeuralMonitor => {
                let v = if is_negated(s, pack) { Usage::NotUsed } else { Usage::Used };
                w.push(Assignment::new(Field::NeuralMonitorUse, &v, span));
            }
            ParserId::Drain => {
                let v = if is_negated(s, pack) { DrainStatus::NotInserted } else { DrainStatus::Inserted };
                w.push(Assignment::new(Field::DrainInsertion, &v, span));
            }
            ParserId::Rln => {
                if let Some(status) = parse_nerve(s, pack)? {
                    for side in parse_sides(s, pack)? {
                        w.push(Assignment::new(Field::rln(side), &status, span));
                    }
                }
            }
            ParserId::Sln => {
                if let Some(status) = parse_status(s, &pack.nerve_status, pack)? {
                    for side in parse_sides(s, pack)? {
                        w.push(Assignment::new(Field::sln(side), &status, span));
                    }
                }
            }
            ParserId::Parathyroid => {
                if let Some(status) = parse_status(s, &pack.parathyroid_status, pack)? {
                    for gland in parse_glands(s, pack)? {
                        w.push(Assignment::new(Field::parathyroid(gland), &status, span));
                    }
                }
            }
        }
        Ok(Parsed::Writes(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{FieldValue, Location, NervePreservation, PreservationStatus, ResectionRange, Sex};

    fn spans_of(text: &str, marks: &[(Tag, &str)]) -> Vec<EntitySpan> {
        let mut out = Vec::new();
        let mut from = 0;
        for (tag, surface) in marks {
            let byte = from + text[from..].find(surface).expect("surface present");
            let start = text[..byte].chars().count();
            let end = start + surface.chars().count();
            out.push(EntitySpan::from_text(*tag, start, end, text).unwrap());
            from = byte + surface.len();
        }
        out
    }

    #[test]
    fn standard_mapping_shape() {
        let m = MappingTable::standard();
        use Field::*;
        let expect: &[(Tag, &[Field])] = &[
            (Tag::Pat, &[Age, Sex]),
            (Tag::Tmr, &[TumorLocation, TumorSize]),
            (Tag::Atm, &[TumorLocation, TumorSize]),
            (Tag::Dxn, &[DiagnosisName]),
            (Tag::Sgm, &[SurgeryMethod, ThyroidResectionRange]),
            (Tag::Lnr, &[Field::LymphNodeRemoval]),
            (Tag::Eti, &[CapsularInvasion, ExtrathyroidalInvasion]),
            (Tag::Lne, &[LymphNodeEnlargement]),
            (Tag::Nem, &[NeuralMonitorUse]),
            (Tag::Rln, &[RlnRight, RlnLeft]),
            (Tag::Sln, &[SlnRight, SlnLeft]),
            (Tag::Prt, &[ParathyroidUpperRight, ParathyroidLowerRight, ParathyroidUpperLeft, ParathyroidLowerLeft]),
            (Tag::Com, &[BleedingOnCleanup]),
            (Tag::Dnt, &[DrainInsertion]),
            (Tag::Fzs, &[]),
            (Tag::Lnt, &[]),
            (Tag::Rns, &[]),
            (Tag::Etc, &[]),
        ];
        for (tag, fields) in expect {
            assert_eq!(m.row(*tag).targets, *fields, "{tag}");
        }
        assert!(m.atm_overrides_tmr);
    }

    #[test]
    fn mapping_rejects_duplicates_and_gaps() {
        let dup = STANDARD_MAPPING.to_string() + "\n[[rows]]\ntag = \"PAT\"\ntargets = []\nparser = \"note\"\n";
        assert!(MappingTable::from_toml(&dup).is_err());
        let gap = STANDARD_MAPPING.replace("targets = [\"Drainage tube insertion, or not\"]", "targets = []");
        assert!(MappingTable::from_toml(&gap).is_err());
        let bad = STANDARD_MAPPING.replace("parser = \"drain\"", "parser = \"bleeding\"");
        assert!(MappingTable::from_toml(&bad).is_err());
    }

    #[test]
    fn empty_spans_give_empty_record() {
        let out = Structurer::english().structure(&[], "Nothing here.").unwrap();
        assert_eq!(out.record, OperationRecord::empty());
        assert!(out.audit.is_empty());
    }

    #[test]
    fn table_one_document() {
        let text = "A 50-year-old female patient underwent total thyroidectomy and bilateral central lymph node \
                    dissection using a skin incision for bilateral thyroid papillary cancer. Preoperative \
                    ultrasonography showed a 1.3 cm nodule in the left lobe and a 1.1 cm nodule in the right lobe. \
                    A drain was inserted.";
        let spans = spans_of(
            text,
            &[
                (Tag::Pat, "50-year-old female"),
                (Tag::Sgm, "total thyroidectomy"),
                (Tag::Lnr, "bilateral central lymph node dissection"),
                (Tag::Sgm, "skin incision"),
                (Tag::Dxn, "bilateral thyroid papillary cancer"),
                (Tag::Tmr, "1.3 cm nodule in the left lobe"),
                (Tag::Tmr, "1.1 cm nodule in the right lobe"),
                (Tag::Dnt, "A drain was inserted"),
            ],
        );
        let r = Structurer::english().structure(&spans, text).unwrap().record;
        assert_eq!(r.age, FieldValue::Value(50));
        assert_eq!(r.sex, FieldValue::Value(Sex::Female));
        assert_eq!(r.tumor_location, FieldValue::Value(vec![Location::Left, Location::Right]));
        assert_eq!(r.tumor_size, FieldValue::Value(vec![1.3, 1.1]));
        assert_eq!(r.thyroid_resection_range, FieldValue::Value(ResectionRange::Total));
        assert_eq!(r.surgery_method, FieldValue::Value("Open".into()));
        assert_eq!(r.diagnosis_name, FieldValue::Value("Papillary thyroid carcinoma".into()));
        assert_eq!(r.lymph_node_removal, FieldValue::Value(LymphNodeRemoval::Performed));
        assert_eq!(r.drain_insertion, FieldValue::Value(DrainStatus::Inserted));
        assert_eq!(r.mentioned_count(), 9);
        assert!(validate_record(&r).is_empty());
    }

    #[test]
    fn negated_dissection() {
        let text = "Lymph node dissection was not performed.";
        let spans = spans_of(text, &[(Tag::Lnr, "Lymph node dissection was not performed")]);
        let r = Structurer::english().structure(&spans, text).unwrap().record;
        assert_eq!(r.lymph_node_removal, FieldValue::Value(LymphNodeRemoval::NotPerformed));
    }

    #[test]
    fn last_mention_wins_with_audit() {
        let text = "Diagnosis follicular adenoma, revised to papillary thyroid carcinoma.";
        let spans = spans_of(text, &[(Tag::Dxn, "follicular adenoma"), (Tag::Dxn, "papillary thyroid carcinoma")]);
        let out = Structurer::english().structure(&spans, text).unwrap();
        assert_eq!(out.record.diagnosis_name, FieldValue::Value("Papillary thyroid carcinoma".into()));
        assert_eq!(out.audit.len(), 1);
        assert_eq!(out.audit[0].value, Value::String("Follicular adenoma".into()));
    }

    #[test]
    fn resolve_conflicts_basics() {
        let span = StandoffSpan { tag: Tag::Dxn, start: 0, end: 1 };
        let (r, audit) = resolve_conflicts(&[Assignment::new(Field::DiagnosisName, &"X".to_string(), span)]);
        assert_eq!(r.diagnosis_name, FieldValue::Value("X".into()));
        assert!(audit.is_empty());
        assert_eq!(resolve_conflicts(&[]).0, OperationRecord::empty());
    }

    #[test]
    fn atm_overrides_tmr() {
        let text = "A 1.3 cm nodule in the left lobe. Gross examination showed a 1.5 cm tumor in the left lobe.";
        let spans = spans_of(
            text,
            &[(Tag::Tmr, "1.3 cm nodule in the left lobe"), (Tag::Atm, "1.5 cm tumor in the left lobe")],
        );
        let out = Structurer::english().structure(&spans, text).unwrap();
        assert_eq!(out.record.tumor_size, FieldValue::Value(vec![1.5]));
        assert_eq!(out.audit.len(), 2);
    }

    #[test]
    fn sideless_nerve_goes_to_notes() {
        let text = "The recurrent laryngeal nerve was preserved. The left recurrent laryngeal nerve was sacrificed.";
        let spans = spans_of(
            text,
            &[
                (Tag::Rln, "recurrent laryngeal nerve was preserved"),
                (Tag::Rln, "left recurrent laryngeal nerve was sacrificed"),
            ],
        );
        let r = Structurer::english().structure(&spans, text).unwrap().record;
        assert_eq!(r.rln_left, FieldValue::Value(NervePreservation::NotPreserved));
        assert_eq!(r.rln_right, FieldValue::NotMentioned);
        assert_eq!(r.notes, vec![Note::unparsed(Tag::Rln, "recurrent laryngeal nerve was preserved")]);
    }

    #[test]
    fn misaligned_tumor_sizes_move_to_notes() {
        let text = "Nodules: 1.3 cm and 1.1 cm in the left lobe.";
        let spans = spans_of(text, &[(Tag::Tmr, "1.3 cm and 1.1 cm in the left lobe")]);
        let out = Structurer::english().structure(&spans, text).unwrap();
        assert_eq!(out.record.tumor_location, FieldValue::Value(vec![Location::Left]));
        assert_eq!(out.record.tumor_size, FieldValue::NotMentioned);
        assert_eq!(out.record.notes.len(), 1);
        assert!(out.record.notes[0].unparsed);
        assert!(validate_record(&out.record).is_empty());
    }

    #[test]
    fn parathyroid_groups_and_notes() {
        let text =
            "Both upper parathyroid glands were preserved. The lower left parathyroid gland was not identified. \
                    Frozen section biopsy revealed a benign lesion.";
        let spans = spans_of(
            text,
            &[
                (Tag::Prt, "Both upper parathyroid glands were preserved"),
                (Tag::Prt, "lower left parathyroid gland was not identified"),
                (Tag::Fzs, "Frozen section biopsy revealed a benign lesion"),
            ],
        );
        let r = Structurer::english().structure(&spans, text).unwrap().record;
        assert_eq!(r.parathyroid_upper_right, FieldValue::Value(PreservationStatus::Preserved));
        assert_eq!(r.parathyroid_upper_left, FieldValue::Value(PreservationStatus::Preserved));
        assert_eq!(r.parathyroid_lower_left, FieldValue::Value(PreservationStatus::NotIdentified));
        assert_eq!(r.parathyroid_lower_right, FieldValue::NotMentioned);
        assert_eq!(r.notes, vec![Note::new(Tag::Fzs, "Frozen section biopsy revealed a benign lesion")]);
    }

    #[test]
    fn invalid_spans_rejected() {
        let text = "short";
        let span = EntitySpan { tag: Tag::Pat, start: 0, end: 3, surface: "xyz".into() };
        assert!(Structurer::english().structure(&[span], text).is_err());
    }
}
