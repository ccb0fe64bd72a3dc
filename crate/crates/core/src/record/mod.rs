//! The 22-class structured operation record.
//!
//! Every class is a [`FieldValue`]; absent classes serialize as the literal
//! `"not mentioned"`. JSON keys are the class names of the accuracy report,
//! and a few alternate spellings (e.g. `"Gender"`, `"Drain Insertion"`) are
//! accepted on input.

mod validate;
mod values;

use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

pub use validate::{validate_record, Violation};
pub use values::{
    DrainStatus, FieldCodec, FieldValue, Gland, Location, LymphNodeRemoval, NervePreservation, Presence,
    PreservationStatus, ResectionRange, Sex, Side, Usage, NOT_MENTIONED,
};

use crate::error::{CoreError, Result, SchemaIssue};
use crate::tags::Tag;
use values::normalize_label;

/// JSON key holding the notes list.
pub const NOTES_KEY: &str = "Notes";

/// Extracted content with no record class (or that could not be parsed).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Note {
    pub tag: Tag,
    pub text: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unparsed: bool,
}

impl Note {
    pub fn new(tag: Tag, text: impl Into<String>) -> Self {
        Self { tag, text: text.into(), unparsed: false }
    }

    pub fn unparsed(tag: Tag, text: impl Into<String>) -> Self {
        Self { tag, text: text.into(), unparsed: true }
    }
}

macro_rules! record_fields {
    ($( $variant:ident, $field:ident : $ty:ty, $key:literal, [$($alias:literal),*] );+ $(;)?) => {
        /// A structured thyroid operation record.
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct OperationRecord {
            $(pub $field: FieldValue<$ty>,)+
            pub notes: Vec<Note>,
        }

        /// One record class, in reporting order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Field {
            $($variant),+
        }

        impl Field {
            pub const ALL: &'static [Field] = &[$(Field::$variant),+];

            /// Canonical JSON key.
            pub fn key(self) -> &'static str {
                match self {
                    $(Field::$variant => $key),+
                }
            }

            pub fn aliases(self) -> &'static [&'static str] {
                match self {
                    $(Field::$variant => &[$($alias),*]),+
                }
            }
        }

        impl OperationRecord {
            pub fn field_json(&self, field: Field) -> Value {
                match field {
                    $(Field::$variant => self.$field.to_json()),+
                }
            }

            pub fn set_field_json(&mut self, field: Field, value: &Value) -> std::result::Result<(), String> {
                match field {
                    $(Field::$variant => self.$field = FieldValue::from_json(value)?),+
                }
                Ok(())
            }

            pub fn is_mentioned(&self, field: Field) -> bool {
                match field {
                    $(Field::$variant => self.$field.is_mentioned()),+
                }
            }

            pub fn clear_field(&mut self, field: Field) {
                match field {
                    $(Field::$variant => self.$field = FieldValue::NotMentioned),+
                }
            }
        }
    };
}

record_fields! {
    Age, age: u32, "Age", ["Patient age"];
    Sex, sex: Sex, "Sex", ["Gender"];
    TumorLocation, tumor_location: Vec<Location>, "Tumor location", [];
    TumorSize, tumor_size: Vec<f64>, "Tumor size", [];
    DiagnosisName, diagnosis_name: String, "Diagnosis name", ["Diagnosis"];
    SurgeryMethod, surgery_method: String, "Surgery method", [];
    ThyroidResectionRange, thyroid_resection_range: ResectionRange, "Thyroid resection range", ["Resection range"];
    LymphNodeRemoval, lymph_node_removal: LymphNodeRemoval, "Lymph node removal, or not", ["Lymph node removal", "Lymph node dissection"];
    CapsularInvasion, capsular_invasion: Presence, "Capsular invasion, or not", ["Capsular invasion"];
    ExtrathyroidalInvasion, extrathyroidal_invasion: Presence, "Extrathyroidal invasion, or not", ["Extrathyroidal invasion", "Extrathyroidal extension"];
    LymphNodeEnlargement, lymph_node_enlargement: Presence, "Lymph node enlargement", ["Lymph node enlargement, or not"];
    ParathyroidUpperRight, parathyroid_upper_right: PreservationStatus, "Parathyroid preservation status (upper right)", [];
    ParathyroidLowerRight, parathyroid_lower_right: PreservationStatus, "Parathyroid preservation status (lower right)", [];
    ParathyroidUpperLeft, parathyroid_upper_left: PreservationStatus, "Parathyroid preservation status (upper left)", [];
    ParathyroidLowerLeft, parathyroid_lower_left: PreservationStatus, "Parathyroid preservation status (lower left)", [];
    NeuralMonitorUse, neural_monitor_use: Usage, "Use of neural monitor", ["Neural monitor", "Neural monitoring"];
    RlnRight, rln_right: NervePreservation, "Right recurrent laryngeal nerve preservation, or not", ["Right recurrent laryngeal nerve"];
    RlnLeft, rln_left: NervePreservation, "Left recurrent laryngeal nerve preservation, or not", ["Left recurrent laryngeal nerve"];
    SlnRight, sln_right: PreservationStatus, "Superior laryngeal nerve (right)", ["Right superior laryngeal nerve"];
    SlnLeft, sln_left: PreservationStatus, "Superior laryngeal nerve (left)", ["Left superior laryngeal nerve"];
    BleedingOnCleanup, bleeding_on_cleanup: String, "Bleeding when cleaning the surgical site", ["Bleeding"];
    DrainInsertion, drain_insertion: DrainStatus, "Drainage tube insertion, or not", ["Drain insertion", "Drainage tube insertion"];
}

impl Serialize for Field {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for Field {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let key = String::deserialize(deserializer)?;
        Field::from_key(&key).ok_or_else(|| serde::de::Error::custom(format!("unknown record field {key:?}")))
    }
}

impl Field {
    /// Looks a field up by canonical key or alias, ignoring case and spacing.
    pub fn from_key(key: &str) -> Option<Field> {
        let norm = normalize_label(key);
        Field::ALL
            .iter()
            .copied()
            .find(|f| normalize_label(f.key()) == norm || f.aliases().iter().any(|a| normalize_label(a) == norm))
    }

    pub fn parathyroid(gland: Gland) -> Field {
        match gland {
            Gland::UpperRight => Field::ParathyroidUpperRight,
            Gland::LowerRight => Field::ParathyroidLowerRight,
            Gland::UpperLeft => Field::ParathyroidUpperLeft,
            Gland::LowerLeft => Field::ParathyroidLowerLeft,
        }
    }

    pub fn rln(side: Side) -> Field {
        match side {
            Side::Right => Field::RlnRight,
            Side::Left => Field::RlnLeft,
        }
    }

    pub fn sln(side: Side) -> Field {
        match side {
            Side::Right => Field::SlnRight,
            Side::Left => Field::SlnLeft,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

impl OperationRecord {
    /// A record with all 22 classes not mentioned.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn mentioned_count(&self) -> usize {
        Field::ALL.iter().filter(|f| self.is_mentioned(**f)).count()
    }

    pub fn parathyroid(&self, gland: Gland) -> &FieldValue<PreservationStatus> {
        match gland {
            Gland::UpperRight => &self.parathyroid_upper_right,
            Gland::LowerRight => &self.parathyroid_lower_right,
            Gland::UpperLeft => &self.parathyroid_upper_left,
            Gland::LowerLeft => &self.parathyroid_lower_left,
        }
    }

    pub fn parathyroid_mut(&mut self, gland: Gland) -> &mut FieldValue<PreservationStatus> {
        match gland {
            Gland::UpperRight => &mut self.parathyroid_upper_right,
            Gland::LowerRight => &mut self.parathyroid_lower_right,
            Gland::UpperLeft => &mut self.parathyroid_upper_left,
            Gland::LowerLeft => &mut self.parathyroid_lower_left,
        }
    }

    pub fn rln(&self, side: Side) -> &FieldValue<NervePreservation> {
        match side {
            Side::Right => &self.rln_right,
            Side::Left => &self.rln_left,
        }
    }

    pub fn rln_mut(&mut self, side: Side) -> &mut FieldValue<NervePreservation> {
        match side {
            Side::Right => &mut self.rln_right,
            Side::Left => &mut self.rln_left,
        }
    }

    pub fn sln(&self, side: Side) -> &FieldValue<PreservationStatus> {
        match side {
            Side::Right => &self.sln_right,
            Side::Left => &self.sln_left,
        }
    }

    pub fn sln_mut(&mut self, side: Side) -> &mut FieldValue<PreservationStatus> {
        match side {
            Side::Right => &mut self.sln_right,
            Side::Left => &mut self.sln_left,
        }
    }

    /// Compact JSON with canonical key order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_json_value(&value)
    }

    /// Decodes a record, reporting every unknown, duplicate or ill-typed key.
    /// Absent keys are not mentioned.
    pub fn from_json_value(value: &Value) -> Result<Self> {
        let Value::Object(map) = value else {
            return Err(CoreError::Schema(vec![SchemaIssue {
                key: String::new(),
                message: format!("expected a JSON object, got {}", kind_of(value)),
            }]));
        };
        let mut record = OperationRecord::empty();
        let mut issues = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (key, v) in map {
            if normalize_label(key) == normalize_label(NOTES_KEY) {
                match serde_json::from_value::<Vec<Note>>(v.clone()) {
                    Ok(notes) => record.notes = notes,
                    Err(e) => issues.push(SchemaIssue { key: key.clone(), message: e.to_string() }),
                }
                continue;
            }
            let Some(field) = Field::from_key(key) else {
                issues.push(SchemaIssue { key: key.clone(), message: "unknown key".into() });
                continue;
            };
            if !seen.insert(field) {
                issues.push(SchemaIssue { key: key.clone(), message: format!("duplicate of {:?}", field.key()) });
                continue;
            }
            if let Err(message) = record.set_field_json(field, v) {
                issues.push(SchemaIssue { key: key.clone(), message });
            }
        }
        if issues.is_empty() {
            Ok(record)
        } else {
            Err(CoreError::Schema(issues))
        }
    }

    /// Swaps every left/right laterality, including side words in notes.
    pub fn mirrored(&self) -> OperationRecord {
        let mut out = self.clone();
        out.tumor_location = self.tumor_location.clone().map(|v| v.into_iter().map(Location::mirrored).collect());
        out.thyroid_resection_range = self.thyroid_resection_range.clone().map(|r| r.mirrored());
        for gland in Gland::ALL {
            *out.parathyroid_mut(gland.mirrored()) = self.parathyroid(gland).clone();
        }
        for side in [Side::Right, Side::Left] {
            *out.rln_mut(side.mirrored()) = self.rln(side).clone();
            *out.sln_mut(side.mirrored()) = self.sln(side).clone();
        }
        for note in &mut out.notes {
            note.text = swap_side_words(&note.text);
        }
        out
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Exchanges side words ("left"/"right", "좌측"/"우측", ...) in free text.
pub fn swap_side_words(text: &str) -> String {
    const PAIRS: [(&str, &str); 4] = [("left", "right"), ("Left", "Right"), ("좌측", "우측"), ("왼쪽", "오른쪽")];
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut prev_alpha = false;
    'outer: while !rest.is_empty() {
        if !prev_alpha {
            for (a, b) in PAIRS {
                for (from, to) in [(a, b), (b, a)] {
                    if let Some(after) = rest.strip_prefix(from) {
                        if !after.starts_with(|c: char| c.is_ascii_alphabetic()) {
                            out.push_str(to);
                            rest = after;
                            prev_alpha = true;
                            continue 'outer;
                        }
                    }
                }
            }
        }
        let c = rest.chars().next().expect("non-empty");
        out.push(c);
        prev_alpha = c.is_ascii_alphabetic();
        rest = &rest[c.len_utf8()..];
    }
    out
}

impl Serialize for OperationRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(Field::ALL.len() + 1))?;
        for field in Field::ALL {
            map.serialize_entry(field.key(), &self.field_json(*field))?;
        }
        map.serialize_entry(NOTES_KEY, &self.notes)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for OperationRecord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        OperationRecord::from_json_value(&value).map_err(serde::de::Error::custom)
    }
}
