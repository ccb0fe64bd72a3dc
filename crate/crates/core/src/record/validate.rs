use serde::{Deserialize, Serialize};

use super::values::{normalize_label, NOT_MENTIONED};
use super::{Field, FieldValue, OperationRecord, ResectionRange, NOTES_KEY};

/// A failed record invariant, named by JSON key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

const MAX_AGE: u32 = 130;

fn violation(field: Field, message: impl Into<String>) -> Violation {
    Violation { field: field.key().to_string(), message: message.into() }
}

fn check_text(out: &mut Vec<Violation>, field: Field, value: &FieldValue<String>) {
    if let FieldValue::Value(text) = value {
        if text.trim().is_empty() {
            out.push(violation(field, "empty text; use \"not mentioned\" for absence"));
        } else if normalize_label(text) == NOT_MENTIONED {
            out.push(violation(field, "the not-mentioned literal cannot be a value"));
        }
    }
}

/// Returns every violated invariant; an empty list means the record is valid.
pub fn validate_record(record: &OperationRecord) -> Vec<Violation> {
    let mut out = Vec::new();

    if let FieldValue::Value(age) = record.age {
        if age == 0 || age > MAX_AGE {
            out.push(violation(Field::Age, format!("age {age} outside 1..={MAX_AGE}")));
        }
    }
    if let FieldValue::Value(locations) = &record.tumor_location {
        if locations.is_empty() {
            out.push(violation(Field::TumorLocation, "empty list; use \"not mentioned\" for absence"));
        }
    }
    if let FieldValue::Value(sizes) = &record.tumor_size {
        if sizes.is_empty() {
            out.push(violation(Field::TumorSize, "empty list; use \"not mentioned\" for absence"));
        }
        for (i, size) in sizes.iter().enumerate() {
            if !size.is_finite() || *size <= 0.0 {
                out.push(violation(Field::TumorSize, format!("size #{i} ({size}) must be a positive number of cm")));
            }
        }
    }
    if let (FieldValue::Value(locations), FieldValue::Value(sizes)) = (&record.tumor_location, &record.tumor_size) {
        if locations.len() != sizes.len() {
            out.push(violation(
                Field::TumorSize,
                format!("{} sizes for {} locations; the lists must be index-aligned", sizes.len(), locations.len()),
            ));
        }
    }
    check_text(&mut out, Field::DiagnosisName, &record.diagnosis_name);
    check_text(&mut out, Field::SurgeryMethod, &record.surgery_method);
    check_text(&mut out, Field::BleedingOnCleanup, &record.bleeding_on_cleanup);

    if let FieldValue::Value(ResectionRange::Other(text)) = &record.thyroid_resection_range {
        if text.trim().is_empty() {
            out.push(violation(Field::ThyroidResectionRange, "empty resection range"));
        } else if ResectionRange::known_from_label(text).is_some() {
            out.push(violation(Field::ThyroidResectionRange, format!("{text:?} names a known range and must use it")));
        } else if normalize_label(text) == NOT_MENTIONED {
            out.push(violation(Field::ThyroidResectionRange, "the not-mentioned literal cannot be a value"));
        }
    }

    for (i, note) in record.notes.iter().enumerate() {
        if note.text.trim().is_empty() {
            out.push(Violation { field: NOTES_KEY.into(), message: format!("note #{i} has empty text") });
        }
    }
    out
}
