mod common;

use common::arb_record;
use opnote_core::record::{FieldValue, Note, ResectionRange};
use opnote_core::{validate_record, Field, OperationRecord, Tag, TagSet};
use proptest::prelude::*;
use serde_json::Value;

/// Independent validity check over the serialized form.
fn brute_force_valid(r: &OperationRecord) -> bool {
    let json: Value = serde_json::from_str(&r.to_json()).unwrap();
    let get = |k: &str| json.get(k).cloned().unwrap_or(Value::Null);
    let absent = |v: &Value| v.as_str() == Some("not mentioned");
    let age = get("Age");
    if !absent(&age) && !(1..=130).contains(&age.as_u64().unwrap_or(0)) {
        return false;
    }
    let locs = get("Tumor location");
    let sizes = get("Tumor size");
    if let Some(l) = locs.as_array() {
        if l.is_empty() {
            return false;
        }
    }
    if let Some(s) = sizes.as_array() {
        if s.is_empty() || s.iter().any(|x| x.as_f64().is_none_or(|x| x <= 0.0)) {
            return false;
        }
        if let Some(l) = locs.as_array() {
            if l.len() != s.len() {
                return false;
            }
        }
    }
    for key in ["Diagnosis name", "Surgery method", "Bleeding when cleaning the surgical site"] {
        let v = get(key);
        if !absent(&v) && v.as_str().is_none_or(|s| s.trim().is_empty()) {
            return false;
        }
    }
    let range = get("Thyroid resection range");
    if let Some(s) = range.as_str() {
        if s.trim().is_empty() {
            return false;
        }
    }
    if let Some(notes) = json.get("Notes").and_then(Value::as_array) {
        if notes.iter().any(|n| n["text"].as_str().is_none_or(|t| t.trim().is_empty())) {
            return false;
        }
    }
    true
}

/// Valid records with one random defect injected (or none).
fn arb_maybe_invalid() -> impl Strategy<Value = OperationRecord> {
    (arb_record(), 0usize..9, 0u32..300).prop_map(|(mut r, defect, n)| {
        match defect {
            0 => r.age = FieldValue::Value(n % 2 * 200),
            1 => r.tumor_location = FieldValue::Value(vec![]),
            2 => r.tumor_size = FieldValue::Value(vec![-(n as f64)]),
            3 => {
                r.tumor_location = FieldValue::Value(vec![opnote_core::record::Location::Left; 2]);
                r.tumor_size = FieldValue::Value(vec![1.0; 1 + n as usize % 3]);
            }
            4 => r.diagnosis_name = FieldValue::Value("  ".into()),
            5 => r.thyroid_resection_range = FieldValue::Value(ResectionRange::Other(" ".into())),
            6 => r.notes.push(Note::new(Tag::Etc, "")),
            _ => {}
        }
        r
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn json_round_trip(r in arb_record()) {
        prop_assert_eq!(OperationRecord::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn generated_records_are_valid(r in arb_record()) {
        prop_assert!(validate_record(&r).is_empty());
    }

    #[test]
    fn validator_agrees_with_brute_force(r in arb_maybe_invalid()) {
        prop_assert_eq!(validate_record(&r).is_empty(), brute_force_valid(&r), "{}", r.to_json());
    }
}

#[test]
fn schema_counts() {
    assert_eq!(TagSet::standard().len(), 18);
    assert_eq!(Field::ALL.len(), 22);
}

#[test]
fn table1_fragment_parses() {
    let text = r#"{"Age": 50, "Gender": "Female", "Tumor Location": ["Left","Right"], "Tumor Size": [1.3, 1.1], "Drain Insertion": "Inserted"}"#;
    let r = OperationRecord::from_json(text).unwrap();
    assert_eq!(r.mentioned_count(), 5);
    assert_eq!(r.age, FieldValue::Value(50));
    assert!(validate_record(&r).is_empty());
}

#[test]
fn ill_typed_age_is_a_schema_error() {
    let err = OperationRecord::from_json(r#"{"Age": "fifty"}"#).unwrap_err();
    assert!(err.to_string().contains("Age"), "{err}");
    assert!(OperationRecord::from_json(r#"{"Shoe size": 9}"#).is_err());
}
