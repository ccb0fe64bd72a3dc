//! Hand-authored narratives with independently written records.

use opnote_core::{LanguagePack, MappingTable, OperationRecord, RuleTagger, Structurer};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    id: String,
    pack: String,
    text: String,
    tags: Vec<String>,
    record: serde_json::Value,
}

fn cases() -> Vec<Case> {
    include_str!("fixtures/golden.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn golden_set_has_twenty_documents() {
    assert_eq!(cases().len(), 20);
}

#[test]
fn rule_tagger_finds_expected_tags() {
    for c in cases() {
        let pack = LanguagePack::bundled(&c.pack).unwrap();
        let spans = RuleTagger::new(pack).tag(&c.text);
        let got: Vec<&str> = spans.iter().map(|s| s.tag.code()).collect();
        assert_eq!(got, c.tags, "{}: {:?}", c.id, spans);
    }
}

#[test]
fn pipeline_reproduces_hand_written_records() {
    for c in cases() {
        let pack = LanguagePack::bundled(&c.pack).unwrap();
        let spans = RuleTagger::new(pack.clone()).tag(&c.text);
        let out = Structurer::new(pack, MappingTable::standard()).structure(&spans, &c.text).unwrap();
        let expected = OperationRecord::from_json_value(&c.record).unwrap();
        assert_eq!(out.record, expected, "{}\n{}", c.id, out.record.to_json_pretty());
    }
}
