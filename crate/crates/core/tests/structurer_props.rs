use std::sync::OnceLock;

use opnote_core::corpus::{generate, GeneratorProfile, NoiseProfile};
use opnote_core::structurer::{MappingTable, Structurer};
use opnote_core::{Field, GoldDocument, Tag};
use proptest::prelude::*;
use proptest::sample::{select, Index};

fn corpus() -> &'static [GoldDocument] {
    static DOCS: OnceLock<Vec<GoldDocument>> = OnceLock::new();
    DOCS.get_or_init(|| {
        let mut profile = GeneratorProfile::full(11, 60);
        profile.noise = NoiseProfile::uniform(0.3);
        profile.default_coverage = 0.7;
        generate(&profile).unwrap()
    })
}

fn structurer() -> &'static Structurer {
    static S: OnceLock<Structurer> = OnceLock::new();
    S.get_or_init(Structurer::english)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn any_span_subset_structures(doc in any::<Index>(), mask in prop::collection::vec(any::<bool>(), 64)) {
        let d = doc.get(corpus());
        let spans: Vec<_> = d.gold_spans.iter().zip(mask.iter().cycle()).filter(|(_, k)| **k).map(|(s, _)| s.clone()).collect();
        let out = structurer().structure(&spans, &d.transcript.text).unwrap();
        prop_assert!(opnote_core::validate_record(&out.record).is_empty());
    }

    #[test]
    fn dropping_a_tag_only_touches_its_classes(doc in any::<Index>(), tag in select(&Tag::ALL[..])) {
        let d = doc.get(corpus());
        let text = &d.transcript.text;
        let mapping = MappingTable::standard();
        let full = structurer().structure(&d.gold_spans, text).unwrap().record;
        let kept: Vec<_> = d.gold_spans.iter().filter(|s| s.tag != tag).cloned().collect();
        let reduced = structurer().structure(&kept, text).unwrap().record;

        let targets = &mapping.row(tag).targets;
        for &field in Field::ALL {
            let sources = mapping.sources(field);
            if sources == [tag] {
                prop_assert!(!reduced.is_mentioned(field), "{} still set", field);
            } else if !targets.contains(&field) {
                prop_assert_eq!(full.field_json(field), reduced.field_json(field), "{}", field);
            }
        }
        prop_assert!(reduced.notes.iter().all(|n| n.tag != tag));
        let others: Vec<_> = full.notes.iter().filter(|n| n.tag != tag).collect();
        prop_assert_eq!(others, reduced.notes.iter().collect::<Vec<_>>());
    }
}
