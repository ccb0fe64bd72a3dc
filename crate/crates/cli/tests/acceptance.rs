//! Acceptance suite: prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use opnote_backends::stub::{fixed_completion, StubServer};
use opnote_backends::{ApiKey, BackendKind, Extractor, ExtractorConfig, LlmClient, LlmConfig};
use opnote_core::bio::{decode_spans, encode_labels, repair_labels, tokenize, Label, LabelSequence};
use opnote_core::corpus::{generate, split, split_sizes, GeneratorProfile};
use opnote_core::evaluator::{harmonic_f1, macro_average, span_counts, ClassAccuracy, DocumentSpans, TagMetrics};
use opnote_core::record::LymphNodeRemoval;
use opnote_core::{
    build_scene, render_svg, EntitySpan, Field, FieldValue, LanguageMode, MatchMode, OperationRecord, Region,
    Structurer, Tag, Transcript, TranscriptId,
};
use opnote_service::{Config, StoredRecord};
use proptest::prelude::*;
use proptest::sample::select;
use proptest::test_runner::{Config as RunnerConfig, RngAlgorithm, TestRng, TestRunner};
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Check = (u8, &'static str, fn() -> Outcome);

const TOL: f64 = 0.005;

const TABLE1_DOC: &str = "A 50-year-old female patient underwent total thyroidectomy and bilateral central lymph \
node dissection using a skin incision for bilateral thyroid papillary cancer. A drain was inserted.";

const TABLE1_OUTPUT: &str = r#"{"Age": 50, "Gender": "Female", "Tumor Location": ["Left", "Right"], "Tumor Size": [1.3, 1.1], "Drain Insertion": "Inserted"}"#;

/// Published per-tag precision, recall, F1 and support.
const TABLE2: [(Tag, f64, f64, f64, usize); 18] = [
    (Tag::Pat, 1.00, 1.00, 1.00, 592),
    (Tag::Tmr, 0.97, 1.00, 0.99, 567),
    (Tag::Atm, 0.98, 0.98, 0.98, 282),
    (Tag::Dxn, 0.98, 0.98, 0.98, 651),
    (Tag::Lnt, 0.40, 0.67, 0.50, 31),
    (Tag::Sgm, 0.92, 0.94, 0.93, 787),
    (Tag::Lnr, 0.96, 0.97, 0.97, 545),
    (Tag::Eti, 0.97, 0.98, 0.98, 513),
    (Tag::Lne, 0.95, 0.97, 0.96, 438),
    (Tag::Nem, 1.00, 1.00, 1.00, 537),
    (Tag::Rln, 0.99, 1.00, 0.99, 704),
    (Tag::Sln, 1.00, 0.92, 0.96, 117),
    (Tag::Prt, 0.95, 0.98, 0.97, 724),
    (Tag::Rns, 0.67, 1.00, 0.80, 11),
    (Tag::Com, 0.97, 0.97, 0.97, 580),
    (Tag::Dnt, 0.97, 0.99, 0.98, 577),
    (Tag::Fzs, 0.95, 0.95, 0.95, 367),
    (Tag::Etc, 0.46, 0.55, 0.50, 72),
];

/// Published class accuracies of the first and third experiment, in record field order.
const TABLE3_COL1: [f64; 22] = [
    100.0, 100.0, 100.0, 96.92, 98.46, 98.46, 100.0, 83.08, 100.0, 96.92, 100.0, 98.46, 98.46, 98.46, 98.46, 98.46,
    100.0, 95.38, 100.0, 100.0, 96.92, 98.46,
];
const TABLE3_COL3: [f64; 22] = [
    100.0, 100.0, 98.46, 100.0, 100.0, 100.0, 100.0, 98.46, 96.92, 100.0, 100.0, 100.0, 98.46, 100.0, 100.0, 100.0,
    100.0, 100.0, 100.0, 100.0, 100.0, 100.0,
];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        RunnerConfig { cases, failure_persistence: None, ..RunnerConfig::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn macro_fidelity() -> Outcome {
    let started = Instant::now();
    let per_tag = TABLE2
        .iter()
        .map(|&(t, p, r, f, s)| TagMetrics::from_reported(t, p, r, f, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let m = macro_average(&per_tag).map_err(|e| e.to_string())?;
    for (name, got, want) in [("P", m.precision, 0.89), ("R", m.recall, 0.94), ("F1", m.f1, 0.91)] {
        ensure((got - want).abs() <= TOL, || format!("macro {name} = {got:.4}, expected {want}"))?;
    }
    let took = within(started, Duration::from_secs(1))?;
    Ok(format!("P={:.4} R={:.4} F1={:.4} in {took:.2?}", m.precision, m.recall, m.f1))
}

fn harmonic_fidelity() -> Outcome {
    let f1 = harmonic_f1(0.67, 1.00);
    ensure((f1 - 0.80).abs() <= TOL, || format!("F1 = {f1:.4}"))?;
    Ok(format!("F1={f1:.4}"))
}

fn table3_means() -> Outcome {
    let mean = |col: &[f64; 22]| {
        ClassAccuracy::from_reported(Field::ALL.iter().copied().zip(col.iter().copied()), 65).map(|a| a.mean)
    };
    let first = mean(&TABLE3_COL1).map_err(|e| e.to_string())?;
    let third = mean(&TABLE3_COL3).map_err(|e| e.to_string())?;
    ensure((first - 98.04).abs() <= TOL, || format!("column 1 mean {first:.4}"))?;
    ensure((third - 99.65).abs() <= TOL, || format!("column 3 mean {third:.4}"))?;
    Ok(format!("column 1 = {first:.4}, column 3 = {third:.4}"))
}

fn arb_doc_spans() -> impl Strategy<Value = Vec<EntitySpan>> {
    let tags = [Tag::Pat, Tag::Dxn, Tag::Rns];
    prop::collection::vec((0usize..40, 1usize..4, select(tags.to_vec())), 0..=20).prop_map(|mut raw| {
        raw.sort();
        let mut out: Vec<EntitySpan> = Vec::new();
        for (start, len, tag) in raw {
            if out.last().is_some_and(|s| s.end > start) {
                continue;
            }
            out.push(EntitySpan { tag, start, end: start + len, surface: String::new() });
        }
        out
    })
}

/// Every (gold, predicted) pair compared directly.
fn pairwise_counts(gold: &[DocumentSpans], pred: &[DocumentSpans]) -> BTreeMap<Tag, (usize, usize, usize)> {
    let mut out = BTreeMap::new();
    for tag in Tag::ALL {
        let (mut tp, mut n_gold, mut n_pred) = (0, 0, 0);
        for (g, p) in gold.iter().zip(pred) {
            let gs: Vec<_> = g.spans.iter().filter(|s| s.tag == tag).collect();
            let ps: Vec<_> = p.spans.iter().filter(|s| s.tag == tag).collect();
            n_gold += gs.len();
            n_pred += ps.len();
            tp += gs.iter().map(|a| ps.iter().filter(|b| a.start == b.start && a.end == b.end).count()).sum::<usize>();
        }
        out.insert(tag, (tp, n_pred - tp, n_gold - tp));
    }
    out
}

fn metric_oracle() -> Outcome {
    let started = Instant::now();
    let strategy = prop::collection::vec((arb_doc_spans(), arb_doc_spans()), 0..=10);
    let cases = Cell::new(0u32);
    runner(1000)
        .run(&strategy, |docs| {
            cases.set(cases.get() + 1);
            let (gold, pred): (Vec<_>, Vec<_>) = docs
                .into_iter()
                .enumerate()
                .map(|(i, (g, p))| {
                    let id = TranscriptId(format!("d{i}"));
                    (DocumentSpans { id: id.clone(), spans: g }, DocumentSpans { id, spans: p })
                })
                .unzip();
            let counts = span_counts(&gold, &pred, MatchMode::Exact).unwrap();
            let oracle = pairwise_counts(&gold, &pred);
            for tag in Tag::ALL {
                let c = counts[&tag];
                prop_assert_eq!((c.tp, c.fp, c.fn_), oracle[&tag], "{}", tag);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let took = within(started, Duration::from_secs(30))?;
    Ok(format!("{} instances in {took:.2?}", cases.get()))
}

fn structurer_round_trip() -> Outcome {
    let started = Instant::now();
    let profile = GeneratorProfile::preset("thyroner", 20240601).map_err(|e| e.to_string())?;
    ensure(profile.n_documents == 741, || format!("{} documents", profile.n_documents))?;
    let noise = profile.noise;
    for p in [noise.transliteration_mix, noise.descriptor_grouping_loss, noise.negated_dissection, noise.synonym_swap] {
        ensure(p == 0.2, || format!("noise probability {p}"))?;
    }
    let docs = generate(&profile).map_err(|e| e.to_string())?;
    let structurer = Structurer::english();
    let mut negated = 0;
    for d in &docs {
        let out = structurer.structure(&d.gold_spans, &d.transcript.text).map_err(|e| e.to_string())?;
        ensure(out.record == d.gold_record, || format!("record differs for {}", d.transcript.id))?;
        let negates =
            d.gold_spans.iter().any(|s| s.tag == Tag::Lnr && s.surface.contains("dissection was not performed"));
        if negates {
            negated += 1;
            ensure(out.record.lymph_node_removal == FieldValue::Value(LymphNodeRemoval::NotPerformed), || {
                format!("negated dissection in {} not mapped to NOT_PERFORMED", d.transcript.id)
            })?;
        }
    }
    ensure(negated > 0, || "no negated dissection document generated".into())?;
    let took = within(started, Duration::from_secs(20))?;
    Ok(format!("{}/{} documents, {negated} negated dissections, {took:.2?}", docs.len(), docs.len()))
}

fn split_fidelity() -> Outcome {
    let sizes = split_sizes(741, (0.8, 0.1, 0.1)).map_err(|e| e.to_string())?;
    ensure(sizes == (592, 74, 75), || format!("sizes {sizes:?}"))?;
    let (a, b, c) = split((0..741).collect::<Vec<_>>(), (0.8, 0.1, 0.1), 7).map_err(|e| e.to_string())?;
    ensure((a.len(), b.len(), c.len()) == (592, 74, 75), || "partition sizes differ".into())?;
    let mut all: Vec<usize> = a.into_iter().chain(b).chain(c).collect();
    all.sort();
    ensure(all == (0..741).collect::<Vec<_>>(), || "split is not a partition".into())?;
    Ok("592/74/75".into())
}

fn arb_text() -> impl Strategy<Value = String> {
    let words = vec!["nodule", "1.3", "cm", "좌측", "drain", "was", "inserted", ".", ","];
    prop::collection::vec(select(words), 1..30).prop_map(|w| w.join(" "))
}

fn bio_round_trip() -> Outcome {
    let spans = arb_text()
        .prop_flat_map(|text| {
            let n = tokenize(&text).len();
            (Just(text), prop::collection::vec((0..n, 1usize..4, select(Tag::ALL.to_vec())), 0..8))
        })
        .prop_map(|(text, mut picks)| {
            let tokens = tokenize(&text);
            picks.sort();
            let mut spans: Vec<EntitySpan> = Vec::new();
            let mut next_free = 0;
            for (first, len, tag) in picks {
                let last = (first + len - 1).min(tokens.len() - 1);
                if first < next_free {
                    continue;
                }
                spans.push(EntitySpan::from_text(tag, tokens[first].0, tokens[last].1, &text).unwrap());
                next_free = last + 1;
            }
            (text, spans)
        });
    let encoded = Cell::new(0u32);
    runner(1000)
        .run(&spans, |(text, spans)| {
            encoded.set(encoded.get() + 1);
            let seq = encode_labels(&spans, &tokenize(&text)).unwrap();
            prop_assert_eq!(decode_spans(&seq, &text).unwrap(), spans);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;

    let labels = arb_text().prop_flat_map(|text| {
        let n = tokenize(&text).len();
        (Just(text), prop::collection::vec(select(Label::alphabet()), n))
    });
    let repaired = Cell::new(0u32);
    runner(1000)
        .run(&labels, |(text, labels)| {
            repaired.set(repaired.get() + 1);
            let seq = LabelSequence::new(tokenize(&text), labels).unwrap();
            let once = repair_labels(&seq);
            prop_assert_eq!(repair_labels(&once), once);
            Ok(())
        })
        .map_err(|e| format!("repair: {e}"))?;
    Ok(format!("{} span sets, {} label strings", encoded.get(), repaired.get()))
}

fn llm_contract() -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let structure = |reply: &'static str| async move {
            let stub = StubServer::completion(fixed_completion(reply)).await.map_err(|e| e.to_string())?;
            let config = ExtractorConfig {
                backend: BackendKind::Llm,
                llm: Some(LlmConfig::new(stub.url().clone(), "OPNOTE_ACCEPTANCE_KEY", "gpt-4")),
                ..ExtractorConfig::default()
            };
            let client = LlmClient::with_api_key(config.llm.clone().unwrap(), ApiKey::new("sk-acceptance"))
                .map_err(|e| e.to_string())?;
            let extractor = Extractor::with_llm(config, client).map_err(|e| e.to_string())?;
            let doc = Transcript::new(TABLE1_DOC, LanguageMode::Monolingual, "acceptance").unwrap();
            extractor.extract(&doc).await.map(|x| x.record).map_err(|e| e.to_string())
        };

        let r = structure(TABLE1_OUTPUT).await?;
        let expected = [
            (Field::Age, json!(50)),
            (Field::Sex, json!("Female")),
            (Field::TumorLocation, json!(["Left", "Right"])),
            (Field::TumorSize, json!([1.3, 1.1])),
            (Field::DrainInsertion, json!("Inserted")),
        ];
        for (field, value) in &expected {
            ensure(&r.field_json(*field) == value, || format!("{} = {}", field.key(), r.field_json(*field)))?;
        }
        for field in Field::ALL {
            if expected.iter().all(|(f, _)| f != field) {
                ensure(!r.is_mentioned(*field), || format!("{} should be not mentioned", field.key()))?;
            }
        }
        let empty = structure("{}").await?;
        ensure(empty == OperationRecord::empty(), || "empty reply did not give an all not-mentioned record".into())?;
        Ok("Table 1 reply gives 5 fields; empty reply gives 22 not mentioned".to_string())
    })
}

/// Region id with left and right exchanged.
fn mirror_id(id: &str) -> String {
    let swapped = id.replace("RIGHT", "\0").replace("LEFT", "RIGHT").replace('\0', "LEFT");
    match swapped.as_str() {
        "PARATHYROID_UR" => "PARATHYROID_UL".into(),
        "PARATHYROID_UL" => "PARATHYROID_UR".into(),
        "PARATHYROID_LR" => "PARATHYROID_LL".into(),
        "PARATHYROID_LL" => "PARATHYROID_LR".into(),
        _ => swapped,
    }
}

/// Base group id first, then fragment region ids with their fills.
fn layers(svg: &str) -> Result<(Vec<String>, BTreeMap<String, String>), String> {
    let doc = roxmltree::Document::parse(svg).map_err(|e| e.to_string())?;
    let groups: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("g") && n.attribute("class").is_some_and(|c| c.split(' ').any(|w| w == "layer")))
        .collect();
    let ids = groups.iter().map(|g| g.attribute("id").unwrap_or_default().to_string()).collect();
    let fills = groups
        .iter()
        .filter_map(|g| Some((g.attribute("data-region")?.to_string(), g.attribute("fill")?.to_string())))
        .collect();
    Ok((ids, fills))
}

fn renderer() -> Outcome {
    let mut profile = GeneratorProfile::preset("thyrotranscript", 99).map_err(|e| e.to_string())?;
    profile.n_documents = 100;
    profile.default_coverage = 0.6;
    let records: Vec<OperationRecord> =
        generate(&profile).map_err(|e| e.to_string())?.into_iter().map(|d| d.gold_record).collect();
    let expected_ids: Vec<String> = std::iter::once("layer-base".to_string())
        .chain(Region::ALL.iter().map(|r| format!("layer-{}", r.id())))
        .collect();
    for (i, r) in records.iter().enumerate() {
        let scene = build_scene(r);
        let svg = render_svg(&scene);
        ensure(svg == render_svg(&build_scene(r)), || format!("record {i}: output not byte-identical"))?;
        let (ids, fills) = layers(&svg)?;
        ensure(ids == expected_ids, || format!("record {i}: layers {ids:?}"))?;
        let (_, mirrored) = layers(&render_svg(&build_scene(&r.mirrored())))?;
        for (id, fill) in &fills {
            ensure(mirrored.get(&mirror_id(id)) == Some(fill), || format!("record {i}: {id} not mirrored"))?;
        }
    }
    Ok(format!("{} records, 1 + {} groups each", records.len(), Region::ALL.len()))
}

fn service_end_to_end() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
        let config = Config {
            listen: "127.0.0.1:0".parse().unwrap(),
            storage_path: dir.path().to_path_buf(),
            ..Config::default()
        };
        let http = reqwest::Client::new();
        let err = |e: reqwest::Error| e.to_string();

        let server = opnote_service::spawn(config.clone()).await.map_err(|e| e.to_string())?;
        let base = server.url();
        let started = Instant::now();
        let upload = http
            .post(format!("{base}/api/transcripts"))
            .header("content-type", "text/plain")
            .body(TABLE1_DOC)
            .send()
            .await
            .map_err(err)?;
        ensure(upload.status() == 201, || format!("upload status {}", upload.status()))?;
        let tid = upload.json::<Value>().await.map_err(err)?["transcript_id"].as_str().unwrap_or_default().to_string();
        let created: StoredRecord = http
            .post(format!("{base}/api/records:extract"))
            .json(&json!({"transcript_id": tid, "backend": "rule"}))
            .send()
            .await
            .map_err(err)?
            .json()
            .await
            .map_err(err)?;
        let body = http.get(format!("{base}/api/records/{}", created.record_id)).send().await.map_err(err)?;
        let body = body.text().await.map_err(err)?;
        let image =
            http.get(format!("{base}/api/records/{}/image.svg", created.record_id)).send().await.map_err(err)?;
        let image = image.text().await.map_err(err)?;
        let round_trip = within(started, Duration::from_secs(1))?;

        let doc = Transcript::new(TABLE1_DOC, LanguageMode::Monolingual, "library").unwrap();
        let direct = Extractor::new(ExtractorConfig::default())
            .map_err(|e| e.to_string())?
            .extract(&doc)
            .await
            .map_err(|e| e.to_string())?
            .record;
        ensure(body.contains(&format!("\"record\":{}", direct.to_json())), || {
            "record JSON differs from library".into()
        })?;
        ensure(image == render_svg(&build_scene(&direct)), || "image differs from library rendering".into())?;

        let put = |version: u64, age: u32| {
            http.put(format!("{base}/api/records/{}", created.record_id))
                .json(&json!({"version": version, "record": {"Age": age}}))
                .send()
        };
        let (a, b) = tokio::join!(put(1, 51), put(1, 52));
        let mut statuses = [a.map_err(err)?.status().as_u16(), b.map_err(err)?.status().as_u16()];
        statuses.sort();
        ensure(statuses == [200, 409], || format!("concurrent PUT statuses {statuses:?}"))?;
        let stale = put(1, 53).await.map_err(err)?.status();
        ensure(stale == 409, || format!("stale PUT got {stale}"))?;
        let before: Vec<StoredRecord> = http
            .get(format!("{base}/api/records/{}/versions", created.record_id))
            .send()
            .await
            .map_err(err)?
            .json()
            .await
            .map_err(err)?;
        server.shutdown().await.map_err(|e| e.to_string())?;

        let server = opnote_service::spawn(config).await.map_err(|e| e.to_string())?;
        let after: Vec<StoredRecord> = http
            .get(format!("{}/api/records/{}/versions", server.url(), created.record_id))
            .send()
            .await
            .map_err(err)?
            .json()
            .await
            .map_err(err)?;
        ensure(before.len() == 2 && after == before, || "versions changed across restart".into())?;
        Ok(format!("round trip {round_trip:.2?}; {} versions kept; stale PUT 409", after.len()))
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        (1, "macro aggregation fidelity", macro_fidelity),
        (2, "harmonic mean fidelity", harmonic_fidelity),
        (3, "class accuracy mean fidelity", table3_means),
        (4, "span metrics match pairwise oracle", metric_oracle),
        (5, "structurer round trip on generated corpus", structurer_round_trip),
        (6, "split fidelity", split_fidelity),
        (7, "BIO round trip and repair idempotence", bio_round_trip),
        (8, "LLM path contract", llm_contract),
        (9, "renderer determinism and structure", renderer),
        (10, "service end to end", service_end_to_end),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, title, check) in checks {
        match panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| Err(panic_message(p))) {
            Ok(detail) => println!("[PASS] {id} {title}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] {id} {title}: {reason}");
            }
        }
    }
    let _ = panic::take_hook();
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
