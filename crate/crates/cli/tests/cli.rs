use std::path::Path;
use std::process::{Command, Output, Stdio};

use opnote_backends::stub::{fixed_completion, StubServer};
use tempfile::TempDir;

const TABLE1_DOC: &str = "A 50-year-old female patient underwent total thyroidectomy and bilateral central lymph \
node dissection using a skin incision for bilateral thyroid papillary cancer. A drain was inserted.";

fn opnote(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opnote")).current_dir(dir).args(args).output().unwrap()
}

fn opnote_stdin(dir: &Path, args: &[&str], stdin: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_opnote"))
        .current_dir(dir)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "status {:?}\n{}", out.status, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn count(dir: &Path) -> usize {
    std::fs::read_dir(dir).unwrap().count()
}

/// Rows of the class accuracy table, header excluded.
fn accuracy_rows(markdown: &str) -> Vec<String> {
    let start = markdown.lines().position(|l| l.starts_with("| Class |")).expect("accuracy table");
    markdown.lines().skip(start + 2).take_while(|l| l.starts_with("| ")).map(str::to_string).collect()
}

#[test]
fn generated_corpus_splits_into_published_sizes() {
    let tmp = TempDir::new().unwrap();
    ok(&opnote(tmp.path(), &["gen-corpus", "--seed", "7", "-n", "741", "--out", "c"]));
    let summary = ok(&opnote(tmp.path(), &["split", "0.8", "0.1", "0.1", "--in", "c", "--out", "s", "--seed", "3"]));
    assert_eq!(summary, "train\t592\nvalid\t74\ntest\t75\n");
    for (part, n) in [("train", 592), ("valid", 74), ("test", 75)] {
        assert_eq!(count(&tmp.path().join("s").join(part).join("transcripts")), n);
    }
}

#[test]
fn rule_extraction_over_a_generated_corpus_scores_100() {
    let tmp = TempDir::new().unwrap();
    ok(&opnote(tmp.path(), &["gen-corpus", "--seed", "11", "-n", "40", "--out", "c"]));
    ok(&opnote(tmp.path(), &["extract", "--backend", "rule", "--in", "c", "--out", "preds", "--jobs", "4"]));
    assert_eq!(count(&tmp.path().join("preds")), 40);
    let md = ok(&opnote(tmp.path(), &["eval", "--gold", "c", "--pred", "preds", "--format", "markdown"]));
    assert!(md.contains("| Macro |  | 1.00 | 1.00 | 1.00 |"), "{md}");
    let rows = accuracy_rows(&md);
    assert_eq!(rows.len(), 23);
    assert_eq!(rows.last().unwrap(), "| Average | 100.00 |");

    let jsonl = ok(&opnote(tmp.path(), &["extract", "--in", "c"]));
    assert_eq!(jsonl.lines().count(), 40);
    let piped = ok(&opnote_stdin(tmp.path(), &["eval", "--gold", "c"], &jsonl));
    let report: serde_json::Value = serde_json::from_str(&piped).unwrap();
    assert_eq!(report["mean_accuracy"], 100.0);
    assert_eq!(report["case_count"], 40);

    let csv = ok(&opnote(tmp.path(), &["eval", "--gold", "c", "--pred", "preds", "--format", "csv"]));
    assert_eq!(csv.lines().next().unwrap(), "kind,name,precision,recall,f1,support,accuracy");
}

#[test]
fn jobs_do_not_change_predictions() {
    let tmp = TempDir::new().unwrap();
    ok(&opnote(tmp.path(), &["gen-corpus", "--seed", "5", "-n", "30", "--out", "c"]));
    let one = ok(&opnote(tmp.path(), &["extract", "--in", "c", "--jobs", "1"]));
    let many = ok(&opnote(tmp.path(), &["extract", "--in", "c", "--jobs", "8"]));
    assert_eq!(one, many);
}

#[test]
fn generation_is_seed_deterministic_through_stdout() {
    let tmp = TempDir::new().unwrap();
    let a = ok(&opnote(tmp.path(), &["gen-corpus", "--seed", "9", "-n", "12"]));
    let b = ok(&opnote(tmp.path(), &["gen-corpus", "--seed", "9", "-n", "12"]));
    let c = ok(&opnote(tmp.path(), &["gen-corpus", "--seed", "10", "-n", "12"]));
    assert_eq!(a.lines().count(), 12);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let summary = ok(&opnote_stdin(tmp.path(), &["split", "0.5", "0.25", "0.25", "--out", "s"], &a));
    assert_eq!(summary, "train\t6\nvalid\t3\ntest\t3\n");
}

#[test]
fn extract_then_render_is_byte_stable() {
    let tmp = TempDir::new().unwrap();
    let pred = ok(&opnote_stdin(tmp.path(), &["extract"], TABLE1_DOC));
    std::fs::write(tmp.path().join("record.json"), &pred).unwrap();
    let a = ok(&opnote(tmp.path(), &["render", "record.json"]));
    let b = ok(&opnote(tmp.path(), &["render", "record.json"]));
    assert_eq!(a, b);
    let doc = roxmltree::Document::parse(&a).unwrap();
    let fill = |id: &str| {
        doc.descendants()
            .find(|n| n.attribute("data-region") == Some(id))
            .unwrap()
            .attribute("fill")
            .unwrap()
            .to_string()
    };
    assert_eq!(fill("THYROID_LOBE_LEFT"), "#C0392B");
    assert_eq!(fill("ISTHMUS"), "#C0392B");
    ok(&opnote(tmp.path(), &["render", "--in", "record.json", "--out", "out.svg"]));
    assert_eq!(std::fs::read_to_string(tmp.path().join("out.svg")).unwrap(), a);
}

#[test]
fn structure_from_standoff_spans() {
    let tmp = TempDir::new().unwrap();
    let input = serde_json::json!({
        "text": "A 61-year-old man underwent right lobectomy.",
        "spans": [{"tag": "PAT", "start": 2, "end": 17}, {"tag": "SGM", "start": 28, "end": 43}],
    });
    let out = ok(&opnote_stdin(tmp.path(), &["structure", "--audit", "audit.json"], &input.to_string()));
    let record: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(record["Age"], 61);
    assert_eq!(record["Sex"], "Male");
    assert_eq!(record["Thyroid resection range"], "Right lobectomy");
    assert!(tmp.path().join("audit.json").is_file());

    let bad = serde_json::json!({"text": "short", "spans": [{"tag": "PAT", "start": 2, "end": 99}]});
    let out = opnote_stdin(tmp.path(), &["structure"], &bad.to_string());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let tmp = TempDir::new().unwrap();
    let code = |args: &[&str]| opnote(tmp.path(), args).status.code();
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["extract", "--backend", "oracle"]), Some(2));
    assert_eq!(code(&["eval", "--gold", "g", "--format", "xml"]), Some(2));
    assert_eq!(code(&["extract", "--jobs", "0"]), Some(2));
    assert_eq!(code(&["gen-corpus", "--preset", "nope"]), Some(2));
    assert_eq!(code(&["gen-corpus", "--noise", "1.5"]), Some(2));
    assert_eq!(code(&["split", "0.9", "0.9", "0.1", "--out", "s", "--in", "missing"]), Some(1));
    assert_eq!(code(&["render", "missing.json"]), Some(1));
    assert_eq!(code(&["eval", "--gold", "missing", "--pred", "missing"]), Some(1));
    std::fs::write(tmp.path().join("bad.json"), r#"{"Age": "old"}"#).unwrap();
    let out = opnote(tmp.path(), &["render", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Age"));
    let out = opnote_stdin(tmp.path(), &["extract", "--backend", "llm"], TABLE1_DOC);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_rejects_misaligned_predictions() {
    let tmp = TempDir::new().unwrap();
    ok(&opnote(tmp.path(), &["gen-corpus", "--seed", "2", "-n", "5", "--out", "c"]));
    let jsonl = ok(&opnote(tmp.path(), &["extract", "--in", "c"]));
    let partial: String = jsonl.lines().take(4).map(|l| format!("{l}\n")).collect();
    let out = opnote_stdin(tmp.path(), &["eval", "--gold", "c"], &partial);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("misaligned"));
}

/// Language mode by backend: each of the four settings yields one
/// class-accuracy table.
#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn four_experiment_settings_each_emit_a_table() {
    let stub = StubServer::completion(fixed_completion("{}")).await.unwrap();
    let tmp = TempDir::new().unwrap();
    let config = format!(
        "[pipeline]\nlang_pack = \"ko\"\n\n[pipeline.llm]\nendpoint_url = \"{}\"\napi_key_env = \"OPNOTE_CLI_TEST_KEY\"\nmodel_name = \"gpt-4\"\nprompt = \"ko\"\nfew_shot = \"ko\"\n",
        stub.url()
    );
    std::fs::write(tmp.path().join("opnote.toml"), config).unwrap();
    let dir = tmp.path().to_path_buf();
    let outputs = tokio::task::spawn_blocking(move || {
        let run = |args: &[&str]| {
            let out = Command::new(env!("CARGO_BIN_EXE_opnote"))
                .current_dir(&dir)
                .env("OPNOTE_CLI_TEST_KEY", "sk-cli")
                .args(args)
                .output()
                .unwrap();
            ok(&out)
        };
        run(&["gen-corpus", "--seed", "1", "-n", "6", "--lang-pack", "ko", "--noise", "0", "--out", "mono"]);
        run(&["gen-corpus", "--seed", "1", "-n", "6", "--lang-pack", "ko", "--noise", "1", "--out", "mixed"]);
        let mut tables = Vec::new();
        for corpus in ["mono", "mixed"] {
            for backend in ["rule", "llm"] {
                let preds = format!("{corpus}-{backend}");
                run(&["--config", "opnote.toml", "extract", "--backend", backend, "--in", corpus, "--out", &preds]);
                tables.push(run(&["eval", "--gold", corpus, "--pred", &preds, "--format", "markdown"]));
            }
        }
        tables
    })
    .await
    .unwrap();
    assert_eq!(outputs.len(), 4);
    for md in &outputs {
        assert_eq!(accuracy_rows(md).len(), 23, "{md}");
    }
    assert!(outputs[0].contains("| Average | 100.00 |"));
    assert!(!outputs[1].contains("| Average | 100.00 |"));
    assert_eq!(stub.requests().len(), 12);
}
