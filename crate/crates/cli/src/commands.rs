//! One function per subcommand, each a thin shell over a library call.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use opnote_backends::{BackendError, Extractor, ExtractorConfig};
use opnote_core::corpus::{
    generate, read_corpus, read_manifest, split as split_docs, write_corpus, GeneratorProfile, NoiseProfile,
};
use opnote_core::gold::write_gold_jsonl;
use opnote_core::{
    build_scene, emit_report, evaluate, render_svg, validate_record, CoreError, LanguageMode, LanguagePack,
    MappingTable, MatchMode, OperationRecord, Prediction, ReportFormat, StandoffSpan, Structurer, Transcript,
};
use serde::Deserialize;
use serde_json::Value;
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::io::{is_corpus_dir, load_gold, read_input, write_atomic, write_output};
use crate::{Failure, PipelineArgs};

type Outcome = Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<opnote_service::Config, Failure> {
    match path {
        Some(p) => Ok(opnote_service::Config::load(p)?),
        None => Ok(opnote_service::Config::default()),
    }
}

fn pipeline_config(config: Option<&Path>, args: &PipelineArgs) -> Result<ExtractorConfig, Failure> {
    let mut c = load_config(config)?.pipeline;
    if let Some(b) = args.backend {
        c.backend = b;
    }
    if args.normalize {
        c.normalize = true;
    }
    if let Some(p) = &args.lang_pack {
        c.lang_pack = p.clone();
    }
    Ok(c)
}

fn build_extractor(config: ExtractorConfig) -> Result<Extractor, Failure> {
    Extractor::new(config).map_err(|e| match e {
        BackendError::Config(msg) => Failure::Usage(msg),
        other => Failure::Data(other.into()),
    })
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn to_prediction(ex: opnote_backends::Extraction) -> Prediction {
    for w in &ex.warnings {
        tracing::warn!(transcript = %ex.source_id, "{w}");
    }
    Prediction { transcript_id: ex.source_id, spans: ex.spans, record: ex.record }
}

fn pretty<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn extract(
    config: Option<&Path>,
    args: &PipelineArgs,
    input: Option<&Path>,
    out: Option<&Path>,
    mode: LanguageMode,
    jobs: usize,
) -> Outcome {
    let extractor = Arc::new(build_extractor(pipeline_config(config, args)?)?);
    let rt = runtime()?;
    if let Some(dir) = input.filter(|p| p.is_dir()) {
        return rt.block_on(extract_corpus(extractor, dir, out, jobs));
    }
    let text = read_input(input)?;
    let source = input.map_or("stdin".to_string(), |p| p.display().to_string());
    let transcript = Transcript::new(text, mode, source)?;
    let ex = rt.block_on(extractor.extract(&transcript))?;
    write_output(out, &pretty(&to_prediction(ex))?)?;
    Ok(())
}

/// Extracts every document of a corpus, `jobs` at a time. With `out`, each
/// prediction goes to its own file; otherwise JSONL in manifest order.
async fn extract_corpus(extractor: Arc<Extractor>, dir: &Path, out: Option<&Path>, jobs: usize) -> Outcome {
    if !is_corpus_dir(dir) {
        return Err(anyhow!("{} is not a corpus directory", dir.display()).into());
    }
    let manifest = read_manifest(dir)?;
    let docs = read_corpus(dir)?;
    let permits = Arc::new(Semaphore::new(jobs));
    let mut set = JoinSet::new();
    for (i, (doc, entry)) in docs.into_iter().zip(manifest.documents).enumerate() {
        let extractor = extractor.clone();
        let permits = permits.clone();
        let target = out.map(|o| o.join(format!("{}.json", entry.name)));
        set.spawn(async move {
            let _permit = permits.acquire_owned().await.expect("semaphore is never closed");
            let ex = extractor.extract(&doc.transcript).await.with_context(|| entry.name.clone())?;
            let pred = to_prediction(ex);
            if let Some(path) = target {
                write_atomic(&path, pretty(&pred)?.as_bytes())?;
            }
            anyhow::Ok((i, pred))
        });
    }
    let mut preds = Vec::new();
    while let Some(joined) = set.join_next().await {
        preds.push(joined.map_err(|e| anyhow!(e))??);
    }
    if let Some(dir) = out {
        eprintln!("wrote {} predictions to {}", preds.len(), dir.display());
    } else {
        preds.sort_by_key(|(i, _)| *i);
        let mut lines = String::new();
        for (_, p) in &preds {
            lines.push_str(&serde_json::to_string(p).map_err(anyhow::Error::from)?);
            lines.push('\n');
        }
        write_output(None, &lines)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct StructureInput {
    text: String,
    spans: Vec<StandoffSpan>,
}

pub fn structure(
    config: Option<&Path>,
    lang_pack: Option<&str>,
    input: Option<&Path>,
    out: Option<&Path>,
    audit: Option<&Path>,
) -> Outcome {
    let pack_name = match lang_pack {
        Some(p) => p.to_string(),
        None => load_config(config)?.pipeline.lang_pack,
    };
    let pack = LanguagePack::load(&pack_name)?;
    let parsed: StructureInput = serde_json::from_str(&read_input(input)?).context("expected {\"text\", \"spans\"}")?;
    let spans = parsed.spans.into_iter().map(|s| s.resolve(&parsed.text)).collect::<Result<Vec<_>, _>>()?;
    let outcome = Structurer::new(pack, MappingTable::standard()).structure(&spans, &parsed.text)?;
    if let Some(path) = audit {
        write_atomic(path, pretty(&outcome.audit)?.as_bytes())?;
    }
    write_output(out, &(outcome.record.to_json_pretty() + "\n"))?;
    Ok(())
}

pub fn render(input: Option<&Path>, out: Option<&Path>) -> Outcome {
    let value: Value = serde_json::from_str(&read_input(input)?).map_err(CoreError::from)?;
    let value = match value.get("record") {
        Some(r) if r.is_object() => r.clone(),
        _ => value,
    };
    let record = OperationRecord::from_json_value(&value)?;
    let violations = validate_record(&record);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(anyhow!("invalid record: {}", list.join("; ")).into());
    }
    write_output(out, &render_svg(&build_scene(&record)))?;
    Ok(())
}

/// Predictions from a directory of JSON files, a JSONL file, a single JSON
/// object, or stdin.
fn load_predictions(path: Option<&Path>) -> anyhow::Result<Vec<Prediction>> {
    if let Some(dir) = path.filter(|p| p.is_dir()) {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        files.retain(|p| p.extension().is_some_and(|e| e == "json"));
        files.sort();
        return files
            .iter()
            .map(|f| {
                let text = std::fs::read_to_string(f)?;
                serde_json::from_str(&text).with_context(|| format!("{}", f.display()))
            })
            .collect();
    }
    let text = read_input(path)?;
    if let Ok(one) = serde_json::from_str::<Prediction>(&text) {
        return Ok(vec![one]);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("prediction line {}", i + 1)))
        .collect()
}

pub fn eval(gold: &Path, pred: Option<&Path>, format: ReportFormat, mode: MatchMode, out: Option<&Path>) -> Outcome {
    let gold = load_gold(Some(gold))?;
    let preds = load_predictions(pred)?;
    let report = evaluate(&gold, &preds, mode)?;
    let mut text = emit_report(&report, format)?;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    write_output(out, &text)?;
    Ok(())
}

pub struct GenArgs {
    pub seed: u64,
    pub n: Option<usize>,
    pub preset: Option<String>,
    pub profile: Option<PathBuf>,
    pub lang_pack: Option<String>,
    pub noise: Option<f64>,
}

fn resolve_profile(args: GenArgs) -> Result<GeneratorProfile, Failure> {
    let mut profile = match (&args.profile, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let mut p: GeneratorProfile =
                toml::from_str(&text).with_context(|| format!("invalid profile {}", path.display()))?;
            p.seed = args.seed;
            p
        }
        (None, Some(name)) => GeneratorProfile::preset(name, args.seed).map_err(|e| Failure::Usage(e.to_string()))?,
        (None, None) => GeneratorProfile::preset("thyroner", args.seed)?,
    };
    if let Some(n) = args.n {
        profile.n_documents = n;
    }
    if let Some(pack) = args.lang_pack {
        profile.language_pack = pack;
    }
    if let Some(p) = args.noise {
        profile.noise = NoiseProfile::uniform(p);
    }
    profile.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(profile)
}

pub fn gen_corpus(args: GenArgs, out: Option<&Path>) -> Outcome {
    let profile = resolve_profile(args)?;
    let docs = generate(&profile)?;
    match out {
        Some(dir) => {
            write_corpus(dir, &docs, Some(&profile))?;
            eprintln!("wrote {} documents to {}", docs.len(), dir.display());
        }
        None => {
            let mut buf = Vec::new();
            write_gold_jsonl(&mut buf, &docs)?;
            write_output(None, &String::from_utf8(buf).map_err(anyhow::Error::from)?)?;
        }
    }
    Ok(())
}

pub fn split(ratios: (f64, f64, f64), input: Option<&Path>, out: &Path, seed: u64) -> Outcome {
    let profile = match input {
        Some(p) if is_corpus_dir(p) => read_manifest(p)?.profile,
        _ => None,
    };
    let docs = load_gold(input)?;
    let (train, valid, test) = split_docs(docs, ratios, seed).map_err(|e| match e {
        CoreError::Split(msg) => Failure::Usage(format!("invalid split: {msg}")),
        other => Failure::Data(other.into()),
    })?;
    let mut summary = String::new();
    for (name, part) in [("train", &train), ("valid", &valid), ("test", &test)] {
        write_corpus(&out.join(name), part, profile.as_ref())?;
        summary.push_str(&format!("{name}\t{}\n", part.len()));
    }
    write_output(None, &summary)?;
    Ok(())
}

pub fn serve(config: Option<&Path>, listen: Option<SocketAddr>, storage: Option<PathBuf>) -> Outcome {
    let mut config = load_config(config)?;
    if let Some(addr) = listen {
        config.listen = addr;
    }
    if let Some(dir) = storage {
        config.storage_path = dir;
    }
    runtime()?.block_on(async {
        let server = opnote_service::spawn(config).await?;
        eprintln!("listening on {}", server.url());
        server.wait().await?;
        anyhow::Ok(())
    })?;
    Ok(())
}
