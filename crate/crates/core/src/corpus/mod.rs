//! Synthetic annotated corpora and dataset splits.

mod generate;
pub mod markup;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use generate::{check_generator_spec, generate, generate_one};

use crate::error::{CoreError, Result};
use crate::gold::GoldDocument;
use crate::record::{Field, OperationRecord};
use crate::span::StandoffSpan;
use crate::transcript::{LanguageMode, Transcript, TranscriptId};

/// Probability that each failure mode is injected into a document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseProfile {
    #[serde(default)]
    pub transliteration_mix: f64,
    #[serde(default)]
    pub descriptor_grouping_loss: f64,
    #[serde(default)]
    pub negated_dissection: f64,
    #[serde(default)]
    pub synonym_swap: f64,
}

impl NoiseProfile {
    pub fn uniform(p: f64) -> Self {
        Self { transliteration_mix: p, descriptor_grouping_loss: p, negated_dissection: p, synonym_swap: p }
    }
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorProfile {
    pub seed: u64,
    pub n_documents: usize,
    pub language_pack: String,
    #[serde(default)]
    pub noise: NoiseProfile,
    /// Inclusion probability per record key; keys not listed use `default_coverage`.
    #[serde(default)]
    pub class_coverage: BTreeMap<String, f64>,
    #[serde(default = "one")]
    pub default_coverage: f64,
    /// Inclusion probability of each note-only tag (FZS, LNT, RNS, ETC).
    #[serde(default = "half")]
    pub note_coverage: f64,
}

impl GeneratorProfile {
    /// Everything covered, no noise.
    pub fn full(seed: u64, n_documents: usize) -> Self {
        Self {
            seed,
            n_documents,
            language_pack: "en".into(),
            noise: NoiseProfile::default(),
            class_coverage: BTreeMap::new(),
            default_coverage: 1.0,
            note_coverage: 1.0,
        }
    }

    /// Named presets: `thyroner` (741 annotated narratives), `thyrotranscript`
    /// (65 evaluation cases), `full`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let base = |n| Self {
            seed,
            n_documents: n,
            language_pack: "en".into(),
            noise: NoiseProfile::uniform(0.2),
            class_coverage: BTreeMap::new(),
            default_coverage: 0.85,
            note_coverage: 0.5,
        };
        match name {
            "thyroner" => Ok(base(741)),
            "thyrotranscript" => Ok(base(65)),
            "full" => Ok(Self::full(seed, 741)),
            other => {
                Err(CoreError::Profile(format!("unknown preset {other:?} (have: thyroner, thyrotranscript, full)")))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_documents == 0 {
            return Err(CoreError::Profile("n_documents must be positive".into()));
        }
        let check = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(CoreError::Profile(format!("{name} = {p} is not a probability")))
            }
        };
        check("default_coverage", self.default_coverage)?;
        check("note_coverage", self.note_coverage)?;
        check("noise.transliteration_mix", self.noise.transliteration_mix)?;
        check("noise.descriptor_grouping_loss", self.noise.descriptor_grouping_loss)?;
        check("noise.negated_dissection", self.noise.negated_dissection)?;
        check("noise.synonym_swap", self.noise.synonym_swap)?;
        for (key, p) in &self.class_coverage {
            if Field::from_key(key).is_none() {
                return Err(CoreError::Profile(format!("unknown record class {key:?} in class_coverage")));
            }
            check(key, *p)?;
        }
        Ok(())
    }

    pub fn coverage(&self, field: Field) -> f64 {
        self.class_coverage
            .iter()
            .find(|(k, _)| Field::from_key(k) == Some(field))
            .map_or(self.default_coverage, |(_, p)| *p)
    }
}

/// Split sizes: floor(n * train), floor(n * valid), remainder.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = ratios;
    for r in [a, b, c] {
        if !(0.0..=1.0).contains(&r) {
            return Err(CoreError::Split(format!("ratio {r} outside [0, 1]")));
        }
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(CoreError::Split(format!("ratios sum to {}, not 1", a + b + c)));
    }
    if n < 3 {
        return Err(CoreError::Split(format!("need at least 3 documents, got {n}")));
    }
    let train = ((n as f64) * a + 1e-9).floor() as usize;
    let valid = (((n as f64) * b + 1e-9).floor() as usize).min(n - train);
    Ok((train, valid, n - train - valid))
}

/// Deterministically shuffles and partitions `items`.
pub fn split<T>(items: Vec<T>, ratios: (f64, f64, f64), seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (n_train, n_valid, _) = split_sizes(items.len(), ratios)?;
    let mut items = items;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let test = items.split_off(n_train + n_valid);
    let valid = items.split_off(n_train);
    Ok((items, valid, test))
}

/// One document entry in a corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub transcript_id: TranscriptId,
    pub language_mode: LanguageMode,
    pub source: String,
    pub created_at: chrono::DateTime<chrono::Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<GeneratorProfile>,
    pub documents: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
const SCHEMA_VERSION: u32 = 1;

pub fn document_name(i: usize) -> String {
    format!("doc-{i:04}")
}

/// Writes `transcripts/`, `gold/`, `records/` and `manifest.json` under `dir`.
pub fn write_corpus(dir: &Path, docs: &[GoldDocument], profile: Option<&GeneratorProfile>) -> Result<()> {
    for sub in ["transcripts", "gold", "records"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let mut entries = Vec::with_capacity(docs.len());
    for (i, doc) in docs.iter().enumerate() {
        let name = document_name(i);
        fs::write(dir.join("transcripts").join(format!("{name}.txt")), &doc.transcript.text)?;
        let mut spans = String::new();
        for s in &doc.gold_spans {
            spans.push_str(&serde_json::to_string(&s.standoff())?);
            spans.push('\n');
        }
        fs::write(dir.join("gold").join(format!("{name}.jsonl")), spans)?;
        fs::write(dir.join("records").join(format!("{name}.json")), doc.gold_record.to_json_pretty() + "\n")?;
        entries.push(ManifestEntry {
            name,
            transcript_id: doc.transcript.id.clone(),
            language_mode: doc.transcript.language_mode,
            source: doc.transcript.source.clone(),
            created_at: doc.transcript.created_at,
        });
    }
    let manifest = CorpusManifest { schema_version: SCHEMA_VERSION, profile: profile.cloned(), documents: entries };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text =
        fs::read_to_string(&path).map_err(|e| CoreError::Corpus(format!("cannot read {}: {e}", path.display())))?;
    let manifest: CorpusManifest = serde_json::from_str(&text)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(CoreError::Corpus(format!("unsupported manifest schema {}", manifest.schema_version)));
    }
    Ok(manifest)
}

/// Reads a corpus written by [`write_corpus`].
pub fn read_corpus(dir: &Path) -> Result<Vec<GoldDocument>> {
    let manifest = read_manifest(dir)?;
    let mut docs = Vec::with_capacity(manifest.documents.len());
    for entry in &manifest.documents {
        let ctx = |e: std::io::Error| CoreError::Corpus(format!("{}: {e}", entry.name));
        let text = fs::read_to_string(dir.join("transcripts").join(format!("{}.txt", entry.name))).map_err(ctx)?;
        let transcript = Transcript::with_id(
            entry.transcript_id.clone(),
            text,
            entry.language_mode,
            entry.source.clone(),
            entry.created_at,
        )?;
        let spans_text = fs::read_to_string(dir.join("gold").join(format!("{}.jsonl", entry.name))).map_err(ctx)?;
        let mut spans = Vec::new();
        for line in spans_text.lines().filter(|l| !l.trim().is_empty()) {
            let s: StandoffSpan = serde_json::from_str(line)?;
            spans.push(s.resolve(&transcript.text)?);
        }
        let record_text = fs::read_to_string(dir.join("records").join(format!("{}.json", entry.name))).map_err(ctx)?;
        let record = OperationRecord::from_json(&record_text)?;
        let doc = GoldDocument { transcript, gold_spans: spans, gold_record: record };
        doc.validate()?;
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_follow_floor_rule() {
        assert_eq!(split_sizes(741, (0.8, 0.1, 0.1)).unwrap(), (592, 74, 75));
        assert_eq!(split_sizes(10, (0.8, 0.1, 0.1)).unwrap(), (8, 1, 1));
        assert_eq!(split_sizes(10, (1.0, 0.0, 0.0)).unwrap(), (10, 0, 0));
        assert!(split_sizes(2, (0.8, 0.1, 0.1)).is_err());
        assert!(split_sizes(10, (0.8, 0.1, 0.2)).is_err());
    }

    #[test]
    fn split_partitions_deterministically() {
        let items: Vec<usize> = (0..741).collect();
        let (a, b, c) = split(items.clone(), (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (592, 74, 75));
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort();
        assert_eq!(all, items);
        assert_eq!(split(items, (0.8, 0.1, 0.1), 7).unwrap().0, a);
    }

    #[test]
    fn profile_validation() {
        let mut p = GeneratorProfile::full(1, 10);
        p.validate().unwrap();
        p.class_coverage.insert("Gender".into(), 0.5);
        p.validate().unwrap();
        assert_eq!(p.coverage(Field::Sex), 0.5);
        p.class_coverage.insert("Shoe size".into(), 0.5);
        assert!(p.validate().is_err());
        let mut q = GeneratorProfile::full(1, 10);
        q.noise.synonym_swap = 1.5;
        assert!(q.validate().is_err());
        assert!(GeneratorProfile::preset("thyroner", 0).unwrap().n_documents == 741);
        assert!(GeneratorProfile::preset("thyrotranscript", 0).unwrap().n_documents == 65);
    }

    #[test]
    fn corpus_dir_round_trip() {
        let docs = generate(&GeneratorProfile::preset("thyrotranscript", 3).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &docs, None).unwrap();
        assert_eq!(read_corpus(dir.path()).unwrap(), docs);
    }
}
