//! Paths that default to stdin/stdout, and atomic file output.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use opnote_core::corpus::{read_corpus, MANIFEST_FILE};
use opnote_core::gold::read_gold_jsonl;
use opnote_core::GoldDocument;

fn is_stdio(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p.as_os_str() == "-")
}

pub fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if !is_stdio(path) => {
            std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
        }
        _ => {
            let mut text = String::new();
            std::io::stdin().read_to_string(&mut text).context("cannot read stdin")?;
            Ok(text)
        }
    }
}

/// Writes to a file through a temporary sibling and a rename, or to stdout.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) if !is_stdio(path) => write_atomic(p, content.as_bytes()),
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_data()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn is_corpus_dir(path: &Path) -> bool {
    path.join(MANIFEST_FILE).is_file()
}

/// Gold documents from a corpus directory, a JSONL file, or stdin.
pub fn load_gold(path: Option<&Path>) -> Result<Vec<GoldDocument>> {
    match path {
        Some(p) if p.is_dir() => read_corpus(p).with_context(|| format!("cannot read corpus {}", p.display())),
        _ => {
            let text = read_input(path)?;
            Ok(read_gold_jsonl(text.as_bytes())?)
        }
    }
}
