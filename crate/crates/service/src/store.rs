//! Record persistence. [`FileStore`] keeps an append-only JSONL log as the
//! source of truth and mirrors every object as a JSON file for inspection.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use opnote_core::{EvalReport, OperationRecord, Transcript, TranscriptId};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::model::StoredRecord;

pub const WAL_FILE: &str = "wal.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("record {0} not found")]
    NotFound(String),
    #[error("version conflict: expected {expected}, current is {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("record {0} already exists")]
    Exists(String),
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log at line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

pub type StoreResult<T> = std::result::Result<T, StoreError>;

/// Storage used by the HTTP layer.
pub trait Store: Send + Sync {
    /// Stores a transcript under its id; `true` when it was new.
    fn put_transcript(&self, transcript: Transcript) -> StoreResult<(Transcript, bool)>;
    fn transcript(&self, id: &TranscriptId) -> Option<Transcript>;
    fn create_record(&self, record: StoredRecord) -> StoreResult<StoredRecord>;
    /// Writes the next version if `expected_version` is still the latest.
    fn update_record(&self, id: &str, expected_version: u64, record: OperationRecord) -> StoreResult<StoredRecord>;
    fn record(&self, id: &str) -> Option<StoredRecord>;
    fn versions(&self, id: &str) -> Option<Vec<StoredRecord>>;
    /// Latest version of every record, oldest record first.
    fn records(&self) -> Vec<StoredRecord>;
    /// Latest version of the newest record made from a transcript.
    fn latest_for_transcript(&self, id: &TranscriptId) -> Option<StoredRecord>;
    fn put_report(&self, id: &str, report: &EvalReport) -> StoreResult<()>;
    fn report(&self, id: &str) -> Option<EvalReport>;
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum LogEntry {
    Transcript { transcript: Transcript },
    Record { record: Box<StoredRecord> },
    Report { id: String, report: EvalReport },
}

#[derive(Default)]
struct State {
    transcripts: HashMap<TranscriptId, Transcript>,
    records: HashMap<String, Vec<StoredRecord>>,
    order: Vec<String>,
    reports: HashMap<String, EvalReport>,
}

impl State {
    fn apply(&mut self, entry: LogEntry) {
        match entry {
            LogEntry::Transcript { transcript } => {
                self.transcripts.insert(transcript.id.clone(), transcript);
            }
            LogEntry::Record { record } => {
                let versions = self.records.entry(record.record_id.clone()).or_default();
                if versions.is_empty() {
                    self.order.push(record.record_id.clone());
                }
                versions.push(*record);
            }
            LogEntry::Report { id, report } => {
                self.reports.insert(id, report);
            }
        }
    }

    fn latest(&self, id: &str) -> Option<&StoredRecord> {
        self.records.get(id).and_then(|v| v.last())
    }
}

pub struct FileStore {
    root: PathBuf,
    log: Mutex<File>,
    state: RwLock<State>,
}

impl FileStore {
    /// Opens or creates a store under `root`, replaying the log. A torn
    /// final line (from a crash mid-append) is dropped.
    pub fn open(root: impl AsRef<Path>) -> StoreResult<Arc<Self>> {
        let root = root.as_ref().to_path_buf();
        for sub in ["transcripts", "records", "reports"] {
            fs::create_dir_all(root.join(sub))?;
        }
        let path = root.join(WAL_FILE);
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let mut state = State::default();
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&mut file);
        let mut line = String::new();
        let mut line_no = 0;
        let mut pending = Vec::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            if !line.ends_with('\n') {
                tracing::warn!(line = line_no, "dropping torn final log line");
                break;
            }
            let entry = serde_json::from_str::<LogEntry>(line.trim_end())
                .map_err(|e| StoreError::Corrupt { line: line_no, message: e.to_string() })?;
            good_len += n as u64;
            pending.push(entry);
        }
        drop(reader);
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
            file.seek(SeekFrom::End(0))?;
        }
        let store = FileStore { root, log: Mutex::new(file), state: RwLock::new(State::default()) };
        for entry in pending {
            store.mirror(&entry)?;
            state.apply(entry);
        }
        *store.state.write() = state;
        Ok(Arc::new(store))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Appends and syncs one entry, refreshes its mirror file, then makes it
    /// visible. Callers hold the log lock for the whole sequence.
    fn commit(&self, log: &mut File, entry: LogEntry) -> StoreResult<()> {
        let mut line = serde_json::to_string(&entry).map_err(std::io::Error::other)?;
        line.push('\n');
        log.write_all(line.as_bytes())?;
        log.sync_data()?;
        self.mirror(&entry)?;
        self.state.write().apply(entry);
        Ok(())
    }

    fn mirror(&self, entry: &LogEntry) -> StoreResult<()> {
        let (path, body) = match entry {
            LogEntry::Transcript { transcript } => {
                (self.root.join("transcripts").join(format!("{}.json", transcript.id)), to_pretty(transcript)?)
            }
            LogEntry::Record { record } => {
                let dir = self.root.join("records").join(&record.record_id);
                fs::create_dir_all(&dir)?;
                (dir.join(format!("v{:06}.json", record.version)), to_pretty(record)?)
            }
            LogEntry::Report { id, report } => {
                (self.root.join("reports").join(format!("{id}.json")), to_pretty(report)?)
            }
        };
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, body)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn to_pretty<T: Serialize>(value: &T) -> StoreResult<String> {
    Ok(serde_json::to_string_pretty(value).map_err(std::io::Error::other)? + "\n")
}

impl Store for FileStore {
    fn put_transcript(&self, transcript: Transcript) -> StoreResult<(Transcript, bool)> {
        let mut log = self.log.lock();
        if let Some(existing) = self.state.read().transcripts.get(&transcript.id) {
            return Ok((existing.clone(), false));
        }
        self.commit(&mut log, LogEntry::Transcript { transcript: transcript.clone() })?;
        Ok((transcript, true))
    }

    fn transcript(&self, id: &TranscriptId) -> Option<Transcript> {
        self.state.read().transcripts.get(id).cloned()
    }

    fn create_record(&self, record: StoredRecord) -> StoreResult<StoredRecord> {
        let mut log = self.log.lock();
        if self.state.read().records.contains_key(&record.record_id) {
            return Err(StoreError::Exists(record.record_id));
        }
        self.commit(&mut log, LogEntry::Record { record: Box::new(record.clone()) })?;
        Ok(record)
    }

    fn update_record(&self, id: &str, expected_version: u64, record: OperationRecord) -> StoreResult<StoredRecord> {
        let mut log = self.log.lock();
        let next = {
            let state = self.state.read();
            let latest = state.latest(id).ok_or_else(|| StoreError::NotFound(id.to_string()))?;
            if latest.version != expected_version {
                return Err(StoreError::Conflict { expected: expected_version, current: latest.version });
            }
            latest.corrected(record)
        };
        self.commit(&mut log, LogEntry::Record { record: Box::new(next.clone()) })?;
        Ok(next)
    }

    fn record(&self, id: &str) -> Option<StoredRecord> {
        self.state.read().latest(id).cloned()
    }

    fn versions(&self, id: &str) -> Option<Vec<StoredRecord>> {
        self.state.read().records.get(id).cloned()
    }

    fn records(&self) -> Vec<StoredRecord> {
        let state = self.state.read();
        state.order.iter().filter_map(|id| state.latest(id).cloned()).collect()
    }

    fn latest_for_transcript(&self, id: &TranscriptId) -> Option<StoredRecord> {
        let state = self.state.read();
        state.order.iter().rev().filter_map(|r| state.latest(r)).find(|r| &r.transcript_id == id).cloned()
    }

    fn put_report(&self, id: &str, report: &EvalReport) -> StoreResult<()> {
        let mut log = self.log.lock();
        self.commit(&mut log, LogEntry::Report { id: id.to_string(), report: report.clone() })
    }

    fn report(&self, id: &str) -> Option<EvalReport> {
        self.state.read().reports.get(id).cloned()
    }
}
