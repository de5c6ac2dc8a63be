//! Append-only JSONL record log plus a `meta.json` header.
//!
//! Layout: `{out}/{model}/{dataset}/records.jsonl` and `meta.json`. A key
//! may appear several times in the log (a failure followed by a retry);
//! the latest line for a `(sample_id, config)` pair is the one that counts.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{io_err, EvalConfigKey, OrchestratorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed,
}

/// One model interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    pub config: EvalConfigKey,
    pub raw_response: String,
    pub extracted: Option<char>,
    pub correct: bool,
    pub unparsable: bool,
    pub latency_ms: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalRecord {
    /// Equality ignoring latency and timestamp.
    pub fn same_outcome(&self, other: &EvalRecord) -> bool {
        self.sample_id == other.sample_id
            && self.config == other.config
            && self.raw_response == other.raw_response
            && self.extracted == other.extracted
            && self.correct == other.correct
            && self.unparsable == other.unparsable
            && self.status == other.status
            && self.error == other.error
    }

    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub id: String,
    pub stratum: String,
    pub answer: char,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub config_hash: String,
    pub model: String,
    pub dataset: String,
    /// Sampled dataset, in seeding order.
    pub samples: Vec<SampleInfo>,
    pub plan: Vec<EvalConfigKey>,
}

#[derive(Debug)]
pub struct ResultStore {
    dir: PathBuf,
    meta: StoreMeta,
    log: Vec<EvalRecord>,
    index: HashMap<(String, EvalConfigKey), usize>,
    writer: Option<File>,
}

const META: &str = "meta.json";
const RECORDS: &str = "records.jsonl";

impl ResultStore {
    /// Opens an existing store for reading.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let dir = dir.as_ref().to_path_buf();
        let meta_path = dir.join(META);
        if !meta_path.is_file() {
            return Err(OrchestratorError::MissingStore(dir));
        }
        let text = fs::read_to_string(&meta_path).map_err(io_err(format!("reading {}", meta_path.display())))?;
        let meta: StoreMeta = serde_json::from_str(&text).map_err(|e| OrchestratorError::CorruptStore {
            path: meta_path.clone(),
            message: e.to_string(),
        })?;
        let mut store = Self {
            dir,
            meta,
            log: Vec::new(),
            index: HashMap::new(),
            writer: None,
        };
        store.load_records()?;
        Ok(store)
    }

    /// Opens the store at `dir` for appending, creating it if needed. An
    /// existing store must carry the same config hash.
    pub fn open_or_create(dir: impl AsRef<Path>, meta: StoreMeta) -> Result<Self, OrchestratorError> {
        let dir = dir.as_ref();
        let mut store = if dir.join(META).is_file() {
            let store = Self::open(dir)?;
            if store.meta.config_hash != meta.config_hash {
                return Err(OrchestratorError::ConfigMismatch {
                    dir: dir.to_path_buf(),
                    expected: meta.config_hash,
                    found: store.meta.config_hash,
                });
            }
            store
        } else {
            fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
            let text = serde_json::to_string_pretty(&meta).expect("meta serialises");
            fs::write(dir.join(META), text + "\n").map_err(io_err("writing meta.json"))?;
            Self {
                dir: dir.to_path_buf(),
                meta,
                log: Vec::new(),
                index: HashMap::new(),
                writer: None,
            }
        };
        let path = store.dir.join(RECORDS);
        drop_partial_tail(&path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(format!("opening {}", path.display())))?;
        store.writer = Some(file);
        Ok(store)
    }

    fn load_records(&mut self) -> Result<(), OrchestratorError> {
        let path = self.dir.join(RECORDS);
        if !path.exists() {
            return Ok(());
        }
        let text = fs::read_to_string(&path).map_err(io_err(format!("reading {}", path.display())))?;
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let complete = text.ends_with('\n');
        for (i, line) in lines.iter().enumerate() {
            match serde_json::from_str::<EvalRecord>(line) {
                Ok(rec) => self.insert(rec),
                // An interrupted write can leave one partial trailing line.
                Err(e) if i + 1 == lines.len() && !complete => {
                    warn!(path = %path.display(), error = %e, "ignoring truncated final record");
                }
                Err(e) => {
                    return Err(OrchestratorError::CorruptStore {
                        path,
                        message: format!("line {}: {e}", i + 1),
                    })
                }
            }
        }
        Ok(())
    }

    fn insert(&mut self, rec: EvalRecord) {
        self.index.insert((rec.sample_id.clone(), rec.config.clone()), self.log.len());
        self.log.push(rec);
    }

    /// Writes one record line and indexes it.
    pub fn append(&mut self, rec: EvalRecord) -> Result<(), OrchestratorError> {
        let writer = self.writer.as_mut().ok_or_else(|| OrchestratorError::Io {
            context: "store opened read-only".into(),
            source: std::io::Error::from(std::io::ErrorKind::PermissionDenied),
        })?;
        let mut line = serde_json::to_string(&rec).expect("record serialises");
        line.push('\n');
        writer.write_all(line.as_bytes()).map_err(io_err("appending record"))?;
        writer.flush().map_err(io_err("flushing records"))?;
        self.insert(rec);
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> &StoreMeta {
        &self.meta
    }

    /// Every line ever written, in log order.
    pub fn log(&self) -> &[EvalRecord] {
        &self.log
    }

    pub fn get(&self, sample_id: &str, key: &EvalConfigKey) -> Option<&EvalRecord> {
        self.index.get(&(sample_id.to_string(), key.clone())).map(|&i| &self.log[i])
    }

    /// Latest record per `(sample, key)`, sorted by sample order then plan order.
    pub fn latest(&self) -> Vec<&EvalRecord> {
        let mut out = Vec::with_capacity(self.index.len());
        for key in &self.meta.plan {
            out.extend(self.records_for(key));
        }
        out
    }

    /// Latest records for one config, in sample order; missing samples are skipped.
    pub fn records_for(&self, key: &EvalConfigKey) -> Vec<&EvalRecord> {
        self.meta.samples.iter().filter_map(|s| self.get(&s.id, key)).collect()
    }

    /// `(sample, key)` pairs with no successful record yet.
    pub fn pending(&self) -> usize {
        let mut n = 0;
        for s in &self.meta.samples {
            for k in &self.meta.plan {
                if !self.get(&s.id, k).is_some_and(EvalRecord::is_ok) {
                    n += 1;
                }
            }
        }
        n
    }

    pub fn failures(&self) -> usize {
        self.index.values().filter(|&&i| !self.log[i].is_ok()).count()
    }
}

/// Cuts an interrupted final line so new appends start on a fresh line.
fn drop_partial_tail(path: &Path) -> Result<(), OrchestratorError> {
    let Ok(bytes) = fs::read(path) else {
        return Ok(());
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    fs::write(path, &bytes[..keep]).map_err(io_err(format!("repairing {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(hash: &str) -> StoreMeta {
        StoreMeta {
            config_hash: hash.into(),
            model: "m".into(),
            dataset: "d".into(),
            samples: vec![
                SampleInfo { id: "a".into(), stratum: "s".into(), answer: 'A' },
                SampleInfo { id: "b".into(), stratum: "s".into(), answer: 'B' },
            ],
            plan: vec![EvalConfigKey::Clean, EvalConfigKey::NoImage],
        }
    }

    fn rec(id: &str, key: EvalConfigKey, status: RecordStatus) -> EvalRecord {
        EvalRecord {
            sample_id: id.into(),
            config: key,
            raw_response: "A".into(),
            extracted: Some('A'),
            correct: id == "a",
            unparsable: false,
            latency_ms: 3,
            timestamp_ms: 1,
            status,
            error: None,
        }
    }

    #[test]
    fn append_reopen_and_latest_wins() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultStore::open_or_create(dir.path(), meta("h")).unwrap();
        assert_eq!(s.pending(), 4);
        s.append(rec("a", EvalConfigKey::Clean, RecordStatus::Failed)).unwrap();
        s.append(rec("a", EvalConfigKey::Clean, RecordStatus::Ok)).unwrap();
        s.append(rec("b", EvalConfigKey::NoImage, RecordStatus::Failed)).unwrap();
        drop(s);
        let s = ResultStore::open(dir.path()).unwrap();
        assert_eq!(s.log().len(), 3);
        assert!(s.get("a", &EvalConfigKey::Clean).unwrap().is_ok());
        assert_eq!(s.failures(), 1);
        assert_eq!(s.pending(), 3);
        assert_eq!(s.records_for(&EvalConfigKey::Clean).len(), 1);
    }

    #[test]
    fn mismatched_hash_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        ResultStore::open_or_create(dir.path(), meta("h1")).unwrap();
        let err = ResultStore::open_or_create(dir.path(), meta("h2")).unwrap_err();
        assert!(matches!(err, OrchestratorError::ConfigMismatch { .. }));
    }

    #[test]
    fn truncated_tail_is_ignored_but_middle_corruption_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultStore::open_or_create(dir.path(), meta("h")).unwrap();
        s.append(rec("a", EvalConfigKey::Clean, RecordStatus::Ok)).unwrap();
        drop(s);
        let path = dir.path().join(RECORDS);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"sample_id\":\"b\",\"conf");
        fs::write(&path, &text).unwrap();
        assert_eq!(ResultStore::open(dir.path()).unwrap().log().len(), 1);
        text.push('\n');
        fs::write(&path, &text).unwrap();
        assert!(matches!(ResultStore::open(dir.path()), Err(OrchestratorError::CorruptStore { .. })));
    }

    #[test]
    fn appending_after_interruption_repairs_the_log() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultStore::open_or_create(dir.path(), meta("h")).unwrap();
        s.append(rec("a", EvalConfigKey::Clean, RecordStatus::Ok)).unwrap();
        drop(s);
        let path = dir.path().join(RECORDS);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"sample_id\":\"b");
        fs::write(&path, &text).unwrap();
        let mut s = ResultStore::open_or_create(dir.path(), meta("h")).unwrap();
        s.append(rec("b", EvalConfigKey::Clean, RecordStatus::Ok)).unwrap();
        drop(s);
        assert_eq!(ResultStore::open(dir.path()).unwrap().log().len(), 2);
    }

    #[test]
    fn missing_store() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ResultStore::open(dir.path().join("x")), Err(OrchestratorError::MissingStore(_))));
    }
}
