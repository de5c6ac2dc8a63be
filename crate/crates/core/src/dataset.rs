//! Evaluation manifests and stratified subsampling.
//!
//! A manifest is UTF-8 JSON Lines, one sample per line:
//!
//! ```json
//! {"id":"q1","images":["img/q1.png"],"question":"...","options":[{"letter":"A","text":"..."}],"answer":"A","stratum":"ocr"}
//! ```
//!
//! Image paths are resolved relative to the manifest's directory.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::determinism::make_rng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line} (sample `{id}`): {message}")]
    ValidationError { line: usize, id: String, message: String },
    #[error("sampling fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub letter: char,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    #[serde(default)]
    pub images: Vec<PathBuf>,
    pub question: String,
    pub options: Vec<AnswerOption>,
    pub answer: char,
    pub stratum: String,
}

impl Sample {
    pub fn letters(&self) -> Vec<char> {
        self.options.iter().map(|o| o.letter).collect()
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if !(2..=10).contains(&self.options.len()) {
            return Err(format!("{} options; expected 2 to 10", self.options.len()));
        }
        let mut seen = HashSet::new();
        for o in &self.options {
            if !('A'..='J').contains(&o.letter) {
                return Err(format!("option letter `{}` outside A-J", o.letter));
            }
            if !seen.insert(o.letter) {
                return Err(format!("option letter `{}` repeated", o.letter));
            }
        }
        if !seen.contains(&self.answer) {
            return Err(format!("answer `{}` is not one of the option letters", self.answer));
        }
        if self.stratum.trim().is_empty() {
            return Err("empty stratum".into());
        }
        Ok(())
    }
}

/// Returns the sample with its image list emptied (the no-image baseline).
pub fn strip_image(sample: &Sample) -> Sample {
    Sample {
        images: Vec::new(),
        ..sample.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<Sample>,
    /// Hex SHA-256 of the manifest bytes; empty for in-memory datasets.
    pub digest: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Self {
        Self {
            name: name.into(),
            samples,
            digest: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Reads and validates a manifest. The dataset is named after the file
/// stem; image paths become absolute (joined onto the manifest directory).
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut ds = parse_manifest(&bytes, base, &name, true)?;
    ds.digest = hex::encode(Sha256::digest(&bytes));
    Ok(ds)
}

/// Parses manifest bytes. With `check_images`, every image path must exist.
pub fn parse_manifest(bytes: &[u8], base: &Path, name: &str, check_images: bool) -> Result<Dataset, DatasetError> {
    let text = std::str::from_utf8(bytes).map_err(|e| DatasetError::ParseError {
        line: 0,
        message: format!("manifest is not UTF-8: {e}"),
    })?;
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut sample: Sample = serde_json::from_str(raw).map_err(|e| DatasetError::ParseError {
            line,
            message: e.to_string(),
        })?;
        let invalid = |message: String| DatasetError::ValidationError {
            line,
            id: sample.id.clone(),
            message,
        };
        sample.validate().map_err(invalid)?;
        if !ids.insert(sample.id.clone()) {
            return Err(invalid("duplicate id".into()));
        }
        for img in &mut sample.images {
            *img = base.join(&*img);
            if check_images && !img.is_file() {
                return Err(invalid(format!("image {} not found", img.display())));
            }
        }
        samples.push(sample);
    }
    Ok(Dataset::new(name, samples))
}

/// `ceil(n * fraction)`, snapping products within 1e-9 of an integer so
/// that e.g. `10 * 0.2` counts as exactly 2.
pub fn stratum_quota(n: usize, fraction: f64) -> usize {
    let x = n as f64 * fraction;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as usize).min(n)
}

/// Keeps `ceil(n_s * fraction)` samples of every stratum.
///
/// Strata are visited in order of first appearance; one stream from
/// `make_rng(seed)` drives a Fisher–Yates shuffle of each stratum's
/// indices in turn, and the first `k` shuffled indices are kept. The
/// result preserves manifest order.
pub fn stratified_sample(dataset: &Dataset, fraction: f64, seed: u32) -> Result<Dataset, DatasetError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        members
            .entry(s.stratum.as_str())
            .or_insert_with(|| {
                order.push(s.stratum.as_str());
                Vec::new()
            })
            .push(i);
    }
    let mut rng = make_rng(seed);
    let mut keep = vec![false; dataset.samples.len()];
    for stratum in order {
        let mut idx = members.remove(stratum).unwrap_or_default();
        for i in (1..idx.len()).rev() {
            let j = rng.next_below(i as u64 + 1) as usize;
            idx.swap(i, j);
        }
        for &i in idx.iter().take(stratum_quota(idx.len(), fraction)) {
            keep[i] = true;
        }
    }
    let samples = dataset
        .samples
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(s, _)| s.clone())
        .collect();
    Ok(Dataset {
        name: dataset.name.clone(),
        samples,
        digest: dataset.digest.clone(),
    })
}
