//! Sweep planning, execution and the resumable result store.

mod run;
mod store;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use run::{resume, run, sampled_dataset, store_dir, RunOptions, RunSummary};
pub use store::{EvalRecord, RecordStatus, ResultStore, SampleInfo, StoreMeta};

use crate::client::{ClientError, EndpointConfig, GenerationParams, PromptMode};
use crate::corruption::{lookup, registry, CorruptionError, Severity};
use crate::dataset::DatasetError;
use crate::determinism::SeedScheme;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("store at {dir} was written by a different config (hash {found}, expected {expected})")]
    ConfigMismatch { dir: PathBuf, expected: String, found: String },
    #[error("no result store at {0}")]
    MissingStore(PathBuf),
    #[error("corrupt store {path}: {message}")]
    CorruptStore { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> OrchestratorError {
    let context = context.into();
    move |source| OrchestratorError::Io { context, source }
}

/// One evaluation condition of the sweep.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalConfigKey {
    Clean,
    NoImage,
    Corrupted { aug_id: String, severity: Option<Severity> },
}

impl EvalConfigKey {
    pub fn corrupted(aug_id: impl Into<String>, severity: Option<Severity>) -> Self {
        EvalConfigKey::Corrupted {
            aug_id: aug_id.into(),
            severity,
        }
    }

    pub fn is_corrupted(&self) -> bool {
        matches!(self, EvalConfigKey::Corrupted { .. })
    }
}

/// `clean`, `no_image`, `<aug>:<severity>` or the bare id of a binary
/// augmentation.
impl fmt::Display for EvalConfigKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalConfigKey::Clean => f.write_str("clean"),
            EvalConfigKey::NoImage => f.write_str("no_image"),
            EvalConfigKey::Corrupted { aug_id, severity: Some(s) } => write!(f, "{aug_id}:{s}"),
            EvalConfigKey::Corrupted { aug_id, severity: None } => f.write_str(aug_id),
        }
    }
}

impl FromStr for EvalConfigKey {
    type Err = CorruptionError;

    /// Validates against the registry.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clean" => return Ok(EvalConfigKey::Clean),
            "no_image" => return Ok(EvalConfigKey::NoImage),
            _ => {}
        }
        let (id, sev) = match s.split_once(':') {
            Some((id, sev)) => (
                id,
                Some(Severity::parse(sev).ok_or_else(|| CorruptionError::InvalidParameter(format!("unknown severity `{sev}`")))?),
            ),
            None => (s, None),
        };
        let spec = lookup(id).ok_or_else(|| CorruptionError::UnknownAugmentation(id.to_string()))?;
        match (spec.is_binary(), sev) {
            (true, Some(_)) => Err(CorruptionError::SeverityNotApplicable(id.to_string())),
            (false, None) => Err(CorruptionError::SeverityMissing(id.to_string())),
            _ => Ok(EvalConfigKey::corrupted(spec.id, sev)),
        }
    }
}

impl Serialize for EvalConfigKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EvalConfigKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Every corrupted key in registry order, severities low to high.
pub fn corrupted_keys() -> Vec<EvalConfigKey> {
    registry()
        .iter()
        .flat_map(|spec| {
            let sevs: Vec<Option<Severity>> = if spec.is_binary() {
                vec![None]
            } else {
                Severity::ALL.iter().copied().map(Some).collect()
            };
            sevs.into_iter().map(move |s| EvalConfigKey::corrupted(spec.id, s))
        })
        .collect()
}

/// Clean, NoImage, then the corrupted keys whose augmentation passes the
/// filter (all of them when `filter` is `None`).
pub fn plan_sweep(filter: Option<&[String]>) -> Vec<EvalConfigKey> {
    let mut plan = vec![EvalConfigKey::Clean, EvalConfigKey::NoImage];
    plan.extend(corrupted_keys().into_iter().filter(|k| match (k, filter) {
        (EvalConfigKey::Corrupted { aug_id, .. }, Some(f)) => f.iter().any(|x| x == aug_id),
        _ => true,
    }));
    plan
}

fn default_fraction() -> f64 {
    0.2
}

/// A sweep description, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Defaults to the manifest file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_name: Option<String>,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub seeds: SeedScheme,
    pub endpoint: EndpointConfig,
    #[serde(default)]
    pub prompt_mode: PromptMode,
    #[serde(default)]
    pub generation: GenerationParams,
    /// Augmentation ids to include; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<Vec<String>>,
    pub out_dir: PathBuf,
    /// Write corrupted inputs under `{out_dir}/cache`.
    #[serde(default)]
    pub cache_images: bool,
}

impl RunConfig {
    /// Parses a config file. Relative `manifest` and `out_dir` paths are
    /// taken relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| OrchestratorError::InvalidConfig(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.manifest = base.join(&cfg.manifest);
        cfg.out_dir = base.join(&cfg.out_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(OrchestratorError::InvalidConfig(format!("fraction must be in (0, 1], got {}", self.fraction)));
        }
        if self.endpoint.max_concurrent == 0 {
            return Err(OrchestratorError::InvalidConfig("endpoint.max_concurrent must be at least 1".into()));
        }
        if let Some(filter) = &self.filter {
            for id in filter {
                if lookup(id).is_none() {
                    return Err(OrchestratorError::InvalidConfig(format!("filter names unknown augmentation `{id}`")));
                }
            }
        }
        Ok(())
    }

    pub fn plan(&self) -> Vec<EvalConfigKey> {
        plan_sweep(self.filter.as_deref())
    }

    /// Hex SHA-256 over everything that can change a record: manifest
    /// digest, seeds, fraction, sorted filter, prompt mode, generation
    /// parameters and model name.
    pub fn config_hash(&self, manifest_digest: &str) -> String {
        let mut filter = self.filter.clone();
        if let Some(f) = &mut filter {
            f.sort();
            f.dedup();
        }
        let doc = serde_json::json!({
            "manifest_digest": manifest_digest,
            "seeds": self.seeds,
            "fraction": self.fraction,
            "filter": filter,
            "prompt_mode": self.prompt_mode,
            "generation": self.generation,
            "model": self.endpoint.model_name,
        });
        hex::encode(Sha256::digest(doc.to_string().as_bytes()))
    }

    /// Generation parameters as sent: sampling runs get the scheme's
    /// generation seed unless one is set explicitly.
    pub fn effective_generation(&self) -> GenerationParams {
        let mut g = self.generation.clone();
        if !g.deterministic && g.seed.is_none() {
            g.seed = Some(self.seeds.generation_seed);
        }
        g
    }
}

/// Directory name for a model id such as `org/model`.
pub fn path_component(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}
