use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use tracing::info;

use super::{path_component, EvalConfigKey, EvalRecord, OrchestratorError, RecordStatus, ResultStore, RunConfig, SampleInfo, StoreMeta};
use crate::client::{build_prompt, build_request, extract_answer, ChatBackend};
use crate::corruption::{apply_sample, CorruptionConfig};
use crate::dataset::{load_manifest, stratified_sample, Dataset, Sample};
use crate::raster::Image;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; defaults to `endpoint.max_concurrent`.
    pub workers: Option<usize>,
    /// Stop after this many tasks (used to simulate an interruption).
    pub max_tasks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub store_dir: PathBuf,
    pub samples: usize,
    pub plan_len: usize,
    /// Tasks attempted in this invocation.
    pub executed: usize,
    /// Of those, how many ended as failure records.
    pub failed: usize,
    /// `(sample, key)` pairs still lacking a successful record.
    pub pending: usize,
}

/// Loads the manifest and applies the configured stratified sampling.
pub fn sampled_dataset(cfg: &RunConfig) -> Result<Dataset, OrchestratorError> {
    let mut ds = load_manifest(&cfg.manifest)?;
    if let Some(name) = &cfg.dataset_name {
        ds.name = name.clone();
    }
    Ok(stratified_sample(&ds, cfg.fraction, cfg.seeds.sampling_seed)?)
}

pub fn store_dir(cfg: &RunConfig, dataset: &str) -> PathBuf {
    cfg.out_dir
        .join(path_component(&cfg.endpoint.model_name))
        .join(path_component(dataset))
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Executes every `(sample, key)` pair that lacks a successful record.
/// Creates the store on first use; re-invoking resumes.
pub fn run(cfg: &RunConfig, backend: &dyn ChatBackend, opts: &RunOptions) -> Result<(ResultStore, RunSummary), OrchestratorError> {
    cfg.validate()?;
    let ds = sampled_dataset(cfg)?;
    let plan = cfg.plan();
    let meta = StoreMeta {
        config_hash: cfg.config_hash(&ds.digest),
        model: cfg.endpoint.model_name.clone(),
        dataset: ds.name.clone(),
        samples: ds
            .samples
            .iter()
            .map(|s| SampleInfo {
                id: s.id.clone(),
                stratum: s.stratum.clone(),
                answer: s.answer,
            })
            .collect(),
        plan: plan.clone(),
    };
    let dir = store_dir(cfg, &ds.name);
    let store = ResultStore::open_or_create(&dir, meta)?;

    let mut tasks: Vec<(usize, &EvalConfigKey)> = Vec::new();
    for (i, s) in ds.samples.iter().enumerate() {
        for key in &plan {
            if !store.get(&s.id, key).is_some_and(EvalRecord::is_ok) {
                tasks.push((i, key));
            }
        }
    }
    if let Some(limit) = opts.max_tasks {
        tasks.truncate(limit);
    }
    info!(store = %dir.display(), samples = ds.len(), configs = plan.len(), tasks = tasks.len(), "starting sweep");

    let workers = opts.workers.unwrap_or(cfg.endpoint.max_concurrent).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| OrchestratorError::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let originals: Vec<OnceLock<Result<Vec<Image>, String>>> = ds.samples.iter().map(|_| OnceLock::new()).collect();
    let store = Mutex::new(store);
    let done = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let total = tasks.len();
    let generation = cfg.effective_generation();

    pool.install(|| {
        tasks.par_iter().try_for_each(|&(i, key)| {
            let sample = &ds.samples[i];
            let started = now_ms();
            let outcome = originals[i]
                .get_or_init(|| load_images(sample))
                .clone()
                .and_then(|imgs| inputs_for(cfg, sample, i, key, imgs))
                .and_then(|imgs| {
                    let msg = build_prompt(sample, &imgs, cfg.prompt_mode).map_err(|e| e.to_string())?;
                    let req = build_request(&cfg.endpoint.model_name, msg, &generation);
                    backend.complete(&req).map_err(|e| e.to_string())
                });
            let record = match outcome {
                Ok(c) => {
                    let extracted = extract_answer(&c.text, cfg.prompt_mode, &sample.letters());
                    EvalRecord {
                        sample_id: sample.id.clone(),
                        config: key.clone(),
                        raw_response: c.text,
                        extracted,
                        correct: extracted == Some(sample.answer),
                        unparsable: extracted.is_none(),
                        latency_ms: c.latency_ms,
                        timestamp_ms: started,
                        status: RecordStatus::Ok,
                        error: None,
                    }
                }
                Err(e) => {
                    failed.fetch_add(1, Ordering::Relaxed);
                    EvalRecord {
                        sample_id: sample.id.clone(),
                        config: key.clone(),
                        raw_response: String::new(),
                        extracted: None,
                        correct: false,
                        unparsable: false,
                        latency_ms: now_ms().saturating_sub(started),
                        timestamp_ms: started,
                        status: RecordStatus::Failed,
                        error: Some(e),
                    }
                }
            };
            store.lock().expect("store lock poisoned").append(record)?;
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n % (total / 10).max(1) == 0 || n == total {
                info!("{n}/{total} tasks done");
            }
            Ok::<(), OrchestratorError>(())
        })
    })?;

    let store = store.into_inner().expect("store lock poisoned");
    let summary = RunSummary {
        store_dir: dir,
        samples: ds.len(),
        plan_len: plan.len(),
        executed: total,
        failed: failed.into_inner(),
        pending: store.pending(),
    };
    Ok((store, summary))
}

/// Like [`run`], but the store must already exist.
pub fn resume(cfg: &RunConfig, backend: &dyn ChatBackend, opts: &RunOptions) -> Result<(ResultStore, RunSummary), OrchestratorError> {
    let ds = sampled_dataset(cfg)?;
    let dir = store_dir(cfg, &ds.name);
    if !dir.join("meta.json").is_file() {
        return Err(OrchestratorError::MissingStore(dir));
    }
    run(cfg, backend, opts)
}

fn load_images(sample: &Sample) -> Result<Vec<Image>, String> {
    sample
        .images
        .iter()
        .map(|p| Image::load(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect()
}

/// The images sent for `key`: originals, none, or every image corrupted
/// with the sample's stream (seeded by its index in the sampled dataset).
fn inputs_for(cfg: &RunConfig, sample: &Sample, index: usize, key: &EvalConfigKey, originals: Vec<Image>) -> Result<Vec<Image>, String> {
    match key {
        EvalConfigKey::Clean => Ok(originals),
        EvalConfigKey::NoImage => Ok(Vec::new()),
        EvalConfigKey::Corrupted { aug_id, severity } => {
            let cc = CorruptionConfig::new(aug_id.clone(), *severity, index as u64);
            let out = apply_sample(&originals, &cc, &cfg.seeds).map_err(|e| e.to_string())?;
            if cfg.cache_images {
                let sev = severity.map_or("binary", |s| s.as_str());
                let base = cfg.out_dir.join("cache").join(aug_id).join(sev);
                for (k, img) in out.iter().enumerate() {
                    let stem = path_component(&sample.id);
                    let name = if k == 0 { format!("{stem}.png") } else { format!("{stem}_{k}.png") };
                    img.save_png(base.join(name)).map_err(|e| e.to_string())?;
                }
            }
            Ok(out)
        }
    }
}
