//! Deterministic image corruptions and a robustness-evaluation harness
//! for vision-language models behind an OpenAI-compatible endpoint.

pub mod client;
pub mod corruption;
pub mod dataset;
pub mod determinism;
pub mod metrics;
pub mod orchestrator;
pub mod raster;
pub mod report;

pub use corruption::{apply, apply_sample, CorruptionConfig, CorruptionError, Severity};
pub use dataset::{load_manifest, stratified_sample, Dataset, DatasetError, Sample};
pub use determinism::SeedScheme;
pub use metrics::MetricsError;
pub use orchestrator::{EvalConfigKey, OrchestratorError, ResultStore, RunConfig};
pub use raster::Image;

/// Metrics are generic over the float type; these are the `f64`
/// instantiations used by the harness.
pub type FlipStats = metrics::FlipStats<f64>;
pub type MceInputs = metrics::MceInputs<f64>;
