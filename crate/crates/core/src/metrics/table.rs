//! Accuracy tables (from a result store or a JSON document) and the
//! per-model and cross-model metrics built on them.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    accuracy, benign_at_low, category_sensitivity, flip_stats, mce, monotonicity_violation, mrce, rce, scaling_slope,
    severe_failure_rate, spearman_rho, tail_risk_share, tier, visual_gain, worst_case, FlipStats, MceInputs, MetricsError,
    SampleOutcome, Tier, TierCounts,
};
use crate::corruption::{registry, Severity, SPATIAL_RESAMPLING};
use crate::orchestrator::{corrupted_keys, EvalConfigKey, ResultStore};

/// Accuracies of one model on one dataset, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAccuracies {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Parameter count in billions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_b: Option<f64>,
    pub acc_clean: f64,
    pub acc_noimage: f64,
    /// Corrupted accuracies keyed by config string (`fog:mid`, `flip_v`).
    #[serde(default)]
    pub acc: BTreeMap<String, f64>,
    /// Unparsable responses per config (store-derived tables only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub unparsable: BTreeMap<String, usize>,
    /// Set when some configs are missing or incomplete on purpose.
    #[serde(default)]
    pub partial: bool,
}

/// The plain accuracy-table document accepted by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyDocument {
    pub dataset: String,
    pub models: Vec<ModelAccuracies>,
}

/// Failure and completeness counts seen while reading a store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StoreStats {
    pub failed: usize,
    pub missing: usize,
    pub unparsable: usize,
}

impl ModelAccuracies {
    /// Builds the table from the latest records. Failed or missing records
    /// are an error unless `allow_partial`, in which case accuracy is
    /// computed over the successful records only and the table is marked
    /// partial.
    pub fn from_store(store: &ResultStore, allow_partial: bool) -> Result<(Self, StoreStats), MetricsError> {
        let meta = store.meta();
        let want = meta.samples.len();
        let mut stats = StoreStats::default();
        let mut table = ModelAccuracies {
            name: meta.model.clone(),
            family: None,
            params_b: None,
            acc_clean: f64::NAN,
            acc_noimage: f64::NAN,
            acc: BTreeMap::new(),
            unparsable: BTreeMap::new(),
            partial: false,
        };
        for key in &meta.plan {
            let recs = store.records_for(key);
            let failed = recs.iter().filter(|r| !r.is_ok()).count();
            let ok: Vec<_> = recs.into_iter().filter(|r| r.is_ok()).collect();
            stats.failed += failed;
            stats.missing += want - ok.len() - failed;
            if failed > 0 && !allow_partial {
                return Err(MetricsError::UnresolvedFailures {
                    config: key.to_string(),
                    count: failed,
                });
            }
            if ok.len() < want {
                if !allow_partial {
                    return Err(MetricsError::Incomplete {
                        config: key.to_string(),
                        have: ok.len(),
                        want,
                    });
                }
                table.partial = true;
            }
            if ok.is_empty() {
                if key.is_corrupted() {
                    continue;
                }
                return Err(MetricsError::EmptyConfig(key.to_string()));
            }
            let correct = ok.iter().filter(|r| r.correct).count();
            let unparsable = ok.iter().filter(|r| r.unparsable).count();
            stats.unparsable += unparsable;
            let a = accuracy(correct, ok.len()).map_err(|_| MetricsError::EmptyConfig(key.to_string()))?;
            match key {
                EvalConfigKey::Clean => table.acc_clean = a,
                EvalConfigKey::NoImage => table.acc_noimage = a,
                k => {
                    table.acc.insert(k.to_string(), a);
                }
            }
            if unparsable > 0 {
                table.unparsable.insert(key.to_string(), unparsable);
            }
        }
        if table.acc_clean.is_nan() {
            return Err(MetricsError::MissingConfig("clean".into()));
        }
        if table.acc_noimage.is_nan() {
            return Err(MetricsError::MissingConfig("no_image".into()));
        }
        if table.acc.len() < corrupted_keys().len() {
            table.partial = true;
        }
        Ok((table, stats))
    }

    /// Drops `acc_clean - acc` for the corrupted keys present, in plan order.
    pub fn drops(&self) -> Vec<(EvalConfigKey, f64)> {
        corrupted_keys()
            .into_iter()
            .filter_map(|k| self.acc.get(&k.to_string()).map(|a| (k, self.acc_clean - a)))
            .collect()
    }

    pub fn mce_inputs(&self) -> MceInputs<f64> {
        MceInputs::from_accuracies(|k| self.acc.get(k).copied())
    }

    fn check_complete(&self, allow_partial: bool) -> Result<(), MetricsError> {
        if allow_partial {
            return Ok(());
        }
        for k in corrupted_keys() {
            let s = k.to_string();
            if !self.acc.contains_key(&s) {
                return Err(MetricsError::MissingConfig(format!("{}: {s}", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityGroup {
    Low,
    Mid,
    High,
    Binary,
}

impl SeverityGroup {
    pub const ALL: [SeverityGroup; 4] = [SeverityGroup::Low, SeverityGroup::Mid, SeverityGroup::High, SeverityGroup::Binary];

    pub fn of(key: &EvalConfigKey) -> Option<Self> {
        match key {
            EvalConfigKey::Corrupted { severity: Some(Severity::Low), .. } => Some(SeverityGroup::Low),
            EvalConfigKey::Corrupted { severity: Some(Severity::Mid), .. } => Some(SeverityGroup::Mid),
            EvalConfigKey::Corrupted { severity: Some(Severity::High), .. } => Some(SeverityGroup::High),
            EvalConfigKey::Corrupted { severity: None, .. } => Some(SeverityGroup::Binary),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SeverityGroup::Low => "Low",
            SeverityGroup::Mid => "Mid",
            SeverityGroup::High => "High",
            SeverityGroup::Binary => "Binary",
        }
    }
}

/// Drops of one augmentation across the three severities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchRow {
    pub aug_id: String,
    pub drops: [f64; 3],
    pub violation: bool,
    pub rho: f64,
}

/// Everything derived from one model's accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMetrics {
    pub name: String,
    pub family: Option<String>,
    pub params_b: Option<f64>,
    pub acc_clean: f64,
    pub acc_noimage: f64,
    pub vg: f64,
    pub worst_case: Option<(String, f64)>,
    pub severe_fail: f64,
    pub worst_at_low: Option<(String, f64)>,
    pub benign_at_low: Option<f64>,
    /// `None` when VG is not positive.
    pub mrce: Option<f64>,
    pub mean_drop: f64,
    /// Mean RCE per severity group (empty when VG is not positive).
    pub rce_by_group: BTreeMap<SeverityGroup, f64>,
    pub tiers: BTreeMap<SeverityGroup, TierCounts>,
    pub mismatch: Vec<MismatchRow>,
    /// `(config, delta)` in plan order.
    pub drops: Vec<(String, f64)>,
    pub unparsable: usize,
    pub partial: bool,
}

pub fn model_metrics(m: &ModelAccuracies, allow_partial: bool) -> Result<ModelMetrics, MetricsError> {
    m.check_complete(allow_partial)?;
    let drops = m.drops();
    if drops.is_empty() {
        return Err(MetricsError::EmptyConfig(format!("{}: no corrupted configs", m.name)));
    }
    let vg = visual_gain(m.acc_clean, m.acc_noimage);
    let values: Vec<f64> = drops.iter().map(|d| d.1).collect();
    let named: Vec<(String, f64)> = drops.iter().map(|(k, d)| (k.to_string(), *d)).collect();
    let low: Vec<(String, f64)> = drops
        .iter()
        .filter(|(k, _)| SeverityGroup::of(k) == Some(SeverityGroup::Low))
        .map(|(k, d)| (k.to_string(), *d))
        .collect();
    let low_values: Vec<f64> = low.iter().map(|d| d.1).collect();

    let mut tiers = BTreeMap::new();
    let mut rce_groups: BTreeMap<SeverityGroup, Vec<f64>> = BTreeMap::new();
    for g in SeverityGroup::ALL {
        let group: Vec<f64> = drops.iter().filter(|(k, _)| SeverityGroup::of(k) == Some(g)).map(|d| d.1).collect();
        if group.is_empty() {
            continue;
        }
        tiers.insert(g, TierCounts::of(&group));
        if vg > 0.0 {
            let r: Vec<f64> = group.iter().map(|&d| d / vg * 100.0).collect();
            rce_groups.insert(g, r);
        }
    }
    let rce_by_group = rce_groups.into_iter().map(|(g, v)| (g, mrce(&v).expect("non-empty group"))).collect();
    let mrce = if vg > 0.0 {
        let r: Result<Vec<f64>, _> = values.iter().map(|&d| rce(d, vg)).collect();
        Some(mrce(&r?)?)
    } else {
        tracing::warn!(model = %m.name, vg, "visual gain is not positive; RCE undefined");
        None
    };

    let lookup: HashMap<&str, f64> = named.iter().map(|(k, d)| (k.as_str(), *d)).collect();
    let mut mismatch = Vec::new();
    for spec in registry().iter().filter(|s| !s.is_binary()) {
        let get = |s: Severity| lookup.get(format!("{}:{s}", spec.id).as_str()).copied();
        if let (Some(l), Some(md), Some(h)) = (get(Severity::Low), get(Severity::Mid), get(Severity::High)) {
            mismatch.push(MismatchRow {
                aug_id: spec.id.to_string(),
                drops: [l, md, h],
                violation: monotonicity_violation(l, md, h),
                rho: spearman_rho(l, md, h),
            });
        }
    }

    Ok(ModelMetrics {
        name: m.name.clone(),
        family: m.family.clone(),
        params_b: m.params_b,
        acc_clean: m.acc_clean,
        acc_noimage: m.acc_noimage,
        vg,
        worst_case: worst_case(&named),
        severe_fail: severe_failure_rate(&values, m.acc_clean)?,
        worst_at_low: worst_case(&low),
        benign_at_low: benign_at_low(&low_values).ok(),
        mrce,
        mean_drop: super::mean(&values).expect("non-empty"),
        rce_by_group,
        tiers,
        mismatch,
        drops: named,
        unparsable: m.unparsable.values().sum(),
        partial: m.partial || drops.len() < corrupted_keys().len(),
    })
}

/// The model with the lowest clean accuracy (first on ties), or the one
/// named by `override_name`.
pub fn reference_model<'a>(models: &'a [ModelAccuracies], override_name: Option<&str>) -> Result<&'a ModelAccuracies, MetricsError> {
    if let Some(name) = override_name {
        return models.iter().find(|m| m.name == name).ok_or_else(|| MetricsError::UnknownModel(name.to_string()));
    }
    let mut best: Option<&ModelAccuracies> = None;
    for m in models {
        if best.is_none_or(|b| m.acc_clean < b.acc_clean) {
            best = Some(m);
        }
    }
    best.ok_or(MetricsError::NoModels)
}

/// mCE of every model against `reference`.
pub fn mce_table(models: &[ModelAccuracies], reference: &ModelAccuracies) -> Result<Vec<(String, f64)>, MetricsError> {
    let r = reference.mce_inputs();
    models.iter().map(|m| Ok((m.name.clone(), mce(&m.mce_inputs(), &r)?))).collect()
}

/// Tier counts summed over models, per severity group.
pub fn tier_distribution(metrics: &[ModelMetrics]) -> BTreeMap<SeverityGroup, TierCounts> {
    let mut out: BTreeMap<SeverityGroup, TierCounts> = BTreeMap::new();
    for m in metrics {
        for (g, c) in &m.tiers {
            out.entry(*g).or_default().add(c);
        }
    }
    out
}

/// Per binary augmentation: the drop of each model (`None` if missing)
/// and the mean over the models that have it.
pub fn binary_drop_table(metrics: &[ModelMetrics]) -> Vec<(String, Vec<Option<f64>>, Option<f64>)> {
    registry()
        .iter()
        .filter(|s| s.is_binary())
        .map(|s| {
            let per: Vec<Option<f64>> = metrics
                .iter()
                .map(|m| m.drops.iter().find(|(k, _)| k == s.id).map(|d| d.1))
                .collect();
            let present: Vec<f64> = per.iter().flatten().copied().collect();
            (s.id.to_string(), per, super::mean(&present))
        })
        .collect()
}

/// Mean drop across models per config, the `k` largest per severity group.
pub fn top_k_by_severity(metrics: &[ModelMetrics], k: usize) -> BTreeMap<SeverityGroup, Vec<(String, f64)>> {
    let mut out = BTreeMap::new();
    for g in SeverityGroup::ALL {
        let mut rows: Vec<(String, f64)> = corrupted_keys()
            .into_iter()
            .filter(|key| SeverityGroup::of(key) == Some(g))
            .filter_map(|key| {
                let s = key.to_string();
                let v: Vec<f64> = metrics
                    .iter()
                    .filter_map(|m| m.drops.iter().find(|(c, _)| *c == s).map(|d| d.1))
                    .collect();
                super::mean(&v).map(|m| (s, m))
            })
            .collect();
        // Stable: equal means keep plan order.
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        rows.truncate(k);
        if !rows.is_empty() {
            out.insert(g, rows);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub family: String,
    pub slope: f64,
    pub r2: f64,
    pub n: usize,
}

/// Slope of mean drop against log10 parameter count, per family. Models
/// without a family or parameter count are skipped; families with fewer
/// than two distinct sizes are omitted.
pub fn scaling_table(metrics: &[ModelMetrics]) -> Vec<ScalingRow> {
    let mut families: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for m in metrics {
        let (Some(f), Some(p)) = (&m.family, m.params_b) else { continue };
        match families.iter_mut().find(|(name, _)| name == f) {
            Some((_, pts)) => pts.push((p, m.mean_drop)),
            None => families.push((f.clone(), vec![(p, m.mean_drop)])),
        }
    }
    families
        .into_iter()
        .filter_map(|(family, pts)| {
            scaling_slope(&pts).ok().map(|(slope, r2)| ScalingRow {
                family,
                slope,
                r2,
                n: pts.len(),
            })
        })
        .collect()
}

/// Percent of catastrophic (model, config) cases caused by spatial or
/// resampling augmentations.
pub fn tail_risk_from_tables(metrics: &[ModelMetrics]) -> Option<f64> {
    let mut augs = Vec::new();
    for m in metrics {
        for (k, d) in &m.drops {
            if tier(*d) == Tier::Catastrophic {
                augs.push(k.split(':').next().unwrap_or(k).to_string());
            }
        }
    }
    let refs: Vec<&str> = augs.iter().map(String::as_str).collect();
    tail_risk_share(&refs, &SPATIAL_RESAMPLING)
}

/// `100 * (clean_correct - corrupted_correct) / n`: the drop over one
/// shared record set, formed exactly like [`FlipStats::net`].
pub fn drop_from_counts(clean_correct: usize, corrupted_correct: usize, n: usize) -> f64 {
    100.0 * (clean_correct as f64 - corrupted_correct as f64) / n as f64
}

/// Flip statistics for every corrupted config of the plan, over the
/// samples with a successful record on both sides.
pub fn flip_stats_from_store(store: &ResultStore) -> Vec<(String, FlipStats)> {
    let meta = store.meta();
    let mut out = Vec::new();
    for key in meta.plan.iter().filter(|k| k.is_corrupted()) {
        let mut clean = Vec::new();
        let mut corr = Vec::new();
        for s in &meta.samples {
            if let (Some(c), Some(k)) = (store.get(&s.id, &EvalConfigKey::Clean), store.get(&s.id, key)) {
                if c.is_ok() && k.is_ok() {
                    clean.push((s.id.as_str(), c.correct));
                    corr.push((s.id.as_str(), k.correct));
                }
            }
        }
        if let Ok(f) = flip_stats(&clean, &corr) {
            out.push((key.to_string(), f));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryDrop {
    pub stratum: String,
    pub drop: f64,
}

/// Mean drop per stratum over the corrupted configs of the plan. Samples
/// lacking a successful clean record or any corrupted record are skipped.
pub fn category_sensitivity_from_store(store: &ResultStore) -> Vec<CategoryDrop> {
    let meta = store.meta();
    let keys: Vec<&EvalConfigKey> = meta.plan.iter().filter(|k| k.is_corrupted()).collect();
    let mut strata: Vec<String> = Vec::new();
    let mut outcomes = Vec::new();
    for s in &meta.samples {
        if !strata.contains(&s.stratum) {
            strata.push(s.stratum.clone());
        }
        let Some(clean) = store.get(&s.id, &EvalConfigKey::Clean).filter(|r| r.is_ok()) else {
            continue;
        };
        let corrupted: Option<Vec<bool>> = keys
            .iter()
            .map(|k| store.get(&s.id, k).filter(|r| r.is_ok()).map(|r| r.correct))
            .collect();
        if let Some(corrupted) = corrupted {
            outcomes.push(SampleOutcome {
                stratum: s.stratum.clone(),
                clean: clean.correct,
                corrupted,
            });
        }
    }
    category_sensitivity::<f64>(&strata, &outcomes)
        .into_iter()
        .map(|(stratum, drop)| CategoryDrop { stratum, drop })
        .collect()
}
