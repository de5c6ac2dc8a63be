//! The robustness calculus: accuracy, drops, visual gain, RCE, mCE, tiers,
//! flips, severity mismatch, scaling slopes, category sensitivity and
//! tail-risk share.
//!
//! Scalar functions are generic over [`num_traits::Float`]; everything is
//! computed at full precision and rounded only by [`round1`] / [`fmt1`]
//! at presentation time.

mod table;

use std::collections::HashMap;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use table::{
    binary_drop_table, category_sensitivity_from_store, drop_from_counts, flip_stats_from_store, mce_table, model_metrics,
    reference_model, scaling_table, tail_risk_from_tables, tier_distribution, top_k_by_severity, AccuracyDocument, CategoryDrop,
    MismatchRow, ModelAccuracies, ModelMetrics, ScalingRow, SeverityGroup, StoreStats,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no records for config {0}")]
    EmptyConfig(String),
    #[error("visual gain must be positive, got {0}")]
    NonPositiveVG(f64),
    #[error("reference error sum is zero for corruption {0}")]
    ZeroReferenceError(String),
    #[error("model and reference cover different corruption types")]
    MismatchedCorruptions,
    #[error("clean and corrupted records cover different samples")]
    MismatchedSamples,
    #[error("{count} unresolved failed record(s) for {config}; rerun to retry or allow partial results")]
    UnresolvedFailures { config: String, count: usize },
    #[error("config {config} has {have} of {want} records; allow partial results to continue")]
    Incomplete { config: String, have: usize, want: usize },
    #[error("accuracy for config {0} is missing")]
    MissingConfig(String),
    #[error("need at least two points with distinct parameter counts")]
    InsufficientPoints,
    #[error("no models supplied")]
    NoModels,
    #[error("unknown model {0}")]
    UnknownModel(String),
}

pub(crate) fn lit<T: Float>(x: f64) -> T {
    T::from(x).expect("f64 literal representable in T")
}

fn count<T: Float>(n: usize) -> T {
    T::from(n).expect("count representable in T")
}

fn mean<T: Float>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(T::zero(), |a, &b| a + b);
    Some(sum / count(values.len()))
}

/// `100 * correct / total`, in percent.
pub fn accuracy<T: Float>(correct: usize, total: usize) -> Result<T, MetricsError> {
    if total == 0 {
        return Err(MetricsError::EmptyConfig(String::new()));
    }
    Ok(lit::<T>(100.0) * count(correct) / count(total))
}

/// `acc_clean - acc_noimage`.
pub fn visual_gain<T: Float>(acc_clean: T, acc_noimage: T) -> T {
    acc_clean - acc_noimage
}

/// Relative corruption error `delta / vg * 100`.
pub fn rce<T: Float>(delta: T, vg: T) -> Result<T, MetricsError> {
    if !(vg > T::zero()) {
        return Err(MetricsError::NonPositiveVG(vg.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(delta / vg * lit(100.0))
}

/// Mean RCE.
pub fn mrce<T: Float>(values: &[T]) -> Result<T, MetricsError> {
    mean(values).ok_or_else(|| MetricsError::EmptyConfig("mRCE".into()))
}

/// Per corruption type, the error rate `1 - acc` summed over its
/// severities (one term for binary transforms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MceInputs<T = f64> {
    pub errors: Vec<(String, T)>,
}

impl<T: Float> MceInputs<T> {
    /// Builds the sums from percent accuracies keyed by config string.
    /// Types with any severity missing are skipped.
    pub fn from_accuracies(acc: impl Fn(&str) -> Option<T>) -> Self {
        let mut errors = Vec::new();
        for spec in crate::corruption::registry() {
            let keys: Vec<String> = match spec.schedule {
                Some(_) => crate::corruption::Severity::ALL.iter().map(|s| format!("{}:{s}", spec.id)).collect(),
                None => vec![spec.id.to_string()],
            };
            let terms: Option<Vec<T>> = keys.iter().map(|k| acc(k).map(|a| T::one() - a / lit(100.0))).collect();
            if let Some(terms) = terms {
                errors.push((spec.id.to_string(), terms.into_iter().fold(T::zero(), |a, b| a + b)));
            }
        }
        Self { errors }
    }
}

/// Mean over corruption types of `100 * E_model / E_ref`.
pub fn mce<T: Float>(model: &MceInputs<T>, reference: &MceInputs<T>) -> Result<T, MetricsError> {
    if model.errors.len() != reference.errors.len()
        || model.errors.iter().zip(&reference.errors).any(|(a, b)| a.0 != b.0)
    {
        return Err(MetricsError::MismatchedCorruptions);
    }
    let mut ratios = Vec::with_capacity(model.errors.len());
    for ((id, e), (_, r)) in model.errors.iter().zip(&reference.errors) {
        if *r == T::zero() {
            return Err(MetricsError::ZeroReferenceError(id.clone()));
        }
        ratios.push(*e / *r * lit(100.0));
    }
    mean(&ratios).ok_or_else(|| MetricsError::EmptyConfig("mCE".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Positive,
    Benign,
    Mild,
    Moderate,
    Catastrophic,
}

impl Tier {
    pub const ALL: [Tier; 5] = [Tier::Positive, Tier::Benign, Tier::Mild, Tier::Moderate, Tier::Catastrophic];

    pub fn label(self) -> &'static str {
        match self {
            Tier::Positive => "Positive",
            Tier::Benign => "Benign",
            Tier::Mild => "Mild",
            Tier::Moderate => "Moderate",
            Tier::Catastrophic => "Catastrophic",
        }
    }
}

/// `< 0` positive, `<= 1` benign, `<= 3` mild, `<= 10` moderate, else catastrophic.
pub fn tier<T: Float>(delta: T) -> Tier {
    if delta < T::zero() {
        Tier::Positive
    } else if delta <= T::one() {
        Tier::Benign
    } else if delta <= lit(3.0) {
        Tier::Mild
    } else if delta <= lit(10.0) {
        Tier::Moderate
    } else {
        Tier::Catastrophic
    }
}

/// Counts indexed like [`Tier::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TierCounts(pub [usize; 5]);

impl TierCounts {
    pub fn of<T: Float>(deltas: &[T]) -> Self {
        let mut c = [0; 5];
        for &d in deltas {
            c[tier(d) as usize] += 1;
        }
        TierCounts(c)
    }

    pub fn get(&self, t: Tier) -> usize {
        self.0[t as usize]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn add(&mut self, other: &TierCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

/// Percent of drops strictly above `0.1 * acc_clean`.
pub fn severe_failure_rate<T: Float>(deltas: &[T], acc_clean: T) -> Result<T, MetricsError> {
    if deltas.is_empty() {
        return Err(MetricsError::EmptyConfig("severe-failure rate".into()));
    }
    let threshold = lit::<T>(0.1) * acc_clean;
    let n = deltas.iter().filter(|&&d| d > threshold).count();
    Ok(lit::<T>(100.0) * count(n) / count(deltas.len()))
}

/// Largest drop; ties go to the earliest entry.
pub fn worst_case<K: Clone, T: Float>(drops: &[(K, T)]) -> Option<(K, T)> {
    let mut best: Option<&(K, T)> = None;
    for d in drops {
        if best.is_none_or(|b| d.1 > b.1) {
            best = Some(d);
        }
    }
    best.cloned()
}

/// Percent of (low-severity) drops with `delta <= 1`.
pub fn benign_at_low<T: Float>(low_drops: &[T]) -> Result<T, MetricsError> {
    if low_drops.is_empty() {
        return Err(MetricsError::EmptyConfig("Benign@Low".into()));
    }
    let n = low_drops.iter().filter(|&&d| d <= T::one()).count();
    Ok(lit::<T>(100.0) * count(n) / count(low_drops.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipStats<T = f64> {
    /// Percent of samples correct on clean and wrong when corrupted.
    pub flip_plus: T,
    /// Percent wrong on clean and correct when corrupted.
    pub flip_minus: T,
    pub net: T,
}

/// Harmful and helpful answer flips between two record sets over the
/// same samples. `net` is formed from the integer count difference, so it
/// equals [`drop_from_counts`] on the same records bit for bit.
pub fn flip_stats<T: Float>(clean: &[(&str, bool)], corrupted: &[(&str, bool)]) -> Result<FlipStats<T>, MetricsError> {
    if clean.len() != corrupted.len() {
        return Err(MetricsError::MismatchedSamples);
    }
    if clean.is_empty() {
        return Err(MetricsError::EmptyConfig("flip statistics".into()));
    }
    let corr: HashMap<&str, bool> = corrupted.iter().copied().collect();
    if corr.len() != corrupted.len() {
        return Err(MetricsError::MismatchedSamples);
    }
    let (mut plus, mut minus) = (0usize, 0usize);
    for (id, c) in clean {
        let k = *corr.get(id).ok_or(MetricsError::MismatchedSamples)?;
        match (c, k) {
            (true, false) => plus += 1,
            (false, true) => minus += 1,
            _ => {}
        }
    }
    let n = count::<T>(clean.len());
    let hundred = lit::<T>(100.0);
    Ok(FlipStats {
        flip_plus: hundred * count(plus) / n,
        flip_minus: hundred * count(minus) / n,
        net: hundred * (count::<T>(plus) - count(minus)) / n,
    })
}

/// True iff the drop decreases anywhere along low, mid, high (strictly).
pub fn monotonicity_violation<T: PartialOrd>(low: T, mid: T, high: T) -> bool {
    low > mid || mid > high
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn average_ranks<T: Float>(v: &[T]) -> Vec<T> {
    let mut ranks = vec![T::zero(); v.len()];
    for (i, &x) in v.iter().enumerate() {
        let less = v.iter().filter(|&&y| y < x).count();
        let equal = v.iter().filter(|&&y| y == x).count();
        ranks[i] = count::<T>(less) + (count::<T>(equal) + T::one()) / lit(2.0);
    }
    ranks
}

/// Spearman correlation between severity (1, 2, 3) and the drops, as the
/// Pearson correlation of average ranks. Returns 0 when all three drops
/// tie (the correlation is undefined there).
pub fn spearman_rho<T: Float>(low: T, mid: T, high: T) -> T {
    let r = average_ranks(&[low, mid, high]);
    let s = [T::one(), lit(2.0), lit(3.0)];
    let mr = (r[0] + r[1] + r[2]) / lit(3.0);
    let ms = lit::<T>(2.0);
    let (mut cov, mut vr, mut vs) = (T::zero(), T::zero(), T::zero());
    for i in 0..3 {
        cov = cov + (r[i] - mr) * (s[i] - ms);
        vr = vr + (r[i] - mr) * (r[i] - mr);
        vs = vs + (s[i] - ms) * (s[i] - ms);
    }
    if vr == T::zero() {
        return T::zero();
    }
    cov / (vr * vs).sqrt()
}

/// Ordinary least squares of drop on `log10(params)`. Returns `(slope, R^2)`;
/// R^2 is 1 when every drop is identical (the fit is exact).
pub fn scaling_slope<T: Float>(points: &[(T, T)]) -> Result<(T, T), MetricsError> {
    let xs: Vec<T> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<T> = points.iter().map(|p| p.1).collect();
    let (Some(mx), Some(my)) = (mean(&xs), mean(&ys)) else {
        return Err(MetricsError::InsufficientPoints);
    };
    let sxx = xs.iter().fold(T::zero(), |a, &x| a + (x - mx) * (x - mx));
    if points.len() < 2 || !(sxx > T::zero()) {
        return Err(MetricsError::InsufficientPoints);
    }
    let sxy = xs.iter().zip(&ys).fold(T::zero(), |a, (&x, &y)| a + (x - mx) * (y - my));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot = ys.iter().fold(T::zero(), |a, &y| a + (y - my) * (y - my));
    let ss_res = xs
        .iter()
        .zip(&ys)
        .fold(T::zero(), |a, (&x, &y)| a + (y - intercept - slope * x) * (y - intercept - slope * x));
    let r2 = if ss_tot == T::zero() { T::one() } else { T::one() - ss_res / ss_tot };
    Ok((slope, r2))
}

/// Per-sample outcomes used for category sensitivity.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub stratum: String,
    pub clean: bool,
    /// One entry per corrupted config, same order for every sample.
    pub corrupted: Vec<bool>,
}

/// Mean drop per stratum: for each config, clean accuracy minus corrupted
/// accuracy within the stratum, averaged over configs. Strata listed in
/// `strata` but without outcomes are dropped with a warning. Sorted by
/// drop, largest first (ties keep `strata` order).
pub fn category_sensitivity<T: Float>(strata: &[String], outcomes: &[SampleOutcome]) -> Vec<(String, T)> {
    let mut out = Vec::new();
    for s in strata {
        let rows: Vec<&SampleOutcome> = outcomes.iter().filter(|o| &o.stratum == s).collect();
        let Some(first) = rows.first() else {
            tracing::warn!(stratum = %s, "stratum has no usable records; excluded");
            continue;
        };
        let n = count::<T>(rows.len());
        let clean = count::<T>(rows.iter().filter(|o| o.clean).count());
        let drops: Vec<T> = (0..first.corrupted.len())
            .map(|k| {
                let corr = count::<T>(rows.iter().filter(|o| o.corrupted.get(k).copied().unwrap_or(false)).count());
                lit::<T>(100.0) * (clean - corr) / n
            })
            .collect();
        if let Some(m) = mean(&drops) {
            out.push((s.clone(), m));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Percent of catastrophic cases whose augmentation is in `spatial`.
/// `None` when there are no catastrophic cases.
pub fn tail_risk_share<T: Float>(catastrophic_augs: &[&str], spatial: &[&str]) -> Option<T> {
    if catastrophic_augs.is_empty() {
        return None;
    }
    let n = catastrophic_augs.iter().filter(|a| spatial.contains(a)).count();
    Some(lit::<T>(100.0) * count(n) / count(catastrophic_augs.len()))
}

/// Rounds to one decimal, halves away from zero. Values within 1e-9 of a
/// half are treated as halves so that binary representation error (e.g.
/// `0.25` stored slightly low) does not flip the direction.
pub fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let y = x * scale;
    let frac = y - y.trunc();
    let r = if (frac.abs() - 0.5).abs() < 1e-9 { y.trunc() + frac.signum() } else { y.round() };
    let r = r / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn round1(x: f64) -> f64 {
    round_to(x, 1)
}

/// One-decimal presentation string (never "-0.0").
pub fn fmt1(x: f64) -> String {
    format!("{:.1}", round1(x))
}

pub fn fmt2(x: f64) -> String {
    format!("{:.2}", round_to(x, 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy::<f64>(3, 4).unwrap(), 75.0);
        assert_eq!(accuracy::<f64>(0, 4).unwrap(), 0.0);
        assert!(matches!(accuracy::<f64>(0, 0), Err(MetricsError::EmptyConfig(_))));
        assert_eq!(accuracy::<f32>(1, 2).unwrap(), 50.0f32);
    }

    #[test]
    fn vg_and_rce() {
        assert!((visual_gain(88.4, 40.2) - 48.2f64).abs() < 1e-9);
        assert_eq!(visual_gain(5.0, 5.0), 0.0);
        assert_eq!(rce(48.2, 48.2).unwrap(), 100.0);
        assert_eq!(fmt2(rce(26.3, 48.2).unwrap()), "54.56");
        assert!(rce(-1.0, 10.0).unwrap() < 0.0);
        assert!(matches!(rce(1.0, 0.0), Err(MetricsError::NonPositiveVG(_))));
    }

    #[test]
    fn mrce_examples() {
        assert_eq!(mrce(&[10.0; 133]).unwrap(), 10.0);
        assert_eq!(mrce(&[0.0, 20.0]).unwrap(), 10.0);
        assert!(mrce::<f64>(&[]).is_err());
    }

    fn inputs(v: &[(&str, f64)]) -> MceInputs {
        MceInputs {
            errors: v.iter().map(|(k, e)| (k.to_string(), *e)).collect(),
        }
    }

    #[test]
    fn mce_examples() {
        let r = inputs(&[("a", 0.4), ("b", 0.3)]);
        assert_eq!(mce(&r, &r).unwrap(), 100.0);
        let m = inputs(&[("a", 0.2), ("b", 0.3)]);
        assert_eq!(mce(&m, &r).unwrap(), 75.0);
        let half = inputs(&[("a", 0.2), ("b", 0.15)]);
        assert_eq!(mce(&half, &r).unwrap(), 50.0);
        assert!(matches!(mce(&m, &inputs(&[("a", 0.0), ("b", 0.3)])), Err(MetricsError::ZeroReferenceError(_))));
        assert!(matches!(mce(&m, &inputs(&[("a", 0.4)])), Err(MetricsError::MismatchedCorruptions)));
    }

    #[test]
    fn mce_inputs_from_accuracies() {
        let m = MceInputs::<f64>::from_accuracies(|_| Some(90.0));
        assert_eq!(m.errors.len(), 49);
        assert!((m.errors[0].1 - 0.3).abs() < 1e-12);
        assert!((m.errors[48].1 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn tier_edges() {
        assert_eq!(tier(10.3), Tier::Catastrophic);
        assert_eq!(tier(-0.2), Tier::Positive);
        assert_eq!(tier(0.0), Tier::Benign);
        assert_eq!(tier(1.0), Tier::Benign);
        assert_eq!(tier(1.0000001), Tier::Mild);
        assert_eq!(tier(3.0), Tier::Mild);
        assert_eq!(tier(10.0), Tier::Moderate);
        let c = TierCounts::of(&[-1.0, 0.5, 2.0, 5.0, 11.0, 12.0]);
        assert_eq!(c.0, [1, 1, 1, 1, 2]);
        assert_eq!(c.total(), 6);
    }

    #[test]
    fn severe_failure_examples() {
        let mut d = vec![0.0; 133];
        for x in d.iter_mut().take(13) {
            *x = 9.0;
        }
        assert_eq!(fmt1(severe_failure_rate(&d, 86.3).unwrap()), "9.8");
        assert_eq!(severe_failure_rate(&[0.0; 133], 80.0).unwrap(), 0.0);
        assert_eq!(severe_failure_rate(&[0.0, 0.1], 0.0).unwrap(), 50.0);
        // Strict inequality at the threshold.
        assert_eq!(severe_failure_rate(&[5.0], 50.0).unwrap(), 0.0);
    }

    #[test]
    fn worst_and_benign() {
        let drops = [("a", 1.0), ("b", 3.0), ("c", 3.0)];
        assert_eq!(worst_case(&drops), Some(("b", 3.0)));
        assert_eq!(worst_case(&[("x", 2.0), ("y", 2.0)]), Some(("x", 2.0)));
        assert_eq!(worst_case::<&str, f64>(&[]), None);
        let mut low = vec![0.5; 37];
        low.extend([2.0; 5]);
        assert_eq!(fmt1(benign_at_low(&low).unwrap()), "88.1");
    }

    #[test]
    fn flips() {
        let clean = [("1", true), ("2", true), ("3", false), ("4", false)];
        let corr = [("1", false), ("2", true), ("3", true), ("4", false)];
        let f: FlipStats = flip_stats(&clean, &corr).unwrap();
        assert_eq!((f.flip_plus, f.flip_minus, f.net), (25.0, 25.0, 0.0));
        let same: FlipStats = flip_stats(&clean, &clean).unwrap();
        assert_eq!((same.flip_plus, same.flip_minus, same.net), (0.0, 0.0, 0.0));
        assert!(flip_stats::<f64>(&clean, &corr[..3]).is_err());
        assert!(flip_stats::<f64>(&clean, &[("1", true), ("2", true), ("3", true), ("9", true)]).is_err());
        assert_eq!(fmt1(12.4 - 2.0), "10.4");
    }

    #[test]
    fn severity_mismatch() {
        assert!(!monotonicity_violation(1.0, 2.0, 3.0));
        assert!(!monotonicity_violation(2.0, 2.0, 3.0));
        assert!(monotonicity_violation(6.96, 5.59, 4.10));
        assert_eq!(spearman_rho(1.0, 2.0, 3.0), 1.0);
        assert_eq!(spearman_rho(3.0, 2.0, 1.0), -1.0);
        assert_eq!(spearman_rho(6.96, 5.59, 4.10), -1.0);
        assert!((spearman_rho(5.0, 5.0, 9.0) - 0.75f64.sqrt()).abs() < 1e-12);
        assert_eq!(spearman_rho(4.0, 4.0, 4.0), 0.0);
    }

    #[test]
    fn scaling() {
        let (s, r2) = scaling_slope(&[(4.0, 2.0), (8.0, 1.0)]).unwrap();
        assert!((s - (-1.0 / 2f64.log10())).abs() < 1e-12);
        assert_eq!(r2, 1.0);
        let (s, _) = scaling_slope(&[(4.0, 2.0), (8.0, 2.0), (30.0, 2.0)]).unwrap();
        assert_eq!(s, 0.0);
        assert!(scaling_slope(&[(4.0, 1.0)]).is_err());
        assert!(scaling_slope(&[(4.0, 1.0), (4.0, 2.0)]).is_err());
    }

    #[test]
    fn categories() {
        let o = |s: &str, clean, corr: &[bool]| SampleOutcome {
            stratum: s.into(),
            clean,
            corrupted: corr.to_vec(),
        };
        let strata = vec!["x".to_string(), "y".to_string(), "empty".to_string()];
        let outcomes = vec![o("x", true, &[false, true]), o("x", true, &[true, true]), o("y", true, &[true, true])];
        let out = category_sensitivity::<f64>(&strata, &outcomes);
        assert_eq!(out, vec![("x".to_string(), 25.0), ("y".to_string(), 0.0)]);
        let single = category_sensitivity::<f64>(&strata[..1], &outcomes[..2]);
        assert_eq!(single[0].1, 25.0);
    }

    #[test]
    fn tail_risk() {
        let set = ["upsample", "zoom_blur"];
        assert_eq!(tail_risk_share::<f64>(&["upsample", "zoom_blur"], &set), Some(100.0));
        assert_eq!(tail_risk_share::<f64>(&["flip_v"], &set), Some(0.0));
        assert_eq!(fmt1(tail_risk_share::<f64>(&["upsample", "zoom_blur", "invert"], &set).unwrap()), "66.7");
        assert_eq!(tail_risk_share::<f64>(&[], &set), None);
    }

    #[test]
    fn presentation_rounding() {
        assert_eq!(fmt1(9.774), "9.8");
        assert_eq!(fmt1(0.25), "0.3");
        assert_eq!(fmt1(-0.25), "-0.3");
        assert_eq!(fmt1(-0.04), "0.0");
        assert_eq!(fmt1(46.65), "46.7");
        assert_eq!(fmt2(0.125), "0.13");
    }
}
