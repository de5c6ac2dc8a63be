//! Digitized published summary values and the arithmetic that can be
//! re-derived from them (mean VG, count-based rates, flip nets, tier row
//! sums, scaling slopes).

use serde::{Deserialize, Serialize};

use super::{ReportBundle, ReportError, ReportTable};
use crate::metrics::{fmt1, fmt2, round_to, scaling_slope};

const BUNDLED: &str = include_str!("../../data/reference_summary.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    pub name: String,
    pub family: String,
    pub params_b: f64,
    pub baseline: f64,
    pub worst_case: f64,
    pub severe_fail: f64,
    pub worst_at_low: f64,
    pub benign_at_low: f64,
    pub vg: f64,
    pub mrce: f64,
}

impl ReferenceModel {
    /// `baseline - vg`, by the VG identity.
    pub fn acc_noimage(&self) -> f64 {
        self.baseline - self.vg
    }

    /// Mean drop over all configs, `mrce * vg / 100` (mRCE is the mean of
    /// `delta / vg * 100` with a fixed VG).
    pub fn mean_drop(&self) -> f64 {
        self.mrce * self.vg / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFlip {
    pub aug_id: String,
    pub flip_plus: f64,
    pub flip_minus: f64,
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScaling {
    pub family: String,
    pub slope: f64,
    pub r2: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTiers {
    /// Benign, Mild, Moderate, Catastrophic (benign includes negative drops).
    pub low: [usize; 4],
    pub mid: [usize; 4],
    pub high: [usize; 4],
    pub binary: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDataset {
    pub name: String,
    pub reference_model: String,
    pub mean_vg: f64,
    pub models: Vec<ReferenceModel>,
    pub tiers: ReferenceTiers,
    pub binary_drops: std::collections::BTreeMap<String, f64>,
    pub binary_flips: Vec<ReferenceFlip>,
    pub scaling: Vec<ReferenceScaling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub note: String,
    pub datasets: Vec<ReferenceDataset>,
}

impl ReferenceSummary {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED).expect("bundled reference summary parses")
    }

    pub fn dataset(&self, name: &str) -> Option<&ReferenceDataset> {
        self.datasets.iter().find(|d| d.name == name)
    }
}

impl ReferenceDataset {
    pub fn model(&self, name: &str) -> Option<&ReferenceModel> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn mean_vg(&self) -> f64 {
        self.models.iter().map(|m| m.vg).sum::<f64>() / self.models.len() as f64
    }

    /// `(label, counts, expected total)` per severity row.
    pub fn tier_rows(&self) -> [(&'static str, [usize; 4], usize); 4] {
        let n = self.models.len();
        [
            ("Low", self.tiers.low, 42 * n),
            ("Mid", self.tiers.mid, 42 * n),
            ("High", self.tiers.high, 42 * n),
            ("Binary", self.tiers.binary, 7 * n),
        ]
    }

    fn family_points(&self, family: &str) -> Vec<&ReferenceModel> {
        self.models.iter().filter(|m| m.family == family).collect()
    }

    /// Slope and R^2 of mean drop on log10 parameters for one family, from
    /// the rounded table values.
    pub fn derived_scaling(&self, family: &str) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self.family_points(family).iter().map(|m| (m.params_b, m.mean_drop())).collect();
        scaling_slope(&pts).ok()
    }

    /// The range of slopes consistent with the one-decimal rounding of VG
    /// and mRCE (the slope is linear in the drops, so the extremes sit at
    /// the corners of the rounding boxes).
    pub fn derived_slope_range(&self, family: &str) -> Option<(f64, f64)> {
        let models = self.family_points(family);
        if models.len() < 2 {
            return None;
        }
        let xs: Vec<f64> = models.iter().map(|m| m.params_b.log10()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx <= 0.0 {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 0.0);
        for (m, x) in models.iter().zip(&xs) {
            let w = (x - mx) / sxx;
            let corners = [
                (m.mrce - 0.05) * (m.vg - 0.05),
                (m.mrce - 0.05) * (m.vg + 0.05),
                (m.mrce + 0.05) * (m.vg - 0.05),
                (m.mrce + 0.05) * (m.vg + 0.05),
            ]
            .map(|c| c / 100.0);
            let ymin = corners.iter().copied().fold(f64::INFINITY, f64::min);
            let ymax = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if w >= 0.0 {
                lo += w * ymin;
                hi += w * ymax;
            } else {
                lo += w * ymax;
                hi += w * ymin;
            }
        }
        Some((lo, hi))
    }
}

/// Outcome of comparing a derived value against its published counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    /// Equal at the published precision.
    Exact,
    /// Not equal, but inside the interval implied by rounding the inputs.
    WithinRounding,
    Mismatch,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Exact => "exact",
            CheckStatus::WithinRounding => "within rounding",
            CheckStatus::Mismatch => "mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceCheck {
    pub dataset: String,
    pub check: String,
    pub derived: String,
    pub published: String,
    pub status: CheckStatus,
}

fn status(derived: &str, published: &str, within: bool) -> CheckStatus {
    if derived == published {
        CheckStatus::Exact
    } else if within {
        CheckStatus::WithinRounding
    } else {
        CheckStatus::Mismatch
    }
}

/// The integer count `k` of `n` whose percentage renders as `pct`, if any.
fn count_for(pct: f64, n: usize) -> Option<usize> {
    (0..=n).find(|&k| fmt1(100.0 * k as f64 / n as f64) == fmt1(pct))
}

impl ReferenceDataset {
    pub fn checks(&self) -> Vec<ReferenceCheck> {
        let mut out = Vec::new();
        let mut push = |check: String, derived: String, published: String, st: CheckStatus| {
            out.push(ReferenceCheck {
                dataset: self.name.clone(),
                check,
                derived,
                published,
                status: st,
            })
        };
        let d = fmt1(self.mean_vg());
        let p = fmt1(self.mean_vg);
        let st = status(&d, &p, false);
        push("mean VG".into(), d, p, st);

        for m in &self.models {
            let (label, derived) = match count_for(m.severe_fail, 133) {
                Some(k) => (format!("{k}/133"), fmt1(100.0 * k as f64 / 133.0)),
                None => ("no k/133".into(), "-".into()),
            };
            let p = fmt1(m.severe_fail);
            let st = status(&derived, &p, false);
            push(format!("{} severe-fail as {label}", m.name), derived, p, st);
            let (label, derived) = match count_for(m.benign_at_low, 42) {
                Some(k) => (format!("{k}/42"), fmt1(100.0 * k as f64 / 42.0)),
                None => ("no k/42".into(), "-".into()),
            };
            let p = fmt1(m.benign_at_low);
            let st = status(&derived, &p, false);
            push(format!("{} Benign@Low as {label}", m.name), derived, p, st);
        }

        for (label, counts, want) in self.tier_rows() {
            let sum: usize = counts.iter().sum();
            let st = status(&sum.to_string(), &want.to_string(), false);
            push(format!("tier row {label} sum"), sum.to_string(), want.to_string(), st);
        }

        for f in &self.binary_flips {
            let derived = fmt1(f.flip_plus - f.flip_minus);
            let p = fmt1(f.net);
            // Three values rounded to 0.1 each: the net may be off by 0.1.
            let within = ((f.flip_plus - f.flip_minus) - f.net).abs() <= 0.1 + 1e-9;
            let st = status(&derived, &p, within);
            push(format!("{} net = Flip+ - Flip-", f.aug_id), derived, p, st);
        }

        for s in &self.scaling {
            let Some((slope, r2)) = self.derived_scaling(&s.family) else { continue };
            let range = self.derived_slope_range(&s.family);
            let within = range.is_some_and(|(lo, hi)| s.slope >= round_to(lo, 2) && s.slope <= round_to(hi, 2));
            let (d, p) = (fmt2(slope), fmt2(s.slope));
            let st = status(&d, &p, within);
            push(format!("{} scaling slope", s.family), d, p, st);
            let (d, p) = (fmt2(r2), fmt2(s.r2));
            let st = status(&d, &p, false);
            push(format!("{} scaling R2", s.family), d, p, st);
        }
        out
    }
}

fn slug(name: &str) -> String {
    name.to_lowercase().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Tables for the bundled (or supplied) reference values plus every check.
pub fn reference_bundle(summary: &ReferenceSummary) -> Result<ReportBundle, ReportError> {
    let mut tables = Vec::new();
    let mut checks = ReportTable::new("reference_checks", "Re-derived arithmetic", &["Dataset", "Check", "Derived", "Published", "Status"]);
    let mut tiers = ReportTable::new(
        "reference_tiers",
        "Tier distribution (published counts)",
        &["Dataset", "Severity", "Benign", "Mild", "Moderate", "Catastrophic", "Total", "Expected"],
    );
    let mut scaling = ReportTable::new(
        "reference_scaling",
        "Scaling slopes from mean drops",
        &["Dataset", "Family", "Published slope", "Published R2", "Derived slope", "Derived R2", "Rounding range"],
    );
    let mut all_checks = Vec::new();
    for ds in &summary.datasets {
        if ds.models.is_empty() {
            return Err(ReportError::Reference(format!("dataset {} has no models", ds.name)));
        }
        let mut t = ReportTable::new(
            &format!("reference_summary_{}", slug(&ds.name)),
            &format!("Published summary ({})", ds.name),
            &[
                "Model", "Family", "Params (B)", "Baseline", "Worst-Case", "Severe-Fail", "Worst@Low", "Benign@Low", "VG", "mRCE",
                "No-image (derived)", "Mean drop (derived)",
            ],
        );
        for m in &ds.models {
            t.rows.push(vec![
                m.name.clone(),
                m.family.clone(),
                m.params_b.to_string(),
                fmt1(m.baseline),
                fmt1(m.worst_case),
                fmt1(m.severe_fail),
                fmt1(m.worst_at_low),
                fmt1(m.benign_at_low),
                fmt1(m.vg),
                fmt1(m.mrce),
                fmt1(m.acc_noimage()),
                fmt2(m.mean_drop()),
            ]);
        }
        let mut mean = vec!["Mean".to_string(), String::new(), String::new()];
        let avg = |f: fn(&ReferenceModel) -> f64| fmt1(ds.models.iter().map(f).sum::<f64>() / ds.models.len() as f64);
        mean.extend([
            avg(|m| m.baseline),
            avg(|m| m.worst_case),
            avg(|m| m.severe_fail),
            avg(|m| m.worst_at_low),
            avg(|m| m.benign_at_low),
            avg(|m| m.vg),
            avg(|m| m.mrce),
            avg(|m| m.acc_noimage()),
            String::new(),
        ]);
        t.rows.push(mean);
        tables.push(t);

        for (label, counts, want) in ds.tier_rows() {
            let mut row = vec![ds.name.clone(), label.to_string()];
            row.extend(counts.iter().map(|c| c.to_string()));
            row.push(counts.iter().sum::<usize>().to_string());
            row.push(want.to_string());
            tiers.rows.push(row);
        }
        for s in &ds.scaling {
            let derived = ds.derived_scaling(&s.family);
            let range = ds.derived_slope_range(&s.family);
            scaling.rows.push(vec![
                ds.name.clone(),
                s.family.clone(),
                fmt2(s.slope),
                fmt2(s.r2),
                derived.map(|d| fmt2(d.0)).unwrap_or_default(),
                derived.map(|d| fmt2(d.1)).unwrap_or_default(),
                range.map(|(lo, hi)| format!("[{}, {}]", fmt2(lo), fmt2(hi))).unwrap_or_default(),
            ]);
        }
        for c in ds.checks() {
            checks.rows.push(vec![c.dataset.clone(), c.check.clone(), c.derived.clone(), c.published.clone(), c.status.label().into()]);
            all_checks.push(c);
        }
    }
    let mut flips = ReportTable::new(
        "reference_flips",
        "Binary augmentation flips (published)",
        &["Dataset", "Augmentation", "Flip+", "Flip-", "Net", "Net (derived)"],
    );
    for ds in &summary.datasets {
        for f in &ds.binary_flips {
            flips.rows.push(vec![
                ds.name.clone(),
                f.aug_id.clone(),
                fmt1(f.flip_plus),
                fmt1(f.flip_minus),
                fmt1(f.net),
                fmt1(f.flip_plus - f.flip_minus),
            ]);
        }
    }
    tables.extend([tiers, flips, scaling, checks]);
    Ok(ReportBundle {
        tables,
        charts: Vec::new(),
        document: Some(serde_json::json!({ "checks": all_checks })),
    })
}
