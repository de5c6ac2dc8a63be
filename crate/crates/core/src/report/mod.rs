//! Report tables built from metrics, written as CSV, Markdown and SVG.
//!
//! Every cell is formatted once (one decimal for percentages, two for
//! correlations and slopes) and the same strings feed every format, so
//! the CSV and Markdown forms always agree.

mod reference;
mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use reference::{reference_bundle, ReferenceCheck, ReferenceDataset, ReferenceFlip, ReferenceModel, ReferenceScaling, ReferenceSummary};

use crate::metrics::{
    binary_drop_table, category_sensitivity_from_store, flip_stats_from_store, fmt1, fmt2, mce_table, model_metrics,
    reference_model, scaling_table, tail_risk_from_tables, tier, tier_distribution, top_k_by_severity, CategoryDrop,
    MetricsError, ModelAccuracies, ModelMetrics, ScalingRow, SeverityGroup, Tier, TierCounts,
};
use crate::orchestrator::ResultStore;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bundled reference data is malformed: {0}")]
    Reference(String),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> ReportError {
    let context = context.into();
    move |source| ReportError::Io { context, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Md,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Md, Format::Svg];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTable {
    /// File stem.
    pub name: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReportTable {
    fn new(name: &str, title: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("## {}\n\n| {} |\n|", self.title, self.header.join(" | "));
        for _ in &self.header {
            s.push_str("---|");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "| {} |", r.join(" | "));
        }
        s
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io {
            context: "csv buffer".into(),
            source: e.into_error(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv of UTF-8 cells is UTF-8"))
    }
}

/// A horizontal bar chart (emitted for top-k tables).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarChart {
    pub name: String,
    pub title: String,
    pub bars: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub tables: Vec<ReportTable>,
    pub charts: Vec<BarChart>,
    /// Machine-readable metrics document (written as `metrics.json`).
    pub document: Option<serde_json::Value>,
}

impl ReportBundle {
    pub fn table(&self, name: &str) -> Option<&ReportTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_markdown(&self) -> String {
        self.tables.iter().map(ReportTable::to_markdown).collect::<Vec<_>>().join("\n")
    }

    /// Writes the requested formats into `dir` and returns the files written.
    pub fn write(&self, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, ReportError> {
        fs::create_dir_all(dir).map_err(io_err(format!("create {}", dir.display())))?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<(), ReportError> {
            let p = dir.join(name);
            fs::write(&p, body).map_err(io_err(format!("write {}", p.display())))?;
            written.push(p);
            Ok(())
        };
        if formats.contains(&Format::Csv) {
            for t in &self.tables {
                put(format!("{}.csv", t.name), t.to_csv()?)?;
            }
            if let Some(doc) = &self.document {
                put("metrics.json".into(), serde_json::to_string_pretty(doc).expect("json value") + "\n")?;
            }
        }
        if formats.contains(&Format::Md) {
            put("report.md".into(), self.to_markdown())?;
        }
        if formats.contains(&Format::Svg) {
            for c in &self.charts {
                put(format!("{}.svg", c.name), svg::bar_chart(&c.title, &c.bars))?;
            }
        }
        Ok(written)
    }
}

pub struct ReportOptions {
    pub allow_partial: bool,
    pub reference_model: Option<String>,
    pub top_k: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            allow_partial: false,
            reference_model: None,
            top_k: 5,
        }
    }
}

fn opt1(x: Option<f64>) -> String {
    x.map(fmt1).unwrap_or_else(|| "-".into())
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    dataset: &'a str,
    models: &'a [ModelMetrics],
    mce_reference: Option<&'a str>,
    mce: &'a [(String, f64)],
    tiers: &'a std::collections::BTreeMap<SeverityGroup, TierCounts>,
    scaling: &'a [ScalingRow],
    tail_risk_share: Option<f64>,
    flips: Vec<(&'a str, &'a [(String, crate::FlipStats)])>,
    categories: Vec<(&'a str, &'a [CategoryDrop])>,
}

/// Builds every table for one dataset. `stores` (matched to models by
/// name) enable the record-level flip and category tables.
pub fn build_report(dataset: &str, models: &[ModelAccuracies], stores: &[&ResultStore], opts: &ReportOptions) -> Result<ReportBundle, ReportError> {
    if models.is_empty() {
        return Err(MetricsError::NoModels.into());
    }
    let metrics: Vec<ModelMetrics> = models
        .iter()
        .map(|m| model_metrics(m, opts.allow_partial))
        .collect::<Result<_, _>>()?;
    let mut tables = Vec::new();

    let mut t = ReportTable::new(
        "summary",
        &format!("Robustness summary ({dataset})"),
        &[
            "Model", "Baseline", "Worst-Case", "Worst config", "Severe-Fail", "Worst@Low", "Worst@Low config", "Benign@Low", "VG",
            "mRCE", "Unparsable", "Partial",
        ],
    );
    for m in &metrics {
        t.rows.push(vec![
            m.name.clone(),
            fmt1(m.acc_clean),
            opt1(m.worst_case.as_ref().map(|w| w.1)),
            m.worst_case.as_ref().map(|w| w.0.clone()).unwrap_or_default(),
            fmt1(m.severe_fail),
            opt1(m.worst_at_low.as_ref().map(|w| w.1)),
            m.worst_at_low.as_ref().map(|w| w.0.clone()).unwrap_or_default(),
            opt1(m.benign_at_low),
            fmt1(m.vg),
            opt1(m.mrce),
            m.unparsable.to_string(),
            if m.partial { "yes" } else { "no" }.into(),
        ]);
    }
    tables.push(t);

    let n = metrics.len() as f64;
    let tail = tail_risk_from_tables(&metrics);
    let mut t = ReportTable::new("aggregates", "Aggregates over models", &["Quantity", "Value"]);
    t.rows.push(vec!["Models".into(), metrics.len().to_string()]);
    t.rows.push(vec!["Mean baseline".into(), fmt1(metrics.iter().map(|m| m.acc_clean).sum::<f64>() / n)]);
    t.rows.push(vec!["Mean VG".into(), fmt1(metrics.iter().map(|m| m.vg).sum::<f64>() / n)]);
    t.rows.push(vec!["Mean drop".into(), fmt1(metrics.iter().map(|m| m.mean_drop).sum::<f64>() / n)]);
    t.rows.push(vec!["Spatial/resampling share of catastrophic cases".into(), opt1(tail)]);
    tables.push(t);

    let mut header = vec!["Augmentation".to_string()];
    header.extend(metrics.iter().map(|m| m.name.clone()));
    header.extend(["Mean".to_string(), "Tier".to_string()]);
    let mut t = ReportTable {
        name: "binary".into(),
        title: "Binary augmentation drops".into(),
        header,
        rows: Vec::new(),
    };
    for (aug, per, mean) in binary_drop_table(&metrics) {
        let mut row = vec![aug];
        row.extend(per.into_iter().map(opt1));
        row.push(opt1(mean));
        row.push(mean.map(|d| tier(d).label().to_string()).unwrap_or_default());
        t.rows.push(row);
    }
    tables.push(t);

    let tiers = tier_distribution(&metrics);
    let mut t = ReportTable::new(
        "tiers",
        "Tier distribution (counts summed over models)",
        &["Severity", "Positive", "Benign", "Mild", "Moderate", "Catastrophic", "Total"],
    );
    for (g, c) in &tiers {
        let mut row = vec![g.label().to_string()];
        row.extend(Tier::ALL.iter().map(|&x| c.get(x).to_string()));
        row.push(c.total().to_string());
        t.rows.push(row);
    }
    tables.push(t);

    let top = top_k_by_severity(&metrics, opts.top_k);
    let mut t = ReportTable::new("top_k", "Largest mean drops by severity", &["Severity", "Rank", "Config", "Mean drop"]);
    let mut charts = Vec::new();
    for (g, rows) in &top {
        for (i, (k, d)) in rows.iter().enumerate() {
            t.rows.push(vec![g.label().into(), (i + 1).to_string(), k.clone(), fmt1(*d)]);
        }
        charts.push(BarChart {
            name: format!("top_k_{}", g.label().to_lowercase()),
            title: format!("Largest mean drops, {} ({dataset})", g.label()),
            bars: rows.clone(),
        });
    }
    tables.push(t);

    let mut t = ReportTable::new("rce_by_severity", "Mean RCE by severity", &["Model", "Low", "Mid", "High", "Binary"]);
    for m in &metrics {
        let mut row = vec![m.name.clone()];
        row.extend(SeverityGroup::ALL.iter().map(|g| opt1(m.rce_by_group.get(g).copied())));
        t.rows.push(row);
    }
    tables.push(t);

    // mCE needs every corruption type; skip it for partial inputs.
    let mut mce_rows = Vec::new();
    let mut mce_ref = None;
    if metrics.iter().all(|m| !m.partial) {
        let r = reference_model(models, opts.reference_model.as_deref())?;
        match mce_table(models, r) {
            Ok(rows) => {
                mce_ref = Some(r.name.as_str());
                mce_rows = rows;
            }
            Err(e @ MetricsError::ZeroReferenceError(_)) => tracing::warn!(reference = %r.name, "mCE table skipped: {e}"),
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(r) = mce_ref.and_then(|n| models.iter().find(|m| m.name == n)) {
        let mut t = ReportTable::new("mce", &format!("mCE (reference: {})", r.name), &["Model", "mCE", "Reference"]);
        for (name, v) in &mce_rows {
            t.rows.push(vec![name.clone(), fmt1(*v), if *name == r.name { "yes" } else { "no" }.into()]);
        }
        tables.push(t);
    }
    if metrics.iter().any(|m| m.partial) {
        tracing::warn!("partial results: mCE table skipped");
    }

    let mut t = ReportTable::new(
        "severity_mismatch",
        "Severity mismatch per augmentation",
        &["Model", "Augmentation", "Low", "Mid", "High", "Violation", "rho"],
    );
    let mut s = ReportTable::new("severity_mismatch_summary", "Severity mismatch summary", &["Model", "Violations", "Augmentations", "Mean rho"]);
    for m in &metrics {
        for r in &m.mismatch {
            t.rows.push(vec![
                m.name.clone(),
                r.aug_id.clone(),
                fmt1(r.drops[0]),
                fmt1(r.drops[1]),
                fmt1(r.drops[2]),
                if r.violation { "yes" } else { "no" }.into(),
                fmt2(r.rho),
            ]);
        }
        let v = m.mismatch.iter().filter(|r| r.violation).count();
        let rho = if m.mismatch.is_empty() {
            "-".into()
        } else {
            fmt2(m.mismatch.iter().map(|r| r.rho).sum::<f64>() / m.mismatch.len() as f64)
        };
        s.rows.push(vec![m.name.clone(), v.to_string(), m.mismatch.len().to_string(), rho]);
    }
    tables.push(t);
    tables.push(s);

    let scaling = scaling_table(&metrics);
    let mut t = ReportTable::new("scaling", "Drop change per log10(parameters)", &["Family", "Slope", "R2", "n"]);
    for r in &scaling {
        t.rows.push(vec![r.family.clone(), fmt2(r.slope), fmt2(r.r2), r.n.to_string()]);
    }
    tables.push(t);

    let mut flips = Vec::new();
    let mut categories = Vec::new();
    for store in stores {
        let name = store.meta().model.as_str();
        flips.push((name, flip_stats_from_store(store)));
        categories.push((name, category_sensitivity_from_store(store)));
    }
    if !stores.is_empty() {
        let mut t = ReportTable::new("flips", "Answer flips", &["Model", "Config", "Flip+", "Flip-", "Net"]);
        for (name, rows) in &flips {
            for (k, f) in rows {
                t.rows.push(vec![name.to_string(), k.clone(), fmt1(f.flip_plus), fmt1(f.flip_minus), fmt1(f.net)]);
            }
        }
        tables.push(t);
        let mut t = ReportTable::new("categories", "Mean drop per stratum", &["Model", "Stratum", "Mean drop"]);
        for (name, rows) in &categories {
            for c in rows {
                t.rows.push(vec![name.to_string(), c.stratum.clone(), fmt1(c.drop)]);
            }
        }
        tables.push(t);
    }

    let doc = MetricsDocument {
        dataset,
        models: &metrics,
        mce_reference: mce_ref,
        mce: &mce_rows,
        tiers: &tiers,
        scaling: &scaling,
        tail_risk_share: tail,
        flips: flips.iter().map(|(n, f)| (*n, f.as_slice())).collect(),
        categories: categories.iter().map(|(n, c)| (*n, c.as_slice())).collect(),
    };
    let document = serde_json::to_value(&doc).expect("metrics serialize");
    Ok(ReportBundle {
        tables,
        charts,
        document: Some(document),
    })
}
