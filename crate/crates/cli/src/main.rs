use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use corruptbench::client::HttpBackend;
use corruptbench::corruption::{apply, registry, resize, CorruptionConfig, Filter, Severity};
use corruptbench::dataset::{load_manifest, stratified_sample, stratum_quota};
use corruptbench::metrics::{fmt1, AccuracyDocument, MetricsError, ModelAccuracies, Tier};
use corruptbench::orchestrator::{self, ResultStore, RunConfig, RunOptions};
use corruptbench::report::{build_report, reference_bundle, Format, ReferenceSummary, ReportBundle, ReportOptions};
use corruptbench::{Image, SeedScheme};

#[derive(Parser)]
#[command(name = "corruptbench", version, about = "Deterministic image corruptions and VLM robustness sweeps")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply one corruption to an image and write a PNG.
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        aug: String,
        /// low, mid or high; omit for binary augmentations.
        #[arg(long)]
        severity: Option<String>,
        #[arg(long, default_value_t = 0)]
        sample_index: u64,
        #[arg(long, default_value_t = SeedScheme::default().augmentation_base_seed)]
        seed: u32,
        #[arg(long)]
        output: PathBuf,
    },
    /// List the augmentation catalog.
    Catalog {
        #[arg(long, value_enum, default_value_t = CatalogFormat::Md)]
        format: CatalogFormat,
    },
    /// Run (or resume) a sweep described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        filter: Option<Vec<String>>,
    },
    /// Compute metrics and write report tables.
    Report {
        /// Result store directories (one per model, same dataset).
        #[arg(long = "store")]
        stores: Vec<PathBuf>,
        /// Locate the store from a run config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Plain accuracy-table JSON document.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Re-derive the arithmetic of the bundled published summary values.
        #[arg(long)]
        paper_tables: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_partial: bool,
        #[arg(long)]
        reference_model: Option<String>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ReportFormat::Csv, ReportFormat::Md])]
        format: Vec<ReportFormat>,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
    /// Render every corruption config of one image plus a gallery grid.
    Visualize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        sample_index: u64,
    },
    /// Dry-run stratified sampling and print per-stratum counts.
    Sample {
        #[arg(long, required_unless_present = "config")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u32>,
        /// Write the selected ids, one per line.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CatalogFormat {
    Md,
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ReportFormat {
    Csv,
    Md,
    Svg,
}

impl From<ReportFormat> for Format {
    fn from(f: ReportFormat) -> Self {
        match f {
            ReportFormat::Csv => Format::Csv,
            ReportFormat::Md => Format::Md,
            ReportFormat::Svg => Format::Svg,
        }
    }
}

/// Bad invocation detected after argument parsing (exit code 1).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    for cause in err.chain() {
        let metrics = cause
            .downcast_ref::<MetricsError>()
            .or_else(|| match cause.downcast_ref::<corruptbench::report::ReportError>() {
                Some(corruptbench::report::ReportError::Metrics(m)) => Some(m),
                _ => None,
            });
        if matches!(
            metrics,
            Some(MetricsError::UnresolvedFailures { .. } | MetricsError::Incomplete { .. } | MetricsError::MissingConfig(_))
        ) {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into()))
        .with_writer(std::io::stderr)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Corrupt {
            input,
            aug,
            severity,
            sample_index,
            seed,
            output,
        } => corrupt(&input, &aug, severity.as_deref(), sample_index, seed, &output),
        Command::Catalog { format } => catalog(format),
        Command::Run { config, workers, filter } => run(&config, workers, filter),
        Command::Report {
            stores,
            config,
            table,
            paper_tables,
            out,
            allow_partial,
            reference_model,
            format,
            top_k,
        } => {
            let formats: Vec<Format> = format.into_iter().map(Format::from).collect();
            let opts = ReportOptions {
                allow_partial,
                reference_model,
                top_k,
            };
            report(stores, config, table, paper_tables, &out, &opts, &formats)
        }
        Command::Visualize { input, out, sample_index } => visualize(&input, &out, sample_index),
        Command::Sample {
            manifest,
            config,
            fraction,
            seed,
            out,
        } => sample(manifest, config, fraction, seed, out),
    }
}

fn parse_severity(s: Option<&str>) -> Result<Option<Severity>> {
    s.map(|s| Severity::parse(s).ok_or_else(|| usage(format!("unknown severity `{s}` (expected low, mid or high)"))))
        .transpose()
}

fn corrupt(input: &Path, aug: &str, severity: Option<&str>, sample_index: u64, seed: u32, output: &Path) -> Result<()> {
    let severity = parse_severity(severity)?;
    let image = Image::load(input).with_context(|| format!("reading {}", input.display()))?;
    let seeds = SeedScheme {
        augmentation_base_seed: seed,
        ..SeedScheme::default()
    };
    let cfg = CorruptionConfig::new(aug, severity, sample_index);
    let out = apply(&image, &cfg, &seeds)?;
    out.save_png(output).with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

fn catalog(format: CatalogFormat) -> Result<()> {
    let rows: Vec<[String; 6]> = registry()
        .iter()
        .map(|s| {
            let sched = |sev| s.parameter(sev).map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            [
                s.id.to_string(),
                s.category.label().to_string(),
                s.param_name.to_string(),
                sched(Severity::Low),
                sched(Severity::Mid),
                sched(Severity::High),
            ]
        })
        .collect();
    match format {
        CatalogFormat::Md => {
            println!("| id | category | parameter | low | mid | high |");
            println!("|---|---|---|---|---|---|");
            for r in &rows {
                println!("| {} |", r.join(" | "));
            }
        }
        CatalogFormat::Csv => {
            println!("id,category,parameter,low,mid,high");
            for r in &rows {
                println!("{}", r.join(","));
            }
        }
        CatalogFormat::Json => {
            let v: Vec<serde_json::Value> = registry()
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "id": s.id,
                        "category": s.category.label(),
                        "param_name": s.param_name,
                        "schedule": s.schedule.map(|sc| [sc.low, sc.mid, sc.high]),
                        "note": s.note,
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(())
}

fn run(config: &Path, workers: Option<usize>, filter: Option<Vec<String>>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if filter.is_some() {
        cfg.filter = filter;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let backend = HttpBackend::new(&cfg.endpoint)?;
    let (_, summary) = orchestrator::run(&cfg, &backend, &RunOptions { workers, max_tasks: None })?;
    println!("store: {}", summary.store_dir.display());
    println!(
        "samples {}  configs {}  executed {}  failed {}  pending {}",
        summary.samples, summary.plan_len, summary.executed, summary.failed, summary.pending
    );
    if summary.pending > 0 {
        eprintln!("{} task(s) still pending; re-run the same command to retry them", summary.pending);
    }
    Ok(())
}

fn report(
    mut stores: Vec<PathBuf>,
    config: Option<PathBuf>,
    table: Option<PathBuf>,
    paper_tables: bool,
    out: &Path,
    opts: &ReportOptions,
    formats: &[Format],
) -> Result<()> {
    if let Some(c) = &config {
        let cfg = RunConfig::load(c)?;
        let ds = orchestrator::sampled_dataset(&cfg)?;
        stores.push(orchestrator::store_dir(&cfg, &ds.name));
    }
    let sources = usize::from(!stores.is_empty()) + usize::from(table.is_some()) + usize::from(paper_tables);
    if sources != 1 {
        bail!(usage("give exactly one of --store/--config, --table or --paper-tables"));
    }
    let bundle: ReportBundle = if paper_tables {
        let summary = ReferenceSummary::bundled();
        let bundle = reference_bundle(&summary)?;
        for ds in &summary.datasets {
            println!("{}: mean VG {}", ds.name, fmt1(ds.mean_vg()));
            for (label, counts, want) in ds.tier_rows() {
                let sum: usize = counts.iter().sum();
                println!("  tier row {label}: {counts:?} sum {sum} (expected {want})");
                if sum != want {
                    bail!("tier row {label} of {} sums to {sum}, expected {want}", ds.name);
                }
            }
        }
        if let Some(t) = bundle.table("reference_checks") {
            print!("{}", t.to_markdown());
        }
        bundle
    } else if let Some(path) = table {
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let doc: AccuracyDocument = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let bundle = build_report(&doc.dataset, &doc.models, &[], opts)?;
        print_overview(&bundle, doc.models.len())?;
        bundle
    } else {
        let opened: Vec<ResultStore> = stores
            .iter()
            .map(|d| ResultStore::open(d).with_context(|| format!("opening store {}", d.display())))
            .collect::<Result<_>>()?;
        let dataset = opened[0].meta().dataset.clone();
        let mut models: Vec<ModelAccuracies> = Vec::new();
        for s in &opened {
            if s.meta().dataset != dataset {
                bail!(usage(format!("stores mix datasets `{dataset}` and `{}`", s.meta().dataset)));
            }
            let (m, stats) = ModelAccuracies::from_store(s, opts.allow_partial)?;
            if stats.failed + stats.missing > 0 {
                eprintln!("{}: {} failed and {} missing record(s) excluded", m.name, stats.failed, stats.missing);
            }
            if stats.unparsable > 0 {
                println!("{}: {} unparsable response(s) counted as incorrect", m.name, stats.unparsable);
            }
            models.push(m);
        }
        let refs: Vec<&ResultStore> = opened.iter().collect();
        let bundle = build_report(&dataset, &models, &refs, opts)?;
        print_overview(&bundle, models.len())?;
        bundle
    };
    let files = bundle.write(out, formats)?;
    println!("wrote {} file(s) to {}", files.len(), out.display());
    Ok(())
}

/// Prints mean VG and the tier row sums, and checks each row covers every
/// model's configs.
fn print_overview(bundle: &ReportBundle, n_models: usize) -> Result<()> {
    if let Some(t) = bundle.table("aggregates") {
        for r in &t.rows {
            println!("{}: {}", r[0], r[1]);
        }
    }
    if let Some(t) = bundle.table("tiers") {
        let total = t.column("Total").expect("tiers table has a Total column");
        for r in &t.rows {
            let want = if r[0] == "Binary" { 7 } else { 42 } * n_models;
            println!(
                "tier row {}: {} sum {} (at most {want})",
                r[0],
                Tier::ALL.iter().enumerate().map(|(i, t)| format!("{}={}", t.label(), r[i + 1])).collect::<Vec<_>>().join(" "),
                r[total]
            );
            let sum: usize = r[1..total].iter().map(|c| c.parse::<usize>().unwrap_or(0)).sum();
            if sum.to_string() != r[total] || sum > want {
                bail!("tier row {} is inconsistent", r[0]);
            }
        }
    }
    Ok(())
}

fn file_stem(spec_id: &str, severity: Option<Severity>) -> String {
    match severity {
        Some(s) => format!("{spec_id}_{s}"),
        None => spec_id.to_string(),
    }
}

const CELL: u32 = 128;
const PAD: u32 = 4;

/// Fits `img` into a CELL x CELL box on a grey background.
fn thumbnail(img: &Image) -> Image {
    let scale = CELL as f64 / img.width().max(img.height()) as f64;
    let w = ((img.width() as f64 * scale).round() as u32).clamp(1, CELL);
    let h = ((img.height() as f64 * scale).round() as u32).clamp(1, CELL);
    let small = resize(img, w, h, Filter::Bilinear);
    let (ox, oy) = ((CELL - w) / 2, (CELL - h) / 2);
    let mut out = Image::filled(CELL, CELL, [64, 64, 64]);
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(ox + x, oy + y, small.pixel(x, y));
        }
    }
    out
}

fn visualize(input: &Path, out: &Path, sample_index: u64) -> Result<()> {
    let image = Image::load(input).with_context(|| format!("reading {}", input.display()))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let seeds = SeedScheme::default();
    // Gallery: one row per augmentation, columns original, low, mid, high.
    let rows = registry().len() as u32;
    let mut gallery = Image::filled(4 * (CELL + PAD) + PAD, rows * (CELL + PAD) + PAD, [255, 255, 255]);
    let original = thumbnail(&image);
    let mut blit = |tile: &Image, col: u32, row: u32| {
        let (x0, y0) = (PAD + col * (CELL + PAD), PAD + row * (CELL + PAD));
        for y in 0..CELL {
            for x in 0..CELL {
                gallery.set_pixel(x0 + x, y0 + y, tile.pixel(x, y));
            }
        }
    };
    let mut written = 0;
    for (row, spec) in registry().iter().enumerate() {
        blit(&original, 0, row as u32);
        let sevs: Vec<Option<Severity>> = if spec.is_binary() {
            vec![None]
        } else {
            Severity::ALL.iter().copied().map(Some).collect()
        };
        for (col, sev) in sevs.into_iter().enumerate() {
            let img = apply(&image, &CorruptionConfig::new(spec.id, sev, sample_index), &seeds)?;
            let path = out.join(format!("{}.png", file_stem(spec.id, sev)));
            img.save_png(&path).with_context(|| format!("writing {}", path.display()))?;
            blit(&thumbnail(&img), col as u32 + 1, row as u32);
            written += 1;
        }
    }
    let path = out.join("gallery.png");
    gallery.save_png(&path).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {written} corrupted images and {}", path.display());
    Ok(())
}

fn sample(manifest: Option<PathBuf>, config: Option<PathBuf>, fraction: Option<f64>, seed: Option<u32>, out: Option<PathBuf>) -> Result<()> {
    let cfg = config.as_deref().map(RunConfig::load).transpose()?;
    let manifest = manifest
        .or_else(|| cfg.as_ref().map(|c| c.manifest.clone()))
        .ok_or_else(|| usage("--manifest or --config is required"))?;
    let fraction = fraction.or(cfg.as_ref().map(|c| c.fraction)).unwrap_or(0.2);
    let seed = seed
        .or(cfg.as_ref().map(|c| c.seeds.sampling_seed))
        .unwrap_or(SeedScheme::default().sampling_seed);
    if !(fraction > 0.0 && fraction <= 1.0) {
        bail!(usage(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let ds = load_manifest(&manifest)?;
    let picked = stratified_sample(&ds, fraction, seed)?;
    let mut strata: Vec<(&str, usize, usize)> = Vec::new();
    for s in &ds.samples {
        match strata.iter_mut().find(|r| r.0 == s.stratum) {
            Some(r) => r.1 += 1,
            None => strata.push((&s.stratum, 1, 0)),
        }
    }
    for s in &picked.samples {
        if let Some(r) = strata.iter_mut().find(|r| r.0 == s.stratum) {
            r.2 += 1;
        }
    }
    println!("stratum,available,selected,quota");
    for (name, n, k) in &strata {
        println!("{name},{n},{k},{}", stratum_quota(*n, fraction));
    }
    println!("total,{},{},", ds.len(), picked.len());
    if let Some(path) = out {
        let ids: String = picked.samples.iter().map(|s| format!("{}\n", s.id)).collect();
        std::fs::write(&path, ids).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
