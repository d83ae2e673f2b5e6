//! coreprune: command-line front end over the library pipeline.
//!
//! Every subcommand writes a `manifest.json` into its output directory
//! before the stage outputs themselves, recording the tool version, the
//! seeds and seed-chain labels in play, and the content digests of every
//! input consumed. Outputs are pure functions of (inputs, flags, seed);
//! only the manifest timestamp is exempt from that guarantee.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coreprune::atomic::{export_atomic, read_inter, write_inter};
use coreprune::characteristics::characterize;
use coreprune::corefilter::{prune, retention, PruneMode};
use coreprune::eval::{default_metrics, MetricSpec};
use coreprune::grid::{run_grid, GridConfig, GridDataset, GridOutcome};
use coreprune::ingest::{binarize, build_log, parse_log, InputFormat};
use coreprune::log::{downsample, InteractionLog};
use coreprune::recommend::RecommenderSpec;
use coreprune::report::{emit_tables, Table};
use coreprune::seed::derive_u64;
use coreprune::split::{build_phase2_test, split_per_user};
use coreprune::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "coreprune",
    version,
    about = "Dataset pruning pipeline for implicit-feedback recommendation logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw interaction file into the atomic format.
    Ingest(IngestArgs),
    /// Materialise pruned variants at one or more thresholds.
    Prune(PruneArgs),
    /// Characterise a log, optionally with retention against a baseline.
    Stats(StatsArgs),
    /// Produce train/test pairs for either evaluation phase.
    Split(SplitArgs),
    /// Run the full grid: levels x algorithms x metrics, both phases.
    Run(RunArgs),
    /// Render CSV tables from a finished run.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Tsv,
    Atomic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    User,
    Item,
    Recursive,
}

impl From<ModeArg> for PruneMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::User => PruneMode::UserThreshold,
            ModeArg::Item => PruneMode::ItemThreshold,
            ModeArg::Recursive => PruneMode::RecursiveCore,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Raw interaction file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Ratings at or above this become positive interactions; rows below
    /// are dropped. Ignored for files without a rating column.
    #[arg(long, default_value_t = 4.0)]
    rating_threshold: f64,
    /// Keep at most this many interactions (seeded uniform downsample).
    #[arg(long, default_value_t = 3_000_000)]
    sample_cap: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PruneArgs {
    /// Atomic interaction file to prune.
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated thresholds, e.g. 0,5,10,20.
    #[arg(long, value_delimiter = ',', required = true)]
    cores: Vec<u32>,
    #[arg(long, value_enum, default_value = "user")]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Unpruned log to compute retention against.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Coreset to split (atomic format).
    #[arg(long = "in")]
    input: PathBuf,
    /// 1 = holdout from the coreset itself; 2 = test drawn from the
    /// unpruned pool, sized like the phase-1 holdout.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    phase: u8,
    /// Unpruned log the phase-2 test is sampled from.
    #[arg(long, required_if_eq("phase", "2"))]
    zero_core: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Pruning threshold the input was built with (recorded as metadata).
    #[arg(long, default_value_t = 0)]
    core_t: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset as name=path.inter; repeat for several datasets.
    #[arg(long, required = true)]
    data: Vec<String>,
    /// Pipeline config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated algorithm names; defaults to all six.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Comma-separated metric labels like nDCG@10; defaults to
    /// nDCG/Precision/Recall at the config's top_k.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for grid cells; results are identical at any value.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a `coreprune run` (reads outcome.json).
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Prune(args) => cmd_prune(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Split(args) => cmd_split(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Provenance record written into every output directory, ahead of the
/// stage outputs it describes.
#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    /// Wall-clock creation time; excluded from the determinism contract.
    created_unix: u64,
    seed: Option<u64>,
    config_hash: Option<String>,
    /// Labelled derivation chains applied to the seed, as patterns.
    seed_chains: Vec<String>,
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    digest: String,
}

impl Manifest {
    fn new(command: &'static str) -> Self {
        Manifest {
            tool: "coreprune",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed: None,
            config_hash: None,
            seed_chains: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn input(mut self, path: &Path, log: &InteractionLog) -> Self {
        self.inputs.push(ManifestInput {
            path: path.display().to_string(),
            digest: log.digest(),
        });
        self
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn read_log(path: &Path) -> Result<Arc<InteractionLog>> {
    Ok(Arc::new(read_inter(path).with_context(|| {
        format!("reading {}", path.display())
    })?))
}

/// Hex SHA-256 of a file's raw bytes, for manifest provenance.
fn file_digest(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    let mut file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    std::io::copy(&mut file, &mut hasher)?;
    Ok(format!("{:x}", hasher.finalize()))
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let file = fs::File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let format = match args.format {
        FormatArg::Csv => InputFormat::csv(),
        FormatArg::Tsv => InputFormat::tsv(),
        FormatArg::Atomic => InputFormat::atomic(),
    };
    let records = parse_log(std::io::BufReader::new(file), &format);
    let log = build_log(binarize(records, args.rating_threshold))?;
    let capped = downsample(&log, args.sample_cap, derive_u64(args.seed, &["downsample"]))?;

    let mut manifest = Manifest::new("ingest");
    manifest.seed = Some(args.seed);
    manifest.seed_chains = vec!["downsample".into()];
    manifest.inputs.push(ManifestInput {
        path: args.input.display().to_string(),
        digest: file_digest(&args.input)?,
    });
    manifest.outputs = vec!["interactions.inter".into()];
    manifest.write(&args.out)?;

    let out_path = args.out.join("interactions.inter");
    write_inter(&capped, &out_path)?;
    println!(
        "ingested {} interactions ({} users, {} items) -> {}",
        capped.n_interactions(),
        capped.n_users(),
        capped.n_items(),
        out_path.display()
    );
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> Result<()> {
    let log = read_log(&args.input)?;
    let mode: PruneMode = args.mode.into();

    let manifest = {
        let mut m = Manifest::new("prune").input(&args.input, &log);
        m.outputs = args
            .cores
            .iter()
            .map(|t| format!("t{t}/interactions.inter"))
            .collect();
        m
    };
    manifest.write(&args.out)?;

    for &t in &args.cores {
        let coreset = prune(&log, t, mode)?;
        let dir = args.out.join(format!("t{t}"));
        fs::create_dir_all(&dir)?;
        write_inter(&coreset.log, &dir.join("interactions.inter"))?;
        println!(
            "t={t} ({mode}): {} interactions, {} users, {} items",
            coreset.log.n_interactions(),
            coreset.log.n_users(),
            coreset.log.n_items()
        );
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let log = read_log(&args.input)?;
    let baseline = args.baseline.as_deref().map(read_log).transpose()?;

    let mut manifest = Manifest::new("stats").input(&args.input, &log);
    if let (Some(path), Some(base)) = (&args.baseline, &baseline) {
        manifest = manifest.input(path, base);
    }
    manifest.outputs = vec!["characteristics.json".into()];
    if baseline.is_some() {
        manifest.outputs.push("retention.json".into());
    }
    manifest.write(&args.out)?;

    let report = characterize(&log)?;
    fs::write(
        args.out.join("characteristics.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "{} interactions over {} users x {} items; sparsity {:.4}%",
        report.n_interactions,
        report.n_users,
        report.n_items,
        100.0 * report.sparsity
    );
    if let Some(base) = baseline {
        let kept = retention(&base, &log)?;
        fs::write(
            args.out.join("retention.json"),
            serde_json::to_string_pretty(&kept)?,
        )?;
        println!(
            "retained {:.2}% users, {:.2}% items, {:.2}% interactions",
            kept.user_retention_pct, kept.item_retention_pct, kept.interaction_retention_pct
        );
    }
    Ok(())
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let log = read_log(&args.input)?;
    let stem = args
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("split")
        .to_string();

    let mut manifest = Manifest::new("split").input(&args.input, &log);
    manifest.seed = Some(args.seed);
    manifest.outputs = vec![
        format!("{stem}.train.inter"),
        format!("{stem}.test.inter"),
    ];

    match args.phase {
        1 => {
            manifest.seed_chains = vec!["<seed> directly".into()];
            manifest.write(&args.out)?;
            let pair = split_per_user(&log, args.train_fraction, args.core_t, args.seed)?;
            let paths = export_atomic(&pair, &args.out, &stem)?;
            println!(
                "phase 1: {} train / {} test -> {}, {}",
                pair.train.n_interactions(),
                pair.test.n_interactions(),
                paths.train.display(),
                paths.test.display()
            );
        }
        2 => {
            let zero_path = args.zero_core.as_ref().expect("enforced by clap");
            let zero = read_log(zero_path)?;
            manifest = manifest.input(zero_path, &zero);
            manifest.seed_chains = vec!["<seed> directly".into(), "phase2".into()];
            manifest.write(&args.out)?;

            // The phase-1 split fixes the training rows and the test
            // size; the phase-2 sample replaces the test content.
            let pair = split_per_user(&log, args.train_fraction, args.core_t, args.seed)?;
            let target = pair.test.n_interactions();
            let test = build_phase2_test(
                &zero,
                &pair.train,
                target,
                derive_u64(args.seed, &["phase2"]),
            )?;
            fs::create_dir_all(&args.out)?;
            let train_path = args.out.join(format!("{stem}.train.inter"));
            let test_path = args.out.join(format!("{stem}.test.inter"));
            write_inter(&pair.train, &train_path)?;
            write_inter(&test, &test_path)?;
            println!(
                "phase 2: {} train / {} test -> {}, {}",
                pair.train.n_interactions(),
                test.n_interactions(),
                train_path.display(),
                test_path.display()
            );
        }
        _ => unreachable!("clap bounds the phase"),
    }
    Ok(())
}

fn parse_data_arg(arg: &str) -> Result<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => bail!("--data expects name=path.inter, got {arg:?}"),
    }
}

fn write_ndjson<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut file, &row)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::from_json(
            &fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
        )?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;

    let algorithms: Vec<RecommenderSpec> = match &args.algorithms {
        Some(names) => names
            .iter()
            .map(|name| RecommenderSpec::by_name(name.trim()))
            .collect::<coreprune::Result<_>>()?,
        None => RecommenderSpec::default_suite(),
    };
    let metrics: Vec<MetricSpec> = match &args.metrics {
        Some(labels) => labels
            .iter()
            .map(|label| MetricSpec::parse(label.trim()))
            .collect::<coreprune::Result<_>>()?,
        None => default_metrics(config.top_k),
    };

    let mut datasets = Vec::new();
    let mut manifest = Manifest::new("run");
    manifest.seed = Some(config.seed);
    manifest.config_hash = Some(config.config_hash());
    manifest.seed_chains = vec![
        "split/<dataset>/<level>".into(),
        "phase2/<dataset>/<level>".into(),
        "fit/<dataset>/<level>/<algorithm>".into(),
    ];
    for arg in &args.data {
        let (name, path) = parse_data_arg(arg)?;
        let log = read_log(&path)?;
        manifest = manifest.input(&path, &log);
        datasets.push(GridDataset { name, log });
    }
    manifest.outputs = [
        "outcome.json",
        "records.ndjson",
        "records_pivot.csv",
        "characteristics.ndjson",
        "retention.ndjson",
        "warnings.ndjson",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    manifest.write(&args.out)?;

    let grid_config = GridConfig {
        core_levels: config.core_levels.clone(),
        train_fraction: config.train_fraction,
        algorithms,
        metrics,
        seed: config.seed,
        jobs: args.jobs,
    };
    let outcome = run_grid(&datasets, &grid_config)?;
    if outcome.records.is_empty() {
        // Keep the warnings on disk for diagnosis, then fail loudly.
        write_ndjson(&args.out.join("warnings.ndjson"), &outcome.warnings)?;
        bail!(
            "every grid cell failed ({} warnings in warnings.ndjson)",
            outcome.warnings.len()
        );
    }

    fs::write(
        args.out.join("outcome.json"),
        serde_json::to_string_pretty(&outcome)?,
    )?;
    write_ndjson(&args.out.join("records.ndjson"), &outcome.records)?;
    write_ndjson(
        &args.out.join("characteristics.ndjson"),
        &outcome.coresets,
    )?;
    #[derive(Serialize)]
    struct RetentionRow<'a> {
        dataset: &'a str,
        core_t: u32,
        user_retention_pct: f64,
        item_retention_pct: f64,
        interaction_retention_pct: f64,
    }
    write_ndjson(
        &args.out.join("retention.ndjson"),
        outcome.coresets.iter().map(|c| RetentionRow {
            dataset: &c.dataset,
            core_t: c.core_t,
            user_retention_pct: c.retention.user_retention_pct,
            item_retention_pct: c.retention.item_retention_pct,
            interaction_retention_pct: c.retention.interaction_retention_pct,
        }),
    )?;
    write_ndjson(&args.out.join("warnings.ndjson"), &outcome.warnings)?;
    write_pivot(&outcome, &grid_config.metrics, &args.out.join("records_pivot.csv"))?;

    println!(
        "{} records, {} coresets, {} warnings -> {}",
        outcome.records.len(),
        outcome.coresets.len(),
        outcome.warnings.len(),
        args.out.display()
    );
    for warning in &outcome.warnings {
        eprintln!(
            "warning: {} t={} phase={:?} algorithm={:?}: {}",
            warning.dataset, warning.core_t, warning.phase, warning.algorithm, warning.message
        );
    }
    Ok(())
}

/// One row per (dataset, level, phase, algorithm), metrics as columns.
fn write_pivot(outcome: &GridOutcome, metrics: &[MetricSpec], path: &Path) -> Result<()> {
    let labels: Vec<String> = metrics.iter().map(|m| m.label()).collect();
    let mut headers = vec![
        "dataset".to_string(),
        "core_t".to_string(),
        "phase".to_string(),
        "algorithm".to_string(),
    ];
    headers.extend(labels.iter().cloned());
    let mut table = Table::new(headers);

    let mut keys: Vec<(&str, u32, u8, &str)> = outcome
        .records
        .iter()
        .map(|r| (r.dataset.as_str(), r.core_t, r.phase, r.algorithm.as_str()))
        .collect();
    keys.dedup();
    for (dataset, core_t, phase, algorithm) in keys {
        let mut row = vec![
            dataset.to_string(),
            core_t.to_string(),
            phase.to_string(),
            algorithm.to_string(),
        ];
        for label in &labels {
            let cell = outcome
                .records
                .iter()
                .find(|r| {
                    r.dataset == dataset
                        && r.core_t == core_t
                        && r.phase == phase
                        && r.algorithm == algorithm
                        && r.metric == *label
                })
                .map(|r| r.value.to_string())
                .unwrap_or_default();
            row.push(cell);
        }
        table.push_row(row);
    }
    table.write_csv(path)?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let outcome_path = args.results.join("outcome.json");
    let outcome: GridOutcome = serde_json::from_str(
        &fs::read_to_string(&outcome_path)
            .with_context(|| format!("reading {}", outcome_path.display()))?,
    )?;

    let mut manifest = Manifest::new("report");
    manifest.inputs.push(ManifestInput {
        path: outcome_path.display().to_string(),
        digest: format!("{} records", outcome.records.len()),
    });
    manifest.write(&args.out)?;

    let bundle = emit_tables(&outcome, &args.out)?;
    println!("wrote {} tables to {}", bundle.files.len(), args.out.display());
    for note in &bundle.notes {
        println!("note: {note}");
    }
    Ok(())
}
