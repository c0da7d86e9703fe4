//! Command-line interface.

use std::path::{Path, PathBuf};
use std::process::Command;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audioprep::{prep_tree, PrepConfig, PrepReport};
use crate::dataman::{build_split, load_manifest, save_manifest, SplitScheme};
use crate::error::{Error, Result};
use crate::experiment::{
    evaluate_model, load_metrics, run_experiment, table_rows, write_results, ExperimentConfig, RunMode, RunSummary,
};
use crate::fusion::FusionModel;
use crate::metrics::{results_table, Averaging, MetricsReport, Scores, TableRow};
use crate::synth::{two_factor, TwoFactorConfig};

/// Environment variable naming the extractor command.
pub const EXTRACTOR_ENV: &str = "PHONEFUSE_EXTRACTOR";
pub const DEFAULT_EXTRACTOR: &str = "python3 -m extractor";

#[derive(Debug, Parser)]
#[command(name = "phonefuse", version, about = "Multimodal mispronunciation detection experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Standardize a WAV tree to 16 kHz mono 4 s clips.
    Prep(PrepArgs),
    /// Build an embedding dataset with the external extractor.
    Extract(ExtractArgs),
    /// Split, cross-validate, select and evaluate on the test split.
    Train(RunArgs),
    /// Grid search and cross-validation only.
    Grid(RunArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Merge the results of finished runs into one table.
    Report(ReportArgs),
    /// Write a synthetic two-factor dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    pub seconds: f64,
    /// Enable the RMS noise gate.
    #[arg(long)]
    pub gate: bool,
    #[arg(long, default_value_t = -40.0, allow_hyphen_values = true)]
    pub gate_db: f64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Extractor command prefix (whitespace separated); falls back to
    /// $PHONEFUSE_EXTRACTOR, then `python3 -m extractor`.
    #[arg(long)]
    pub extractor: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<SplitScheme>,
    /// Comma-separated strategies (audio, text, early, intermediate, late).
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    #[default]
    Test,
    Train,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = parse_scheme, default_value = "A")]
    pub scheme: SplitScheme,
    #[arg(long, value_enum, default_value_t = EvalSplit::Test)]
    pub split: EvalSplit,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the full report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories containing metrics.json.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = AveragingArg::Weighted)]
    pub averaging: AveragingArg,
    /// Reference row: DATASET,METHOD,ACCURACY,PRECISION,RECALL,F1
    #[arg(long)]
    pub baseline: Option<String>,
    /// Write results.txt and results.csv here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AveragingArg {
    Macro,
    Weighted,
}

impl From<AveragingArg> for Averaging {
    fn from(a: AveragingArg) -> Self {
        match a {
            AveragingArg::Macro => Averaging::Macro,
            AveragingArg::Weighted => Averaging::Weighted,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub da: usize,
    #[arg(long, default_value_t = 16)]
    pub dt: usize,
    #[arg(long, default_value_t = 0.08)]
    pub noise: f64,
}

fn parse_scheme(s: &str) -> std::result::Result<SplitScheme, String> {
    match s.parse::<SplitScheme>() {
        Ok(SplitScheme::Custom) | Err(_) => Err(format!("expected A or B, got `{s}`")),
        Ok(v) => Ok(v),
    }
}

pub fn cmd_prep(args: &PrepArgs) -> Result<PrepReport> {
    let cfg = PrepConfig {
        seconds: args.seconds,
        gate: args.gate,
        gate_threshold_db: args.gate_db,
    };
    let report = prep_tree(&args.input, &args.out, &cfg)?;
    log::info!("prepared {} files, skipped {}", report.written.len(), report.skipped.len());
    Ok(report)
}

/// Runs the extractor and validates what it wrote.
pub fn cmd_extract(args: &ExtractArgs) -> Result<usize> {
    let command = args
        .extractor
        .clone()
        .or_else(|| std::env::var(EXTRACTOR_ENV).ok())
        .unwrap_or_else(|| DEFAULT_EXTRACTOR.to_string());
    let mut parts = command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty extractor command".into()))?;
    log::info!("running extractor `{command}`");
    let status = Command::new(program)
        .args(parts)
        .arg("extract")
        .arg("--in")
        .arg(&args.input)
        .arg("--out")
        .arg(&args.out)
        .arg("--config")
        .arg(&args.config)
        .status()
        .map_err(|e| Error::io(program, e))?;
    if !status.success() {
        return Err(Error::InvalidArgument(format!("extractor exited with {status}")));
    }
    let manifest = load_manifest(&args.out)?;
    log::info!(
        "extracted {} records (da={}, dt={}, {} classes)",
        manifest.len(),
        manifest.da,
        manifest.dt,
        manifest.class_count
    );
    Ok(manifest.len())
}

/// Loads the config and applies command-line overrides.
pub fn resolve_run_config(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(scheme) = args.scheme {
        cfg.scheme = scheme;
    }
    if !args.strategy.is_empty() {
        cfg.model.strategies = args.strategy.clone();
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("no output directory (set `out` or pass --out)".into()))?;
    Ok((cfg, out))
}

pub fn cmd_train(args: &RunArgs) -> Result<RunSummary> {
    let (cfg, out) = resolve_run_config(args)?;
    run_experiment(&cfg, RunMode::Train, args.jobs, &out)
}

pub fn cmd_grid(args: &RunArgs) -> Result<RunSummary> {
    let (cfg, out) = resolve_run_config(args)?;
    run_experiment(&cfg, RunMode::Grid, args.jobs, &out)
}

/// Evaluates a checkpoint on one split of a dataset.
pub fn cmd_eval(
    checkpoint: &Path,
    dataset: &Path,
    scheme: SplitScheme,
    split: EvalSplit,
    seed: u64,
) -> Result<MetricsReport> {
    let model = FusionModel::load(checkpoint)?;
    let manifest = load_manifest(dataset)?;
    let spec = &model.spec;
    if (spec.da, spec.dt, spec.classes) != (manifest.da, manifest.dt, manifest.class_count) {
        return Err(Error::Dimension(format!(
            "checkpoint expects da={}, dt={}, {} classes; dataset has da={}, dt={}, {} classes",
            spec.da, spec.dt, spec.classes, manifest.da, manifest.dt, manifest.class_count
        )));
    }
    let ids: Vec<String> = match split {
        EvalSplit::All => manifest.records.iter().map(|r| r.sample_id.clone()).collect(),
        EvalSplit::Train | EvalSplit::Test => {
            let s = build_split(&manifest, scheme, seed)?;
            let set = if split == EvalSplit::Train { s.train_ids } else { s.test_ids };
            set.into_iter().collect()
        }
    };
    if ids.is_empty() {
        log::warn!("evaluation split is empty");
    }
    let examples = manifest.gather(&ids)?;
    Ok(evaluate_model(&model, &examples)?.0)
}

fn parse_baseline(s: &str) -> Result<TableRow> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(Error::InvalidArgument(format!("baseline `{s}` needs 6 comma-separated fields")));
    }
    let num = |i: usize| {
        parts[i]
            .parse::<f64>()
            .map_err(|e| Error::InvalidArgument(format!("baseline field `{}`: {e}", parts[i])))
    };
    Ok(TableRow::baseline(
        parts[0],
        parts[1],
        Scores::new(num(2)?, num(3)?, num(4)?, num(5)?),
    ))
}

pub fn cmd_report(args: &ReportArgs) -> Result<String> {
    let mut rows = Vec::new();
    for run in &args.runs {
        rows.extend(table_rows(&load_metrics(run)?, args.averaging.into()));
    }
    let baseline = args.baseline.as_deref().map(parse_baseline).transpose()?;
    let table = results_table(rows, baseline);
    if let Some(out) = &args.out {
        write_results(out, &table)?;
    }
    Ok(table.to_text())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<usize> {
    let cfg = TwoFactorConfig {
        da: args.da,
        dt: args.dt,
        noise: args.noise,
        seed: args.seed,
        ..TwoFactorConfig::default()
    };
    let manifest = two_factor(&cfg)?;
    save_manifest(&manifest, &args.out)?;
    Ok(manifest.len())
}

fn print_report(report: &MetricsReport) {
    let w = report.scores(Averaging::Weighted);
    let m = report.scores(Averaging::Macro);
    println!("samples   {}", report.count);
    println!("accuracy  {:.4}", report.accuracy);
    println!("weighted  precision {:.4}  recall {:.4}  f1 {:.4}", w.precision, w.recall, w.f1);
    println!("macro     precision {:.4}  recall {:.4}  f1 {:.4}", m.precision, m.recall, m.f1);
}

fn print_summary(summary: &RunSummary) {
    for s in &summary.strategies {
        match &s.test {
            Some(t) => println!(
                "{:<13} best fold {}  val acc {:.4}  test acc {:.4}  f1 {:.4}",
                s.strategy, s.best_fold, s.selection_metric, t.accuracy, t.f1
            ),
            None => println!("{:<13} best fold {}  val acc {:.4}", s.strategy, s.best_fold, s.selection_metric),
        }
    }
    println!("wall clock {:.1} s", summary.wall_clock_seconds);
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Prep(a) => {
            let r = cmd_prep(&a)?;
            println!("{} written, {} skipped", r.written.len(), r.skipped.len());
        }
        Cmd::Extract(a) => {
            let n = cmd_extract(&a)?;
            println!("{n} records in {}", a.out.display());
        }
        Cmd::Train(a) => print_summary(&cmd_train(&a)?),
        Cmd::Grid(a) => print_summary(&cmd_grid(&a)?),
        Cmd::Eval(a) => {
            let report = cmd_eval(&a.checkpoint, &a.dataset, a.scheme, a.split, a.seed)?;
            print_report(&report);
            if let Some(out) = &a.out {
                let text = serde_json::to_string_pretty(&report)? + "\n";
                std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
            }
        }
        Cmd::Report(a) => print!("{}", cmd_report(&a)?),
        Cmd::Synth(a) => {
            let n = cmd_synth(&a)?;
            println!("{n} records in {}", a.out.display());
        }
    }
    Ok(())
}
