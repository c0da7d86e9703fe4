use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::dataman::{build_split, load_manifest, DatasetManifest, Examples, SplitAssignment};
use crate::error::{Error, Result};
use crate::fusion::{builtin_registry, FusionModel, FusionSpec, Prerequisites, AUDIO_ONLY, TEXT_ONLY};
use crate::metrics::{compute_metrics, confusion, results_table, Averaging, MetricsReport, ResultsTable, Scores, TableRow};
use crate::train::{
    apply_cell, build_folds, cross_validate, grid_search, CVResult, EpochRecord, FoldData, FoldSummary, GridCell,
    GridResult, TrainConfig, Trunks,
};

pub const METRICS_FILE: &str = "metrics.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.json";
pub const RESULTS_TEXT_FILE: &str = "results.txt";
pub const RESULTS_CSV_FILE: &str = "results.csv";
pub const GRID_FILE: &str = "grid.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Averaging used for headline precision/recall/F1.
pub const HEADLINE_AVERAGING: Averaging = Averaging::Weighted;

/// Which stages a run performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Optional grid search, cross-validation, test evaluation.
    Train,
    /// Grid search (default grid when the config has none) and
    /// cross-validation; the test split is not touched.
    Grid,
}

/// Cross-validation outcome of one strategy, without weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub best_fold: usize,
    pub selection_metric: f64,
    pub mean_val_acc: f64,
    pub mean_val_loss: f64,
    pub folds: Vec<FoldSummary>,
}

impl From<&CVResult> for CvSummary {
    fn from(cv: &CVResult) -> Self {
        CvSummary {
            best_fold: cv.best_fold,
            selection_metric: cv.selection_metric,
            mean_val_acc: cv.mean_val_acc(),
            mean_val_loss: cv.mean_val_loss(),
            folds: cv.summaries(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyMetrics {
    pub strategy: String,
    pub label: String,
    pub spec: FusionSpec,
    /// Hyperparameters actually used (after grid selection).
    pub train: TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_winner: Option<GridCell>,
    pub cv: CvSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Vec<Vec<u64>>>,
}

/// Every number a run produces; a function of (dataset, config, seed) only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub schema_version: u32,
    pub scheme: String,
    pub seed: u64,
    pub folds: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub strategies: Vec<StrategyMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyHeadline {
    pub strategy: String,
    pub best_fold: usize,
    pub selection_metric: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<Scores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_macro: Option<Scores>,
}

/// Run record: the effective config (enough to replay the run), the
/// selections and headline scores, and wall-clock time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub scheme: String,
    pub seed: u64,
    pub jobs: usize,
    pub averaging: Averaging,
    pub strategies: Vec<StrategyHeadline>,
    pub wall_clock_seconds: f64,
}

/// Loaded dataset with its split and folds.
pub struct PreparedData {
    pub manifest: DatasetManifest,
    pub split: SplitAssignment,
    pub folds: Vec<FoldData>,
    pub test: Examples,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let manifest = load_manifest(&cfg.dataset)?;
    let split = build_split(&manifest, cfg.scheme, cfg.seed)?;
    log::info!(
        "dataset {}: {} records, scheme {} -> {} train / {} test",
        cfg.dataset.display(),
        manifest.len(),
        cfg.scheme,
        split.train_ids.len(),
        split.test_ids.len()
    );
    let folds = build_folds(&manifest, &split.train_ids, cfg.folds, cfg.seed)?;
    let test_ids: Vec<&String> = split.test_ids.iter().collect();
    let test = manifest.gather(&test_ids)?;
    Ok(PreparedData {
        manifest,
        split,
        folds,
        test,
    })
}

/// Requested strategies preceded by their prerequisites, each once. With
/// explicit trunk checkpoints, late fusion's prerequisites are not added.
pub fn training_order(cfg: &ExperimentConfig) -> Result<Vec<&'static str>> {
    let registry = builtin_registry();
    let external = cfg.model.audio_trunk.is_some();
    let mut order = Vec::new();
    for s in &cfg.model.strategies {
        let names = if external {
            vec![registry.get(s)?.name()]
        } else {
            registry.training_order(s)?
        };
        for n in names {
            if !order.contains(&n) {
                order.push(n);
            }
        }
    }
    Ok(order)
}

fn load_trunks(cfg: &ExperimentConfig) -> Result<Option<Prerequisites>> {
    let (Some(a), Some(t)) = (&cfg.model.audio_trunk, &cfg.model.text_trunk) else {
        return Ok(None);
    };
    let mut p = Prerequisites::new();
    p.insert(AUDIO_ONLY.to_string(), FusionModel::load(a)?);
    p.insert(TEXT_ONLY.to_string(), FusionModel::load(t)?);
    Ok(Some(p))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,val_acc\n");
    for r in history {
        let _ = writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.val_acc);
    }
    out
}

/// Evaluates `model` on `examples`.
pub fn evaluate_model(model: &FusionModel, examples: &Examples) -> Result<(MetricsReport, Vec<Vec<u64>>)> {
    let preds = model.predict(examples)?;
    let m = confusion(&preds, &examples.labels, model.classes())?;
    Ok((compute_metrics(&m), m.rows()))
}

/// Table rows for every evaluated strategy of a run, labelled by scheme.
pub fn table_rows(metrics: &RunMetrics, averaging: Averaging) -> Vec<TableRow> {
    metrics
        .strategies
        .iter()
        .filter_map(|s| {
            s.test
                .as_ref()
                .map(|t| TableRow::new(&metrics.scheme, &s.label, t.scores(averaging)))
        })
        .collect()
}

pub fn grid_table(strategy: &str, grid: &GridResult) -> String {
    let mut out = format!("grid search: {strategy}\nrank  learning_rate  batch_size  dropout  mean_val_acc  mean_val_loss\n");
    for (rank, e) in grid.ranking.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>4}  {:>13e}  {:>10}  {:>7}  {:>12.4}  {:>13.6}",
            rank + 1,
            e.cell.learning_rate,
            e.cell.batch_size,
            e.cell.dropout,
            e.mean_val_acc,
            e.mean_val_loss
        );
    }
    out
}

/// Runs the experiment and writes its artifacts under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, mode: RunMode, jobs: usize, out: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let order = training_order(cfg)?;
    let external = load_trunks(cfg)?;
    let registry = builtin_registry();
    let base_train = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let grid = match mode {
        RunMode::Train => cfg.grid.clone(),
        RunMode::Grid => Some(cfg.grid.clone().unwrap_or_default()),
    };

    let mut trained: BTreeMap<&str, CVResult> = BTreeMap::new();
    let mut strategies = Vec::new();
    let mut grids = BTreeMap::new();
    for &name in &order {
        let strategy = registry.get(name)?;
        let base_spec = cfg.spec_for(name, &data.manifest);
        let per_fold: Vec<Prerequisites>;
        let trunks = if strategy.prerequisites().is_empty() {
            Trunks::None
        } else if let Some(p) = &external {
            Trunks::Shared(p)
        } else {
            per_fold = (0..data.folds.len())
                .map(|f| {
                    strategy
                        .prerequisites()
                        .iter()
                        .map(|&p| (p.to_string(), trained[p].folds[f].model.clone()))
                        .collect()
                })
                .collect();
            Trunks::PerFold(&per_fold)
        };

        let (spec, train_cfg, winner) = match &grid {
            Some(g) => {
                log::info!("{name}: grid search over {} cells", g.cells().len());
                let result = grid_search(&base_spec, &data.folds, g, &base_train, trunks, jobs)?;
                let cell = result.winner().cell;
                write_json(&out.join(name).join(GRID_FILE), &result)?;
                write_file(&out.join(name).join("grid.txt"), &grid_table(name, &result))?;
                grids.insert(name.to_string(), result);
                let (s, c) = apply_cell(&base_spec, &base_train, &cell);
                (s, c, Some(cell))
            }
            None => (base_spec, base_train.clone(), None),
        };

        log::info!("{name}: {}-fold cross-validation", data.folds.len());
        let cv = cross_validate(&spec, &data.folds, &train_cfg, trunks, jobs)?;
        let dir = out.join(name);
        for f in &cv.folds {
            write_file(&dir.join(format!("fold{}_history.csv", f.fold)), &history_csv(&f.history))?;
        }
        let best = &cv.best().model;
        best.save(&dir.join(CHECKPOINT_FILE))?;

        let (test, conf) = match mode {
            RunMode::Train => {
                if data.test.is_empty() {
                    log::warn!("test split is empty");
                }
                let (report, conf) = evaluate_model(best, &data.test)?;
                log::info!("{name}: test accuracy {:.4} over {} samples", report.accuracy, report.count);
                (Some(report), Some(conf))
            }
            RunMode::Grid => (None, None),
        };
        strategies.push(StrategyMetrics {
            strategy: name.to_string(),
            label: strategy.label().to_string(),
            spec,
            train: train_cfg,
            grid_winner: winner,
            cv: CvSummary::from(&cv),
            test,
            confusion: conf,
        });
        trained.insert(name, cv);
    }

    let metrics = RunMetrics {
        schema_version: super::SCHEMA_VERSION,
        scheme: cfg.scheme.label().to_string(),
        seed: cfg.seed,
        folds: cfg.folds,
        train_count: data.split.train_ids.len(),
        test_count: data.split.test_ids.len(),
        strategies,
    };
    cfg.save_to(&out.join(CONFIG_SNAPSHOT_FILE))?;
    match mode {
        RunMode::Train => {
            write_json(&out.join(METRICS_FILE), &metrics)?;
            let table = results_table(table_rows(&metrics, HEADLINE_AVERAGING), None);
            write_results(out, &table)?;
        }
        RunMode::Grid => write_json(&out.join(GRID_FILE), &grids)?,
    }

    let summary = RunSummary {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        scheme: metrics.scheme.clone(),
        seed: cfg.seed,
        jobs,
        averaging: HEADLINE_AVERAGING,
        strategies: metrics
            .strategies
            .iter()
            .map(|s| StrategyHeadline {
                strategy: s.strategy.clone(),
                best_fold: s.cv.best_fold,
                selection_metric: s.cv.selection_metric,
                test: s.test.as_ref().map(|t| t.scores(Averaging::Weighted)),
                test_macro: s.test.as_ref().map(|t| t.scores(Averaging::Macro)),
            })
            .collect(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn write_results(out: &Path, table: &ResultsTable) -> Result<()> {
    write_file(&out.join(RESULTS_TEXT_FILE), &table.to_text())?;
    write_file(&out.join(RESULTS_CSV_FILE), &table.to_csv())
}

pub fn load_metrics(run_dir: &Path) -> Result<RunMetrics> {
    let path = run_dir.join(METRICS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Checkpoint path of `strategy` in a run directory.
pub fn checkpoint_path(run_dir: &Path, strategy: &str) -> PathBuf {
    run_dir.join(strategy).join(CHECKPOINT_FILE)
}
