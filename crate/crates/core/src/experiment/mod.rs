//! Experiment configs and the split → folds → grid → CV → test pipeline.

mod config;
mod run;

pub use config::{ExperimentConfig, ModelConfig, SCHEMA_VERSION};
pub use run::{
    checkpoint_path, evaluate_model, grid_table, history_csv, load_metrics, prepare_data, run_experiment,
    table_rows, training_order, write_results, CvSummary, PreparedData, RunMetrics, RunMode, RunSummary,
    StrategyHeadline, StrategyMetrics, CHECKPOINT_FILE, CONFIG_SNAPSHOT_FILE, GRID_FILE, HEADLINE_AVERAGING,
    METRICS_FILE, RESULTS_CSV_FILE, RESULTS_TEXT_FILE, SUMMARY_FILE,
};
