//! AdamW, the early-stopped epoch loop, k-fold cross-validation and grid search.

mod config;
mod cv;
mod fit;
mod grid;
mod optim;

pub use config::{GridCell, GridSpec, TrainConfig};
pub use cv::{build_folds, cross_validate, select_best_fold, CVResult, FoldData, FoldOutcome, FoldSummary, Trunks};
pub use fit::{train_one, EpochRecord, TrainOutcome, MIN_IMPROVEMENT};
pub use grid::{apply_cell, grid_search, rank_entries, GridEntry, GridResult};
pub use optim::{adamw_step, AdamState, AdamW};
