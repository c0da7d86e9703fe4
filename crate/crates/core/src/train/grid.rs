use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{run_folds, thread_pool, FoldData, FoldSummary, Trunks};
use super::{GridCell, GridSpec, TrainConfig};
use crate::error::Result;
use crate::fusion::FusionSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    /// Position in [`GridSpec::cells`] order.
    pub index: usize,
    pub cell: GridCell,
    pub mean_val_acc: f64,
    pub mean_val_loss: f64,
    pub best_fold: usize,
    pub folds: Vec<FoldSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Best first: mean validation accuracy descending, then mean validation
    /// loss ascending, then grid order.
    pub ranking: Vec<GridEntry>,
}

impl GridResult {
    pub fn winner(&self) -> &GridEntry {
        &self.ranking[0]
    }
}

/// `config` and `spec` with a grid cell's values substituted.
pub fn apply_cell(spec: &FusionSpec, config: &TrainConfig, cell: &GridCell) -> (FusionSpec, TrainConfig) {
    let spec = FusionSpec {
        dropout_p: cell.dropout,
        ..spec.clone()
    };
    let config = TrainConfig {
        learning_rate: cell.learning_rate,
        batch_size: cell.batch_size,
        ..config.clone()
    };
    (spec, config)
}

pub fn rank_entries(entries: &mut [GridEntry]) {
    entries.sort_by(|a, b| {
        b.mean_val_acc
            .partial_cmp(&a.mean_val_acc)
            .unwrap_or(Ordering::Equal)
            .then(a.mean_val_loss.partial_cmp(&b.mean_val_loss).unwrap_or(Ordering::Equal))
            .then(a.index.cmp(&b.index))
    });
}

/// Cross-validates every cell of `grid` and ranks the cells.
pub fn grid_search(
    spec: &FusionSpec,
    folds: &[FoldData],
    grid: &GridSpec,
    config: &TrainConfig,
    trunks: Trunks<'_>,
    jobs: usize,
) -> Result<GridResult> {
    grid.validate()?;
    let cells = grid.cells();
    let mut entries = thread_pool(jobs)?.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(index, cell)| {
                let (spec, config) = apply_cell(spec, config, cell);
                let cv = run_folds(&spec, folds, &config, trunks)?;
                Ok(GridEntry {
                    index,
                    cell: *cell,
                    mean_val_acc: cv.mean_val_acc(),
                    mean_val_loss: cv.mean_val_loss(),
                    best_fold: cv.best_fold,
                    folds: cv.summaries(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rank_entries(&mut entries);
    Ok(GridResult { ranking: entries })
}
