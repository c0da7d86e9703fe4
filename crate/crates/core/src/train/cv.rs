use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_one, EpochRecord, TrainConfig};
use crate::dataman::{stratified_kfold, DatasetManifest, Examples};
use crate::error::{Error, Result};
use crate::fusion::{build_model, FusionModel, FusionSpec, Prerequisites};

/// Training and validation examples of one fold.
#[derive(Clone, Debug)]
pub struct FoldData {
    pub train: Examples,
    pub val: Examples,
}

/// Stratified `k`-fold partition of `train_ids`, materialized as examples.
pub fn build_folds(manifest: &DatasetManifest, train_ids: &BTreeSet<String>, k: usize, seed: u64) -> Result<Vec<FoldData>> {
    let labels = manifest.labels();
    let assignment = stratified_kfold(train_ids, &labels, k, seed)?;
    (0..k)
        .map(|f| {
            Ok(FoldData {
                train: manifest.gather(&assignment.training_ids(f))?,
                val: manifest.gather(&assignment.validation_ids(f))?,
            })
        })
        .collect()
}

/// Trained models a fold's strategy builds on.
#[derive(Clone, Copy, Debug)]
pub enum Trunks<'a> {
    None,
    /// The same prerequisites for every fold.
    Shared(&'a Prerequisites),
    /// Fold `f` uses entry `f`.
    PerFold(&'a [Prerequisites]),
}

impl Trunks<'_> {
    fn for_fold(&self, fold: usize) -> Result<Prerequisites> {
        match self {
            Trunks::None => Ok(Prerequisites::new()),
            Trunks::Shared(p) => Ok((*p).clone()),
            Trunks::PerFold(ps) => ps
                .get(fold)
                .cloned()
                .ok_or_else(|| Error::Config(format!("no prerequisite models for fold {fold}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub fold: usize,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub val_loss: f64,
    pub val_acc: f64,
    pub model: FusionModel,
}

/// Per-fold numbers of a cross-validation run, without the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug)]
pub struct CVResult {
    pub folds: Vec<FoldOutcome>,
    pub best_fold: usize,
    /// Validation accuracy of `best_fold`.
    pub selection_metric: f64,
}

impl CVResult {
    pub fn best(&self) -> &FoldOutcome {
        &self.folds[self.best_fold]
    }

    pub fn mean_val_acc(&self) -> f64 {
        self.folds.iter().map(|f| f.val_acc).sum::<f64>() / self.folds.len() as f64
    }

    pub fn mean_val_loss(&self) -> f64 {
        self.folds.iter().map(|f| f.val_loss).sum::<f64>() / self.folds.len() as f64
    }

    pub fn summaries(&self) -> Vec<FoldSummary> {
        self.folds
            .iter()
            .map(|f| FoldSummary {
                fold: f.fold,
                seed: f.seed,
                best_epoch: f.best_epoch,
                epochs_run: f.history.len(),
                val_loss: f.val_loss,
                val_acc: f.val_acc,
            })
            .collect()
    }
}

/// Highest validation accuracy, then lower validation loss, then lower index.
pub fn select_best_fold(scores: &[(f64, f64)]) -> Option<usize> {
    (0..scores.len()).reduce(|best, i| {
        let (ba, bl) = scores[best];
        let (a, l) = scores[i];
        if a > ba || (a == ba && l < bl) {
            i
        } else {
            best
        }
    })
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Trains a fresh model per fold (model and shuffle seeds `config.seed + fold`)
/// and selects the best fold. Folds run on up to `jobs` threads; the result
/// does not depend on `jobs`.
pub fn cross_validate(
    spec: &FusionSpec,
    folds: &[FoldData],
    config: &TrainConfig,
    trunks: Trunks<'_>,
    jobs: usize,
) -> Result<CVResult> {
    thread_pool(jobs)?.install(|| run_folds(spec, folds, config, trunks))
}

pub(crate) fn run_folds(spec: &FusionSpec, folds: &[FoldData], config: &TrainConfig, trunks: Trunks<'_>) -> Result<CVResult> {
    if folds.is_empty() {
        return Err(Error::Empty("fold list"));
    }
    spec.validate()?;
    config.validate()?;
    let outcomes = folds
        .par_iter()
        .enumerate()
        .map(|(f, data)| {
            let seed = config.seed.wrapping_add(f as u64);
            let model = build_model(spec, seed, &trunks.for_fold(f)?)?;
            let fold_config = TrainConfig { seed, ..config.clone() };
            let out = train_one(model, &data.train, &data.val, &fold_config)?;
            let best = out.best().clone();
            log::info!(
                "{} fold {f}: best epoch {} of {}, val acc {:.4}",
                spec.strategy,
                out.best_epoch,
                out.history.len(),
                best.val_acc
            );
            Ok(FoldOutcome {
                fold: f,
                seed,
                best_epoch: out.best_epoch,
                val_loss: best.val_loss,
                val_acc: best.val_acc,
                history: out.history,
                model: out.model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<(f64, f64)> = outcomes.iter().map(|o| (o.val_acc, o.val_loss)).collect();
    let best_fold = select_best_fold(&scores).expect("non-empty");
    Ok(CVResult {
        selection_metric: outcomes[best_fold].val_acc,
        folds: outcomes,
        best_fold,
    })
}
