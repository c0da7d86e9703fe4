use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AdamW, TrainConfig};
use crate::dataman::Examples;
use crate::error::{Error, Result};
use crate::fusion::FusionModel;
use crate::numcore::{seeded_stream, softmax_cross_entropy};

/// Validation loss must drop by more than this to count as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

const SHUFFLE_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Sample-weighted mean of the training-mode batch losses.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights from `best_epoch`.
    pub model: FusionModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch - 1]
    }
}

/// Trains `model` on `train`, validating after every epoch, and returns the
/// weights with the lowest validation loss.
pub fn train_one(mut model: FusionModel, train: &Examples, val: &Examples, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    model.fit_normalization(train);
    let mut optimizer = AdamW::new(&model.dense_layers(), config);
    let mut shuffle_rng = seeded_stream(config.seed, SHUFFLE_STREAM);
    let mut dropout_rng = seeded_stream(config.seed, DROPOUT_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, usize, FusionModel)> = None;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = train.select(chunk);
            let (logits, cache) = model.forward_cached(&batch.acoustic, &batch.text, Some(&mut dropout_rng))?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &batch.labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            loss_sum += loss * chunk.len() as f64;
            let grads = model.backward(&cache, &dlogits)?;
            optimizer.step(model.dense_layers_mut(), &grads)?;
        }
        let (val_loss, val_acc) = model.evaluate(val)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            val_acc,
        });
        log::debug!("epoch {epoch}: train {:.6} val {val_loss:.6} acc {val_acc:.4}", loss_sum / train.len() as f64);

        let improved = match &best {
            None => true,
            Some((b, _, _)) => val_loss < b - MIN_IMPROVEMENT,
        };
        if improved {
            best = Some((val_loss, epoch, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }

    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        stopped_early,
    })
}
