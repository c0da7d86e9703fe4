use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer and epoch-loop hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-5,
            batch_size: 8,
            max_epochs: 30,
            weight_decay: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("train config: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive");
        }
        if self.patience > self.max_epochs {
            return bad("patience exceeds max_epochs");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }
}

/// Candidate values searched by [`grid_search`](super::grid_search).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub dropout_rates: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            learning_rates: vec![1e-5, 3e-5, 1e-4],
            batch_sizes: vec![8, 16, 32],
            dropout_rates: vec![0.1, 0.3, 0.5],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.batch_sizes.is_empty() || self.dropout_rates.is_empty() {
            return Err(Error::Config("grid lists must be non-empty".into()));
        }
        Ok(())
    }

    /// Cartesian product, learning rate outermost, dropout innermost.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &batch_size in &self.batch_sizes {
                for &dropout in &self.dropout_rates {
                    out.push(GridCell {
                        learning_rate,
                        batch_size,
                        dropout,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
}
