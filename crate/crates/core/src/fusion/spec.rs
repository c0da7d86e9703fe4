use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Text,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Text => "text",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-modality input normalization applied before the first fusion point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Unit L2 norm per sample (vectors with norm ≤ 1e-12 pass through).
    #[default]
    L2,
    /// Per-dimension mean/std fitted on the training fold.
    ZScore,
    None,
}

/// Hidden layer widths: `branch` applies to each per-modality branch, `head`
/// to the classifier after the fusion point (the output layer is implicit).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenWidths {
    #[serde(default)]
    pub branch: Vec<usize>,
    #[serde(default)]
    pub head: Vec<usize>,
}

impl HiddenWidths {
    pub fn new(branch: &[usize], head: &[usize]) -> Self {
        HiddenWidths {
            branch: branch.to_vec(),
            head: head.to_vec(),
        }
    }
}

fn default_dropout() -> f64 {
    0.1
}

/// Declarative description of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    /// Registry name of the topology (`audio`, `text`, `early`, `intermediate`, `late`).
    pub strategy: String,
    #[serde(default)]
    pub da: usize,
    #[serde(default)]
    pub dt: usize,
    #[serde(default)]
    pub classes: usize,
    /// Overrides the strategy's default widths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_widths: Option<HiddenWidths>,
    #[serde(default = "default_dropout")]
    pub dropout_p: f64,
    #[serde(default)]
    pub normalize: Normalization,
}

impl FusionSpec {
    pub fn new(strategy: &str, da: usize, dt: usize, classes: usize) -> Self {
        FusionSpec {
            strategy: strategy.to_string(),
            da,
            dt,
            classes,
            hidden_widths: None,
            dropout_p: default_dropout(),
            normalize: Normalization::default(),
        }
    }

    pub fn with_widths(mut self, branch: &[usize], head: &[usize]) -> Self {
        self.hidden_widths = Some(HiddenWidths::new(branch, head));
        self
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    pub fn with_normalization(mut self, n: Normalization) -> Self {
        self.normalize = n;
        self
    }

    /// Same spec for another strategy (keeps dims, dropout and normalization,
    /// drops width overrides).
    pub fn for_strategy(&self, strategy: &str) -> Self {
        FusionSpec {
            strategy: strategy.to_string(),
            hidden_widths: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.da == 0 || self.dt == 0 || self.classes == 0 {
            return Err(Error::Config(format!(
                "dimensions must be positive (da={}, dt={}, classes={})",
                self.da, self.dt, self.classes
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        if let Some(w) = &self.hidden_widths {
            if w.branch.iter().chain(&w.head).any(|&x| x == 0) {
                return Err(Error::Config("hidden widths must be positive".into()));
            }
        }
        Ok(())
    }
}
