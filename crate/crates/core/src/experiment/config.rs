use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataman::{DatasetManifest, SplitScheme};
use crate::error::{Error, Result};
use crate::fusion::{builtin_registry, FusionSpec, HiddenWidths, Normalization};
use crate::train::{GridSpec, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;

fn default_folds() -> usize {
    5
}

fn default_dropout() -> f64 {
    0.1
}

fn default_strategies() -> Vec<String> {
    vec!["early".to_string()]
}

/// Model topology settings shared by every strategy of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Strategies to train and evaluate; prerequisites are added automatically.
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "default_dropout")]
    pub dropout_p: f64,
    #[serde(default)]
    pub normalize: Normalization,
    /// Per-strategy hidden widths; strategies not listed use their defaults.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub widths: BTreeMap<String, HiddenWidths>,
    /// Trained unimodal checkpoints for late fusion. When both are given the
    /// unimodal models are not retrained for it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_trunk: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_trunk: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            strategies: default_strategies(),
            dropout_p: default_dropout(),
            normalize: Normalization::default(),
            widths: BTreeMap::new(),
            audio_trunk: None,
            text_trunk: None,
        }
    }
}

/// One experiment: dataset, split, models, optimizer, optional grid.
///
/// `train.seed` is ignored; every seed derives from the top-level `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Dataset directory; relative paths resolve against the config file.
    pub dataset: PathBuf,
    pub scheme: SplitScheme,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>, scheme: SplitScheme) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            dataset: dataset.into(),
            scheme,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            grid: None,
            folds: default_folds(),
            seed: 0,
            out: None,
        }
    }

    /// Reads a config, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.dataset);
        if let Some(out) = cfg.out.as_mut() {
            resolve(out);
        }
        if let Some(p) = cfg.model.audio_trunk.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.model.text_trunk.as_mut() {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save_to(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.scheme == SplitScheme::Custom {
            return Err(Error::Config("scheme must be A or B".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.model.strategies.is_empty() {
            return Err(Error::Config("no strategies requested".into()));
        }
        let registry = builtin_registry();
        for s in self.model.strategies.iter().chain(self.model.widths.keys()) {
            registry.get(s)?;
        }
        if self.model.audio_trunk.is_some() != self.model.text_trunk.is_some() {
            return Err(Error::Config("audio_trunk and text_trunk must be given together".into()));
        }
        self.train.validate()?;
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }

    /// The fusion spec of `strategy` for `manifest`'s dimensions.
    pub fn spec_for(&self, strategy: &str, manifest: &DatasetManifest) -> FusionSpec {
        let mut spec = FusionSpec::new(strategy, manifest.da, manifest.dt, manifest.class_count)
            .with_dropout(self.model.dropout_p)
            .with_normalization(self.model.normalize);
        spec.hidden_widths = self.model.widths.get(strategy).cloned();
        spec
    }
}
