//! Fusion topologies and the registry that selects them by name.

mod model;
mod spec;
mod strategy;

pub use model::{Branch, FusionModel, ModelActivations, ModelProblem, Normalizer};
pub use spec::{FusionSpec, HiddenWidths, Modality, Normalization};
pub use strategy::{
    build_model, builtin_registry, FusionStrategy, Prerequisites, StrategyRegistry, AUDIO_ONLY, EARLY,
    INTERMEDIATE, LATE, TEXT_ONLY,
};
