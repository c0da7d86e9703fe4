use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::model::{Branch, FusionModel, Normalizer};
use super::spec::{FusionSpec, HiddenWidths, Modality};
use crate::error::{Error, Result};
use crate::numcore::{seeded_rng, DenseLayer, Layer, SeededRng, Stack};

pub const AUDIO_ONLY: &str = "audio";
pub const TEXT_ONLY: &str = "text";
pub const EARLY: &str = "early";
pub const INTERMEDIATE: &str = "intermediate";
pub const LATE: &str = "late";

/// Trained models a strategy depends on, keyed by strategy name.
pub type Prerequisites = BTreeMap<String, FusionModel>;

/// One model topology, selectable by name.
pub trait FusionStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Human-readable name for tables.
    fn label(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn default_widths(&self) -> HiddenWidths;

    /// Strategies that must be trained before this one can be built.
    fn prerequisites(&self) -> &'static [&'static str] {
        &[]
    }

    /// Builds a fresh model. Layers are initialized in parameter order from `rng`.
    fn build(&self, spec: &FusionSpec, rng: &mut SeededRng, prereqs: &Prerequisites) -> Result<FusionModel>;
}

/// Name → strategy table used by configs and the CLI.
pub struct StrategyRegistry {
    strategies: BTreeMap<&'static str, Box<dyn FusionStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            strategies: BTreeMap::new(),
        }
    }

    /// The five built-in topologies.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Unimodal(Modality::Audio)));
        r.register(Box::new(Unimodal(Modality::Text)));
        r.register(Box::new(EarlyFusion));
        r.register(Box::new(IntermediateFusion));
        r.register(Box::new(LateFusion));
        r
    }

    /// Registers a strategy, replacing any previous one with the same name.
    pub fn register(&mut self, strategy: Box<dyn FusionStrategy>) {
        self.strategies.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn FusionStrategy> {
        self.strategies
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }

    /// `name` preceded by its prerequisites (depth first, no duplicates).
    pub fn training_order(&self, name: &str) -> Result<Vec<&'static str>> {
        fn visit(
            reg: &StrategyRegistry,
            name: &str,
            out: &mut Vec<&'static str>,
            stack: &mut Vec<String>,
        ) -> Result<()> {
            if stack.iter().any(|s| s == name) {
                return Err(Error::Config(format!("strategy `{name}` depends on itself")));
            }
            let s = reg.get(name)?;
            stack.push(name.to_string());
            for p in s.prerequisites() {
                visit(reg, p, out, stack)?;
            }
            stack.pop();
            if !out.contains(&s.name()) {
                out.push(s.name());
            }
            Ok(())
        }
        let mut out = Vec::new();
        visit(self, name, &mut out, &mut Vec::new())?;
        Ok(out)
    }

    pub fn build(&self, spec: &FusionSpec, seed: u64, prereqs: &Prerequisites) -> Result<FusionModel> {
        spec.validate()?;
        let strategy = self.get(&spec.strategy)?;
        let mut rng = seeded_rng(seed);
        let mut model = strategy.build(spec, &mut rng, prereqs)?;
        model.init_seed = seed;
        model.check_structure()?;
        Ok(model)
    }
}

pub fn builtin_registry() -> &'static StrategyRegistry {
    static REGISTRY: OnceLock<StrategyRegistry> = OnceLock::new();
    REGISTRY.get_or_init(StrategyRegistry::with_builtins)
}

/// Builds `spec` with the built-in registry.
pub fn build_model(spec: &FusionSpec, seed: u64, prereqs: &Prerequisites) -> Result<FusionModel> {
    builtin_registry().build(spec, seed, prereqs)
}

fn widths(spec: &FusionSpec, strategy: &dyn FusionStrategy) -> HiddenWidths {
    spec.hidden_widths
        .clone()
        .unwrap_or_else(|| strategy.default_widths())
}

/// `Dense-ReLU[-Dropout]` blocks for each width, optionally closed by a
/// dense output layer.
fn mlp(
    input: usize,
    hidden: &[usize],
    dropout: Option<f64>,
    output: Option<usize>,
    rng: &mut SeededRng,
) -> Stack {
    let mut layers = Vec::new();
    let mut w = input;
    for &h in hidden {
        layers.push(Layer::Dense(DenseLayer::kaiming(w, h, rng)));
        layers.push(Layer::Relu);
        if let Some(p) = dropout {
            layers.push(Layer::Dropout(p));
        }
        w = h;
    }
    if let Some(out) = output {
        layers.push(Layer::Dense(DenseLayer::kaiming(w, out, rng)));
    }
    Stack::new(layers)
}

fn input_width(spec: &FusionSpec, m: Modality) -> usize {
    match m {
        Modality::Audio => spec.da,
        Modality::Text => spec.dt,
    }
}

/// Single-modality classifier: `FC-ReLU-Drop` per hidden width, then `FC(C)`.
struct Unimodal(Modality);

impl FusionStrategy for Unimodal {
    fn name(&self) -> &'static str {
        match self.0 {
            Modality::Audio => AUDIO_ONLY,
            Modality::Text => TEXT_ONLY,
        }
    }

    fn label(&self) -> &'static str {
        match self.0 {
            Modality::Audio => "AudioOnly",
            Modality::Text => "TextOnly",
        }
    }

    fn summary(&self) -> &'static str {
        match self.0 {
            Modality::Audio => "acoustic embedding only",
            Modality::Text => "text embedding only",
        }
    }

    fn default_widths(&self) -> HiddenWidths {
        HiddenWidths::new(&[], &[256])
    }

    fn build(&self, spec: &FusionSpec, rng: &mut SeededRng, _: &Prerequisites) -> Result<FusionModel> {
        let w = widths(spec, self);
        // a unimodal branch stack would be indistinguishable from head layers
        if !w.branch.is_empty() {
            return Err(Error::Config(format!(
                "`{}` takes head widths only",
                self.name()
            )));
        }
        let branch = Branch {
            modality: self.0,
            norm: Normalizer::from_kind(spec.normalize),
            stack: Stack::default(),
        };
        let head = mlp(input_width(spec, self.0), &w.head, Some(spec.dropout_p), Some(spec.classes), rng);
        let (audio, text) = match self.0 {
            Modality::Audio => (Some(branch), None),
            Modality::Text => (None, Some(branch)),
        };
        Ok(FusionModel {
            spec: spec.clone(),
            init_seed: 0,
            audio,
            text,
            head,
        })
    }
}

/// Concatenate the normalized embeddings, then one classifier.
struct EarlyFusion;

impl FusionStrategy for EarlyFusion {
    fn name(&self) -> &'static str {
        EARLY
    }

    fn label(&self) -> &'static str {
        "Early"
    }

    fn summary(&self) -> &'static str {
        "normalize, concatenate, classify"
    }

    fn default_widths(&self) -> HiddenWidths {
        HiddenWidths::new(&[], &[512, 256])
    }

    fn build(&self, spec: &FusionSpec, rng: &mut SeededRng, _: &Prerequisites) -> Result<FusionModel> {
        let w = widths(spec, self);
        if !w.branch.is_empty() {
            return Err(Error::Config("`early` takes head widths only".into()));
        }
        let branch = |m| Branch {
            modality: m,
            norm: Normalizer::from_kind(spec.normalize),
            stack: Stack::default(),
        };
        let head = mlp(spec.da + spec.dt, &w.head, Some(spec.dropout_p), Some(spec.classes), rng);
        Ok(FusionModel {
            spec: spec.clone(),
            init_seed: 0,
            audio: Some(branch(Modality::Audio)),
            text: Some(branch(Modality::Text)),
            head,
        })
    }
}

/// Per-modality reduction networks, concatenated mid-network, then a classifier.
struct IntermediateFusion;

impl FusionStrategy for IntermediateFusion {
    fn name(&self) -> &'static str {
        INTERMEDIATE
    }

    fn label(&self) -> &'static str {
        "Intermediate"
    }

    fn summary(&self) -> &'static str {
        "per-modality reduction branches, concatenate, classify"
    }

    fn default_widths(&self) -> HiddenWidths {
        HiddenWidths::new(&[256], &[256])
    }

    fn build(&self, spec: &FusionSpec, rng: &mut SeededRng, _: &Prerequisites) -> Result<FusionModel> {
        let w = widths(spec, self);
        if w.branch.is_empty() {
            return Err(Error::Config("`intermediate` needs at least one branch width".into()));
        }
        let mut branch = |m| Branch {
            modality: m,
            norm: Normalizer::from_kind(spec.normalize),
            stack: mlp(input_width(spec, m), &w.branch, Some(spec.dropout_p), None, rng),
        };
        let audio = branch(Modality::Audio);
        let text = branch(Modality::Text);
        let fused = 2 * w.branch.last().copied().expect("non-empty");
        let head = mlp(fused, &w.head, Some(spec.dropout_p), Some(spec.classes), rng);
        Ok(FusionModel {
            spec: spec.clone(),
            init_seed: 0,
            audio: Some(audio),
            text: Some(text),
            head,
        })
    }
}

/// Frozen unimodal trunks tapped at their penultimate activation, per-branch
/// reduction layers, concatenation and a classifier.
struct LateFusion;

impl LateFusion {
    fn trunk(
        &self,
        spec: &FusionSpec,
        prereqs: &Prerequisites,
        name: &str,
        modality: Modality,
    ) -> Result<(Normalizer, Vec<Layer>, usize)> {
        let model = prereqs
            .get(name)
            .ok_or_else(|| Error::Config(format!("late fusion needs a trained `{name}` model")))?;
        let branch = match modality {
            Modality::Audio => model.audio.as_ref().filter(|_| model.text.is_none()),
            Modality::Text => model.text.as_ref().filter(|_| model.audio.is_none()),
        }
        .ok_or_else(|| Error::Config(format!("`{name}` trunk is not a {modality}-only model")))?;
        if model.spec.classes != spec.classes {
            return Err(Error::Dimension(format!(
                "`{name}` trunk was trained for {} classes, late spec has {}",
                model.spec.classes, spec.classes
            )));
        }
        let want = input_width(spec, modality);
        if input_width(&model.spec, modality) != want {
            return Err(Error::Dimension(format!(
                "`{name}` trunk expects {} inputs, late spec has {want}",
                input_width(&model.spec, modality)
            )));
        }
        // Everything up to the output layer, without dropout: the eval-mode
        // penultimate activation.
        let mut layers: Vec<Layer> = branch.stack.layers.iter().chain(&model.head.layers).cloned().collect();
        match layers.pop() {
            Some(Layer::Dense(_)) => {}
            _ => return Err(Error::Config(format!("`{name}` trunk does not end in a dense layer"))),
        }
        layers.retain(|l| !matches!(l, Layer::Dropout(_)));
        let mut width = want;
        for l in layers.iter_mut() {
            if let Layer::Dense(d) = l {
                d.frozen = true;
                width = d.out_features();
            }
        }
        if !layers.iter().any(|l| matches!(l, Layer::Dense(_))) {
            return Err(Error::Config(format!("`{name}` trunk has no hidden layer to tap")));
        }
        Ok((branch.norm.clone(), layers, width))
    }
}

impl FusionStrategy for LateFusion {
    fn name(&self) -> &'static str {
        LATE
    }

    fn label(&self) -> &'static str {
        "Late"
    }

    fn summary(&self) -> &'static str {
        "frozen unimodal trunks, per-branch reduction, concatenate, classify"
    }

    fn default_widths(&self) -> HiddenWidths {
        HiddenWidths::new(&[128], &[128])
    }

    fn prerequisites(&self) -> &'static [&'static str] {
        &[AUDIO_ONLY, TEXT_ONLY]
    }

    fn build(&self, spec: &FusionSpec, rng: &mut SeededRng, prereqs: &Prerequisites) -> Result<FusionModel> {
        let w = widths(spec, self);
        let mut branches = Vec::with_capacity(2);
        let mut fused = 0;
        for (name, m) in [(AUDIO_ONLY, Modality::Audio), (TEXT_ONLY, Modality::Text)] {
            let (norm, mut layers, tap) = self.trunk(spec, prereqs, name, m)?;
            let reduce = mlp(tap, &w.branch, None, None, rng);
            fused += reduce.output_width(tap);
            layers.extend(reduce.layers);
            branches.push(Branch {
                modality: m,
                norm,
                stack: Stack::new(layers),
            });
        }
        let head = mlp(fused, &w.head, Some(spec.dropout_p), Some(spec.classes), rng);
        let text = branches.pop();
        let audio = branches.pop();
        Ok(FusionModel {
            spec: spec.clone(),
            init_seed: 0,
            audio,
            text,
            head,
        })
    }
}
