use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::spec::{FusionSpec, Modality, Normalization};
use crate::dataman::Examples;
use crate::error::{Error, Result};
use crate::numcore::{
    l2_normalize_rows, seeded_rng, softmax_cross_entropy, BatchActivations, Checkpoint,
    DenseGrads, DenseLayer, Differentiable, Matrix, SeededRng, Stack, Standardizer,
};

/// Input normalization of one modality, with fitted statistics for z-scoring.
#[derive(Clone, Debug, PartialEq)]
pub enum Normalizer {
    None,
    L2,
    ZScore(Option<Standardizer>),
}

impl Normalizer {
    pub fn from_kind(kind: Normalization) -> Self {
        match kind {
            Normalization::None => Normalizer::None,
            Normalization::L2 => Normalizer::L2,
            Normalization::ZScore => Normalizer::ZScore(None),
        }
    }

    pub fn kind(&self) -> Normalization {
        match self {
            Normalizer::None => Normalization::None,
            Normalizer::L2 => Normalization::L2,
            Normalizer::ZScore(_) => Normalization::ZScore,
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Normalizer::None => Ok(x.clone()),
            Normalizer::L2 => Ok(l2_normalize_rows(x)),
            Normalizer::ZScore(Some(s)) => {
                if s.mean.len() != x.cols() {
                    return Err(Error::shape(format!("{} features", s.mean.len()), format!("{}", x.cols())));
                }
                Ok(s.apply(x))
            }
            Normalizer::ZScore(None) => Err(Error::Config(
                "z-score statistics must be fitted on training data before use".into(),
            )),
        }
    }
}

/// One modality's path from raw embedding to its contribution at the fusion point.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub modality: Modality,
    pub norm: Normalizer,
    pub stack: Stack,
}

/// A fusion topology: optional acoustic and text branches whose outputs are
/// concatenated (audio first) and fed to the classification head.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionModel {
    pub spec: FusionSpec,
    pub init_seed: u64,
    pub audio: Option<Branch>,
    pub text: Option<Branch>,
    pub head: Stack,
}

/// Cached activations of a full forward pass.
#[derive(Clone, Debug)]
pub struct ModelActivations {
    audio: Option<BatchActivations>,
    text: Option<BatchActivations>,
    head: BatchActivations,
    widths: Vec<usize>,
}

impl FusionModel {
    pub fn branches(&self) -> impl Iterator<Item = &Branch> {
        self.audio.iter().chain(self.text.iter())
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    /// All dense layers in parameter order: audio branch, text branch, head.
    pub fn dense_layers(&self) -> Vec<&DenseLayer> {
        let mut out = Vec::new();
        for b in self.branches() {
            out.extend(b.stack.dense_layers());
        }
        out.extend(self.head.dense_layers());
        out
    }

    pub fn dense_layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out = Vec::new();
        if let Some(b) = self.audio.as_mut() {
            out.extend(b.stack.dense_layers_mut());
        }
        if let Some(b) = self.text.as_mut() {
            out.extend(b.stack.dense_layers_mut());
        }
        out.extend(self.head.dense_layers_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.dense_layers().iter().map(|d| d.param_count()).sum()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.dense_layers()
            .iter()
            .filter(|d| !d.frozen)
            .map(|d| d.param_count())
            .sum()
    }

    /// Fits any unfitted z-score normalizers on `train`.
    pub fn fit_normalization(&mut self, train: &Examples) {
        if let Some(Branch { norm: n @ Normalizer::ZScore(None), .. }) = self.audio.as_mut() {
            *n = Normalizer::ZScore(Some(Standardizer::fit(&train.acoustic)));
        }
        if let Some(Branch { norm: n @ Normalizer::ZScore(None), .. }) = self.text.as_mut() {
            *n = Normalizer::ZScore(Some(Standardizer::fit(&train.text)));
        }
    }

    fn check_inputs(&self, acoustic: &Matrix, text: &Matrix) -> Result<usize> {
        let mut rows = None;
        for b in self.branches() {
            let (x, want) = match b.modality {
                Modality::Audio => (acoustic, self.spec.da),
                Modality::Text => (text, self.spec.dt),
            };
            if x.cols() != want {
                return Err(Error::shape(
                    format!("{} input of width {want}", b.modality),
                    format!("width {}", x.cols()),
                ));
            }
            match rows {
                None => rows = Some(x.rows()),
                Some(r) if r != x.rows() => {
                    return Err(Error::shape(format!("{r} rows in every modality"), format!("{} rows", x.rows())))
                }
                _ => {}
            }
        }
        rows.ok_or_else(|| Error::Config("model has no input branch".into()))
    }

    /// Forward pass with cached activations. Training mode (dropout active)
    /// iff `rng` is given; dropout draws happen audio branch, text branch, head.
    pub fn forward_cached(
        &self,
        acoustic: &Matrix,
        text: &Matrix,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<(Matrix, ModelActivations)> {
        self.check_inputs(acoustic, text)?;
        let mut outputs = Vec::with_capacity(2);
        let mut run = |b: &Branch, x: &Matrix| -> Result<BatchActivations> {
            let normalized = b.norm.apply(x)?;
            let (out, cache) = b.stack.forward(&normalized, rng.as_deref_mut())?;
            outputs.push(out);
            Ok(cache)
        };
        let audio = self.audio.as_ref().map(|b| run(b, acoustic)).transpose()?;
        let text_cache = self.text.as_ref().map(|b| run(b, text)).transpose()?;
        let widths: Vec<usize> = outputs.iter().map(Matrix::cols).collect();
        let fused = Matrix::hconcat(&outputs.iter().collect::<Vec<_>>())?;
        let (logits, head) = self.head.forward(&fused, rng)?;
        Ok((
            logits,
            ModelActivations {
                audio,
                text: text_cache,
                head,
                widths,
            },
        ))
    }

    pub fn forward(&self, acoustic: &Matrix, text: &Matrix, rng: Option<&mut SeededRng>) -> Result<Matrix> {
        Ok(self.forward_cached(acoustic, text, rng)?.0)
    }

    /// Eval-mode logits for a batch of examples.
    pub fn logits(&self, examples: &Examples) -> Result<Matrix> {
        self.forward(&examples.acoustic, &examples.text, None)
    }

    pub fn predict(&self, examples: &Examples) -> Result<Vec<usize>> {
        Ok(self.logits(examples)?.argmax_rows())
    }

    /// Gradients of every dense layer in [`FusionModel::dense_layers`] order
    /// (`None` for frozen layers).
    pub fn backward(&self, cache: &ModelActivations, dlogits: &Matrix) -> Result<Vec<Option<DenseGrads>>> {
        let (mut grads_head, dfused) = self.head.backward(&cache.head, dlogits, true)?;
        let dfused = dfused.expect("input gradient requested");
        let parts = dfused.split_cols(&cache.widths)?;
        let mut parts = parts.into_iter();
        let mut grads = Vec::new();
        for (branch, branch_cache) in [(&self.audio, &cache.audio), (&self.text, &cache.text)] {
            match (branch, branch_cache) {
                (Some(b), Some(c)) => {
                    let g = parts.next().expect("one part per branch");
                    let (bg, _) = b.stack.backward(c, &g, false)?;
                    grads.extend(bg);
                }
                (None, None) => {}
                _ => return Err(Error::Dimension("activation cache does not match model branches".into())),
            }
        }
        grads.append(&mut grads_head);
        Ok(grads)
    }

    /// Mean cross-entropy and accuracy in eval mode.
    pub fn evaluate(&self, examples: &Examples) -> Result<(f64, f64)> {
        if examples.is_empty() {
            return Ok((0.0, 0.0));
        }
        let logits = self.logits(examples)?;
        let (loss, _) = softmax_cross_entropy(&logits, &examples.labels)?;
        let correct = logits
            .argmax_rows()
            .iter()
            .zip(&examples.labels)
            .filter(|(p, l)| p == l)
            .count();
        Ok((loss, correct as f64 / examples.len() as f64))
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut stacks = Vec::new();
        let mut blocks = Vec::new();
        let mut norms = BTreeMap::new();
        for b in self.branches() {
            let name = b.modality.as_str();
            stacks.push((name.to_string(), b.stack.clone()));
            norms.insert(name, b.norm.kind());
            if let Normalizer::ZScore(Some(s)) = &b.norm {
                blocks.push((format!("{name}.mean"), s.mean.clone()));
                blocks.push((format!("{name}.std"), s.std.clone()));
            }
        }
        stacks.push(("head".to_string(), self.head.clone()));
        let meta = serde_json::to_value(CheckpointMeta {
            spec: self.spec.clone(),
            normalizers: norms.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        })?;
        Ok(Checkpoint {
            init_seed: self.init_seed,
            stacks,
            blocks,
            meta,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_value(ck.meta.clone())?;
        let head = ck
            .stack("head")
            .cloned()
            .ok_or_else(|| Error::format("checkpoint", "no `head` stack"))?;
        let branch = |m: Modality| -> Result<Option<Branch>> {
            let Some(stack) = ck.stack(m.as_str()) else {
                return Ok(None);
            };
            let kind = meta
                .normalizers
                .get(m.as_str())
                .copied()
                .ok_or_else(|| Error::format("checkpoint", format!("no normalizer for {m}")))?;
            let norm = match kind {
                Normalization::ZScore => {
                    let mean = ck.block(&format!("{m}.mean"));
                    let std = ck.block(&format!("{m}.std"));
                    Normalizer::ZScore(match (mean, std) {
                        (Some(mean), Some(std)) => Some(Standardizer {
                            mean: mean.to_vec(),
                            std: std.to_vec(),
                        }),
                        _ => None,
                    })
                }
                k => Normalizer::from_kind(k),
            };
            Ok(Some(Branch {
                modality: m,
                norm,
                stack: stack.clone(),
            }))
        };
        let model = FusionModel {
            audio: branch(Modality::Audio)?,
            text: branch(Modality::Text)?,
            head,
            init_seed: ck.init_seed,
            spec: meta.spec,
        };
        model.check_structure()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Layer widths chain correctly from the inputs to `classes` logits.
    pub fn check_structure(&self) -> Result<()> {
        let mut fused = 0;
        for b in self.branches() {
            let input = match b.modality {
                Modality::Audio => self.spec.da,
                Modality::Text => self.spec.dt,
            };
            fused += chain_width(&b.stack, input)?;
        }
        let out = chain_width(&self.head, fused)?;
        if out != self.spec.classes {
            return Err(Error::Dimension(format!(
                "model emits {out} logits, spec declares {} classes",
                self.spec.classes
            )));
        }
        Ok(())
    }
}

fn chain_width(stack: &Stack, input: usize) -> Result<usize> {
    let mut w = input;
    for d in stack.dense_layers() {
        if d.in_features() != w {
            return Err(Error::Dimension(format!(
                "dense layer expects {} inputs, receives {w}",
                d.in_features()
            )));
        }
        w = d.out_features();
    }
    Ok(w)
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    spec: FusionSpec,
    normalizers: BTreeMap<String, Normalization>,
}

/// A model on a fixed batch with replayable dropout masks, for gradient checks.
#[derive(Clone, Debug)]
pub struct ModelProblem {
    pub model: FusionModel,
    pub examples: Examples,
    pub dropout_seed: Option<u64>,
}

impl ModelProblem {
    fn run(&self) -> Result<(Matrix, ModelActivations)> {
        let mut rng = self.dropout_seed.map(seeded_rng);
        self.model
            .forward_cached(&self.examples.acoustic, &self.examples.text, rng.as_mut())
    }
}

impl Differentiable for ModelProblem {
    fn loss(&self) -> Result<f64> {
        let (logits, _) = self.run()?;
        Ok(softmax_cross_entropy(&logits, &self.examples.labels)?.0)
    }

    fn loss_and_grads(&self) -> Result<(f64, Vec<Option<DenseGrads>>)> {
        let (logits, cache) = self.run()?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, &self.examples.labels)?;
        Ok((loss, self.model.backward(&cache, &dlogits)?))
    }

    fn dense_layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        self.model.dense_layers_mut()
    }
}
