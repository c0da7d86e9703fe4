use super::TrainConfig;
use crate::error::{Error, Result};
use crate::numcore::{DenseGrads, DenseLayer};

/// First and second moments of one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay:
/// `θ ← θ − lr·(m̂/(√v̂+ε) + λθ)`.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::shape(
            format!("{} gradients and moments", params.len()),
            format!("{} gradients, {} moments", grads.len(), state.m.len()),
        ));
    }
    state.step += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let wd = config.weight_decay;
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * (m_hat / (v_hat.sqrt() + config.adam_eps) + wd * *p);
    }
    Ok(())
}

/// AdamW over the trainable dense layers of a model.
#[derive(Clone, Debug)]
pub struct AdamW {
    config: TrainConfig,
    states: Vec<Option<(AdamState, AdamState)>>,
}

impl AdamW {
    pub fn new(layers: &[&DenseLayer], config: &TrainConfig) -> Self {
        let states = layers
            .iter()
            .map(|d| (!d.frozen).then(|| (AdamState::new(d.weight.data().len()), AdamState::new(d.bias.len()))))
            .collect();
        AdamW {
            config: config.clone(),
            states,
        }
    }

    pub fn step(&mut self, layers: Vec<&mut DenseLayer>, grads: &[Option<DenseGrads>]) -> Result<()> {
        if layers.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(Error::shape(
                format!("{} layers", self.states.len()),
                format!("{} layers, {} gradients", layers.len(), grads.len()),
            ));
        }
        for ((layer, grad), state) in layers.into_iter().zip(grads).zip(&mut self.states) {
            match (state, grad) {
                (Some((sw, sb)), Some(g)) => {
                    adamw_step(layer.weight.data_mut(), g.weight.data(), sw, &self.config)?;
                    adamw_step(&mut layer.bias, &g.bias, sb, &self.config)?;
                }
                (None, None) => {}
                _ => return Err(Error::Dimension("gradient presence does not match frozen layers".into())),
            }
        }
        Ok(())
    }
}
