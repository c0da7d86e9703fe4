use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, SeededRng};
use crate::error::{Error, Result};

/// Fully connected layer computing `Y = X·Wᵀ + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub frozen: bool,
}

/// Parameter gradients of one dense layer, shaped like the layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::shape(
                format!("bias of length {}", weight.rows()),
                format!("length {}", bias.len()),
            ));
        }
        Ok(DenseLayer {
            weight,
            bias,
            frozen: false,
        })
    }

    /// Kaiming-uniform weights in `±√(6/fan_in)`, zero bias.
    pub fn kaiming(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        DenseLayer {
            weight: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
            bias: vec![0.0; fan_out],
            frozen: false,
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_features(&self) -> usize {
        self.weight.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        dense_forward(self, x)
    }

    /// Returns parameter gradients and, if requested, the gradient w.r.t. the input.
    pub fn backward(
        &self,
        x: &Matrix,
        dy: &Matrix,
        want_input_grad: bool,
    ) -> Result<(DenseGrads, Option<Matrix>)> {
        let (n_out, n_in) = self.weight.shape();
        if x.cols() != n_in || dy.cols() != n_out || x.rows() != dy.rows() {
            return Err(Error::shape(
                format!("x: b×{n_in}, dy: b×{n_out}"),
                format!("x: {:?}, dy: {:?}", x.shape(), dy.shape()),
            ));
        }
        let mut dw = Matrix::zeros(n_out, n_in);
        let mut db = vec![0.0; n_out];
        for r in 0..x.rows() {
            let xr = x.row(r);
            for (o, &g) in dy.row(r).iter().enumerate() {
                db[o] += g;
                if g != 0.0 {
                    for (w, &xv) in dw.row_mut(o).iter_mut().zip(xr) {
                        *w += g * xv;
                    }
                }
            }
        }
        let dx = want_input_grad.then(|| {
            let mut dx = Matrix::zeros(x.rows(), n_in);
            for r in 0..x.rows() {
                let dxr = dx.row_mut(r);
                for (o, &g) in dy.row(r).iter().enumerate() {
                    if g != 0.0 {
                        for (d, &w) in dxr.iter_mut().zip(self.weight.row(o)) {
                            *d += g * w;
                        }
                    }
                }
            }
            dx
        });
        Ok((DenseGrads { weight: dw, bias: db }, dx))
    }
}

impl DenseGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        DenseGrads {
            weight: Matrix::zeros(layer.weight.rows(), layer.weight.cols()),
            bias: vec![0.0; layer.bias.len()],
        }
    }

    /// Weights then biases, the same order as the checkpoint payload.
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.weight.data().iter().chain(self.bias.iter()).copied()
    }
}

pub fn dense_forward(layer: &DenseLayer, x: &Matrix) -> Result<Matrix> {
    let (n_out, n_in) = layer.weight.shape();
    if x.cols() != n_in {
        return Err(Error::shape(format!("input width {n_in}"), format!("width {}", x.cols())));
    }
    let mut y = Matrix::zeros(x.rows(), n_out);
    for r in 0..x.rows() {
        let xr = x.row(r);
        for (o, out) in y.row_mut(r).iter_mut().enumerate() {
            let dot: f64 = layer
                .weight
                .row(o)
                .iter()
                .zip(xr)
                .map(|(w, v)| w * v)
                .sum();
            *out = dot + layer.bias[o];
        }
    }
    Ok(y)
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

fn relu_backward(pre: &Matrix, dy: &Matrix) -> Matrix {
    let data = pre
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
        .collect();
    Matrix::from_vec(dy.rows(), dy.cols(), data).expect("same shape as dy")
}

/// Inverted dropout. Returns the output and the multiplicative mask, whose
/// entries are `0` or `1/(1-p)` in training mode and all `1` otherwise.
pub fn dropout(
    x: &Matrix,
    p: f64,
    rng: &mut SeededRng,
    training: bool,
) -> Result<(Matrix, Matrix)> {
    check_dropout_rate(p)?;
    if !training || p == 0.0 {
        return Ok((x.clone(), Matrix::filled(x.rows(), x.cols(), 1.0)));
    }
    let keep = 1.0 / (1.0 - p);
    let mask_data: Vec<f64> = (0..x.data().len())
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect();
    let mask = Matrix::from_vec(x.rows(), x.cols(), mask_data)?;
    let out = x.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
    Ok((Matrix::from_vec(x.rows(), x.cols(), out)?, mask))
}

pub(crate) fn check_dropout_rate(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout rate {p} outside [0, 1)")));
    }
    Ok(())
}

/// The fixed layer vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Relu,
    Dropout(f64),
}

/// Serializable description of a layer without its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerDesc {
    Dense {
        rows: usize,
        cols: usize,
        frozen: bool,
    },
    Relu,
    Dropout {
        p: f64,
    },
}

impl Layer {
    pub fn desc(&self) -> LayerDesc {
        match self {
            Layer::Dense(d) => LayerDesc::Dense {
                rows: d.weight.rows(),
                cols: d.weight.cols(),
                frozen: d.frozen,
            },
            Layer::Relu => LayerDesc::Relu,
            Layer::Dropout(p) => LayerDesc::Dropout { p: *p },
        }
    }
}

/// Cached activations of one forward pass through a [`Stack`].
///
/// `inputs[i]` is the input to layer `i`; `masks[i]` is set for dropout layers.
#[derive(Clone, Debug)]
pub struct BatchActivations {
    pub inputs: Vec<Matrix>,
    pub masks: Vec<Option<Matrix>>,
}

/// Sequential layer stack.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stack {
    pub layers: Vec<Layer>,
}

impl Stack {
    pub fn new(layers: Vec<Layer>) -> Self {
        Stack { layers }
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Output width given the input width (empty stacks pass through).
    pub fn output_width(&self, input_width: usize) -> usize {
        self.dense_layers()
            .last()
            .map_or(input_width, |d| d.out_features())
    }

    pub fn dense_layers(&self) -> Vec<&DenseLayer> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    pub fn dense_layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.dense_layers().iter().map(|d| d.param_count()).sum()
    }

    /// Training-mode forward when `rng` is given, eval mode otherwise.
    pub fn forward(
        &self,
        x: &Matrix,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<(Matrix, BatchActivations)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, mask) = match layer {
                Layer::Dense(d) => (d.forward(&cur)?, None),
                Layer::Relu => (relu(&cur), None),
                Layer::Dropout(p) => match rng.as_deref_mut() {
                    Some(r) => {
                        let (out, mask) = dropout(&cur, *p, r, true)?;
                        (out, Some(mask))
                    }
                    None => (cur.clone(), None),
                },
            };
            inputs.push(std::mem::replace(&mut cur, next));
            masks.push(mask);
        }
        Ok((cur, BatchActivations { inputs, masks }))
    }

    pub fn forward_eval(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::Dense(d) => d.forward(&cur)?,
                Layer::Relu => relu(&cur),
                Layer::Dropout(_) => cur,
            };
        }
        Ok(cur)
    }

    /// Reverse-mode pass. Returns one entry per dense layer (in order), `None`
    /// for frozen layers, plus the input gradient when `want_input_grad`.
    pub fn backward(
        &self,
        cache: &BatchActivations,
        dy: &Matrix,
        want_input_grad: bool,
    ) -> Result<(Vec<Option<DenseGrads>>, Option<Matrix>)> {
        if cache.inputs.len() != self.layers.len() || cache.masks.len() != self.layers.len() {
            return Err(Error::shape(
                format!("cache for {} layers", self.layers.len()),
                format!("cache for {} layers", cache.inputs.len()),
            ));
        }
        if self.layers.is_empty() {
            return Ok((Vec::new(), want_input_grad.then(|| dy.clone())));
        }
        let n_dense = self.dense_layers().len();
        let mut grads: Vec<Option<DenseGrads>> = vec![None; n_dense];

        // Below the lowest trainable layer nothing needs a gradient unless
        // the caller wants the input gradient.
        let lowest_needed = if want_input_grad {
            0
        } else {
            match self
                .layers
                .iter()
                .position(|l| matches!(l, Layer::Dense(d) if !d.frozen))
            {
                Some(i) => i,
                None => return Ok((grads, None)),
            }
        };

        let mut dense_idx = n_dense;
        let mut g = dy.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need_below = i > lowest_needed || want_input_grad;
            match layer {
                Layer::Dense(d) => {
                    dense_idx -= 1;
                    if d.frozen {
                        if !need_below {
                            break;
                        }
                        let (_, dx) = d.backward(&cache.inputs[i], &g, true)?;
                        g = dx.expect("requested");
                    } else {
                        let (dg, dx) = d.backward(&cache.inputs[i], &g, need_below)?;
                        grads[dense_idx] = Some(dg);
                        match dx {
                            Some(dx) => g = dx,
                            None => break,
                        }
                    }
                }
                Layer::Relu => g = relu_backward(&cache.inputs[i], &g),
                Layer::Dropout(_) => {
                    if let Some(mask) = &cache.masks[i] {
                        for (v, m) in g.data_mut().iter_mut().zip(mask.data()) {
                            *v *= m;
                        }
                    }
                }
            }
            if i == 0 {
                return Ok((grads, want_input_grad.then_some(g)));
            }
        }
        Ok((grads, None))
    }
}
