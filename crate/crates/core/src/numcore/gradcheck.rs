//! Central finite-difference gradient checking.

use super::{seeded_rng, softmax_cross_entropy, DenseGrads, DenseLayer, Matrix, Stack};
use crate::error::{Error, Result};

/// Step for the central difference.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of the relative error, so parameters with vanishing
/// gradient are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// A scalar loss over a set of dense layers that can also report analytic gradients.
///
/// `loss` must be a deterministic function of the parameters (fixed dropout
/// masks, fixed batch).
pub trait Differentiable {
    fn loss(&self) -> Result<f64>;
    fn loss_and_grads(&self) -> Result<(f64, Vec<Option<DenseGrads>>)>;
    fn dense_layers_mut(&mut self) -> Vec<&mut DenseLayer>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (dense layer index, flat parameter index) of the worst entry
    pub worst: Option<(usize, usize)>,
    pub checked_params: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Central differences over every parameter of every unfrozen layer.
pub fn numeric_gradients<P: Differentiable + ?Sized>(problem: &mut P) -> Result<Vec<Option<DenseGrads>>> {
    let frozen: Vec<bool> = problem.dense_layers_mut().iter().map(|d| d.frozen).collect();
    let mut out = Vec::with_capacity(frozen.len());
    for (li, is_frozen) in frozen.into_iter().enumerate() {
        if is_frozen {
            out.push(None);
            continue;
        }
        let (rows, cols) = problem.dense_layers_mut()[li].weight.shape();
        let mut gw = Matrix::zeros(rows, cols);
        for k in 0..rows * cols {
            gw.data_mut()[k] = central_difference(problem, Slot::Weight(li, k))?;
        }
        let mut gb = vec![0.0; rows];
        for (k, g) in gb.iter_mut().enumerate() {
            *g = central_difference(problem, Slot::Bias(li, k))?;
        }
        out.push(Some(DenseGrads { weight: gw, bias: gb }));
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum Slot {
    Weight(usize, usize),
    Bias(usize, usize),
}

fn slot_mut<P: Differentiable + ?Sized>(problem: &mut P, slot: Slot) -> &mut f64 {
    match slot {
        Slot::Weight(li, k) => &mut problem.dense_layers_mut().swap_remove(li).weight.data_mut()[k],
        Slot::Bias(li, k) => &mut problem.dense_layers_mut().swap_remove(li).bias[k],
    }
}

fn central_difference<P: Differentiable + ?Sized>(problem: &mut P, slot: Slot) -> Result<f64> {
    let original = *slot_mut(problem, slot);
    *slot_mut(problem, slot) = original + FD_STEP;
    let plus = problem.loss();
    *slot_mut(problem, slot) = original - FD_STEP;
    let minus = problem.loss();
    *slot_mut(problem, slot) = original;
    Ok((plus? - minus?) / (2.0 * FD_STEP))
}

/// Compares two gradient sets entry by entry.
pub fn compare_gradients(
    analytic: &[Option<DenseGrads>],
    numeric: &[Option<DenseGrads>],
    tolerance: f64,
) -> Result<GradCheckReport> {
    if analytic.len() != numeric.len() {
        return Err(Error::shape(
            format!("{} gradient blocks", numeric.len()),
            format!("{} blocks", analytic.len()),
        ));
    }
    let mut max_rel_error = 0.0f64;
    let mut worst = None;
    let mut checked = 0;
    for (li, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        match (a, n) {
            (None, None) => {}
            (Some(a), Some(n)) => {
                if a.weight.shape() != n.weight.shape() || a.bias.len() != n.bias.len() {
                    return Err(Error::shape(format!("layer {li} {:?}", n.weight.shape()), format!("{:?}", a.weight.shape())));
                }
                for (k, (x, y)) in a.flat().zip(n.flat()).enumerate() {
                    let e = relative_error(x, y);
                    checked += 1;
                    if worst.is_none() || e > max_rel_error {
                        max_rel_error = e;
                        worst = Some((li, k));
                    }
                }
            }
            _ => {
                return Err(Error::Dimension(format!(
                    "layer {li}: frozen in one gradient set but not the other"
                )))
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        checked_params: checked,
        tolerance,
        passed: max_rel_error <= tolerance,
    })
}

pub fn grad_check<P: Differentiable + ?Sized>(problem: &mut P, tolerance: f64) -> Result<GradCheckReport> {
    let (_, analytic) = problem.loss_and_grads()?;
    let numeric = numeric_gradients(problem)?;
    compare_gradients(&analytic, &numeric, tolerance)
}

/// A layer stack, a fixed batch and labels, with dropout masks replayed from
/// `dropout_seed` on every evaluation (eval mode when `None`).
#[derive(Clone, Debug)]
pub struct StackProblem {
    pub stack: Stack,
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub dropout_seed: Option<u64>,
}

impl StackProblem {
    fn logits_and_cache(&self) -> Result<(Matrix, super::BatchActivations)> {
        match self.dropout_seed {
            Some(seed) => self.stack.forward(&self.inputs, Some(&mut seeded_rng(seed))),
            None => self.stack.forward(&self.inputs, None),
        }
    }
}

impl Differentiable for StackProblem {
    fn loss(&self) -> Result<f64> {
        let (logits, _) = self.logits_and_cache()?;
        Ok(softmax_cross_entropy(&logits, &self.labels)?.0)
    }

    fn loss_and_grads(&self) -> Result<(f64, Vec<Option<DenseGrads>>)> {
        let (logits, cache) = self.logits_and_cache()?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, &self.labels)?;
        let (grads, _) = self.stack.backward(&cache, &dlogits, false)?;
        Ok((loss, grads))
    }

    fn dense_layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        self.stack.dense_layers_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{Layer, SeededRng};
    use rand::Rng;

    fn random_problem(frozen_first: bool) -> StackProblem {
        let mut rng = seeded_rng(42);
        let mut first = DenseLayer::kaiming(6, 7, &mut rng);
        first.frozen = frozen_first;
        let second = DenseLayer::kaiming(7, 5, &mut rng);
        let third = DenseLayer::kaiming(5, 3, &mut rng);
        let stack = Stack::new(vec![
            Layer::Dense(first),
            Layer::Relu,
            Layer::Dropout(0.3),
            Layer::Dense(second),
            Layer::Relu,
            Layer::Dense(third),
        ]);
        StackProblem {
            stack,
            inputs: random_matrix(&mut rng, 4, 6),
            labels: vec![0, 2, 1, 2],
            dropout_seed: Some(9),
        }
    }

    fn random_matrix(rng: &mut SeededRng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn random_three_layer_net_passes() {
        let mut p = random_problem(false);
        let report = grad_check(&mut p, 1e-4).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.checked_params, p.stack.param_count());
    }

    #[test]
    fn frozen_layer_is_excluded() {
        let mut p = random_problem(true);
        let report = grad_check(&mut p, 1e-4).unwrap();
        assert!(report.passed, "{report:?}");
        let first = p.stack.dense_layers()[0].param_count();
        assert_eq!(report.checked_params, p.stack.param_count() - first);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let mut p = random_problem(false);
        let (_, mut analytic) = p.loss_and_grads().unwrap();
        let numeric = numeric_gradients(&mut p).unwrap();
        analytic[1].as_mut().unwrap().weight.data_mut()[3] += 0.01;
        let report = compare_gradients(&analytic, &numeric, 1e-4).unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst, Some((1, 3)));
    }

    #[test]
    fn parameters_are_restored_after_check() {
        let mut p = random_problem(false);
        let before = p.stack.clone();
        grad_check(&mut p, 1e-4).unwrap();
        assert_eq!(p.stack, before);
    }
}
