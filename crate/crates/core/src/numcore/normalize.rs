//! Per-vector L2 normalization and per-dimension standardization.
//!
//! `l2_normalize` evaluates `v / ‖v‖` in double-double arithmetic and rounds
//! once at the end, so each output component is the correctly rounded value of
//! the exact quotient. Inputs that differ by an exactly representable positive
//! factor (the usual case for f32-derived embeddings scaled by small integers)
//! therefore normalize to bit-identical vectors.

use super::Matrix;

/// Norms at or below this are left untouched.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    fn add_f64_product(self, a: f64, b: f64) -> Self {
        let (p, pe) = two_prod(a, b);
        let (s, se) = two_sum(self.hi, p);
        let (hi, lo) = quick_two_sum(s, se + pe + self.lo);
        DoubleDouble { hi, lo }
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble { hi: 0.0, lo: 0.0 };
        }
        let s = self.hi.sqrt();
        let (p, pe) = two_prod(s, s);
        let r = ((self.hi - p) - pe + self.lo) / (2.0 * s);
        let (hi, lo) = quick_two_sum(s, r);
        DoubleDouble { hi, lo }
    }

    /// `x / self`, rounded once to f64.
    fn divide_into(self, x: f64) -> f64 {
        let q1 = x / self.hi;
        let (p, pe) = two_prod(q1, self.hi);
        let rem = ((x - p) - pe) - q1 * self.lo;
        q1 + rem / self.hi
    }
}

fn dd_norm(v: &[f64]) -> DoubleDouble {
    v.iter()
        .fold(DoubleDouble { hi: 0.0, lo: 0.0 }, |acc, &x| acc.add_f64_product(x, x))
        .sqrt()
}

/// `v / ‖v‖₂`, or `v` unchanged when `‖v‖₂ ≤ 1e-12`.
pub fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let norm = dd_norm(v);
    if norm.hi <= NORM_EPS {
        return v.to_vec();
    }
    v.iter().map(|&x| norm.divide_into(x)).collect()
}

pub fn l2_normalize_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows() {
        let n = l2_normalize(m.row(r));
        out.row_mut(r).copy_from_slice(&n);
    }
    out
}

/// Per-dimension mean/std fitted on a reference set.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Dimensions with (near-)zero spread get unit std.
    pub fn fit(m: &Matrix) -> Self {
        let (n, d) = m.shape();
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        if n > 0 {
            for r in 0..n {
                for (acc, &x) in mean.iter_mut().zip(m.row(r)) {
                    *acc += x;
                }
            }
            mean.iter_mut().for_each(|x| *x /= n as f64);
            for r in 0..n {
                for ((acc, &x), mu) in var.iter_mut().zip(m.row(r)).zip(&mean) {
                    *acc += (x - mu) * (x - mu);
                }
            }
            var.iter_mut().for_each(|x| *x /= n as f64);
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = v.sqrt();
                if s > NORM_EPS {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((x, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - mu) / s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        assert_eq!(l2_normalize(&[3.0, 4.0]), vec![0.6, 0.8]);
    }

    #[test]
    fn zero_vector_is_unchanged() {
        assert_eq!(l2_normalize(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
        assert_eq!(l2_normalize(&[1e-14, 0.0]), vec![1e-14, 0.0]);
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let m = Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&m);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.apply(&m).data(), &[-1.0, 0.0, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn normalized_vectors_have_unit_norm(v in prop::collection::vec(-1e3f64..1e3, 1..64)) {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-9);
            let n = l2_normalize(&v);
            let out = n.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((out - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn f32_inputs_are_exactly_scale_invariant(
            v in prop::collection::vec(-100f32..100.0, 1..48),
            scale in prop::sample::select(vec![2.0f64, 3.0, 5.0, 7.0, 0.25, 10.0]),
        ) {
            let base: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            prop_assume!(base.iter().any(|&x| x != 0.0));
            let scaled: Vec<f64> = base.iter().map(|x| x * scale).collect();
            prop_assert_eq!(l2_normalize(&base), l2_normalize(&scaled));
        }
    }
}
