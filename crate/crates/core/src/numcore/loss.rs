use super::Matrix;
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
///
/// The log-sum-exp is taken relative to the row maximum and uses `ln_1p` on
/// the remaining mass, so confident rows keep full relative precision.
/// An empty batch has loss 0.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (batch, classes) = logits.shape();
    if labels.len() != batch {
        return Err(Error::shape(format!("{batch} labels"), format!("{} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelRange {
            label: bad,
            classes,
        });
    }
    let mut dlogits = Matrix::zeros(batch, classes);
    if batch == 0 {
        return Ok((0.0, dlogits));
    }
    let scale = 1.0 / batch as f64;
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let (arg, max) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) });
        let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
        let rest: f64 = exps
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != arg)
            .map(|(_, e)| e)
            .sum();
        let log_norm = rest.ln_1p();
        total += log_norm - (row[label] - max);
        let denom = 1.0 + rest;
        for (j, d) in dlogits.row_mut(r).iter_mut().enumerate() {
            let p = exps[j] / denom;
            let onehot = if j == label { 1.0 } else { 0.0 };
            *d = (p - onehot) * scale;
        }
    }
    Ok((total * scale, dlogits))
}

/// Row-wise softmax probabilities.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = Matrix::filled(3, 29, 0.7);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 5, 28]).unwrap();
        assert!((loss - 29f64.ln()).abs() < 1e-12);
        assert!((loss - 3.3673).abs() < 1e-4);
    }

    #[test]
    fn confident_row_matches_closed_form() {
        let logits = Matrix::from_rows(&[[10.0, -10.0]]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        let expected = (-20f64).exp().ln_1p();
        assert!((loss - expected).abs() <= 1e-15 * expected.max(1e-300) + 1e-24);
        assert!((loss - 2.06e-9).abs() < 1e-11);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Matrix::from_rows(&[[0.3, -1.2, 4.0], [2.0, 2.0, -7.0]]).unwrap();
        let (loss, d) = softmax_cross_entropy(&logits, &[2, 0]).unwrap();
        assert!(loss >= 0.0);
        for r in 0..2 {
            assert!(d.row(r).iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_out_of_range_label() {
        let logits = Matrix::zeros(1, 3);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[3]),
            Err(Error::LabelRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let p = softmax(&Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap());
        assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
