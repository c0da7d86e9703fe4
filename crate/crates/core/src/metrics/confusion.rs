use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `C × C` counts; entry `(i, j)` is the number of samples of true class `i`
/// predicted as class `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let c = rows.len();
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::Dimension("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            classes: c,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    /// Row sum: samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        (0..self.classes).map(|j| self.get(c, j)).sum()
    }

    /// Column sum: samples predicted as `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, c)).sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    pub fn fp(&self, c: usize) -> u64 {
        self.predicted(c) - self.tp(c)
    }

    pub fn fn_(&self, c: usize) -> u64 {
        self.support(c) - self.tp(c)
    }

    pub fn tn(&self, c: usize) -> u64 {
        self.total() - self.tp(c) - self.fp(c) - self.fn_(c)
    }
}

/// Counts predictions against labels.
pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::shape(
            format!("{} predictions", labels.len()),
            format!("{}", preds.len()),
        ));
    }
    let mut m = ConfusionMatrix::zeros(classes);
    for (&p, &l) in preds.iter().zip(labels) {
        if let Some(&bad) = [l, p].iter().find(|&&v| v >= classes) {
            return Err(Error::LabelRange { label: bad, classes });
        }
        m.add(l, p);
    }
    Ok(m)
}
