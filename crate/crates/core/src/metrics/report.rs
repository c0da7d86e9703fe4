use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Macro,
    #[default]
    Weighted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class vectors, indexed by class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    /// `(TP + TN) / total` for the class taken one-vs-rest.
    pub accuracy: Vec<f64>,
    pub support: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub count: u64,
    /// `trace / total`.
    pub accuracy: f64,
    pub per_class: PerClass,
    #[serde(rename = "macro")]
    pub macro_avg: Aggregate,
    pub weighted: Aggregate,
}

/// The four headline numbers of one table row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    pub fn new(accuracy: f64, precision: f64, recall: f64, f1: f64) -> Self {
        Scores {
            accuracy,
            precision,
            recall,
            f1,
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

impl MetricsReport {
    pub fn aggregate(&self, averaging: Averaging) -> Aggregate {
        match averaging {
            Averaging::Macro => self.macro_avg,
            Averaging::Weighted => self.weighted,
        }
    }

    pub fn scores(&self, averaging: Averaging) -> Scores {
        let a = self.aggregate(averaging);
        Scores::new(self.accuracy, a.precision, a.recall, a.f1)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * (p * r) / (p + r)
    }
}

/// Per-class precision, recall and F1 (0/0 taken as 0), their macro and
/// support-weighted means, and overall accuracy.
pub fn compute_metrics(m: &ConfusionMatrix) -> MetricsReport {
    let c = m.classes();
    let total = m.total();
    let mut pc = PerClass::default();
    for k in 0..c {
        let (tp, fp, fn_, tn) = (m.tp(k), m.fp(k), m.fn_(k), m.tn(k));
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        pc.precision.push(p);
        pc.recall.push(r);
        pc.f1.push(f1(p, r));
        pc.accuracy.push(ratio(tp + tn, total));
        pc.support.push(tp + fn_);
    }
    let mean = |v: &[f64]| if c == 0 { 0.0 } else { v.iter().sum::<f64>() / c as f64 };
    let weighted = |v: &[f64]| {
        if total == 0 {
            0.0
        } else {
            v.iter().zip(&pc.support).map(|(x, &s)| x * s as f64).sum::<f64>() / total as f64
        }
    };
    MetricsReport {
        count: total,
        accuracy: ratio(m.trace(), total),
        macro_avg: Aggregate {
            precision: mean(&pc.precision),
            recall: mean(&pc.recall),
            f1: mean(&pc.f1),
        },
        weighted: Aggregate {
            precision: weighted(&pc.precision),
            recall: weighted(&pc.recall),
            f1: weighted(&pc.f1),
        },
        per_class: pc,
    }
}
