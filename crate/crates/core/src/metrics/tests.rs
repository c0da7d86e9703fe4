use super::*;
use crate::numcore::seeded_rng;
use rand::Rng;

#[test]
fn perfect_predictions_give_diagonal_and_ones() {
    let labels = [0, 1, 2, 2, 1];
    let m = confusion(&labels, &labels, 3).unwrap();
    assert_eq!(m.rows(), vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
    let r = compute_metrics(&m);
    for avg in [Averaging::Macro, Averaging::Weighted] {
        assert_eq!(r.scores(avg), Scores::new(1.0, 1.0, 1.0, 1.0));
    }
}

#[test]
fn hand_counted_case() {
    let m = confusion(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
    assert_eq!(m.rows(), vec![vec![1, 1], vec![0, 2]]);
    let r = compute_metrics(&m);
    assert_eq!(r.accuracy, 0.75);
    assert_eq!(r.per_class.precision, vec![1.0, 2.0 / 3.0]);
    assert_eq!(r.per_class.recall, vec![0.5, 1.0]);
    assert!((r.per_class.f1[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((r.per_class.f1[1] - 0.8).abs() < 1e-15);
    assert!((r.macro_avg.f1 - 11.0 / 15.0).abs() < 1e-15);
    assert_eq!(r.per_class.accuracy, vec![0.75, 0.75]);
}

#[test]
fn empty_inputs() {
    let m = confusion(&[], &[], 4).unwrap();
    assert_eq!(m, ConfusionMatrix::zeros(4));
    let r = compute_metrics(&m);
    assert_eq!(r.count, 0);
    assert_eq!(r.scores(Averaging::Macro), Scores::new(0.0, 0.0, 0.0, 0.0));
    assert_eq!(r.scores(Averaging::Weighted), Scores::new(0.0, 0.0, 0.0, 0.0));
}

#[test]
fn confusion_rejects_bad_input() {
    assert!(matches!(confusion(&[0, 3], &[0, 1], 3), Err(crate::Error::LabelRange { label: 3, .. })));
    assert!(confusion(&[0], &[0, 1], 3).is_err());
}

/// Independent evaluation: expand to samples and count per (class, sample).
fn oracle(rows: &[Vec<u64>]) -> MetricsReport {
    let c = rows.len();
    let mut samples = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            for _ in 0..n {
                samples.push((i, j));
            }
        }
    }
    let n = samples.len() as u64;
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut pc = PerClass::default();
    let mut correct = 0;
    for k in 0..c {
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for &(t, p) in &samples {
            match (t == k, p == k) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        correct += tp;
        let p = div(tp, tp + fp);
        let r = div(tp, tp + fn_);
        pc.precision.push(p);
        pc.recall.push(r);
        pc.f1.push(if p + r > 0.0 { 2.0 * (p * r) / (p + r) } else { 0.0 });
        pc.accuracy.push(div(tp + tn, n));
        pc.support.push(tp + fn_);
    }
    let mut macro_sum = [0.0; 3];
    let mut weighted_sum = [0.0; 3];
    for k in 0..c {
        let v = [pc.precision[k], pc.recall[k], pc.f1[k]];
        for q in 0..3 {
            macro_sum[q] += v[q];
            weighted_sum[q] += v[q] * pc.support[k] as f64;
        }
    }
    let agg = |s: [f64; 3], d: f64| Aggregate {
        precision: if d == 0.0 { 0.0 } else { s[0] / d },
        recall: if d == 0.0 { 0.0 } else { s[1] / d },
        f1: if d == 0.0 { 0.0 } else { s[2] / d },
    };
    MetricsReport {
        count: n,
        accuracy: div(correct, n),
        macro_avg: agg(macro_sum, c as f64),
        weighted: agg(weighted_sum, n as f64),
        per_class: pc,
    }
}

fn random_rows(rng: &mut crate::numcore::SeededRng) -> Vec<Vec<u64>> {
    let c = rng.gen_range(2..=29);
    (0..c)
        .map(|_| {
            let empty = rng.gen_bool(0.1);
            (0..c).map(|_| if empty { 0 } else { rng.gen_range(0..6) }).collect()
        })
        .collect()
}

#[test]
fn matches_brute_force_oracle_on_random_matrices() {
    let mut rng = seeded_rng(2024);
    for _ in 0..1000 {
        let rows = random_rows(&mut rng);
        let m = ConfusionMatrix::from_rows(&rows).unwrap();
        assert_eq!(compute_metrics(&m), oracle(&rows), "{rows:?}");
    }
}

#[test]
fn accuracy_equals_micro_precision_and_recall() {
    let mut rng = seeded_rng(5);
    for _ in 0..100 {
        let m = ConfusionMatrix::from_rows(&random_rows(&mut rng)).unwrap();
        let c = m.classes();
        let tp: u64 = (0..c).map(|k| m.tp(k)).sum();
        let fp: u64 = (0..c).map(|k| m.fp(k)).sum();
        let fn_: u64 = (0..c).map(|k| m.fn_(k)).sum();
        let r = compute_metrics(&m);
        if m.total() > 0 {
            assert_eq!(r.accuracy, tp as f64 / (tp + fp) as f64);
            assert_eq!(r.accuracy, tp as f64 / (tp + fn_) as f64);
        }
    }
}

#[test]
fn class_permutation_leaves_aggregates_unchanged() {
    let mut rng = seeded_rng(6);
    for _ in 0..100 {
        let rows = random_rows(&mut rng);
        let c = rows.len();
        let mut perm: Vec<usize> = (0..c).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let permuted: Vec<Vec<u64>> = (0..c).map(|i| (0..c).map(|j| rows[perm[i]][perm[j]]).collect()).collect();
        let a = compute_metrics(&ConfusionMatrix::from_rows(&rows).unwrap());
        let b = compute_metrics(&ConfusionMatrix::from_rows(&permuted).unwrap());
        assert_eq!(a.accuracy, b.accuracy);
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(b.per_class.f1[i], a.per_class.f1[p]);
        }
        for avg in [Averaging::Macro, Averaging::Weighted] {
            let (x, y) = (a.aggregate(avg), b.aggregate(avg));
            assert!((x.precision - y.precision).abs() < 1e-12);
            assert!((x.recall - y.recall).abs() < 1e-12);
            assert!((x.f1 - y.f1).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_support_class_counts_in_macro_but_not_weighted() {
    let m = ConfusionMatrix::from_rows(&[vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 0]]).unwrap();
    let r = compute_metrics(&m);
    assert_eq!(r.per_class.f1[2], 0.0);
    assert!((r.macro_avg.f1 - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.weighted.f1, 1.0);
}

#[test]
fn single_perfect_row_formats_as_ones() {
    let t = results_table(vec![TableRow::new("A", "Early", Scores::new(1.0, 1.0, 1.0, 1.0))], None);
    assert_eq!(t.rows[0].values_text(), "1.000 1.000 1.000 1.000");
    assert_eq!(t.rows[0].best, [true; 4]);
}

#[test]
fn published_dataset_a_rows() {
    let rows = vec![
        TableRow::new("A", "Early", Scores::new(0.966, 0.969, 0.966, 0.965)),
        TableRow::new("A", "Intermediate", Scores::new(0.966, 0.969, 0.966, 0.965)),
        TableRow::new("A", "Late", Scores::new(0.957, 0.959, 0.957, 0.957)),
        TableRow::new("B", "Late", Scores::new(0.956, 0.964, 0.956, 0.955)),
    ];
    let t = results_table(rows, None);
    assert_eq!(t.rows[0].values_text(), "0.966 0.969 0.966 0.965");
    assert_eq!(t.rows[2].values_text(), "0.957 0.959 0.957 0.957");
    assert_eq!(t.rows[0].best, [true; 4]);
    assert_eq!(t.rows[1].best, [true; 4]);
    assert_eq!(t.rows[2].best, [false; 4]);
    assert_eq!(t.rows[3].best, [true; 4]);
    let text = t.to_text();
    assert!(text.contains("0.966*"));
    assert!(text.lines().any(|l| l.starts_with("A ") && l.contains("Late") && !l.contains('*')));
}

#[test]
fn rounding_is_half_away_from_zero() {
    assert_eq!(round3(0.9665), 0.967);
    assert_eq!(round3(0.12345), 0.123);
    assert_eq!(round3(-0.0125), -0.013);
    let r = TableRow::new("A", "x", Scores::new(0.96649, 0.9995, 0.0, 1.0));
    assert_eq!(r.values_text(), "0.966 1.000 0.000 1.000");
}

#[test]
fn baseline_row_is_compared_and_placed_with_its_dataset() {
    let rows = vec![
        TableRow::new("A", "Proposed", Scores::new(0.966, 0.969, 0.966, 0.965)),
        TableRow::new("B", "Proposed", Scores::new(0.985, 0.988, 0.985, 0.985)),
    ];
    let sota = TableRow::new("B", "SOTA", Scores::new(0.970, 0.966, 0.970, 0.962));
    let t = results_table(rows, Some(sota));
    assert_eq!(t.rows.len(), 3);
    assert_eq!(t.rows[2].method, "SOTA");
    assert!(t.rows[2].baseline);
    assert_eq!(t.rows[2].best, [false; 4]);
    assert_eq!(t.rows[1].best, [true; 4]);
    let csv = t.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.contains("B,SOTA,0.970,0.966,0.970,0.962,true,false,false,false,false"));
}
