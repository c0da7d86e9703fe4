#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use phonefuse::audioprep::AudioClip;
use phonefuse::dataman::{save_manifest, Examples};
use phonefuse::numcore::Matrix;
use phonefuse::synth::{two_factor, TwoFactorConfig};
use rustfft::{num_complex::Complex, FftPlanner};
use serde_json::json;

pub fn sine(freq: f64, rate: u32, seconds: f64, amp: f64) -> AudioClip {
    let n = (rate as f64 * seconds) as usize;
    let samples = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin()).collect();
    AudioClip::new(samples, rate).unwrap()
}

/// Hann-windowed spectrum: (dB of energy within ±2 bins of `freq` over the
/// energy elsewhere, dominant bin).
pub fn sideband_db(clip: &AudioClip, freq: f64) -> (f64, usize) {
    let n = clip.len();
    let mut buf: Vec<Complex<f64>> = clip
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| Complex::new(s * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm_sqr()).collect();
    let peak = (0..power.len()).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    let target = (freq * n as f64 / clip.sample_rate as f64).round() as usize;
    let (mut tone, mut rest) = (0.0, 0.0);
    for (k, p) in power.iter().enumerate() {
        if k.abs_diff(target) <= 2 {
            tone += p;
        } else {
            rest += p;
        }
    }
    (10.0 * (tone / rest).log10(), peak)
}

/// Test accuracy of a nearest-class-mean classifier on concatenated features.
pub fn nearest_centroid_accuracy(train: &Examples, test: &Examples, classes: usize) -> f64 {
    let joined = |e: &Examples| Matrix::hconcat(&[&e.acoustic, &e.text]).unwrap();
    let (x, tx) = (joined(train), joined(test));
    let d = x.cols();
    let mut centroids = vec![vec![0.0; d]; classes];
    let mut counts = vec![0usize; classes];
    for (r, &l) in train.labels.iter().enumerate() {
        counts[l] += 1;
        for (c, v) in centroids[l].iter_mut().zip(x.row(r)) {
            *c += v;
        }
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= (*n).max(1) as f64);
    }
    let correct = test
        .labels
        .iter()
        .enumerate()
        .filter(|&(r, &l)| {
            let dist = |c: &Vec<f64>| c.iter().zip(tx.row(r)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let best = (0..classes).min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b]))).unwrap();
            best == l
        })
        .count();
    correct as f64 / test.len() as f64
}

/// Writes the two-factor dataset and a small-network config into `dir`.
pub fn two_factor_experiment(dir: &Path, strategies: &[&str], seed: u64) -> PathBuf {
    let data = dir.join("data");
    if !data.exists() {
        let m = two_factor(&TwoFactorConfig::default()).unwrap();
        save_manifest(&m, &data).unwrap();
    }
    let cfg = json!({
        "schema_version": 1,
        "dataset": "data",
        "scheme": "A",
        "model": {
            "strategies": strategies,
            "widths": {
                "audio": {"head": [32]},
                "text": {"head": [32]},
                "early": {"head": [64, 32]},
                "intermediate": {"branch": [32], "head": [32]},
                "late": {"branch": [16], "head": [16]}
            }
        },
        "train": {"learning_rate": 3e-4, "batch_size": 8, "max_epochs": 30},
        "folds": 5,
        "seed": seed
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().strip_prefix(dir).unwrap().to_path_buf())
        .collect();
    out.sort();
    out
}
