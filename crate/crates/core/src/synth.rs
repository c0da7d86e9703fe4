//! Synthetic embedding datasets with known structure.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataman::{DatasetManifest, EmbeddingRecord, Source};
use crate::error::{Error, Result};
use crate::numcore::{seeded_stream, SeededRng};

/// Four classes formed by one binary acoustic factor and one binary text
/// factor: `label = 2·a + t`. Each modality alone identifies only half of the
/// label, so unimodal accuracy is capped near 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoFactorConfig {
    pub da: usize,
    pub dt: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub train_speakers: usize,
    pub test_speakers: usize,
    /// Per-dimension noise std around unit-norm cluster centers.
    pub noise: f64,
    pub seed: u64,
}

impl Default for TwoFactorConfig {
    fn default() -> Self {
        TwoFactorConfig {
            da: 16,
            dt: 16,
            train_samples: 600,
            test_samples: 200,
            train_speakers: 20,
            test_speakers: 10,
            noise: 0.08,
            seed: 0,
        }
    }
}

pub const TWO_FACTOR_CLASSES: usize = 4;

fn unit_vector(dim: usize, rng: &mut SeededRng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn noisy(center: &[f64], noise: &Normal<f64>, rng: &mut SeededRng) -> Vec<f32> {
    center.iter().map(|c| (c + noise.sample(rng)) as f32).collect()
}

/// Training records are tagged YouTube and test records Hafiz, so split
/// scheme A reproduces the intended train/test partition.
pub fn two_factor(cfg: &TwoFactorConfig) -> Result<DatasetManifest> {
    if cfg.da == 0 || cfg.dt == 0 || cfg.train_speakers == 0 || cfg.test_speakers == 0 {
        return Err(Error::InvalidArgument("dimensions and speaker counts must be positive".into()));
    }
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let mut center_rng = seeded_stream(cfg.seed, 0);
    let audio_centers = [unit_vector(cfg.da, &mut center_rng), unit_vector(cfg.da, &mut center_rng)];
    let text_centers = [unit_vector(cfg.dt, &mut center_rng), unit_vector(cfg.dt, &mut center_rng)];
    let mut rng = seeded_stream(cfg.seed, 1);

    let names = (0..TWO_FACTOR_CLASSES)
        .map(|c| format!("a{}t{}", c / 2, c % 2))
        .collect();
    let mut manifest = DatasetManifest::new(TWO_FACTOR_CLASSES, cfg.da, cfg.dt, names);
    let parts = [
        (Source::YouTube, cfg.train_samples, cfg.train_speakers),
        (Source::Hafiz, cfg.test_samples, cfg.test_speakers),
    ];
    for (source, samples, speakers) in parts {
        for i in 0..samples {
            let label = i % TWO_FACTOR_CLASSES;
            manifest.records.push(EmbeddingRecord {
                sample_id: format!("{}-{i:05}", source.as_str()),
                speaker_id: format!("{}-spk{:02}", source.as_str(), i % speakers),
                source,
                label,
                acoustic: noisy(&audio_centers[label / 2], &noise, &mut rng),
                text: noisy(&text_centers[label % 2], &noise, &mut rng),
            });
        }
    }
    manifest.validate()?;
    Ok(manifest)
}

/// Sample counts for `speakers` speakers sharing `samples` as evenly as
/// possible, larger speakers first.
pub fn even_speaker_sizes(speakers: usize, samples: usize) -> Vec<usize> {
    let base = samples / speakers;
    let extra = samples % speakers;
    (0..speakers).map(|i| base + usize::from(i < extra)).collect()
}

/// A manifest with the given per-source speaker sizes, `classes` labels
/// assigned round-robin and random embeddings of width `dim`.
pub fn speaker_corpus(
    youtube: &[usize],
    hafiz: &[usize],
    classes: usize,
    dim: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    let names = (0..classes).map(|c| format!("c{c:02}")).collect();
    let mut manifest = DatasetManifest::new(classes, dim, dim, names);
    let mut rng = seeded_stream(seed, 0);
    let mut n = 0;
    for (source, sizes) in [(Source::YouTube, youtube), (Source::Hafiz, hafiz)] {
        for (s, &size) in sizes.iter().enumerate() {
            for _ in 0..size {
                let mut draw = || (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
                manifest.records.push(EmbeddingRecord {
                    sample_id: format!("{}-{n:05}", source.as_str()),
                    speaker_id: format!("{}-spk{s:02}", source.as_str()),
                    source,
                    label: n % classes,
                    acoustic: draw(),
                    text: draw(),
                });
                n += 1;
            }
        }
    }
    manifest.validate()?;
    Ok(manifest)
}
