use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, Source};
use crate::error::{Error, Result};
use crate::numcore::{seeded_rng, seeded_stream};

/// Target share of each source held out under [`SplitScheme::DatasetB`].
pub const DATASET_B_TEST_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitScheme {
    /// Train on every YouTube record, test on every Hafiz record.
    #[serde(rename = "A")]
    DatasetA,
    /// Speaker-disjoint ~80/20 split inside each source.
    #[serde(rename = "B")]
    DatasetB,
    #[serde(rename = "custom")]
    Custom,
}

impl SplitScheme {
    pub fn label(self) -> &'static str {
        match self {
            SplitScheme::DatasetA => "A",
            SplitScheme::DatasetB => "B",
            SplitScheme::Custom => "custom",
        }
    }
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SplitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(SplitScheme::DatasetA),
            "B" | "b" => Ok(SplitScheme::DatasetB),
            "custom" => Ok(SplitScheme::Custom),
            other => Err(Error::InvalidArgument(format!("unknown split scheme `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub scheme: SplitScheme,
    pub train_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
}

impl SplitAssignment {
    /// An explicit split; ids must be disjoint and present in the manifest.
    pub fn custom(
        manifest: &DatasetManifest,
        train_ids: BTreeSet<String>,
        test_ids: BTreeSet<String>,
    ) -> Result<Self> {
        if let Some(id) = train_ids.intersection(&test_ids).next() {
            return Err(Error::Split(format!("`{id}` is in both train and test")));
        }
        let known = manifest.sample_ids();
        if let Some(id) = train_ids.iter().chain(&test_ids).find(|id| !known.contains(*id)) {
            return Err(Error::Split(format!("unknown sample id `{id}`")));
        }
        Ok(SplitAssignment {
            scheme: SplitScheme::Custom,
            train_ids,
            test_ids,
        })
    }
}

/// Builds the train/test split for `scheme`.
///
/// Dataset B shuffles the speakers of each source (seeded, one stream per
/// source) and moves whole speakers to test. The number of speakers taken is
/// the prefix length whose sample count lies closest to 20% of the source;
/// ties take the shorter prefix. A source with a single speaker stays in train.
pub fn build_split(manifest: &DatasetManifest, scheme: SplitScheme, seed: u64) -> Result<SplitAssignment> {
    let by_source = |s: Source| -> BTreeSet<String> {
        manifest
            .records
            .iter()
            .filter(|r| r.source == s)
            .map(|r| r.sample_id.clone())
            .collect()
    };
    match scheme {
        SplitScheme::Custom => Err(Error::Split(
            "custom splits are built with SplitAssignment::custom".into(),
        )),
        SplitScheme::DatasetA | SplitScheme::DatasetB => {
            for s in [Source::YouTube, Source::Hafiz] {
                if !manifest.records.iter().any(|r| r.source == s) {
                    return Err(Error::Split(format!(
                        "scheme {scheme} needs `{}` records, manifest has none",
                        s.as_str()
                    )));
                }
            }
            if scheme == SplitScheme::DatasetA {
                return Ok(SplitAssignment {
                    scheme,
                    train_ids: by_source(Source::YouTube),
                    test_ids: by_source(Source::Hafiz),
                });
            }
            let mut train_ids = BTreeSet::new();
            let mut test_ids = BTreeSet::new();
            for (stream, source) in [Source::YouTube, Source::Hafiz].into_iter().enumerate() {
                let (train, test) = speaker_holdout(manifest, source, seed, stream as u64);
                train_ids.extend(train);
                test_ids.extend(test);
            }
            Ok(SplitAssignment {
                scheme,
                train_ids,
                test_ids,
            })
        }
    }
}

fn speaker_holdout(
    manifest: &DatasetManifest,
    source: Source,
    seed: u64,
    stream: u64,
) -> (Vec<String>, Vec<String>) {
    let mut speakers: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for r in manifest.records.iter().filter(|r| r.source == source) {
        speakers
            .entry(r.speaker_id.as_str())
            .or_default()
            .push(r.sample_id.clone());
    }
    let total: usize = speakers.values().map(Vec::len).sum();
    let mut order: Vec<&str> = speakers.keys().copied().collect();
    order.shuffle(&mut seeded_stream(seed, stream));

    let target = DATASET_B_TEST_FRACTION * total as f64;
    let mut take = 0;
    if order.len() > 1 {
        let mut best_gap = f64::INFINITY;
        let mut cum = 0usize;
        for (k, spk) in order.iter().enumerate().take(order.len() - 1) {
            cum += speakers[spk].len();
            let gap = (cum as f64 - target).abs();
            if gap < best_gap {
                best_gap = gap;
                take = k + 1;
            }
        }
    }
    let (test_spk, train_spk) = order.split_at(take);
    let collect = |spk: &[&str]| spk.iter().flat_map(|s| speakers[s].iter().cloned()).collect();
    (collect(train_spk), collect(test_spk))
}

/// Fold index of every training sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: BTreeMap<String, usize>,
}

impl FoldAssignment {
    /// Validation ids of fold `fold`, sorted.
    pub fn validation_ids(&self, fold: usize) -> Vec<String> {
        self.fold_of
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Training ids for fold `fold` (all other folds), sorted.
    pub fn training_ids(&self, fold: usize) -> Vec<String> {
        self.fold_of
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.fold_of.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold partition.
///
/// Samples of each class (in label order) are shuffled and dealt round-robin
/// over the folds. The dealing cursor starts at a seed-derived fold and
/// carries over from one class to the next, so per-class and overall fold
/// sizes both differ by at most one.
pub fn stratified_kfold(
    train_ids: &BTreeSet<String>,
    labels: &BTreeMap<String, usize>,
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-fold needs k >= 2, got {k}")));
    }
    if train_ids.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut by_class: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
    for id in train_ids {
        let label = labels
            .get(id)
            .ok_or_else(|| Error::Split(format!("no label for `{id}`")))?;
        by_class.entry(*label).or_default().push(id);
    }
    let mut rng = seeded_rng(seed);
    let mut cursor = rng.gen_range(0..k);
    let mut fold_of = BTreeMap::new();
    for ids in by_class.values_mut() {
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            fold_of.insert((*id).clone(), cursor);
            cursor = (cursor + 1) % k;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}
