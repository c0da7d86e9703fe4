use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ACOUSTIC_FILE: &str = "acoustic.f32";
pub const TEXT_FILE: &str = "text.f32";

/// Where a recording came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[serde(rename = "youtube")]
    YouTube,
    Hafiz,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::YouTube => "youtube",
            Source::Hafiz => "hafiz",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub sample_id: String,
    pub speaker_id: String,
    pub source: Source,
    pub label: usize,
    pub acoustic: Vec<f32>,
    pub text: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub class_count: usize,
    pub da: usize,
    pub dt: usize,
    pub class_names: Vec<String>,
    pub records: Vec<EmbeddingRecord>,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    class_count: usize,
    da: usize,
    dt: usize,
    class_names: Vec<String>,
    records: Vec<RecordEntry>,
}

#[derive(Serialize, Deserialize)]
struct RecordEntry {
    sample_id: String,
    speaker_id: String,
    source: Source,
    label: usize,
}

impl DatasetManifest {
    pub fn new(class_count: usize, da: usize, dt: usize, class_names: Vec<String>) -> Self {
        DatasetManifest {
            class_count,
            da,
            dt,
            class_names,
            records: Vec::new(),
        }
    }

    /// Checks every type invariant.
    pub fn validate(&self) -> Result<()> {
        if self.class_names.len() != self.class_count {
            return Err(Error::Dimension(format!(
                "{} class names for class_count {}",
                self.class_names.len(),
                self.class_count
            )));
        }
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if !seen.insert(r.sample_id.as_str()) {
                return Err(Error::DuplicateSample(r.sample_id.clone()));
            }
            if r.label >= self.class_count {
                return Err(Error::LabelRange {
                    label: r.label,
                    classes: self.class_count,
                });
            }
            if r.acoustic.len() != self.da || r.text.len() != self.dt {
                return Err(Error::Dimension(format!(
                    "record `{}` has acoustic/text lengths {}/{}, manifest declares {}/{}",
                    r.sample_id,
                    r.acoustic.len(),
                    r.text.len(),
                    self.da,
                    self.dt
                )));
            }
            if !r.acoustic.iter().chain(&r.text).all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("record `{}`", r.sample_id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sample_ids(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.sample_id.clone()).collect()
    }

    pub fn labels(&self) -> BTreeMap<String, usize> {
        self.records
            .iter()
            .map(|r| (r.sample_id.clone(), r.label))
            .collect()
    }

    pub fn record(&self, sample_id: &str) -> Option<&EmbeddingRecord> {
        self.records.iter().find(|r| r.sample_id == sample_id)
    }

    /// Gathers the named records, in the order given, into f64 matrices.
    pub fn gather<S: AsRef<str>>(&self, ids: &[S]) -> Result<Examples> {
        let index: BTreeMap<&str, &EmbeddingRecord> = self
            .records
            .iter()
            .map(|r| (r.sample_id.as_str(), r))
            .collect();
        let mut acoustic = Vec::with_capacity(ids.len() * self.da);
        let mut text = Vec::with_capacity(ids.len() * self.dt);
        let mut labels = Vec::with_capacity(ids.len());
        for id in ids {
            let r = index
                .get(id.as_ref())
                .ok_or_else(|| Error::Split(format!("unknown sample id `{}`", id.as_ref())))?;
            acoustic.extend(r.acoustic.iter().map(|&v| v as f64));
            text.extend(r.text.iter().map(|&v| v as f64));
            labels.push(r.label);
        }
        Ok(Examples {
            ids: ids.iter().map(|s| s.as_ref().to_owned()).collect(),
            acoustic: Matrix::from_vec(ids.len(), self.da, acoustic)?,
            text: Matrix::from_vec(ids.len(), self.dt, text)?,
            labels,
        })
    }
}

/// A batch of samples ready for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Examples {
    pub ids: Vec<String>,
    pub acoustic: Matrix,
    pub text: Matrix,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Examples {
        Examples {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            acoustic: self.acoustic.select_rows(rows),
            text: self.text.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn write_f32s<'a>(path: &Path, rows: impl Iterator<Item = &'a [f32]>) -> Result<()> {
    let mut bytes = Vec::new();
    for row in rows {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f32s(path: &Path, rows: usize, width: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = rows * width * 4;
    if bytes.len() != expected {
        return Err(Error::Dimension(format!(
            "{} holds {} bytes, expected {rows} records x {width} x 4 = {expected}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

/// Writes `manifest.json`, `acoustic.f32` and `text.f32` under `dir`, creating it if needed.
pub fn save_manifest(manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    manifest.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = ManifestFile {
        class_count: manifest.class_count,
        da: manifest.da,
        dt: manifest.dt,
        class_names: manifest.class_names.clone(),
        records: manifest
            .records
            .iter()
            .map(|r| RecordEntry {
                sample_id: r.sample_id.clone(),
                speaker_id: r.speaker_id.clone(),
                source: r.source,
                label: r.label,
            })
            .collect(),
    };
    let json_path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_vec_pretty(&file)?;
    json.push(b'\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    write_f32s(&dir.join(ACOUSTIC_FILE), manifest.records.iter().map(|r| r.acoustic.as_slice()))?;
    write_f32s(&dir.join(TEXT_FILE), manifest.records.iter().map(|r| r.text.as_slice()))?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let json_path = dir.join(MANIFEST_FILE);
    let raw = fs::read(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let file: ManifestFile = serde_json::from_slice(&raw)?;
    let n = file.records.len();
    let acoustic = read_f32s(&dir.join(ACOUSTIC_FILE), n, file.da)?;
    let text = read_f32s(&dir.join(TEXT_FILE), n, file.dt)?;
    let records = file
        .records
        .into_iter()
        .enumerate()
        .map(|(i, e)| EmbeddingRecord {
            sample_id: e.sample_id,
            speaker_id: e.speaker_id,
            source: e.source,
            label: e.label,
            acoustic: acoustic[i * file.da..(i + 1) * file.da].to_vec(),
            text: text[i * file.dt..(i + 1) * file.dt].to_vec(),
        })
        .collect();
    let manifest = DatasetManifest {
        class_count: file.class_count,
        da: file.da,
        dt: file.dt,
        class_names: file.class_names,
        records,
    };
    manifest.validate()?;
    Ok(manifest)
}
