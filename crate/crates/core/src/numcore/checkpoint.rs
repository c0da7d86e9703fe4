//! Parameter checkpoint file.
//!
//! Layout: the 4-byte magic `PFCK`, a little-endian `u32` header length, the
//! JSON header, then the parameter payload as little-endian `f64`. The payload
//! holds, for every stack in header order and every dense layer in stack
//! order, the row-major weights followed by the bias; named extra blocks
//! follow the layers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DenseLayer, Layer, LayerDesc, Matrix, Stack};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PFCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StackHeader {
    name: String,
    layers: Vec<LayerDesc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    init_seed: u64,
    stacks: Vec<StackHeader>,
    #[serde(default)]
    blocks: Vec<BlockHeader>,
    #[serde(default)]
    meta: serde_json::Value,
}

/// Named stacks plus auxiliary `f64` blocks and free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub init_seed: u64,
    pub stacks: Vec<(String, Stack)>,
    pub blocks: Vec<(String, Vec<f64>)>,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn stack(&self, name: &str) -> Option<&Stack> {
        self.stacks.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            init_seed: self.init_seed,
            stacks: self
                .stacks
                .iter()
                .map(|(name, s)| StackHeader {
                    name: name.clone(),
                    layers: s.layers.iter().map(Layer::desc).collect(),
                })
                .collect(),
            blocks: self
                .blocks
                .iter()
                .map(|(name, b)| BlockHeader {
                    name: name.clone(),
                    len: b.len(),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(json.len())
            .map_err(|_| Error::format("checkpoint", "header exceeds 4 GiB"))?;
        let mut out = Vec::with_capacity(8 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&json);
        for (_, stack) in &self.stacks {
            for d in stack.dense_layers() {
                for v in d.weight.data().iter().chain(&d.bias) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        for (_, b) in &self.blocks {
            for v in b {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::format("checkpoint", "missing PFCK magic"));
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let header_end = 8usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::format("checkpoint", "truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[8..header_end])?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::format(
                "checkpoint",
                format!("unsupported format version {}", header.format_version),
            ));
        }

        let expected: usize = header
            .stacks
            .iter()
            .flat_map(|s| &s.layers)
            .map(|l| match l {
                LayerDesc::Dense { rows, cols, .. } => rows * cols + rows,
                _ => 0,
            })
            .sum::<usize>()
            + header.blocks.iter().map(|b| b.len).sum::<usize>();
        let payload = &bytes[header_end..];
        if payload.len() != expected * 8 {
            return Err(Error::Dimension(format!(
                "checkpoint payload holds {} bytes, header describes {} values",
                payload.len(),
                expected
            )));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };

        let mut stacks = Vec::with_capacity(header.stacks.len());
        for sh in header.stacks {
            let mut layers = Vec::with_capacity(sh.layers.len());
            for desc in sh.layers {
                layers.push(match desc {
                    LayerDesc::Dense { rows, cols, frozen } => {
                        let weight = Matrix::from_vec(rows, cols, take(rows * cols))?;
                        let mut d = DenseLayer::new(weight, take(rows))?;
                        d.frozen = frozen;
                        Layer::Dense(d)
                    }
                    LayerDesc::Relu => Layer::Relu,
                    LayerDesc::Dropout { p } => {
                        super::layer::check_dropout_rate(p)?;
                        Layer::Dropout(p)
                    }
                });
            }
            stacks.push((sh.name, Stack::new(layers)));
        }
        let blocks = header
            .blocks
            .into_iter()
            .map(|b| {
                let v = take(b.len);
                (b.name, v)
            })
            .collect();
        Ok(Checkpoint {
            init_seed: header.init_seed,
            stacks,
            blocks,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
