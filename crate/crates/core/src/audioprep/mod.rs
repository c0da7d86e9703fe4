//! Audio standardization: mono, 16 kHz, fixed duration, optional noise gate.

mod gate;
mod resample;
mod tree;
mod wav;

pub use gate::{fix_duration, noise_gate, GATE_FRAME_SECONDS, GATE_RAMP_SECONDS};
pub use resample::{resample, resample_16k, KAISER_BETA, TAPS_PER_PHASE};
pub use tree::{prep_tree, PrepReport};
pub use wav::{load_wav, write_wav};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TARGET_RATE: u32 = 16_000;
pub const CLIP_SECONDS: f64 = 4.0;

/// Mono samples at a sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("audio samples".into()));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Preprocessing options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub seconds: f64,
    pub gate: bool,
    pub gate_threshold_db: f64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            seconds: CLIP_SECONDS,
            gate: false,
            gate_threshold_db: -40.0,
        }
    }
}

/// Resample to 16 kHz, fix the duration, then gate if enabled.
pub fn prepare(clip: &AudioClip, config: &PrepConfig) -> Result<AudioClip> {
    let clip = resample_16k(clip);
    let clip = fix_duration(&clip, config.seconds)?;
    Ok(noise_gate(&clip, config.gate_threshold_db, config.gate))
}
