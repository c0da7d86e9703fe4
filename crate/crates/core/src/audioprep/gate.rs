use super::AudioClip;
use crate::error::{Error, Result};

pub const GATE_FRAME_SECONDS: f64 = 0.025;
pub const GATE_RAMP_SECONDS: f64 = 0.005;

/// Exactly `round(seconds · rate)` samples: longer clips are center-cropped,
/// shorter ones zero-padded on both sides with the odd sample at the tail.
pub fn fix_duration(clip: &AudioClip, seconds: f64) -> Result<AudioClip> {
    if !(seconds >= 0.0 && seconds.is_finite()) {
        return Err(Error::InvalidArgument(format!("duration {seconds} s")));
    }
    let target = (seconds * clip.sample_rate as f64).round() as usize;
    let n = clip.samples.len();
    let samples = if n >= target {
        let start = (n - target) / 2;
        clip.samples[start..start + target].to_vec()
    } else {
        let lead = (target - n) / 2;
        let mut out = vec![0.0; target];
        out[lead..lead + n].copy_from_slice(&clip.samples);
        out
    };
    Ok(AudioClip {
        samples,
        sample_rate: clip.sample_rate,
    })
}

/// Zeroes 25 ms frames whose RMS is more than `threshold_db` below the clip
/// peak. Transitions get 5 ms linear ramps placed inside the gated frames.
/// Identity when `enabled` is false.
pub fn noise_gate(clip: &AudioClip, threshold_db: f64, enabled: bool) -> AudioClip {
    if !enabled || clip.is_empty() {
        return clip.clone();
    }
    let x = &clip.samples;
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = peak * 10f64.powf(threshold_db / 20.0);
    let frame = ((GATE_FRAME_SECONDS * clip.sample_rate as f64).round() as usize).max(1);
    let ramp = ((GATE_RAMP_SECONDS * clip.sample_rate as f64).round() as usize).max(1);
    let open: Vec<bool> = x
        .chunks(frame)
        .map(|f| (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt() >= threshold && peak > 0.0)
        .collect();

    let mut gain = vec![0.0f64; x.len()];
    for (fi, &is_open) in open.iter().enumerate() {
        let start = fi * frame;
        let end = (start + frame).min(x.len());
        if is_open {
            gain[start..end].fill(1.0);
            continue;
        }
        let len = end - start;
        let r = ramp.min(len);
        if fi > 0 && open[fi - 1] {
            for i in 0..r {
                gain[start + i] = gain[start + i].max(1.0 - (i + 1) as f64 / (r + 1) as f64);
            }
        }
        if open.get(fi + 1).copied().unwrap_or(false) {
            for i in 0..r {
                let g = (i + 1) as f64 / (r + 1) as f64;
                let at = end - r + i;
                gain[at] = gain[at].max(g);
            }
        }
    }
    AudioClip {
        samples: x.iter().zip(&gain).map(|(v, g)| v * g).collect(),
        sample_rate: clip.sample_rate,
    }
}
