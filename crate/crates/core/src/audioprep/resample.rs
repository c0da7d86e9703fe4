use std::f64::consts::PI;

use super::{AudioClip, TARGET_RATE};

pub const KAISER_BETA: f64 = 8.0;
pub const TAPS_PER_PHASE: usize = 32;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Modified Bessel function of the first kind, order 0.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Coefficient table, one row of `TAPS_PER_PHASE` per phase, each row
/// normalized to unit sum. Row `p` interpolates at fractional offset `p/L`.
fn phase_table(up: usize, down: usize) -> Vec<[f64; TAPS_PER_PHASE]> {
    let half = (TAPS_PER_PHASE / 2) as f64;
    let cutoff = (up as f64 / down as f64).min(1.0);
    let i0_beta = bessel_i0(KAISER_BETA);
    (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            let mut row = [0.0; TAPS_PER_PHASE];
            for (j, c) in row.iter_mut().enumerate() {
                // tap j sits at input offset j − (half − 1) from floor(t)
                let tau = frac - (j as f64 - (half - 1.0));
                let r = tau / half;
                let w = if r.abs() >= 1.0 {
                    0.0
                } else {
                    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
                };
                *c = cutoff * sinc(cutoff * tau) * w;
            }
            let sum: f64 = row.iter().sum();
            for c in row.iter_mut() {
                *c /= sum;
            }
            row
        })
        .collect()
}

/// Rational polyphase resampling with a Kaiser-windowed sinc
/// (β = 8, 32 taps per phase). Samples outside the clip count as zero.
/// Output length is `ceil(n · to / from)`.
pub fn resample(clip: &AudioClip, to: u32) -> AudioClip {
    if clip.sample_rate == to {
        return clip.clone();
    }
    let g = gcd(u64::from(clip.sample_rate), u64::from(to));
    let up = (u64::from(to) / g) as usize;
    let down = (u64::from(clip.sample_rate) / g) as usize;
    let table = phase_table(up, down);
    let n = clip.samples.len();
    let out_len = (n * up).div_ceil(down);
    let half = TAPS_PER_PHASE / 2;
    let x = &clip.samples;
    let samples = (0..out_len)
        .map(|k| {
            let pos = k * down;
            let base = (pos / up) as isize;
            let row = &table[pos % up];
            let first = base - (half as isize - 1);
            row.iter()
                .enumerate()
                .filter_map(|(j, c)| {
                    let i = first + j as isize;
                    (i >= 0 && (i as usize) < n).then(|| c * x[i as usize])
                })
                .sum()
        })
        .collect();
    AudioClip {
        samples,
        sample_rate: to,
    }
}

/// [`resample`] to 16 kHz; a 16 kHz clip is returned unchanged.
pub fn resample_16k(clip: &AudioClip) -> AudioClip {
    resample(clip, TARGET_RATE)
}
