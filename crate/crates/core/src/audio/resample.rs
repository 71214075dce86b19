use super::{quantize, AudioClip};
use crate::error::{Error, Result};

/// Zero crossings of the sinc kernel on each side, at the cutoff frequency.
const ZERO_CROSSINGS: usize = 32;
/// Kernel table entries per zero crossing.
const TABLE_DENSITY: usize = 512;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.96;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= half / k as f64;
        let t2 = term * term;
        sum += t2;
        if t2 < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc sampled at `TABLE_DENSITY` points per zero crossing.
fn kernel_table() -> Vec<f64> {
    let len = ZERO_CROSSINGS * TABLE_DENSITY + 2;
    let norm = bessel_i0(KAISER_BETA);
    (0..len)
        .map(|i| {
            let x = i as f64 / TABLE_DENSITY as f64;
            let r = x / ZERO_CROSSINGS as f64;
            if r >= 1.0 {
                return 0.0;
            }
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm;
            let sinc = if x == 0.0 {
                1.0
            } else {
                let px = std::f64::consts::PI * x;
                px.sin() / px
            };
            sinc * window
        })
        .collect()
}

/// Band-limited resampling by windowed-sinc interpolation.
///
/// Output length is `round(len * target / source)`. Resampling to the
/// clip's own rate returns an identical clip.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::Config("target rate must be positive".into()));
    }
    let source_rate = clip.sample_rate();
    if source_rate == target_rate {
        return Ok(clip.clone());
    }
    let input: Vec<f64> = clip.samples().iter().map(|&s| s as f64).collect();
    let out_len = ((clip.len() as f64) * target_rate as f64 / source_rate as f64).round() as usize;
    if out_len == 0 {
        return Err(Error::EmptyAudio);
    }

    let table = kernel_table();
    let ratio = source_rate as f64 / target_rate as f64;
    // downsampling narrows the passband to the target Nyquist
    let cutoff = ROLLOFF * (1.0 / ratio).min(1.0);
    let half_width = ZERO_CROSSINGS as f64 / cutoff;

    let samples = (0..out_len)
        .map(|i| {
            let t = i as f64 * ratio;
            let lo = (t - half_width).ceil().max(0.0) as usize;
            let hi = ((t + half_width).floor() as usize).min(input.len() - 1);
            let mut acc = 0.0;
            for (j, &x) in input.iter().enumerate().take(hi + 1).skip(lo) {
                let pos = (t - j as f64).abs() * cutoff * TABLE_DENSITY as f64;
                let idx = pos as usize;
                if idx + 1 >= table.len() {
                    continue;
                }
                let frac = pos - idx as f64;
                let k = table[idx] + (table[idx + 1] - table[idx]) * frac;
                acc += x * k;
            }
            quantize(acc * cutoff)
        })
        .collect();
    AudioClip::new(samples, target_rate)
}
