//! Seeded white noise and the spectral-flatness measure used to judge how
//! white a signal is.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::{dbfs_to_amplitude, AudioClip};
use crate::error::{Error, Result};
use crate::features::hann;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Gan,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Gan => "gan",
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseKind::White),
            "gan" => Ok(NoiseKind::Gan),
            other => Err(Error::Config(format!("unknown noise kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub kind: NoiseKind,
    pub duration: f64,
    pub sample_rate: u32,
    pub peak_dbfs: f64,
    pub seed: u64,
}

impl NoiseProfile {
    pub fn white(duration: f64, sample_rate: u32, peak_dbfs: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::White,
            duration,
            sample_rate,
            peak_dbfs,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.peak_dbfs.is_nan() || self.peak_dbfs > 0.0 {
            return Err(Error::Config(format!(
                "peak_dbfs must be <= 0, got {}",
                self.peak_dbfs
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Largest integer amplitude whose level does not exceed `peak_dbfs`.
pub fn peak_amplitude(peak_dbfs: f64) -> i16 {
    dbfs_to_amplitude(peak_dbfs)
        .floor()
        .min(i16::MAX as f64)
        .max(0.0) as i16
}

/// I.i.d. uniform integer samples in `[-A, A]`, where `A` is the largest
/// amplitude at or below the profile's peak level.
pub fn white_noise(profile: &NoiseProfile) -> Result<AudioClip> {
    if profile.kind != NoiseKind::White {
        return Err(Error::Config("white_noise needs a white profile".into()));
    }
    profile.validate()?;
    let amp = peak_amplitude(profile.peak_dbfs) as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let samples = (0..profile.len())
        .map(|_| rng.gen_range(-amp..=amp) as i16)
        .collect();
    AudioClip::new(samples, profile.sample_rate)
}

/// Welch segment length for the flatness estimate.
const WELCH_SEGMENT: usize = 512;

/// Welch power spectrum (Hann window, 50% overlap) of the mean-removed
/// signal; bins 1..segment/2, excluding DC and Nyquist.
pub fn welch_psd(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let centered: Vec<f64> = signal.iter().map(|x| x - mean).collect();
    if centered.iter().all(|&x| x == 0.0) {
        return Err(Error::SilentNoise);
    }
    let seg = if centered.len() >= WELCH_SEGMENT {
        WELCH_SEGMENT
    } else {
        // short input: one zero-padded segment
        centered.len().next_power_of_two().max(4)
    };
    let hop = seg / 2;
    let window = hann(seg.min(centered.len()));
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let mut psd = vec![0.0; seg / 2 - 1];
    let mut segments = 0usize;
    let mut start = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    loop {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = match (window.get(i), centered.get(start + i)) {
                (Some(w), Some(x)) => Complex::new(w * x, 0.0),
                _ => Complex::new(0.0, 0.0),
            };
        }
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf[1..seg / 2]) {
            *p += c.norm_sqr();
        }
        segments += 1;
        start += hop;
        if start + seg > centered.len() {
            break;
        }
    }
    psd.iter_mut().for_each(|p| *p /= segments as f64);
    Ok(psd)
}

/// Geometric over arithmetic mean of the Welch power spectrum. 1.0 for a
/// perfectly flat spectrum, near 0 for a pure tone.
pub fn spectral_flatness_of(signal: &[f64]) -> Result<f64> {
    let psd = welch_psd(signal)?;
    let arith = psd.iter().sum::<f64>() / psd.len() as f64;
    if arith <= 0.0 {
        return Err(Error::SilentNoise);
    }
    if psd.iter().any(|&p| p <= 0.0) {
        return Ok(0.0);
    }
    let log_mean = psd.iter().map(|p| p.ln()).sum::<f64>() / psd.len() as f64;
    Ok((log_mean.exp() / arith).clamp(0.0, 1.0))
}

pub fn spectral_flatness(clip: &AudioClip) -> Result<f64> {
    spectral_flatness_of(&clip.to_normalized())
}
