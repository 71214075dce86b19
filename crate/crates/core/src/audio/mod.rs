//! PCM clips, WAV I/O, resampling, level calibration and noise superimposition.

mod resample;
mod wav;

pub use resample::resample;
pub use wav::{load_wav, read_wav, save_wav, write_wav};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full-scale reference for 16-bit PCM.
pub const FULL_SCALE: f64 = 32768.0;

/// Mono 16-bit PCM audio.
///
/// Immutable after construction. Samples are stored as `i16`, so the
/// 16-bit range holds by type; construction rejects empty buffers and a
/// zero sample rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioClip {
    samples: Vec<i16>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Quantizes normalized samples (full scale = ±1.0) to 16-bit, rounding
    /// to nearest and saturating at the PCM limits.
    pub fn from_normalized(samples: &[f64], sample_rate: u32) -> Result<Self> {
        Self::new(
            samples.iter().map(|&x| quantize(x * FULL_SCALE)).collect(),
            sample_rate,
        )
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Always 1: ingestion downmixes to mono.
    pub fn channels(&self) -> u16 {
        1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Never true for a constructed clip; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples scaled so that 16-bit full scale maps to ±1.0.
    pub fn to_normalized(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|&s| s as f64 / FULL_SCALE)
            .collect()
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }

    /// Largest absolute sample value.
    pub fn peak(&self) -> u16 {
        self.samples
            .iter()
            .map(|&s| s.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Root mean square in raw PCM units.
    pub fn rms(&self) -> f64 {
        rms(self.samples.iter().map(|&s| s as f64))
    }

    /// Pads with zeros or truncates to exactly `len` samples.
    pub fn fit_length(&self, len: usize) -> Result<Self> {
        let mut samples = self.samples.clone();
        samples.resize(len, 0);
        Self::new(samples, self.sample_rate)
    }
}

/// Rounds to the nearest integer and saturates to the 16-bit range.
pub fn quantize(x: f64) -> i16 {
    let r = x.round();
    if r >= i16::MAX as f64 {
        i16::MAX
    } else if r <= i16::MIN as f64 {
        i16::MIN
    } else if r.is_nan() {
        0
    } else {
        r as i16
    }
}

pub(crate) fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// RMS level relative to 16-bit full scale, in dB.
///
/// An all-zero clip yields `f64::NEG_INFINITY`.
pub fn rms_dbfs(clip: &AudioClip) -> f64 {
    let r = clip.rms();
    if r == 0.0 {
        f64::NEG_INFINITY
    } else {
        20.0 * (r / FULL_SCALE).log10()
    }
}

/// Converts a dBFS level to a linear amplitude in PCM units.
pub fn dbfs_to_amplitude(dbfs: f64) -> f64 {
    FULL_SCALE * 10f64.powf(dbfs / 20.0)
}

/// How noise is scaled before superimposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum GainSpec {
    /// RMS(base) / RMS(scaled noise) equals this ratio in dB.
    SnrDb(f64),
    /// Peak of the scaled noise sits at this level; must be ≤ 0.
    /// `NEG_INFINITY` silences the noise.
    PeakDbfs(f64),
}

/// Default mixing SNR for masking noise.
pub const DEFAULT_SNR_DB: f64 = 5.0;
/// Default peak level of generated noise.
pub const DEFAULT_PEAK_DBFS: f64 = -20.0;

impl GainSpec {
    pub fn snr_db(value: f64) -> Result<Self> {
        let g = GainSpec::SnrDb(value);
        g.validate()?;
        Ok(g)
    }

    pub fn peak_dbfs(value: f64) -> Result<Self> {
        let g = GainSpec::PeakDbfs(value);
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GainSpec::SnrDb(v) if !v.is_finite() => {
                Err(Error::Config(format!("snr_db must be finite, got {v}")))
            }
            GainSpec::PeakDbfs(v) if v.is_nan() || v > 0.0 => {
                Err(Error::Config(format!("peak_dbfs must be <= 0, got {v}")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for GainSpec {
    fn default() -> Self {
        GainSpec::SnrDb(DEFAULT_SNR_DB)
    }
}

/// Noise tiled (or trimmed) to `len` samples. Each repetition restarts at
/// the first noise sample.
pub fn tile(noise: &[i16], len: usize) -> Vec<i16> {
    noise.iter().copied().cycle().take(len).collect()
}

/// The noise exactly as it will be added to `base`: resampled to the base
/// rate, tiled to the base length and scaled per `gain`. Values are in PCM
/// units and not yet quantized.
pub fn scaled_noise(base: &AudioClip, noise: &AudioClip, gain: GainSpec) -> Result<Vec<f64>> {
    gain.validate()?;
    let noise = if noise.sample_rate() != base.sample_rate() {
        resample(noise, base.sample_rate())?
    } else {
        noise.clone()
    };
    let tiled = tile(noise.samples(), base.len());
    let factor = match gain {
        GainSpec::SnrDb(snr) => {
            let noise_rms = rms(tiled.iter().map(|&s| s as f64));
            if noise_rms == 0.0 {
                return Err(Error::SilentNoise);
            }
            base.rms() / (noise_rms * 10f64.powf(snr / 20.0))
        }
        GainSpec::PeakDbfs(p) => {
            let peak = tiled.iter().map(|&s| s.unsigned_abs()).max().unwrap_or(0);
            if peak == 0 || p == f64::NEG_INFINITY {
                0.0
            } else {
                dbfs_to_amplitude(p) / peak as f64
            }
        }
    };
    Ok(tiled.iter().map(|&s| s as f64 * factor).collect())
}

/// Superimposes `noise` on `base`.
///
/// The result always has the length and rate of `base`; sums beyond the
/// 16-bit range saturate.
pub fn mix(base: &AudioClip, noise: &AudioClip, gain: GainSpec) -> Result<AudioClip> {
    let scaled = scaled_noise(base, noise, gain)?;
    let samples = base
        .samples()
        .iter()
        .zip(&scaled)
        .map(|(&b, &n)| quantize(b as f64 + n))
        .collect();
    AudioClip::new(samples, base.sample_rate())
}
