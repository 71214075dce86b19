//! Log-mel spectrograms: magnitude STFT, triangular mel filterbank, dB with
//! a hard floor.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub mel_bands: usize,
    pub fmin: f64,
    /// `None` means half the clip's sample rate.
    pub fmax: Option<f64>,
    pub floor_db: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            mel_bands: 64,
            fmin: 0.0,
            fmax: None,
            floor_db: -100.0,
        }
    }
}

impl MelConfig {
    pub fn frame_length(&self, rate: u32) -> usize {
        (rate as f64 * self.frame_ms / 1000.0).round() as usize
    }

    pub fn hop_length(&self, rate: u32) -> usize {
        (rate as f64 * self.hop_ms / 1000.0).round() as usize
    }

    /// Frame count for a clip of `len` samples: `1 + (len - frame) / hop`,
    /// or `None` if the clip is shorter than one frame.
    pub fn frames(&self, len: usize, rate: u32) -> Option<usize> {
        let frame = self.frame_length(rate);
        let hop = self.hop_length(rate);
        (len >= frame).then(|| 1 + (len - frame) / hop)
    }

    fn validate(&self, rate: u32) -> Result<()> {
        let fmax = self.fmax.unwrap_or(rate as f64 / 2.0);
        if self.mel_bands == 0 {
            return Err(Error::Config("mel_bands must be positive".into()));
        }
        if self.frame_length(rate) == 0 || self.hop_length(rate) == 0 {
            return Err(Error::Config(
                "frame and hop must span at least one sample".into(),
            ));
        }
        if !(self.fmin >= 0.0 && fmax > self.fmin && fmax <= rate as f64 / 2.0) {
            return Err(Error::Config(format!(
                "mel range [{}, {fmax}] invalid for rate {rate}",
                self.fmin
            )));
        }
        Ok(())
    }
}

/// Frames × mel bands matrix of dB values, row-major by frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMelSpectrogram {
    values: Vec<f64>,
    frames: usize,
    mel_bands: usize,
    frame_hop: f64,
    source_rate: u32,
}

impl LogMelSpectrogram {
    pub fn new(
        values: Vec<f64>,
        frames: usize,
        mel_bands: usize,
        frame_hop: f64,
        source_rate: u32,
    ) -> Result<Self> {
        if mel_bands == 0 || values.len() != frames * mel_bands {
            return Err(Error::Config(format!(
                "{} values cannot form {frames}x{mel_bands}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("spectrogram entries must be finite".into()));
        }
        Ok(Self {
            values,
            frames,
            mel_bands,
            frame_hop,
            source_rate,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn mel_bands(&self) -> usize {
        self.mel_bands
    }

    /// Hop between frames in seconds.
    pub fn frame_hop(&self) -> f64 {
        self.frame_hop
    }

    pub fn source_rate(&self) -> u32 {
        self.source_rate
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.mel_bands..(t + 1) * self.mel_bands]
    }

    pub fn get(&self, t: usize, band: usize) -> f64 {
        self.values[t * self.mel_bands + band]
    }

    /// Mean over frames for each band.
    pub fn band_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.mel_bands];
        for t in 0..self.frames {
            for (m, v) in means.iter_mut().zip(self.frame(t)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= self.frames as f64);
        means
    }

    /// Flat binary cache format: `u32 rows, u32 cols, f64 hop, u32 rate`,
    /// then `rows*cols` little-endian f64 values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.frames as u32).to_le_bytes())?;
        w.write_all(&(self.mel_bands as u32).to_le_bytes())?;
        w.write_all(&self.frame_hop.to_le_bytes())?;
        w.write_all(&self.source_rate.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut u32buf = [0u8; 4];
        let mut f64buf = [0u8; 8];
        r.read_exact(&mut u32buf)?;
        let rows = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let cols = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut f64buf)?;
        let hop = f64::from_le_bytes(f64buf);
        r.read_exact(&mut u32buf)?;
        let rate = u32::from_le_bytes(u32buf);
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut f64buf)?;
            values.push(f64::from_le_bytes(f64buf));
        }
        Self::new(values, rows, cols, hop, rate)
    }

    /// Grayscale heatmap, time on the x axis and low frequencies at the bottom.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let img = image::GrayImage::from_fn(self.frames as u32, self.mel_bands as u32, |x, y| {
            let band = self.mel_bands - 1 - y as usize;
            let v = (self.get(x as usize, band) - lo) / span;
            image::Luma([(v * 255.0).round() as u8])
        });
        img.save(path.as_ref())
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the mel scale, each normalized to unit area in Hz
/// (`2 / (f_hi - f_lo)` peak height). Returned as `bands × bins`.
pub fn mel_filterbank(
    bands: usize,
    fft_size: usize,
    rate: u32,
    fmin: f64,
    fmax: f64,
) -> Vec<Vec<f64>> {
    let bins = fft_size / 2 + 1;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (bands + 1) as f64))
        .collect();
    let bin_hz = rate as f64 / fft_size as f64;
    (0..bands)
        .map(|b| {
            let (lo, center, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            let height = 2.0 / (hi - lo);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let w = if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    };
                    w * height
                })
                .collect()
        })
        .collect()
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos())
        .collect()
}

/// Reusable extractor holding the FFT plan, window and filterbank for one
/// sample rate.
pub struct MelExtractor {
    config: MelConfig,
    rate: u32,
    frame: usize,
    hop: usize,
    fft_size: usize,
    window: Vec<f64>,
    /// Sparse rows: (first bin, weights).
    filters: Vec<(usize, Vec<f64>)>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl MelExtractor {
    pub fn new(config: MelConfig, rate: u32) -> Result<Self> {
        config.validate(rate)?;
        let frame = config.frame_length(rate);
        let hop = config.hop_length(rate);
        let fft_size = frame.next_power_of_two();
        let fmax = config.fmax.unwrap_or(rate as f64 / 2.0);
        let filters = mel_filterbank(config.mel_bands, fft_size, rate, config.fmin, fmax)
            .into_iter()
            .map(|row| {
                let first = row.iter().position(|&w| w != 0.0).unwrap_or(0);
                let last = row.iter().rposition(|&w| w != 0.0).unwrap_or(0);
                (first, row[first..=last].to_vec())
            })
            .collect();
        Ok(Self {
            config,
            rate,
            frame,
            hop,
            fft_size,
            window: hann(frame),
            filters,
            fft: FftPlanner::new().plan_fft_forward(fft_size),
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<LogMelSpectrogram> {
        if clip.sample_rate() != self.rate {
            return Err(Error::Config(format!(
                "extractor built for {} Hz, clip is {} Hz",
                self.rate,
                clip.sample_rate()
            )));
        }
        let frames = self
            .config
            .frames(clip.len(), self.rate)
            .ok_or(Error::TooShort {
                len: clip.len(),
                frame: self.frame,
            })?;
        let x = clip.to_normalized();
        let bands = self.config.mel_bands;
        let floor_power = 10f64.powf(self.config.floor_db / 10.0);
        let mut values = Vec::with_capacity(frames * bands);
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_size];
        let mut power = vec![0.0; self.fft_size / 2 + 1];
        for t in 0..frames {
            let start = t * self.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = if i < self.frame {
                    Complex::new(x[start + i] * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (first, weights) in &self.filters {
                let e: f64 = weights
                    .iter()
                    .zip(&power[*first..])
                    .map(|(w, p)| w * p)
                    .sum();
                values.push(10.0 * e.max(floor_power).log10());
            }
        }
        LogMelSpectrogram::new(
            values,
            frames,
            bands,
            self.hop as f64 / self.rate as f64,
            self.rate,
        )
    }
}

/// Log-mel spectrogram of `clip` under `config`.
pub fn log_mel(clip: &AudioClip, config: &MelConfig) -> Result<LogMelSpectrogram> {
    MelExtractor::new(*config, clip.sample_rate())?.extract(clip)
}
