//! 1-D DCGAN-style generator/discriminator pair that learns to emit
//! two-second noise waveforms imitating white noise.
//!
//! The generator maps a latent vector through a dense projection to 16
//! steps of `C` channels, then through six transposed convolutions
//! (kernel 25, strides 4,4,4,4,4,2) to 32768 samples, keeping the first
//! 32000. Channel widths halve per layer; the last layer emits one channel
//! through `tanh`. The discriminator mirrors it with strided convolutions
//! and leaky activations, ending in a single logit.

mod checkpoint;
mod train;

pub use checkpoint::GanCheckpoint;
pub use train::{
    discriminator_step, eval_latents, generator_step, train, GanLossTrace, GanTrainError,
    GanTraining, RealBatches, StepStats, TraceStep, TrainConfig, WhiteNoiseBatches,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::{dbfs_to_amplitude, quantize, AudioClip};
use crate::error::{Error, Result};
use crate::nn::{
    Conv1d, ConvTranspose1d, Dense, LeakyRelu, Relu, Reshape, Sequential, Tanh, Tensor, Trim,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub latent_dim: usize,
    /// Channels after the dense projection; halves per transposed layer.
    pub base_channels: usize,
    pub kernel: usize,
    /// Time steps after the dense projection.
    pub initial_len: usize,
    /// Upsampling factor of each transposed convolution, in order.
    pub strides: Vec<usize>,
    pub output_len: usize,
    pub sample_rate: u32,
    pub leaky_slope: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 100,
            base_channels: 512,
            kernel: 25,
            initial_len: 16,
            strides: vec![4, 4, 4, 4, 4, 2],
            output_len: 32000,
            sample_rate: 16000,
            leaky_slope: 0.2,
        }
    }
}

impl GanConfig {
    /// Same layer arithmetic with 64 base channels, sized for CPU training.
    pub fn desk() -> Self {
        Self {
            base_channels: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let layers = self.strides.len();
        if self.latent_dim == 0 || self.kernel == 0 || self.initial_len == 0 || layers == 0 {
            return Err(Error::Config(
                "latent_dim, kernel, initial_len and layer count must be positive".into(),
            ));
        }
        if self.strides.contains(&0) {
            return Err(Error::Config("strides must be positive".into()));
        }
        let full = self.upsampled_len();
        if full < self.output_len || self.output_len == 0 {
            return Err(Error::Config(format!(
                "layers produce {full} samples, cannot yield {}",
                self.output_len
            )));
        }
        if self.base_channels >> (layers - 1) == 0 {
            return Err(Error::Config(format!(
                "{} base channels cannot halve across {layers} layers",
                self.base_channels
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(())
    }

    /// Samples before trimming.
    pub fn upsampled_len(&self) -> usize {
        self.initial_len * self.strides.iter().product::<usize>()
    }

    /// Channel widths from the projection to the output: `C, C/2, …, 1`.
    pub fn channel_plan(&self) -> Vec<usize> {
        let layers = self.strides.len();
        let mut plan: Vec<usize> = (0..layers).map(|i| self.base_channels >> i).collect();
        plan.push(1);
        plan
    }

    /// Closed-form generator parameter count.
    pub fn generator_param_count(&self) -> usize {
        let ch = self.channel_plan();
        let proj = Dense::param_count(self.latent_dim, self.initial_len * ch[0]);
        proj + ch
            .windows(2)
            .map(|w| ConvTranspose1d::param_count(w[0], w[1], self.kernel))
            .sum::<usize>()
    }

    /// Signal lengths after each discriminator convolution.
    pub fn discriminator_lengths(&self) -> Vec<usize> {
        let mut lens = vec![self.output_len];
        for &s in self.strides.iter().rev() {
            let last = *lens.last().unwrap();
            lens.push(Conv1d::output_len(last, s));
        }
        lens
    }

    pub fn discriminator_param_count(&self) -> usize {
        let mut ch = self.channel_plan();
        ch.reverse();
        let convs: usize = ch
            .windows(2)
            .map(|w| Conv1d::param_count(w[0], w[1], self.kernel))
            .sum();
        let final_len = *self.discriminator_lengths().last().unwrap();
        convs + Dense::param_count(self.base_channels * final_len, 1)
    }
}

/// Latent input `z` with the seed it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVector {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl LatentVector {
    /// Standard normal draws.
    pub fn from_seed(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            values: (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect(),
            seed,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            seed: 0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.values.len() != dim {
            return Err(Error::Config(format!(
                "latent has {} values, expected {dim}",
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("latent values must be finite".into()));
        }
        Ok(())
    }
}

pub struct Generator {
    config: GanConfig,
    net: Sequential,
}

impl Generator {
    pub fn new(config: &GanConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = config.channel_plan();
        let mut net = Sequential::new()
            .with(Dense::new(
                config.latent_dim,
                config.initial_len * ch[0],
                &mut rng,
            ))
            .with(Reshape::new(vec![ch[0], config.initial_len]))
            .with(Relu::new());
        let layers = config.strides.len();
        for (i, &stride) in config.strides.iter().enumerate() {
            net.push(ConvTranspose1d::new(
                ch[i],
                ch[i + 1],
                config.kernel,
                stride,
                &mut rng,
            ));
            if i + 1 < layers {
                net.push(Relu::new());
            } else {
                net.push(Tanh::new());
            }
        }
        net.push(Trim::new(config.output_len));
        Ok(Self {
            config: config.clone(),
            net,
        })
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential {
        &mut self.net
    }

    /// `[B, latent]` → `[B, 1, output_len]` in `[-1, 1]`.
    pub fn generate(&self, z: &Tensor) -> Tensor {
        self.net.infer(z)
    }

    pub fn generate_one(&self, latent: &LatentVector) -> Result<Vec<f64>> {
        latent.validate(self.config.latent_dim)?;
        let z = Tensor::new(vec![1, self.config.latent_dim], latent.values.clone());
        Ok(self.generate(&z).data)
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }
}

pub struct Discriminator {
    config: GanConfig,
    net: Sequential,
}

impl Discriminator {
    pub fn new(config: &GanConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ch = config.channel_plan();
        ch.reverse();
        let mut net = Sequential::new();
        for (i, &stride) in config.strides.iter().rev().enumerate() {
            net.push(Conv1d::new(
                ch[i],
                ch[i + 1],
                config.kernel,
                stride,
                &mut rng,
            ));
            net.push(LeakyRelu::new(config.leaky_slope));
        }
        let final_len = *config.discriminator_lengths().last().unwrap();
        net.push(Dense::new(config.base_channels * final_len, 1, &mut rng));
        Ok(Self {
            config: config.clone(),
            net,
        })
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential {
        &mut self.net
    }

    /// Raw logits for `[B, 1, L]` input.
    pub fn logits(&self, x: &Tensor) -> Vec<f64> {
        self.net.infer(x).data
    }

    /// `D(x)` for each item, strictly inside `(0, 1)`.
    pub fn probabilities(&self, x: &Tensor) -> Vec<f64> {
        self.logits(x).into_iter().map(probability).collect()
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }
}

/// Sigmoid of a logit, kept off the endpoints where `f64` rounding would
/// otherwise reach exactly 0 or 1.
pub fn probability(logit: f64) -> f64 {
    let lo = f64::EPSILON / 2.0;
    crate::nn::loss::sigmoid(logit).clamp(lo, 1.0 - lo)
}

/// Generator output rescaled so ±1 maps to `peak_dbfs`, quantized to
/// 16-bit at the configured rate.
pub fn sample(
    checkpoint: &GanCheckpoint,
    latent: &LatentVector,
    peak_dbfs: f64,
) -> Result<AudioClip> {
    let generator = checkpoint.generator()?;
    sample_with(&generator, latent, peak_dbfs)
}

pub fn sample_with(
    generator: &Generator,
    latent: &LatentVector,
    peak_dbfs: f64,
) -> Result<AudioClip> {
    if peak_dbfs.is_nan() || peak_dbfs > 0.0 {
        return Err(Error::Config(format!(
            "peak_dbfs must be <= 0, got {peak_dbfs}"
        )));
    }
    let amplitude = dbfs_to_amplitude(peak_dbfs);
    let wave = generator.generate_one(latent)?;
    let samples = wave.iter().map(|&x| quantize(x * amplitude)).collect();
    AudioClip::new(samples, generator.config().sample_rate)
}
