use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{probability, Discriminator, GanCheckpoint, GanConfig, Generator, LatentVector};
use crate::audio::dbfs_to_amplitude;
use crate::error::{Error, Result};
use crate::nn::loss::{discriminator_loss, generator_loss};
use crate::nn::optim::Adam;
use crate::nn::Tensor;
use crate::noise::spectral_flatness_of;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Alternating discriminator/generator updates, one fresh batch each.
    pub steps: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    /// Sample flatness is checked every this many steps and at the end.
    pub eval_every: usize,
    /// Latent draws averaged per flatness check.
    pub eval_draws: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            batch_size: 32,
            lr_g: 2e-4,
            lr_d: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            seed: 0,
            eval_every: 20,
            eval_draws: 16,
        }
    }
}

impl TrainConfig {
    /// 200 steps with a faster generator than discriminator, which keeps
    /// the small desk network from being overpowered early.
    pub fn desk() -> Self {
        Self {
            lr_g: 1e-3,
            lr_d: 1e-4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 || self.eval_draws == 0 {
            return Err(Error::Config(
                "batch_size, eval_every and eval_draws must be positive".into(),
            ));
        }
        for (name, v) in [("lr_g", self.lr_g), ("lr_d", self.lr_d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Supplies batches of real examples shaped `[B, 1, len]` in `[-1, 1]`.
pub trait RealBatches: Send {
    fn next_batch(&mut self, batch: usize, len: usize) -> Tensor;
}

/// Seeded uniform white noise at a fixed peak level.
pub struct WhiteNoiseBatches {
    rng: ChaCha8Rng,
    amplitude: f64,
}

impl WhiteNoiseBatches {
    /// `peak_dbfs` relative to the `[-1, 1]` range, so 0 spans it fully.
    pub fn new(seed: u64, peak_dbfs: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            amplitude: dbfs_to_amplitude(peak_dbfs.min(0.0)) / crate::audio::FULL_SCALE,
        }
    }
}

impl RealBatches for WhiteNoiseBatches {
    fn next_batch(&mut self, batch: usize, len: usize) -> Tensor {
        let a = self.amplitude;
        let data = (0..batch * len)
            .map(|_| self.rng.gen_range(-a..=a))
            .collect();
        Tensor::new(vec![batch, 1, len], data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub loss: f64,
    /// Mean `D(x)` over the real batch (discriminator step only).
    pub d_real: f64,
    /// Mean `D(G(z))` over the fake batch.
    pub d_fake: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GanLossTrace {
    pub steps: Vec<TraceStep>,
    /// `(step, mean flatness)` of fixed-latent samples.
    pub flatness: Vec<(usize, f64)>,
}

impl GanLossTrace {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.steps.iter().all(|s| {
            s.loss_d.is_finite()
                && s.loss_g.is_finite()
                && s.d_real.is_finite()
                && s.d_fake.is_finite()
        })
    }
}

pub struct GanTraining {
    /// Snapshot with the best sample flatness seen.
    pub checkpoint: GanCheckpoint,
    /// State after the final step.
    pub last: GanCheckpoint,
    pub trace: GanLossTrace,
}

#[derive(Debug, thiserror::Error)]
pub enum GanTrainError {
    #[error("training diverged at step {step}: {what}")]
    Diverged {
        step: usize,
        what: String,
        last_good: Box<GanCheckpoint>,
        trace: GanLossTrace,
    },
    #[error(transparent)]
    Failed(#[from] Error),
}

impl From<GanTrainError> for Error {
    fn from(e: GanTrainError) -> Self {
        match e {
            GanTrainError::Diverged { step, what, .. } => Error::Divergence { step, what },
            GanTrainError::Failed(e) => e,
        }
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

/// One discriminator pass on a real and a fake batch. Accumulates
/// parameter gradients of the discriminator loss into `d`.
pub fn discriminator_step(d: &mut Discriminator, real: &Tensor, fake: &Tensor) -> StepStats {
    let nr = real.batch();
    let logits = d.net_mut().forward(&Tensor::concat(real, fake));
    let (loss, mut grad, g_fake) = discriminator_loss(&logits.data[..nr], &logits.data[nr..]);
    grad.extend(g_fake);
    d.net_mut()
        .backward(&Tensor::new(logits.shape.clone(), grad), true);
    StepStats {
        loss,
        d_real: mean(logits.data[..nr].iter().map(|&l| probability(l))),
        d_fake: mean(logits.data[nr..].iter().map(|&l| probability(l))),
    }
}

/// One generator pass through a frozen discriminator. Accumulates the
/// non-saturating generator loss gradients into `g` only.
pub fn generator_step(g: &mut Generator, d: &mut Discriminator, z: &Tensor) -> StepStats {
    let fake = g.net_mut().forward(z);
    let logits = d.net_mut().forward(&fake);
    let (loss, grad) = generator_loss(&logits.data);
    let dfake = d
        .net_mut()
        .backward(&Tensor::new(logits.shape.clone(), grad), false);
    g.net_mut().backward(&dfake, true);
    StepStats {
        loss,
        d_real: f64::NAN,
        d_fake: mean(logits.data.iter().map(|&l| probability(l))),
    }
}

fn latent_batch(rng: &mut ChaCha8Rng, batch: usize, dim: usize) -> Tensor {
    let data = (0..batch * dim)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Tensor::new(vec![batch, dim], data)
}

/// Mean spectral flatness of generator samples over fixed latents.
pub(crate) fn sample_flatness(g: &Generator, latents: &[LatentVector]) -> Result<f64> {
    let mut total = 0.0;
    for z in latents {
        total += match spectral_flatness_of(&g.generate_one(z)?) {
            Ok(f) => f,
            // a constant output has no spectrum to speak of
            Err(Error::SilentNoise) => 0.0,
            Err(e) => return Err(e),
        };
    }
    Ok(total / latents.len() as f64)
}

pub(super) fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Latents used to score flatness during training.
pub fn eval_latents(config: &GanConfig, train: &TrainConfig) -> Vec<LatentVector> {
    (0..train.eval_draws as u64)
        .map(|i| LatentVector::from_seed(config.latent_dim, derive_seed(train.seed, 1000 + i)))
        .collect()
}

struct State {
    g: Generator,
    d: Discriminator,
    opt_g: Adam,
    opt_d: Adam,
}

impl State {
    fn checkpoint(&self, train: &TrainConfig, step: usize, flatness: Option<f64>) -> GanCheckpoint {
        GanCheckpoint::from_parts(
            &self.g,
            &self.d,
            Some(train.clone()),
            step,
            &self.opt_g,
            &self.opt_d,
            flatness,
        )
    }
}

/// Alternates one discriminator and one generator update per step and
/// keeps the snapshot whose samples are flattest.
pub fn train(
    config: &GanConfig,
    train: &TrainConfig,
    real: &mut dyn RealBatches,
) -> std::result::Result<GanTraining, GanTrainError> {
    config.validate()?;
    train.validate()?;
    let mut st = State {
        g: Generator::new(config, derive_seed(train.seed, 1))?,
        d: Discriminator::new(config, derive_seed(train.seed, 2))?,
        opt_g: Adam::new(train.lr_g, train.beta1, train.beta2),
        opt_d: Adam::new(train.lr_d, train.beta1, train.beta2),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(train.seed, 3));
    let latents = eval_latents(config, train);
    let mut trace = GanLossTrace::default();
    let mut best: Option<GanCheckpoint> = None;
    let mut last_good = st.checkpoint(train, 0, None);

    for step in 1..=train.steps {
        let real_batch = real.next_batch(train.batch_size, config.output_len);
        let z = latent_batch(&mut rng, train.batch_size, config.latent_dim);
        let fake = st.g.generate(&z);
        st.d.net_mut().zero_grad();
        let ds = discriminator_step(&mut st.d, &real_batch, &fake);
        st.opt_d.update(st.d.net_mut().params_mut());

        let z = latent_batch(&mut rng, train.batch_size, config.latent_dim);
        st.g.net_mut().zero_grad();
        let gs = generator_step(&mut st.g, &mut st.d, &z);
        st.opt_g.update(st.g.net_mut().params_mut());

        let entry = TraceStep {
            step,
            loss_d: ds.loss,
            loss_g: gs.loss,
            d_real: ds.d_real,
            d_fake: ds.d_fake,
        };
        let what = if !(entry.loss_d.is_finite() && entry.loss_g.is_finite()) {
            Some("non-finite loss")
        } else if !st.d.net().params_finite() || !st.g.net().params_finite() {
            Some("non-finite parameters")
        } else {
            None
        };
        trace.steps.push(entry);
        if let Some(what) = what {
            return Err(GanTrainError::Diverged {
                step,
                what: what.to_string(),
                last_good: Box::new(best.unwrap_or(last_good)),
                trace,
            });
        }
        debug!(
            "step {step}: loss_d {:.4} loss_g {:.4} D(x) {:.3} D(G(z)) {:.3}",
            ds.loss, gs.loss, ds.d_real, ds.d_fake
        );

        if step % train.eval_every == 0 || step == train.steps {
            let flat = sample_flatness(&st.g, &latents)?;
            info!("step {step}: sample flatness {flat:.4}");
            trace.flatness.push((step, flat));
            if best
                .as_ref()
                .and_then(|b| b.flatness)
                .is_none_or(|f| flat > f)
            {
                best = Some(st.checkpoint(train, step, Some(flat)));
            }
        }
        last_good = st.checkpoint(train, step, None);
    }

    let last = st.checkpoint(train, train.steps, trace.flatness.last().map(|&(_, f)| f));
    Ok(GanTraining {
        checkpoint: best.unwrap_or_else(|| last.clone()),
        last,
        trace,
    })
}
