use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soundmask::maskgan::{
    discriminator_step, generator_step, sample, sample_with, train, Discriminator, GanCheckpoint,
    GanConfig, GanTrainError, Generator, LatentVector, RealBatches, TrainConfig, WhiteNoiseBatches,
};
use soundmask::nn::optim::Adam;
use soundmask::nn::Tensor;

const H: f64 = 1e-6;

/// Two layers each side, 36 parameters in total.
fn miniature() -> GanConfig {
    GanConfig {
        latent_dim: 3,
        base_channels: 2,
        kernel: 3,
        initial_len: 2,
        strides: vec![2],
        output_len: 4,
        sample_rate: 16000,
        leaky_slope: 0.2,
    }
}

fn small() -> GanConfig {
    GanConfig {
        latent_dim: 8,
        base_channels: 8,
        kernel: 5,
        initial_len: 8,
        strides: vec![4, 2],
        output_len: 60,
        sample_rate: 16000,
        leaky_slope: 0.2,
    }
}

fn small_train(steps: usize) -> TrainConfig {
    TrainConfig {
        steps,
        batch_size: 4,
        eval_every: 2,
        eval_draws: 2,
        seed: 21,
        ..TrainConfig::default()
    }
}

fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn ln_sigmoid(x: f64) -> f64 {
    -(1.0 + (-x).exp()).ln()
}

/// `-mean ln D(real) - mean ln(1 - D(fake))`, straight from the definition.
fn d_loss_oracle(d: &Discriminator, real: &Tensor, fake: &Tensor) -> f64 {
    let lr = d.logits(real);
    let lf = d.logits(fake);
    -lr.iter().map(|&l| ln_sigmoid(l)).sum::<f64>() / lr.len() as f64
        - lf.iter().map(|&l| ln_sigmoid(-l)).sum::<f64>() / lf.len() as f64
}

fn g_loss_oracle(g: &Generator, d: &Discriminator, z: &Tensor) -> f64 {
    let l = d.logits(&g.generate(z));
    -l.iter().map(|&l| ln_sigmoid(l)).sum::<f64>() / l.len() as f64
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a.iter().chain(b).map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

#[test]
fn miniature_is_within_parameter_budget() {
    let c = miniature();
    let total = Generator::new(&c, 0).unwrap().param_count()
        + Discriminator::new(&c, 0).unwrap().param_count();
    assert!(total <= 100, "{total}");
}

#[test]
fn discriminator_loss_gradient_matches_finite_differences() {
    let c = miniature();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut d = Discriminator::new(&c, 3).unwrap();
    let real = random(vec![3, 1, 4], &mut rng);
    let fake = random(vec![3, 1, 4], &mut rng);
    d.net_mut().zero_grad();
    let stats = discriminator_step(&mut d, &real, &fake);
    assert!((stats.loss - d_loss_oracle(&d, &real, &fake)).abs() < 1e-12);
    let analytic: Vec<f64> = d
        .net()
        .named_params()
        .iter()
        .flat_map(|(_, p)| p.grad.clone())
        .collect();
    let mut numeric = Vec::new();
    let counts: Vec<usize> = d
        .net()
        .named_params()
        .iter()
        .map(|(_, p)| p.len())
        .collect();
    for (pi, &n) in counts.iter().enumerate() {
        for j in 0..n {
            let orig = d.net_mut().params_mut()[pi].value[j];
            d.net_mut().params_mut()[pi].value[j] = orig + H;
            let lp = d_loss_oracle(&d, &real, &fake);
            d.net_mut().params_mut()[pi].value[j] = orig - H;
            let lm = d_loss_oracle(&d, &real, &fake);
            d.net_mut().params_mut()[pi].value[j] = orig;
            numeric.push((lp - lm) / (2.0 * H));
        }
    }
    let e = rel_err(&analytic, &numeric);
    assert!(e < 1e-4, "relative error {e}");
}

#[test]
fn generator_loss_gradient_matches_finite_differences() {
    let c = miniature();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut g = Generator::new(&c, 4).unwrap();
    let mut d = Discriminator::new(&c, 5).unwrap();
    let z = random(vec![3, 3], &mut rng);
    g.net_mut().zero_grad();
    d.net_mut().zero_grad();
    let stats = generator_step(&mut g, &mut d, &z);
    assert!((stats.loss - g_loss_oracle(&g, &d, &z)).abs() < 1e-12);
    // the discriminator is frozen during the generator update
    assert!(d
        .net()
        .named_params()
        .iter()
        .all(|(_, p)| p.grad.iter().all(|&v| v == 0.0)));
    let analytic: Vec<f64> = g
        .net()
        .named_params()
        .iter()
        .flat_map(|(_, p)| p.grad.clone())
        .collect();
    let counts: Vec<usize> = g
        .net()
        .named_params()
        .iter()
        .map(|(_, p)| p.len())
        .collect();
    let mut numeric = Vec::new();
    for (pi, &n) in counts.iter().enumerate() {
        for j in 0..n {
            let orig = g.net_mut().params_mut()[pi].value[j];
            g.net_mut().params_mut()[pi].value[j] = orig + H;
            let lp = g_loss_oracle(&g, &d, &z);
            g.net_mut().params_mut()[pi].value[j] = orig - H;
            let lm = g_loss_oracle(&g, &d, &z);
            g.net_mut().params_mut()[pi].value[j] = orig;
            numeric.push((lp - lm) / (2.0 * H));
        }
    }
    let e = rel_err(&analytic, &numeric);
    assert!(e < 1e-4, "relative error {e}");
}

#[test]
fn optimal_discriminator_on_two_point_distribution() {
    // real: a with 0.8, b with 0.2; fake: a with 0.4, b with 0.6
    let c = miniature();
    let a = [1.0, 0.5, -0.5, 0.0];
    let b = [-1.0, 0.0, 1.0, 0.5];
    let batch = |na: usize, nb: usize| {
        let items: Vec<&[f64]> = std::iter::repeat_n(&a[..], na)
            .chain(std::iter::repeat_n(&b[..], nb))
            .collect();
        Tensor::stack(&items, &[1, 4])
    };
    let real = batch(4, 1);
    let fake = batch(2, 3);
    let mut d = Discriminator::new(&c, 9).unwrap();
    let mut opt = Adam::new(0.02, 0.9, 0.999);
    for _ in 0..3000 {
        d.net_mut().zero_grad();
        discriminator_step(&mut d, &real, &fake);
        opt.update(d.net_mut().params_mut());
    }
    let p = d.probabilities(&batch(1, 1));
    let want_a = 0.8 / (0.8 + 0.4);
    let want_b = 0.2 / (0.2 + 0.6);
    assert!((p[0] - want_a).abs() < 1e-3, "D(a) = {}", p[0]);
    assert!((p[1] - want_b).abs() < 1e-3, "D(b) = {}", p[1]);
}

#[test]
fn zero_steps_returns_initialization() {
    let tc = small_train(0);
    let out = train(&small(), &tc, &mut WhiteNoiseBatches::new(1, 0.0)).unwrap();
    assert!(out.trace.is_empty());
    assert!(out.trace.flatness.is_empty());
    assert_eq!(out.checkpoint.step, 0);
    let init = GanCheckpoint::initial(&small(), &tc).unwrap();
    assert_eq!(out.checkpoint.generator, init.generator);
    assert_eq!(out.checkpoint.discriminator, init.discriminator);
}

#[test]
fn training_is_deterministic_and_in_range() {
    let run = || {
        train(
            &small(),
            &small_train(6),
            &mut WhiteNoiseBatches::new(2, 0.0),
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.trace.steps.len(), 6);
    assert!(a.trace.all_finite());
    for s in &a.trace.steps {
        assert!(s.d_real > 0.0 && s.d_real < 1.0);
        assert!(s.d_fake > 0.0 && s.d_fake < 1.0);
    }
    assert_eq!(a.trace.flatness.len(), 3);
    let best = a
        .trace
        .flatness
        .iter()
        .map(|&(_, f)| f)
        .fold(f64::MIN, f64::max);
    assert_eq!(a.checkpoint.flatness, Some(best));
    assert!(a.checkpoint.params_finite());
}

#[test]
fn checkpoint_round_trip_gives_identical_samples() {
    let out = train(
        &small(),
        &small_train(3),
        &mut WhiteNoiseBatches::new(3, 0.0),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gan.ckpt");
    out.last.save(&path).unwrap();
    let back = GanCheckpoint::load(&path).unwrap();
    assert_eq!(back, out.last);
    let z = LatentVector::from_seed(8, 44);
    let before = sample(&out.last, &z, -20.0).unwrap();
    let after = sample(&back, &z, -20.0).unwrap();
    assert_eq!(before.samples(), after.samples());
    assert_eq!(back.adam_g.step, 3);
    assert_eq!(back.adam_g.m.len(), out.last.adam_g.m.len());
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let ck = GanCheckpoint::initial(&small(), &small_train(0)).unwrap();
    let mut bytes = ck.to_bytes().unwrap();
    bytes.truncate(bytes.len() - 8);
    assert!(GanCheckpoint::read(bytes.as_slice()).is_err());
    let mut other = ck.clone();
    other.config.base_channels = 16;
    assert!(GanCheckpoint::read(other.to_bytes().unwrap().as_slice()).is_err());
}

struct NanBatches;

impl RealBatches for NanBatches {
    fn next_batch(&mut self, batch: usize, len: usize) -> Tensor {
        Tensor::new(vec![batch, 1, len], vec![f64::NAN; batch * len])
    }
}

#[test]
fn divergence_aborts_with_last_good_checkpoint() {
    match train(&small(), &small_train(4), &mut NanBatches) {
        Err(GanTrainError::Diverged {
            step, last_good, ..
        }) => {
            assert_eq!(step, 1);
            assert_eq!(last_good.step, 0);
            assert!(last_good.params_finite());
        }
        other => panic!("expected divergence, got {:?}", other.err()),
    }
}

#[test]
fn full_size_generator_emits_two_seconds() {
    let c = GanConfig::default();
    let g = Generator::new(&c, 1).unwrap();
    let out = g.generate_one(&LatentVector::zeros(100)).unwrap();
    assert_eq!(out.len(), 32000);
    assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
    let d = Discriminator::new(&c, 2).unwrap();
    let p = d.probabilities(&Tensor::new(vec![1, 1, 32000], out));
    assert_eq!(p.len(), 1);
    assert!(p[0] > 0.0 && p[0] < 1.0);
}

#[test]
fn sample_duration_and_peak_scaling() {
    let c = GanConfig::desk();
    let mut g = Generator::new(&c, 8).unwrap();
    // drive tanh into saturation so the output reaches ±1 exactly
    for p in g.net_mut().params_mut() {
        p.value.iter_mut().for_each(|v| *v *= 50.0);
    }
    let z = LatentVector::from_seed(100, 1);
    let raw = g.generate_one(&z).unwrap();
    assert_eq!(raw.iter().fold(0.0f64, |m, v| m.max(v.abs())), 1.0);
    let clip = sample_with(&g, &z, -20.0).unwrap();
    assert_eq!(clip.len(), 32000);
    assert_eq!(clip.sample_rate(), 16000);
    assert_eq!(clip.duration_seconds(), 2.0);
    // 32768 * 10^(-1) = 3276.8
    let peak = clip.peak() as i32;
    assert!((peak - 3277).abs() <= 1, "{peak}");
    assert!(sample_with(&g, &z, 3.0).is_err());
}

#[test]
fn different_latents_give_different_samples() {
    let out = train(
        &small(),
        &small_train(2),
        &mut WhiteNoiseBatches::new(4, 0.0),
    )
    .unwrap();
    let a = sample(&out.checkpoint, &LatentVector::from_seed(8, 1), -6.0).unwrap();
    let b = sample(&out.checkpoint, &LatentVector::from_seed(8, 2), -6.0).unwrap();
    assert_ne!(a.samples(), b.samples());
}
