//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soundmask::attacks::{build, head_loss, AttackModel, AttackModelSpec, Family, LayerConfig};
use soundmask::audio::{load_wav, mix, save_wav, AudioClip, GainSpec};
use soundmask::datasets::{ScenarioName, TaskType};
use soundmask::evaluation::{parse_report, EvaluationReport, REPORT_FILE};
use soundmask::features::{log_mel, MelConfig};
use soundmask::maskgan::{
    discriminator_step, generator_step, train, Discriminator, GanCheckpoint, GanConfig, Generator,
    LatentVector, TrainConfig, WhiteNoiseBatches,
};
use soundmask::nn::{Sequential, Tensor};
use soundmask::noise::{spectral_flatness_of, white_noise, NoiseKind, NoiseProfile};
use soundmask::randomness::{
    cox_stuart, cox_stuart_with_min, wald_wolfowitz, wald_wolfowitz_with_min,
};

type Check = Result<String, String>;

/// Mean flatness over 16 generator draws must exceed this at the pinned
/// seed and step budget.
const FLATNESS_THRESHOLD: f64 = 0.7;
const GAN_SEED: u64 = 7;
const GAN_STEPS: usize = 200;
const H: f64 = 1e-6;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure(
        (got - want).abs() <= tol,
        format!("{what} = {got}, expected {want} within {tol}"),
    )
}

fn runs_oracles() -> Check {
    let r =
        wald_wolfowitz_with_min(&[5.0, 1.0, 6.0, 2.0, 7.0, 3.0], 1).map_err(|e| e.to_string())?;
    ensure(
        r.runs == 6 && r.n1 == 3 && r.n2 == 3,
        format!("R={} n1={} n2={}", r.runs, r.n1, r.n2),
    )?;
    close(r.expected_runs, 4.0, 1e-9, "E(R)")?;
    close(r.variance_runs, 1.2, 1e-9, "V(R)")?;
    close(r.z, 2.0 / 1.2f64.sqrt(), 1e-9, "z")?;
    let c = cox_stuart_with_min(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 1).map_err(|e| e.to_string())?;
    ensure(
        c.s_plus == 3 && c.m == 3,
        format!("s_plus={} m={}", c.s_plus, c.m),
    )?;
    close(c.p_value, 0.25, 1e-12, "p")?;
    Ok(format!("z={:.6}, p={}", r.z, c.p_value))
}

fn null_calibration() -> Check {
    let mut scores = Vec::with_capacity(1000);
    for seed in 0..1000 {
        let clip = white_noise(&NoiseProfile::white(
            10_000.0 / 16_000.0,
            16_000,
            -20.0,
            seed,
        ))
        .map_err(|e| e.to_string())?;
        let seq: Vec<f64> = clip.samples().iter().map(|&s| f64::from(s)).collect();
        ensure(seq.len() == 10_000, "sequence length")?;
        scores.push(wald_wolfowitz(&seq).map_err(|e| e.to_string())?.score);
    }
    let mean = scores.iter().sum::<f64>() / 1000.0;
    let rejected = scores.iter().filter(|&&p| p < 0.05).count() as f64 / 1000.0;
    ensure((0.4..=0.6).contains(&mean), format!("mean WW score {mean}"))?;
    ensure(
        (0.03..=0.08).contains(&rejected),
        format!("fraction p<0.05 {rejected}"),
    )?;
    let ramp: Vec<f64> = (0..10_000).map(f64::from).collect();
    let ww = wald_wolfowitz(&ramp).map_err(|e| e.to_string())?.score;
    let cs = cox_stuart(&ramp).map_err(|e| e.to_string())?.score;
    ensure(ww < 1e-3 && cs < 1e-3, format!("ramp scores {ww}, {cs}"))?;
    Ok(format!(
        "mean {mean:.4}, rejected {rejected:.3}, ramp {ww:.1e}/{cs:.1e}"
    ))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn ln_sigmoid(x: f64) -> f64 {
    -(1.0 + (-x).exp()).ln()
}

fn gan_miniature() -> GanConfig {
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

fn d_loss(d: &Discriminator, real: &Tensor, fake: &Tensor) -> f64 {
    let (lr, lf) = (d.logits(real), d.logits(fake));
    -lr.iter().map(|&l| ln_sigmoid(l)).sum::<f64>() / lr.len() as f64
        - lf.iter().map(|&l| ln_sigmoid(-l)).sum::<f64>() / lf.len() as f64
}

fn g_loss(g: &Generator, d: &Discriminator, z: &Tensor) -> f64 {
    let l = d.logits(&g.generate(z));
    -l.iter().map(|&l| ln_sigmoid(l)).sum::<f64>() / l.len() as f64
}

/// Central differences over every parameter of `obj`'s network, with
/// `loss` re-evaluated from scratch.
fn numeric_grad<T>(
    obj: &mut T,
    net: fn(&mut T) -> &mut Sequential,
    loss: impl Fn(&T) -> f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for pi in 0..net(obj).params_mut().len() {
        for j in 0..net(obj).params_mut()[pi].value.len() {
            let orig = net(obj).params_mut()[pi].value[j];
            net(obj).params_mut()[pi].value[j] = orig + H;
            let up = loss(obj);
            net(obj).params_mut()[pi].value[j] = orig - H;
            let down = loss(obj);
            net(obj).params_mut()[pi].value[j] = orig;
            out.push((up - down) / (2.0 * H));
        }
    }
    out
}

fn gan_gradients() -> Result<(f64, f64), String> {
    let c = gan_miniature();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut g = Generator::new(&c, 4).map_err(|e| e.to_string())?;
    let mut d = Discriminator::new(&c, 3).map_err(|e| e.to_string())?;
    ensure(
        g.param_count() + d.param_count() <= 100,
        "GAN miniature over 100 parameters",
    )?;

    let real = random(vec![3, 1, 4], &mut rng);
    let fake = random(vec![3, 1, 4], &mut rng);
    d.net_mut().zero_grad();
    discriminator_step(&mut d, &real, &fake);
    let analytic: Vec<f64> = d
        .net()
        .named_params()
        .iter()
        .flat_map(|(_, p)| p.grad.clone())
        .collect();
    let numeric = numeric_grad(&mut d, Discriminator::net_mut, |d| d_loss(d, &real, &fake));
    let ed = rel_err(&analytic, &numeric);

    // An all-dead generator item is exactly zero, which puts every
    // discriminator unit on the LeakyReLU kink.
    let z = loop {
        let z = random(vec![3, 3], &mut rng);
        if g.generate(&z)
            .data
            .chunks(4)
            .all(|x| x.iter().any(|&v| v != 0.0))
        {
            break z;
        }
    };
    g.net_mut().zero_grad();
    d.net_mut().zero_grad();
    generator_step(&mut g, &mut d, &z);
    let analytic: Vec<f64> = g
        .net()
        .named_params()
        .iter()
        .flat_map(|(_, p)| p.grad.clone())
        .collect();
    let numeric = numeric_grad(&mut g, Generator::net_mut, |g| g_loss(g, &d, &z));
    Ok((rel_err(&analytic, &numeric), ed))
}

fn head_loss_oracle(spec: &AttackModelSpec, logits: &Tensor, targets: &[Vec<usize>]) -> f64 {
    let w = logits.shape[1];
    let mut total = 0.0;
    for (row, t) in logits.data.chunks(w).zip(targets) {
        total += match spec.task_type {
            TaskType::Multiclass => row.iter().map(|v| v.exp()).sum::<f64>().ln() - row[t[0]],
            TaskType::Multilabel => {
                let mut y = Vec::new();
                for (&k, &c) in spec.classes.iter().zip(t) {
                    if k == 2 {
                        y.push(c as f64);
                    } else {
                        y.extend((0..k).map(|j| f64::from(j == c)));
                    }
                }
                row.iter()
                    .zip(&y)
                    .map(|(&l, &yy)| -(yy * ln_sigmoid(l) + (1.0 - yy) * ln_sigmoid(-l)))
                    .sum()
            }
        };
    }
    total / targets.len() as f64
}

fn head_gradient(
    task_type: TaskType,
    classes: Vec<usize>,
    targets: Vec<Vec<usize>>,
) -> Result<f64, String> {
    let spec = AttackModelSpec {
        family: Family::Cnn,
        task_type,
        classes,
        layers: LayerConfig {
            conv_channels: vec![2, 2],
            kernel: 3,
            pool: 2,
            hidden: 2,
        },
        seed: 11,
    };
    let mut model = build(&spec, (8, 8)).map_err(|e| e.to_string())?;
    ensure(
        model.param_count() <= 100,
        "head miniature over 100 parameters",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(vec![targets.len(), 1, 8, 8], &mut rng);
    let net = model.net_mut();
    net.zero_grad();
    let logits = net.forward(&x);
    let (_, grad) = head_loss(&spec, &logits, &targets);
    net.backward(&grad, true);
    let analytic: Vec<f64> = net
        .params_mut()
        .iter()
        .flat_map(|p| p.grad.clone())
        .collect();
    let numeric = numeric_grad(&mut model, AttackModel::net_mut, |m| {
        head_loss_oracle(&spec, &m.logits(&x), &targets)
    });
    Ok(rel_err(&analytic, &numeric))
}

fn gradient_checks() -> Check {
    let (eg, ed) = gan_gradients()?;
    let es = head_gradient(
        TaskType::Multiclass,
        vec![3],
        vec![vec![0], vec![2], vec![1]],
    )?;
    let eb = head_gradient(
        TaskType::Multilabel,
        vec![2, 3],
        vec![vec![0, 2], vec![1, 0], vec![1, 1]],
    )?;
    let detail = format!("G {eg:.1e}, D {ed:.1e}, softmax {es:.1e}, sigmoid {eb:.1e}");
    ensure([eg, ed, es, eb].iter().all(|e| *e <= 1e-4), detail.clone())?;
    Ok(detail)
}

fn gan_quality(demo_checkpoint: Option<&Path>) -> Check {
    let tc = TrainConfig {
        steps: GAN_STEPS,
        seed: GAN_SEED,
        ..TrainConfig::desk()
    };
    let mut real = WhiteNoiseBatches::new(GAN_SEED, 0.0);
    let trained = train(&GanConfig::desk(), &tc, &mut real).map_err(|e| e.to_string())?;
    let ckpt = trained.checkpoint;
    let g = ckpt.generator().map_err(|e| e.to_string())?;
    let mut flat = 0.0;
    for i in 0..16 {
        let out = g
            .generate_one(&LatentVector::from_seed(ckpt.config.latent_dim, 1000 + i))
            .map_err(|e| e.to_string())?;
        ensure(out.len() == 32000, format!("{} samples", out.len()))?;
        ensure(
            out.iter().all(|v| (-1.0..=1.0).contains(v)),
            "sample outside [-1, 1]",
        )?;
        flat += spectral_flatness_of(&out).map_err(|e| e.to_string())? / 16.0;
    }
    ensure(
        flat > FLATNESS_THRESHOLD,
        format!("mean flatness {flat:.4} <= {FLATNESS_THRESHOLD}"),
    )?;

    let bytes = ckpt.to_bytes().map_err(|e| e.to_string())?;
    let back = GanCheckpoint::read(bytes.as_slice()).map_err(|e| e.to_string())?;
    ensure(
        back.to_bytes().map_err(|e| e.to_string())? == bytes,
        "checkpoint bytes differ after round trip",
    )?;
    let z = LatentVector::from_seed(ckpt.config.latent_dim, 7);
    let a = g.generate_one(&z).map_err(|e| e.to_string())?;
    let b = back
        .generator()
        .map_err(|e| e.to_string())?
        .generate_one(&z)
        .map_err(|e| e.to_string())?;
    ensure(
        a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()),
        "samples differ after round trip",
    )?;

    let mut detail = format!(
        "flatness {flat:.4} > {FLATNESS_THRESHOLD}, best step {}",
        ckpt.step
    );
    if let Some(p) = demo_checkpoint {
        let demo = std::fs::read(p).map_err(|e| e.to_string())?;
        ensure(
            demo == bytes,
            "demo checkpoint differs from the library run",
        )?;
        detail.push_str(", matches demo checkpoint");
    }
    Ok(detail)
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_soundmask")
}

fn run_demo(out: &Path, extra: &[&str]) -> Result<(), String> {
    let o = Command::new(bin())
        .arg("demo")
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "demo exited with {}: {}",
            o.status,
            String::from_utf8_lossy(&o.stderr).trim()
        ))
    }
}

fn load_report(out: &Path) -> Result<EvaluationReport, String> {
    let text = std::fs::read_to_string(out.join(REPORT_FILE)).map_err(|e| e.to_string())?;
    parse_report(&text).map_err(|e| e.to_string())
}

fn accuracy(
    report: &EvaluationReport,
    scenario: ScenarioName,
    family: Family,
    cond: Option<(NoiseKind, f64)>,
) -> Result<f64, String> {
    let s = report
        .scenarios
        .iter()
        .find(|s| s.name == scenario)
        .ok_or(format!("no {scenario}"))?;
    s.results
        .iter()
        .find(|r| {
            r.family == family && r.noise == cond.map(|c| c.0) && r.snr_db == cond.map(|c| c.1)
        })
        .map(|r| r.result.accuracy)
        .ok_or(format!("no {scenario}/{family} result for {cond:?}"))
}

fn synthetic_end_to_end(report: &EvaluationReport) -> Check {
    let mgi = ScenarioName::Mgi;
    let bia = accuracy(report, mgi, Family::Cnn, None)?;
    ensure(bia >= 0.90, format!("CNN BIA {bia:.3} < 0.90"))?;
    let mut parts = vec![format!("CNN BIA {bia:.3}")];
    for noise in [NoiseKind::White, NoiseKind::Gan] {
        let m = accuracy(report, mgi, Family::Cnn, Some((noise, -10.0)))?;
        ensure(
            bia - m >= 0.20,
            format!("CNN +{noise} MIA(-10) {m:.3} is less than 20 points below BIA"),
        )?;
        for family in Family::ALL {
            let b = accuracy(report, mgi, family, None)?;
            let lo = accuracy(report, mgi, family, Some((noise, -10.0)))?;
            let hi = accuracy(report, mgi, family, Some((noise, 10.0)))?;
            ensure(
                lo <= hi && hi <= b,
                format!("{family} +{noise}: MIA(-10) {lo:.3}, MIA(+10) {hi:.3}, BIA {b:.3} not monotone"),
            )?;
            parts.push(format!("{family}+{noise} {lo:.2}/{hi:.2}/{b:.2}"));
        }
    }
    Ok(parts.join(", "))
}

fn claims_persisted(report: &EvaluationReport) -> Check {
    let c = &report.metrics.claims;
    let spf = &report.metrics.spf;
    let values = [
        c.randomness_white,
        c.randomness_gan,
        c.delta_white,
        c.delta_gan,
        spf.spf_white,
        spf.spf_gan,
    ];
    ensure(
        values.iter().all(|v| v.is_finite()),
        "non-finite claim value",
    )?;
    let rtmr = report
        .metrics
        .rtmr
        .coefficient
        .ok_or("RTMR coefficient undefined")?;
    ensure(
        c.rtmr_positive == Some(rtmr > 0.0),
        "RTMR sign not recorded",
    )?;
    ensure(
        !report.provenance.fingerprint.is_empty(),
        "no provenance fingerprint",
    )?;
    let dir = |b: bool| if b { "gan > white" } else { "gan <= white" };
    Ok(format!(
        "randomness {} ({:.4} vs {:.4}), delta {} ({:.3} vs {:.3}), SPF {} ({:.3} vs {:.3}), RTMR {rtmr:+.3}",
        dir(c.randomness_gan_higher),
        c.randomness_gan,
        c.randomness_white,
        dir(c.delta_gan_higher),
        c.delta_gan,
        c.delta_white,
        dir(c.spf_gan_higher),
        spf.spf_gan,
        spf.spf_white
    ))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn determinism(base: &Path) -> Check {
    let args = [
        "--seed",
        "7",
        "--steps",
        "6",
        "--epochs",
        "2",
        "--scenario",
        "MGI",
        "--scenario",
        "SEI",
    ];
    let (a, b) = (base.join("a"), base.join("b"));
    run_demo(&a, &args)?;
    run_demo(&b, &args)?;
    let (ta, tb) = (tree(&a), tree(&b));
    ensure(ta.contains_key(Path::new(REPORT_FILE)), "no report written")?;
    ensure(
        ta.keys().eq(tb.keys()),
        format!(
            "file sets differ: {:?} vs {:?}",
            ta.keys().collect::<Vec<_>>(),
            tb.keys().collect::<Vec<_>>()
        ),
    )?;
    let differing: Vec<_> = ta
        .iter()
        .filter(|(k, v)| tb[*k] != **v)
        .map(|(k, _)| k.display().to_string())
        .collect();
    ensure(
        differing.is_empty(),
        format!("differing files: {differing:?}"),
    )?;
    Ok(format!("{} files byte-identical", ta.len()))
}

fn plumbing(dir: &Path) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<i16> = (0..16000).map(|_| rng.gen()).collect();
    let clip = AudioClip::new(samples, 16000).map_err(|e| e.to_string())?;
    let path = dir.join("round_trip.wav");
    save_wav(&clip, &path).map_err(|e| e.to_string())?;
    ensure(
        load_wav(&path).map_err(|e| e.to_string())? == clip,
        "WAV round trip changed the clip",
    )?;

    let noise =
        white_noise(&NoiseProfile::white(0.5, 16000, -3.0, 9)).map_err(|e| e.to_string())?;
    let silent = GainSpec::peak_dbfs(f64::NEG_INFINITY).map_err(|e| e.to_string())?;
    ensure(
        mix(&clip, &noise, silent).map_err(|e| e.to_string())? == clip,
        "zero-gain mix changed the clip",
    )?;

    let quiet: Vec<i16> = (0..32000)
        .map(|i| (4000.0 * (i as f64 * 0.05).sin() + rng.gen_range(-500.0..500.0)) as i16)
        .collect();
    let doubled: Vec<i16> = quiet.iter().map(|s| s * 2).collect();
    let cfg = MelConfig::default();
    let a = log_mel(
        &AudioClip::new(quiet, 16000).map_err(|e| e.to_string())?,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let b = log_mel(
        &AudioClip::new(doubled, 16000).map_err(|e| e.to_string())?,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let shift = 20.0 * 2f64.log10();
    let mut worst: f64 = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        if *x > cfg.floor_db && *y > cfg.floor_db {
            worst = worst.max((y - x - shift).abs());
        }
    }
    ensure(worst <= 1e-6, format!("log-mel shift error {worst:e} dB"))?;
    Ok(format!("log-mel shift error {worst:.1e} dB"))
}

struct Line {
    id: usize,
    name: &'static str,
    limit: Duration,
}

fn report_line(line: &Line, elapsed: Duration, outcome: Check, failures: &mut usize) {
    let secs = elapsed.as_secs_f64();
    let outcome = outcome.and_then(|d| {
        if elapsed <= line.limit {
            Ok(d)
        } else {
            Err(format!(
                "{d}; took {secs:.1}s, limit {}s",
                line.limit.as_secs()
            ))
        }
    });
    match outcome {
        Ok(d) => println!("PASS [{}] {}: {d} ({secs:.1}s)", line.id, line.name),
        Err(e) => {
            *failures += 1;
            println!("FAIL [{}] {}: {e} ({secs:.1}s)", line.id, line.name);
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut failures = 0;
    let secs = Duration::from_secs;

    let l1 = Line {
        id: 1,
        name: "runs-test oracles",
        limit: secs(1),
    };
    let (r, t) = timed(runs_oracles);
    report_line(&l1, t, r, &mut failures);

    let l2 = Line {
        id: 2,
        name: "null calibration",
        limit: secs(30),
    };
    let (r, t) = timed(null_calibration);
    report_line(&l2, t, r, &mut failures);

    let l3 = Line {
        id: 3,
        name: "gradient checks",
        limit: secs(10),
    };
    let (r, t) = timed(gradient_checks);
    report_line(&l3, t, r, &mut failures);

    let demo_dir = tmp.path().join("demo");
    let (demo, demo_time) = timed(|| run_demo(&demo_dir, &[]).and_then(|_| load_report(&demo_dir)));

    let l4 = Line {
        id: 4,
        name: "GAN shape and quality",
        limit: secs(600),
    };
    let ckpt = demo_dir.join("gan/checkpoint.smg");
    let (r, t) = timed(|| gan_quality(ckpt.exists().then_some(ckpt.as_path())));
    report_line(&l4, t, r, &mut failures);

    let l5 = Line {
        id: 5,
        name: "synthetic end-to-end demo",
        limit: secs(900),
    };
    report_line(
        &l5,
        demo_time,
        demo.clone().and_then(|r| synthetic_end_to_end(&r)),
        &mut failures,
    );

    let l6 = Line {
        id: 6,
        name: "directional claims persisted",
        limit: secs(900),
    };
    report_line(
        &l6,
        demo_time,
        demo.and_then(|r| claims_persisted(&r)),
        &mut failures,
    );

    let l7 = Line {
        id: 7,
        name: "demo determinism",
        limit: secs(900),
    };
    let (r, t) = timed(|| determinism(&tmp.path().join("det")));
    report_line(&l7, t, r, &mut failures);

    let l8 = Line {
        id: 8,
        name: "bit-exact plumbing",
        limit: secs(10),
    };
    let (r, t) = timed(|| plumbing(tmp.path()));
    report_line(&l8, t, r, &mut failures);

    println!("{} of 8 criteria passed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
