use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};
use soundmask::attacks::{
    evaluate, featurize, train_attack, AttackModelSpec, AttackTrainConfig, Family, FeatureSet,
    TrainedAttack,
};
use soundmask::audio::{load_wav, mix, save_wav, AudioClip, GainSpec};
use soundmask::datasets::{
    ingest, split, synth_commands, synth_corpus, synth_multilabel, CommandSynthSpec, LabeledClip,
    MultiSynthSpec, ScenarioName, ScenarioSpec, SkippedItem, Splits, SynthSpec,
};
use soundmask::evaluation::{
    build_report, emit_report, sha256_hex, EvaluationReport, Provenance, RandomnessEntry,
    ReportInputs, ScenarioInputs, StoredResult,
};
use soundmask::features::MelConfig;
use soundmask::maskgan::{
    self, GanCheckpoint, GanConfig, GanTraining, LatentVector, TrainConfig, WhiteNoiseBatches,
};
use soundmask::noise::{white_noise, NoiseKind, NoiseProfile};
use soundmask::randomness::score_dataset;

use crate::config::RunConfig;
use crate::provenance::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

/// Synthetic stand-in corpus for a scenario.
pub fn synthetic(name: ScenarioName, seed: u64) -> Result<(Vec<LabeledClip>, ScenarioSpec)> {
    Ok(match name {
        ScenarioName::Mgi => {
            let s = SynthSpec {
                seed,
                ..SynthSpec::default()
            };
            (synth_corpus(&s)?, s.scenario(name))
        }
        ScenarioName::Udi => {
            let s = MultiSynthSpec {
                seed,
                ..MultiSynthSpec::default()
            };
            (synth_multilabel(&s)?, s.scenario())
        }
        ScenarioName::Sei => {
            let s = SynthSpec {
                classes: 7,
                per_class: 30,
                seed: seed.wrapping_add(1),
                f_low: 150.0,
                f_high: 2400.0,
                ..SynthSpec::default()
            };
            (synth_corpus(&s)?, s.scenario(name))
        }
        ScenarioName::Spf => {
            let s = CommandSynthSpec {
                seed,
                ..CommandSynthSpec::default()
            };
            (synth_commands(&s)?, s.scenario())
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub source: String,
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub split: String,
    pub duration: f64,
    pub labels: BTreeMap<String, String>,
}

/// One scenario's clips on disk, already split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: ScenarioSpec,
    pub synthetic: bool,
    pub records: Vec<ManifestRecord>,
    pub skipped: Vec<SkippedItem>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn splits(&self, dir: &Path) -> Result<Splits> {
        let mut parts: [Vec<LabeledClip>; 3] = Default::default();
        for r in &self.records {
            let k = SPLITS
                .iter()
                .position(|s| *s == r.split)
                .with_context(|| format!("clip {}: unknown split {:?}", r.id, r.split))?;
            let clip =
                load_wav(dir.join(&r.path)).with_context(|| format!("loading clip {}", r.id))?;
            parts[k].push(LabeledClip {
                id: r.id.clone(),
                source: r.source.clone(),
                clip,
                labels: r.labels.clone(),
            });
        }
        let [train, val, test] = parts;
        Ok(Splits { train, val, test })
    }
}

/// Writes each split's clips as WAV files plus the manifest; returns the
/// written files relative to `dir`.
pub fn write_splits(dir: &Path, manifest: &mut Manifest, splits: &Splits) -> Result<Vec<String>> {
    let mut files = Vec::new();
    manifest.records.clear();
    for (name, part) in SPLITS.iter().zip(splits.parts()) {
        std::fs::create_dir_all(dir.join(name))?;
        for c in part {
            let rel = PathBuf::from(name).join(format!("{}.wav", safe_name(&c.id)));
            save_wav(&c.clip, dir.join(&rel))?;
            files.push(rel.to_string_lossy().into_owned());
            manifest.records.push(ManifestRecord {
                id: c.id.clone(),
                source: c.source.clone(),
                path: rel,
                split: name.to_string(),
                duration: c.clip.duration_seconds(),
                labels: c.labels.clone(),
            });
        }
    }
    write_json(&dir.join(MANIFEST_FILE), manifest)?;
    files.push(MANIFEST_FILE.to_string());
    Ok(files)
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Loads or synthesizes one scenario and splits it.
pub fn collect(
    cfg: &RunConfig,
    name: ScenarioName,
    root: Option<&Path>,
    cap: usize,
) -> Result<(Manifest, Splits)> {
    let (clips, spec, skipped, synthetic) = match root {
        Some(root) => {
            let spec = ScenarioSpec::preset(name);
            let r = ingest(root, &spec, cap, cfg.seeds.data)?;
            (r.clips, spec, r.skipped, false)
        }
        None => {
            let (clips, spec) = synthetic(name, cfg.seeds.data)?;
            (clips, spec, Vec::new(), true)
        }
    };
    let splits = split(&clips, spec.split, cfg.seeds.data)?;
    let manifest = Manifest {
        scenario: spec,
        synthetic,
        records: Vec::new(),
        skipped,
    };
    Ok((manifest, splits))
}

pub fn train_gan(cfg: &RunConfig) -> Result<GanTraining> {
    let gc = GanConfig::desk();
    let tc = TrainConfig {
        steps: cfg.gan_steps,
        seed: cfg.seeds.gan,
        ..TrainConfig::desk()
    };
    // real batches span the generator's full output range; samples are
    // rescaled to `peak_dbfs` afterwards
    let mut real = WhiteNoiseBatches::new(cfg.seeds.gan, 0.0);
    info!("training GAN for {} steps", tc.steps);
    Ok(maskgan::train(&gc, &tc, &mut real)?)
}

/// Masking-noise clip `index` of a bank: white noise seeded `noise + index`
/// or a GAN sample from the latent with the same seed.
pub fn noise_clip(
    cfg: &RunConfig,
    kind: NoiseKind,
    gan: Option<&GanCheckpoint>,
    index: usize,
    seconds: f64,
    rate: u32,
) -> Result<AudioClip> {
    let seed = cfg.seeds.noise.wrapping_add(index as u64);
    match kind {
        NoiseKind::White => Ok(white_noise(&NoiseProfile::white(
            seconds,
            rate,
            cfg.peak_dbfs,
            seed,
        ))?),
        NoiseKind::Gan => {
            let ckpt = gan.context("GAN noise needs a generator checkpoint (--ckpt)")?;
            let latent = LatentVector::from_seed(ckpt.config.latent_dim, seed);
            Ok(maskgan::sample(ckpt, &latent, cfg.peak_dbfs)?)
        }
    }
}

pub fn noise_bank(
    cfg: &RunConfig,
    kind: NoiseKind,
    gan: Option<&GanCheckpoint>,
    n: usize,
) -> Result<Vec<AudioClip>> {
    (0..n)
        .map(|i| noise_clip(cfg, kind, gan, i, 2.0, 16000))
        .collect()
}

/// Mixes clip `i` with bank entry `i` (wrapping) at the given SNR.
pub fn mask(clips: &[LabeledClip], bank: &[AudioClip], snr_db: f64) -> Result<Vec<LabeledClip>> {
    let gain = GainSpec::snr_db(snr_db)?;
    clips
        .iter()
        .enumerate()
        .map(|(i, c)| Ok(c.with_clip(mix(&c.clip, &bank[i % bank.len()], gain)?)))
        .collect()
}

pub fn train_config(cfg: &RunConfig) -> AttackTrainConfig {
    AttackTrainConfig {
        epochs: cfg.attack_epochs,
        seed: cfg.seeds.attack,
        ..AttackTrainConfig::default()
    }
}

pub fn train_family(
    cfg: &RunConfig,
    scenario: &ScenarioSpec,
    family: Family,
    train: &FeatureSet,
    val: &FeatureSet,
) -> Result<TrainedAttack> {
    let spec = AttackModelSpec::new(family, scenario, cfg.seeds.attack);
    let t0 = std::time::Instant::now();
    let attack = train_attack(scenario, &spec, train, val, &train_config(cfg))?;
    info!(
        "{} {family}: {} epochs, best {}, {:.1}s",
        scenario.name,
        attack.history.len(),
        attack.best_epoch,
        t0.elapsed().as_secs_f64()
    );
    Ok(attack)
}

pub fn condition_label(noise: Option<NoiseKind>, snr_db: Option<f64>) -> String {
    match (noise, snr_db) {
        (Some(n), Some(s)) => format!("+{n}@{s}dB"),
        (Some(n), None) => format!("{n}-only"),
        _ => "original".to_string(),
    }
}

/// Evaluates a trained attack on the clean test set and on every
/// (noise, SNR) masking of it.
pub fn evaluate_conditions(
    attack: &TrainedAttack,
    clean: &FeatureSet,
    masked: &BTreeMap<(NoiseKind, String), FeatureSet>,
    snrs: &[f64],
) -> Result<Vec<StoredResult>> {
    let family = attack.model.spec().family;
    let mut out = vec![StoredResult {
        family,
        noise: None,
        snr_db: None,
        result: evaluate(attack, clean, "clean")?,
    }];
    for noise in [NoiseKind::White, NoiseKind::Gan] {
        for &snr in snrs {
            let Some(set) = masked.get(&(noise, snr_key(snr))) else {
                continue;
            };
            out.push(StoredResult {
                family,
                noise: Some(noise),
                snr_db: Some(snr),
                result: evaluate(attack, set, &condition_label(Some(noise), Some(snr)))?,
            });
        }
    }
    Ok(out)
}

pub fn snr_key(snr: f64) -> String {
    format!("{snr}")
}

fn scored_entry(
    noise: Option<NoiseKind>,
    snr: Option<f64>,
    clips: &[LabeledClip],
) -> Result<RandomnessEntry> {
    let label = condition_label(noise, snr);
    let r = score_dataset(clips.iter().map(|c| (c.id.clone(), &c.clip)), &label)?;
    Ok(RandomnessEntry::from_report(noise, snr, &r))
}

fn noise_only_entry(kind: NoiseKind, bank: &[AudioClip]) -> Result<RandomnessEntry> {
    let label = condition_label(Some(kind), None);
    let r = score_dataset(
        bank.iter()
            .enumerate()
            .map(|(i, c)| (format!("{kind}-{i:03}"), c)),
        &label,
    )?;
    Ok(RandomnessEntry::from_report(Some(kind), None, &r))
}

pub struct DemoOutput {
    pub report: EvaluationReport,
    pub files: Vec<String>,
}

/// The whole pipeline on synthetic corpora.
pub fn demo(cfg: &RunConfig, out: &Path) -> Result<DemoOutput> {
    let mut files = Vec::new();
    let mut names: Vec<ScenarioName> = cfg
        .scenarios
        .iter()
        .copied()
        .filter(|s| *s != ScenarioName::Spf)
        .collect();
    names.sort();
    names.dedup();
    if names.len() < 2 {
        // two noise kinds per scenario give the rank correlation its pairs
        bail!(
            "demo needs at least two inference scenarios (MGI, UDI, SEI) for the rank correlation"
        );
    }
    names.push(ScenarioName::Spf);

    let gan_dir = out.join("gan");
    std::fs::create_dir_all(&gan_dir)?;
    let training = train_gan(cfg)?;
    let ckpt_bytes = training.checkpoint.to_bytes()?;
    std::fs::write(gan_dir.join("checkpoint.smg"), &ckpt_bytes)?;
    write_json(&gan_dir.join("trace.json"), &training.trace)?;
    files.extend([
        "gan/checkpoint.smg".to_string(),
        "gan/trace.json".to_string(),
    ]);
    let gan_hash = sha256_hex(&ckpt_bytes);
    let gan = training.checkpoint;

    let snrs = cfg.all_snrs();
    let mel = MelConfig::default();
    let model_dir = out.join("models");
    std::fs::create_dir_all(&model_dir)?;
    let mut scenarios = Vec::new();
    for &name in &names {
        let (manifest, splits) = collect(cfg, name, None, 0)?;
        let spec = manifest.scenario;
        info!(
            "{name}: {} train / {} val / {} test clips",
            splits.train.len(),
            splits.val.len(),
            splits.test.len()
        );
        let train = featurize(&splits.train, &spec, &mel)?;
        let val = featurize(&splits.val, &spec, &mel)?;
        let test = featurize(&splits.test, &spec, &mel)?;

        let n = splits.test.len();
        let banks = [
            (
                NoiseKind::White,
                noise_bank(cfg, NoiseKind::White, None, n)?,
            ),
            (
                NoiseKind::Gan,
                noise_bank(cfg, NoiseKind::Gan, Some(&gan), n)?,
            ),
        ];
        let mut masked = BTreeMap::new();
        let mut randomness = vec![scored_entry(None, None, &splits.test)?];
        for (kind, bank) in &banks {
            randomness.push(noise_only_entry(*kind, bank)?);
            for &snr in &snrs {
                let clips = mask(&splits.test, bank, snr)?;
                randomness.push(scored_entry(Some(*kind), Some(snr), &clips)?);
                masked.insert((*kind, snr_key(snr)), featurize(&clips, &spec, &mel)?);
            }
        }

        let families: Vec<Family> = if name == ScenarioName::Spf {
            vec![cfg.spf_family]
        } else {
            cfg.families.clone()
        };
        let mut results = Vec::new();
        for family in families {
            let attack = train_family(cfg, &spec, family, &train, &val)?;
            let file = format!("models/{name}_{family}.sma");
            attack.save(&out.join(&file))?;
            files.push(file);
            results.extend(evaluate_conditions(&attack, &test, &masked, &snrs)?);
        }
        scenarios.push(ScenarioInputs {
            name,
            task_type: spec.task_type,
            results,
            randomness,
        });
    }

    let provenance = Provenance::new(
        cfg.seeds.as_seeds(),
        cfg.snr_db,
        cfg.sweep_snr_db.clone(),
        cfg.peak_dbfs,
        cfg.gan_steps,
        cfg.attack_epochs,
        cfg.recorded(),
        gan_hash,
    );
    let inputs = ReportInputs {
        scenarios,
        families: cfg.families.clone(),
        spf_family: cfg.spf_family,
        provenance,
    };
    write_json(&out.join("inputs.json"), &inputs)?;
    files.push("inputs.json".to_string());
    let report = build_report(inputs)?;
    for p in emit_report(&report, out)? {
        files.push(relative(out, &p));
    }
    Ok(DemoOutput { report, files })
}

pub fn relative(base: &Path, p: &Path) -> String {
    p.strip_prefix(base)
        .unwrap_or(p)
        .to_string_lossy()
        .into_owned()
}
