mod config;
mod pipeline;
mod provenance;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use soundmask::attacks::{featurize, Family};
use soundmask::audio::{load_wav, save_wav, AudioClip};
use soundmask::datasets::ScenarioName;
use soundmask::evaluation::{build_report, emit_report, parse_report, ReportInputs, REPORT_FILE};
use soundmask::features::MelConfig;
use soundmask::maskgan::GanCheckpoint;
use soundmask::noise::NoiseKind;
use soundmask::randomness::{score_each, ClipRandomness, SkippedClip, DEFAULT_MAX_VALUES};

use config::{Overrides, RunConfig};
use pipeline::{Manifest, MANIFEST_FILE};

#[derive(Parser)]
#[command(name = "soundmask", version, about = "Sound-masking privacy pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Sets the data, noise, GAN and attack seeds at once.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Matched mixing SNR.
    #[arg(long, global = true, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    /// Peak level of generated noise.
    #[arg(long, global = true, allow_negative_numbers = true)]
    peak_dbfs: Option<f64>,
    /// GAN training steps.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Maximum attack training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Scenario to run (repeatable): MGI, UDI, SEI or SPF.
    #[arg(long = "scenario", global = true)]
    scenarios: Vec<ScenarioName>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Load (or synthesize) scenario corpora, split them and write WAVs plus a manifest.
    Ingest {
        /// Corpus root; synthetic clips are generated when absent.
        #[arg(long)]
        root: Option<PathBuf>,
        /// Clips kept per class.
        #[arg(long, default_value_t = 200)]
        cap: usize,
    },
    /// Write masking-noise WAV files.
    GenNoise {
        #[arg(long)]
        kind: NoiseKind,
        #[arg(long, default_value_t = 2.0)]
        seconds: f64,
        #[arg(long, default_value_t = 16000)]
        rate: u32,
        /// Generator checkpoint for `--kind gan`.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Number of clips; more than one writes a directory.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Train the masking-noise GAN and write its checkpoint.
    TrainGan,
    /// Score every WAV under a directory with both runs tests.
    MeasureRandomness {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "original")]
        condition: String,
    },
    /// Train one attack model and evaluate it under one condition.
    Attack {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value = "clean")]
        condition: Condition,
        /// Output of `ingest`; synthetic clips are used when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        ckpt: Option<PathBuf>,
    },
    /// Mix the clips of an `ingest` output with masking noise.
    Mitigate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        noise: NoiseKind,
        #[arg(long)]
        ckpt: Option<PathBuf>,
    },
    /// Build a report from stored results (the `inputs.json` written by `demo`).
    Evaluate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Validate a report and re-emit it with its schema and figures.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the whole pipeline on synthetic corpora.
    Demo,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Condition {
    Clean,
    White,
    Gan,
}

impl Condition {
    fn noise(self) -> Option<NoiseKind> {
        match self {
            Self::Clean => None,
            Self::White => Some(NoiseKind::White),
            Self::Gan => Some(NoiseKind::Gan),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    let overrides = Overrides {
        seed: g.seed,
        snr_db: g.snr_db,
        peak_dbfs: g.peak_dbfs,
        steps: g.steps,
        epochs: g.epochs,
        scenarios: g.scenarios,
        out: g.out,
    };
    let cfg = RunConfig::resolve(g.config.as_deref(), &overrides)?;
    let only = overrides.scenarios;
    match cli.command {
        Command::Ingest { root, cap } => cmd_ingest(&cfg, root, cap),
        Command::GenNoise {
            kind,
            seconds,
            rate,
            ckpt,
            count,
        } => cmd_gen_noise(&cfg, kind, seconds, rate, ckpt.as_deref(), count),
        Command::TrainGan => cmd_train_gan(&cfg),
        Command::MeasureRandomness { input, condition } => cmd_measure(&cfg, &input, &condition),
        Command::Attack {
            family,
            condition,
            data,
            ckpt,
        } => cmd_attack(&cfg, family, condition, data.as_deref(), ckpt.as_deref()),
        Command::Mitigate { input, noise, ckpt } => {
            cmd_mitigate(&cfg, &only, &input, noise, ckpt.as_deref())
        }
        Command::Evaluate { input } => cmd_evaluate(&cfg, &input),
        Command::Report { input } => cmd_report(&cfg, &input),
        Command::Demo => cmd_demo(&cfg),
    }
}

/// Directory and provenance file name for an output that is a single file.
fn file_provenance(path: &Path) -> (PathBuf, String) {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    (dir, name)
}

fn write_file_provenance(
    path: &Path,
    command: &str,
    cfg: &RunConfig,
    details: serde_json::Value,
) -> Result<()> {
    let (dir, name) = file_provenance(path);
    provenance::write_named(
        &dir,
        &format!("{name}.provenance.json"),
        command,
        cfg,
        details,
        &[name],
    )
}

fn load_checkpoint(path: Option<&Path>) -> Result<Option<GanCheckpoint>> {
    path.map(|p| {
        GanCheckpoint::load(p).with_context(|| format!("loading checkpoint {}", p.display()))
    })
    .transpose()
}

fn cmd_ingest(cfg: &RunConfig, root: Option<PathBuf>, cap: usize) -> Result<()> {
    let out = cfg.out_dir()?;
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for &name in &cfg.scenarios {
        let root = root
            .clone()
            .or_else(|| cfg.dataset_roots.get(name.as_str()).cloned());
        let (mut manifest, splits) = pipeline::collect(cfg, name, root.as_deref(), cap)?;
        let dir = out.join(name.as_str());
        let written = pipeline::write_splits(&dir, &mut manifest, &splits)?;
        files.extend(written.iter().map(|f| format!("{name}/{f}")));
        summary.push(json!({
            "scenario": name,
            "root": root,
            "train": splits.train.len(),
            "val": splits.val.len(),
            "test": splits.test.len(),
            "skipped": manifest.skipped.len(),
        }));
        println!(
            "{name}: {} train / {} val / {} test, {} skipped",
            splits.train.len(),
            splits.val.len(),
            splits.test.len(),
            manifest.skipped.len()
        );
    }
    provenance::write(
        out,
        "ingest",
        cfg,
        json!({ "cap_per_class": cap, "scenarios": summary }),
        &files,
    )
}

fn cmd_gen_noise(
    cfg: &RunConfig,
    kind: NoiseKind,
    seconds: f64,
    rate: u32,
    ckpt: Option<&Path>,
    count: usize,
) -> Result<()> {
    if count == 0 {
        bail!("--count must be positive");
    }
    let out = cfg.out_dir()?;
    let gan = load_checkpoint(ckpt)?;
    if kind == NoiseKind::Gan && gan.is_none() {
        bail!("--kind gan needs --ckpt");
    }
    let details = json!({ "kind": kind, "seconds": seconds, "rate": rate, "count": count,
        "checkpoint": ckpt, "peak_dbfs": cfg.peak_dbfs });
    if count == 1 {
        let clip = pipeline::noise_clip(cfg, kind, gan.as_ref(), 0, seconds, rate)?;
        save_wav(&clip, out)?;
        return write_file_provenance(out, "gen-noise", cfg, details);
    }
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for i in 0..count {
        let clip = pipeline::noise_clip(cfg, kind, gan.as_ref(), i, seconds, rate)?;
        let name = format!("{kind}_{i:04}.wav");
        save_wav(&clip, out.join(&name))?;
        files.push(name);
    }
    provenance::write(out, "gen-noise", cfg, details, &files)
}

fn cmd_train_gan(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    let training = pipeline::train_gan(cfg)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    training.checkpoint.save(out)?;
    let (dir, name) = file_provenance(out);
    let trace = format!("{name}.trace.json");
    provenance::write_json(&dir.join(&trace), &training.trace)?;
    let details = json!({
        "steps": cfg.gan_steps,
        "best_step": training.checkpoint.step,
        "flatness": training.checkpoint.flatness,
    });
    println!(
        "saved step {} (flatness {:.4}) to {}",
        training.checkpoint.step,
        training.checkpoint.flatness.unwrap_or(f64::NAN),
        out.display()
    );
    provenance::write_named(
        &dir,
        &format!("{name}.provenance.json"),
        "train-gan",
        cfg,
        details,
        &[name, trace],
    )
}

#[derive(Serialize)]
struct Aggregate {
    mean_wald_wolfowitz: f64,
    mean_cox_stuart: f64,
    combined: f64,
}

#[derive(Serialize)]
struct SkippedBlock {
    count: usize,
    clips: Vec<SkippedClip>,
}

#[derive(Serialize)]
struct MeasureReport {
    condition: String,
    clip_count: usize,
    scored: usize,
    /// `None` when no clip could be scored.
    aggregate: Option<Aggregate>,
    skipped_degenerate: SkippedBlock,
    clips: Vec<ClipRandomness>,
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).with_context(|| format!("reading {}", d.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
            {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn cmd_measure(cfg: &RunConfig, input: &Path, condition: &str) -> Result<()> {
    let out = cfg.out_dir()?;
    let files = wav_files(input)?;
    let mut clips: Vec<(String, AudioClip)> = Vec::new();
    let mut unreadable = Vec::new();
    for f in &files {
        let id = pipeline::relative(input, f);
        match load_wav(f) {
            Ok(c) => clips.push((id, c)),
            Err(e) => unreadable.push(SkippedClip {
                id,
                reason: e.to_string(),
            }),
        }
    }
    let (scored, mut skipped) = score_each(
        clips.iter().map(|(id, c)| (id.clone(), c)),
        DEFAULT_MAX_VALUES,
    );
    skipped.extend(unreadable);
    skipped.sort_by(|a, b| a.id.cmp(&b.id));
    let aggregate = (!scored.is_empty()).then(|| {
        let k = scored.len() as f64;
        let ww = scored.iter().map(|c| c.wald_wolfowitz.score).sum::<f64>() / k;
        let cs = scored.iter().map(|c| c.cox_stuart.score).sum::<f64>() / k;
        Aggregate {
            mean_wald_wolfowitz: ww,
            mean_cox_stuart: cs,
            combined: (ww + cs) / 2.0,
        }
    });
    let report = MeasureReport {
        condition: condition.to_string(),
        clip_count: files.len(),
        scored: scored.len(),
        aggregate,
        skipped_degenerate: SkippedBlock {
            count: skipped.len(),
            clips: skipped,
        },
        clips: scored,
    };
    match &report.aggregate {
        Some(a) => println!(
            "{condition}: {} scored, {} skipped, WW {:.4}, CS {:.4}",
            report.scored,
            report.skipped_degenerate.count,
            a.mean_wald_wolfowitz,
            a.mean_cox_stuart
        ),
        None => println!(
            "{condition}: no scorable clips, {} skipped",
            report.skipped_degenerate.count
        ),
    }
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    provenance::write_json(out, &report)?;
    write_file_provenance(
        out,
        "measure-randomness",
        cfg,
        json!({ "input": input, "condition": condition }),
    )
}

fn single_scenario(cfg: &RunConfig) -> Result<ScenarioName> {
    match cfg.scenarios.as_slice() {
        [one] => Ok(*one),
        _ => bail!("pass exactly one --scenario"),
    }
}

fn cmd_attack(
    cfg: &RunConfig,
    family: Family,
    condition: Condition,
    data: Option<&Path>,
    ckpt: Option<&Path>,
) -> Result<()> {
    let out = cfg.out_dir()?;
    let name = single_scenario(cfg)?;
    let (spec, splits) = match data {
        Some(d) => {
            let dir = d.join(name.as_str());
            let m = Manifest::load(&dir)?;
            let s = m.splits(&dir)?;
            (m.scenario, s)
        }
        None => {
            let (m, s) = pipeline::collect(cfg, name, None, 0)?;
            (m.scenario, s)
        }
    };
    let gan = load_checkpoint(ckpt)?;
    let noise = condition.noise();
    let test_clips = match noise {
        None => splits.test.clone(),
        Some(kind) => {
            let bank = pipeline::noise_bank(cfg, kind, gan.as_ref(), splits.test.len())?;
            pipeline::mask(&splits.test, &bank, cfg.snr_db)?
        }
    };
    let mel = MelConfig::default();
    let train = featurize(&splits.train, &spec, &mel)?;
    let val = featurize(&splits.val, &spec, &mel)?;
    let test = featurize(&test_clips, &spec, &mel)?;
    let attack = pipeline::train_family(cfg, &spec, family, &train, &val)?;
    let label = pipeline::condition_label(noise, noise.map(|_| cfg.snr_db));
    let result = soundmask::attacks::evaluate(&attack, &test, &label)?;
    println!(
        "{name} {family} {label}: accuracy {:.4} on {} clips",
        result.accuracy, result.samples
    );

    std::fs::create_dir_all(out)?;
    attack.save(&out.join("model.sma"))?;
    let stored = soundmask::evaluation::StoredResult {
        family,
        noise,
        snr_db: noise.map(|_| cfg.snr_db),
        result,
    };
    provenance::write_json(&out.join("result.json"), &stored)?;
    provenance::write_json(&out.join("history.json"), &attack.history)?;
    let details = json!({ "scenario": name, "family": family, "condition": label, "data": data, "checkpoint": ckpt });
    provenance::write(
        out,
        "attack",
        cfg,
        details,
        &[
            "model.sma".into(),
            "result.json".into(),
            "history.json".into(),
        ],
    )
}

fn cmd_mitigate(
    cfg: &RunConfig,
    only: &[ScenarioName],
    input: &Path,
    noise: NoiseKind,
    ckpt: Option<&Path>,
) -> Result<()> {
    let out = cfg.out_dir()?;
    let gan = load_checkpoint(ckpt)?;
    let mut files = Vec::new();
    let mut found = 0;
    for name in ScenarioName::ALL {
        let dir = input.join(name.as_str());
        if !dir.join(MANIFEST_FILE).exists() || !(only.is_empty() || only.contains(&name)) {
            continue;
        }
        found += 1;
        let mut manifest = Manifest::load(&dir)?;
        let splits = manifest.splits(&dir)?;
        let n = splits
            .train
            .len()
            .max(splits.val.len())
            .max(splits.test.len());
        let bank = pipeline::noise_bank(cfg, noise, gan.as_ref(), n)?;
        let masked = soundmask::datasets::Splits {
            train: pipeline::mask(&splits.train, &bank, cfg.snr_db)?,
            val: pipeline::mask(&splits.val, &bank, cfg.snr_db)?,
            test: pipeline::mask(&splits.test, &bank, cfg.snr_db)?,
        };
        let written = pipeline::write_splits(&out.join(name.as_str()), &mut manifest, &masked)?;
        files.extend(written.iter().map(|f| format!("{name}/{f}")));
        println!(
            "{name}: mixed {} clips with {noise} noise at {} dB",
            masked.len(),
            cfg.snr_db
        );
    }
    if found == 0 {
        bail!("no scenario manifest under {}", input.display());
    }
    let details =
        json!({ "input": input, "noise": noise, "snr_db": cfg.snr_db, "checkpoint": ckpt });
    provenance::write(out, "mitigate", cfg, details, &files)
}

fn cmd_evaluate(cfg: &RunConfig, input: &Path) -> Result<()> {
    let out = cfg.out_dir()?;
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let inputs: ReportInputs =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
    let report = build_report(inputs)?;
    let files = emit_report(&report, out)?;
    summarize(&report);
    let files: Vec<String> = files.iter().map(|p| pipeline::relative(out, p)).collect();
    provenance::write(out, "evaluate", cfg, json!({ "input": input }), &files)
}

fn cmd_report(cfg: &RunConfig, input: &Path) -> Result<()> {
    let out = cfg.out_dir()?;
    let path = if input.is_dir() {
        input.join(REPORT_FILE)
    } else {
        input.to_path_buf()
    };
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = parse_report(&text)?;
    let files = emit_report(&report, out)?;
    summarize(&report);
    let files: Vec<String> = files.iter().map(|p| pipeline::relative(out, p)).collect();
    provenance::write(out, "report", cfg, json!({ "input": path }), &files)
}

fn cmd_demo(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    std::fs::create_dir_all(out)?;
    let demo = pipeline::demo(cfg, out)?;
    summarize(&demo.report);
    let details = json!({ "fingerprint": demo.report.provenance.fingerprint,
        "gan_checkpoint_hash": demo.report.provenance.gan_checkpoint_hash });
    provenance::write(out, "demo", cfg, details, &demo.files)
}

fn summarize(report: &soundmask::evaluation::EvaluationReport) {
    for row in &report.metrics.bia.rows {
        let cells: Vec<String> = row
            .cells
            .iter()
            .map(|c| format!("{} {:.3}", c.family, c.accuracy))
            .collect();
        println!("BIA {}: {}", row.scenario, cells.join(", "));
    }
    let c = &report.metrics.claims;
    println!(
        "at {} dB: delta white {:.3}, gan {:.3}; randomness white {:.4}, gan {:.4}",
        c.snr_db, c.delta_white, c.delta_gan, c.randomness_white, c.randomness_gan
    );
    let spf = &report.metrics.spf;
    println!(
        "SPF white {:.3}, gan {:.3}; RTMR {:?}",
        spf.spf_white, spf.spf_gan, report.metrics.rtmr.coefficient
    );
}
