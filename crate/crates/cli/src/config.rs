use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use soundmask::attacks::Family;
use soundmask::datasets::ScenarioName;
use soundmask::evaluation::Seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub data: u64,
    pub noise: u64,
    pub gan: u64,
    pub attack: u64,
}

impl SeedConfig {
    pub fn all(seed: u64) -> Self {
        Self {
            data: seed,
            noise: seed,
            gan: seed,
            attack: seed,
        }
    }

    pub fn as_seeds(&self) -> Seeds {
        Seeds {
            data: self.data,
            noise: self.noise,
            gan: self.gan,
            attack: self.attack,
        }
    }
}

/// Seed used for every stage unless configured otherwise.
pub const DEFAULT_SEED: u64 = 7;

/// Effective run configuration: defaults, then the config file, then
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Inference scenarios for `demo`; the speech-content scenario always runs.
    pub scenarios: Vec<ScenarioName>,
    /// Corpus roots by scenario name, used by `ingest`.
    pub dataset_roots: BTreeMap<String, PathBuf>,
    pub seeds: SeedConfig,
    pub snr_db: f64,
    /// Additional SNRs evaluated for every attack.
    pub sweep_snr_db: Vec<f64>,
    pub peak_dbfs: f64,
    pub gan_steps: usize,
    pub attack_epochs: usize,
    pub families: Vec<Family>,
    pub spf_family: Family,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![ScenarioName::Mgi, ScenarioName::Udi, ScenarioName::Sei],
            dataset_roots: BTreeMap::new(),
            seeds: SeedConfig::all(DEFAULT_SEED),
            snr_db: 5.0,
            sweep_snr_db: vec![-10.0, 10.0],
            peak_dbfs: -20.0,
            gan_steps: 200,
            attack_epochs: 20,
            families: Family::ALL.to_vec(),
            spf_family: Family::Cnn,
            out: None,
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub snr_db: Option<f64>,
    pub peak_dbfs: Option<f64>,
    pub steps: Option<usize>,
    pub epochs: Option<usize>,
    pub scenarios: Vec<ScenarioName>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(file: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut c = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = o.seed {
            c.seeds = SeedConfig::all(s);
        }
        if let Some(v) = o.snr_db {
            c.snr_db = v;
        }
        if let Some(v) = o.peak_dbfs {
            c.peak_dbfs = v;
        }
        if let Some(v) = o.steps {
            c.gan_steps = v;
        }
        if let Some(v) = o.epochs {
            c.attack_epochs = v;
        }
        if !o.scenarios.is_empty() {
            c.scenarios = o.scenarios.clone();
        }
        if o.out.is_some() {
            c.out = o.out.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() || self.sweep_snr_db.iter().any(|s| !s.is_finite()) {
            bail!("SNR values must be finite");
        }
        if !(self.peak_dbfs.is_finite() && self.peak_dbfs <= 0.0) {
            bail!("peak_dbfs must be at most 0, got {}", self.peak_dbfs);
        }
        if self.attack_epochs == 0 {
            bail!("attack_epochs must be positive");
        }
        if self.families.is_empty() {
            bail!("at least one model family is required");
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .context("no output directory: pass --out or set `out` in the config file")
    }

    /// Every SNR evaluated, the matched one first.
    pub fn all_snrs(&self) -> Vec<f64> {
        let mut v = vec![self.snr_db];
        for &s in &self.sweep_snr_db {
            if !v.contains(&s) {
                v.push(s);
            }
        }
        v
    }

    /// The configuration as recorded in provenance; the output location
    /// is not a pipeline input and is left out.
    pub fn recorded(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut()
            .expect("config is an object")
            .remove("out");
        v
    }
}
