use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::charts::{bar_chart_svg, scatter_svg, BarGroup};
use super::{
    compute_bia, compute_mia, compute_rtmr, compute_spf, BiaTable, CleanCell, MaskedCell,
    MitigationTable, Rtmr, RtmrPair,
};
use crate::attacks::{AttackResult, Family};
use crate::datasets::{ScenarioName, TaskType};
use crate::error::{Error, Result};
use crate::noise::NoiseKind;
use crate::randomness::RandomnessReport;

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const REPORT_FILE: &str = "report.json";
pub const SCHEMA_FILE: &str = "report.schema.json";

/// One attack evaluation as it was stored upstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredResult {
    pub family: Family,
    /// `None` for the clean condition.
    pub noise: Option<NoiseKind>,
    pub snr_db: Option<f64>,
    pub result: AttackResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomnessEntry {
    pub noise: Option<NoiseKind>,
    pub snr_db: Option<f64>,
    pub clip_count: usize,
    pub skipped: usize,
    pub mean_wald_wolfowitz: f64,
    pub mean_cox_stuart: f64,
    pub combined: f64,
}

impl RandomnessEntry {
    pub fn from_report(
        noise: Option<NoiseKind>,
        snr_db: Option<f64>,
        r: &RandomnessReport,
    ) -> Self {
        Self {
            noise,
            snr_db,
            clip_count: r.clip_count,
            skipped: r.skipped.len(),
            mean_wald_wolfowitz: r.mean_wald_wolfowitz,
            mean_cox_stuart: r.mean_cox_stuart,
            combined: r.combined_score(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionEntry {
    pub noise: NoiseKind,
    pub snr_db: f64,
    pub accuracy: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntry {
    pub family: Family,
    pub bia: f64,
    pub conditions: Vec<ConditionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub name: ScenarioName,
    pub task_type: TaskType,
    pub families: Vec<FamilyEntry>,
    pub randomness: Vec<RandomnessEntry>,
    pub results: Vec<StoredResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpfBlock {
    pub scenario: ScenarioName,
    pub family: Family,
    pub snr_db: f64,
    pub clean: f64,
    pub white: f64,
    pub gan: f64,
    pub spf_white: f64,
    pub spf_gan: f64,
}

/// Directional comparisons at the matched SNR, recorded whichever way
/// they come out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claims {
    pub snr_db: f64,
    pub randomness_white: f64,
    pub randomness_gan: f64,
    pub randomness_gan_higher: bool,
    pub delta_white: f64,
    pub delta_gan: f64,
    pub delta_gan_higher: bool,
    pub spf_gan_higher: bool,
    pub rtmr_positive: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub bia: BiaTable,
    pub mitigation: MitigationTable,
    pub spf: SpfBlock,
    pub rtmr: Rtmr,
    pub claims: Claims,
}

/// Full-scale published values, kept for comparison only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceValues {
    pub mgi_best_bia: f64,
    pub udi_crnn_bia: f64,
    pub white_noise_drop_below: f64,
    pub gan_noise_drop: f64,
    pub note: String,
}

impl Default for ReferenceValues {
    fn default() -> Self {
        Self {
            mgi_best_bia: 0.67,
            udi_crnn_bia: 0.82,
            white_noise_drop_below: 0.11,
            gan_noise_drop: 0.45,
            note: "full-scale reference values; not reproducible at desk scale and not pass/fail targets".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub noise: u64,
    pub gan: u64,
    pub attack: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seeds: Seeds,
    pub snr_db: f64,
    pub sweep_snr_db: Vec<f64>,
    pub peak_dbfs: f64,
    pub gan_steps: usize,
    pub attack_epochs: usize,
    /// Complete run configuration as supplied.
    pub config: serde_json::Value,
    /// SHA-256 of the GAN checkpoint bytes.
    pub gan_checkpoint_hash: String,
    /// SHA-256 over every field above except the checkpoint hash.
    pub fingerprint: String,
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    seeds: &'a Seeds,
    snr_db: f64,
    sweep_snr_db: &'a [f64],
    peak_dbfs: f64,
    gan_steps: usize,
    attack_epochs: usize,
    config: &'a serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Provenance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        seeds: Seeds,
        snr_db: f64,
        sweep_snr_db: Vec<f64>,
        peak_dbfs: f64,
        gan_steps: usize,
        attack_epochs: usize,
        config: serde_json::Value,
        gan_checkpoint_hash: String,
    ) -> Self {
        let mut p = Self {
            seeds,
            snr_db,
            sweep_snr_db,
            peak_dbfs,
            gan_steps,
            attack_epochs,
            config,
            gan_checkpoint_hash,
            fingerprint: String::new(),
        };
        p.fingerprint = p.compute_fingerprint();
        p
    }

    pub fn compute_fingerprint(&self) -> String {
        let input = FingerprintInput {
            seeds: &self.seeds,
            snr_db: self.snr_db,
            sweep_snr_db: &self.sweep_snr_db,
            peak_dbfs: self.peak_dbfs,
            gan_steps: self.gan_steps,
            attack_epochs: self.attack_epochs,
            config: &self.config,
        };
        sha256_hex(&serde_json::to_vec(&input).expect("fingerprint input serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub schema_version: String,
    pub scenarios: Vec<ScenarioEntry>,
    pub metrics: Metrics,
    pub reference: ReferenceValues,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioInputs {
    pub name: ScenarioName,
    pub task_type: TaskType,
    pub results: Vec<StoredResult>,
    pub randomness: Vec<RandomnessEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportInputs {
    /// Inference scenarios plus the speech-content scenario.
    pub scenarios: Vec<ScenarioInputs>,
    pub families: Vec<Family>,
    /// Family whose speech-content accuracy defines SPF.
    pub spf_family: Family,
    pub provenance: Provenance,
}

fn clean_cells(s: &ScenarioInputs) -> Vec<CleanCell> {
    s.results
        .iter()
        .filter(|r| r.noise.is_none())
        .map(|r| CleanCell {
            scenario: s.name,
            family: r.family,
            accuracy: r.result.accuracy,
        })
        .collect()
}

fn masked_cells(s: &ScenarioInputs, snr_db: f64) -> Vec<MaskedCell> {
    s.results
        .iter()
        .filter_map(|r| match (r.noise, r.snr_db) {
            (Some(noise), Some(snr)) if snr == snr_db => Some(MaskedCell {
                scenario: s.name,
                family: r.family,
                noise,
                accuracy: r.result.accuracy,
            }),
            _ => None,
        })
        .collect()
}

fn lookup(
    s: &ScenarioInputs,
    family: Family,
    noise: Option<NoiseKind>,
    snr_db: Option<f64>,
) -> Result<f64> {
    s.results
        .iter()
        .find(|r| r.family == family && r.noise == noise && r.snr_db == snr_db)
        .map(|r| r.result.accuracy)
        .ok_or_else(|| {
            let cond = noise.map_or("clean".to_string(), |n| format!("+{n}"));
            Error::MissingCell(format!("{}/{family} {cond}", s.name))
        })
}

fn randomness_at(s: &ScenarioInputs, noise: NoiseKind, snr_db: f64) -> Result<f64> {
    s.randomness
        .iter()
        .find(|r| r.noise == Some(noise) && r.snr_db == Some(snr_db))
        .map(|r| r.combined)
        .ok_or_else(|| Error::MissingCell(format!("{} randomness +{noise} at {snr_db} dB", s.name)))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Assembles all metrics from stored results. Scenario `SPF` feeds only
/// the semantic-preservation block; the rest feed BIA, Δ and RTMR.
pub fn build_report(inputs: ReportInputs) -> Result<EvaluationReport> {
    let snr = inputs.provenance.snr_db;
    let (spf_in, inference): (Vec<&ScenarioInputs>, Vec<&ScenarioInputs>) = inputs
        .scenarios
        .iter()
        .partition(|s| s.name == ScenarioName::Spf);
    let Some(spf_in) = spf_in.first() else {
        return Err(Error::MissingCell("SPF scenario".into()));
    };
    if inference.is_empty() {
        return Err(Error::MissingCell("no inference scenario".into()));
    }

    let names: Vec<ScenarioName> = inference.iter().map(|s| s.name).collect();
    let clean: Vec<CleanCell> = inference.iter().flat_map(|s| clean_cells(s)).collect();
    let masked: Vec<MaskedCell> = inference
        .iter()
        .flat_map(|s| masked_cells(s, snr))
        .collect();
    let bia = compute_bia(&names, &inputs.families, &clean)?;
    let mitigation = compute_mia(&clean, &masked)?;
    for noise in [NoiseKind::White, NoiseKind::Gan] {
        if mitigation.mean_delta(noise, None).is_none() {
            return Err(Error::MissingCell(format!(
                "no +{noise} results at {snr} dB"
            )));
        }
    }

    let f = inputs.spf_family;
    let sc = lookup(spf_in, f, None, None)?;
    let sw = lookup(spf_in, f, Some(NoiseKind::White), Some(snr))?;
    let sg = lookup(spf_in, f, Some(NoiseKind::Gan), Some(snr))?;
    let spf = SpfBlock {
        scenario: spf_in.name,
        family: f,
        snr_db: snr,
        clean: sc,
        white: sw,
        gan: sg,
        spf_white: compute_spf(sc, sw, "SPF +white")?,
        spf_gan: compute_spf(sc, sg, "SPF +gan")?,
    };

    let mut pairs = Vec::new();
    let mut rand_by_kind = [Vec::new(), Vec::new()];
    for s in &inference {
        for (k, noise) in [NoiseKind::White, NoiseKind::Gan].into_iter().enumerate() {
            let randomness = randomness_at(s, noise, snr)?;
            rand_by_kind[k].push(randomness);
            pairs.push(RtmrPair {
                label: format!("{}/{noise}", s.name),
                randomness,
                delta: mitigation
                    .mean_delta(noise, Some(s.name))
                    .expect("checked above"),
            });
        }
    }
    let rtmr = compute_rtmr(pairs)?;

    let delta_white = mitigation
        .mean_delta(NoiseKind::White, None)
        .expect("checked above");
    let delta_gan = mitigation
        .mean_delta(NoiseKind::Gan, None)
        .expect("checked above");
    let (rw, rg) = (mean(&rand_by_kind[0]), mean(&rand_by_kind[1]));
    let claims = Claims {
        snr_db: snr,
        randomness_white: rw,
        randomness_gan: rg,
        randomness_gan_higher: rg > rw,
        delta_white,
        delta_gan,
        delta_gan_higher: delta_gan > delta_white,
        spf_gan_higher: spf.spf_gan > spf.spf_white,
        rtmr_positive: rtmr.coefficient.map(|c| c > 0.0),
    };

    let mut scenarios = Vec::with_capacity(inputs.scenarios.len());
    for s in &inputs.scenarios {
        let mut families = Vec::new();
        for &family in &inputs.families {
            let Ok(b) = lookup(s, family, None, None) else {
                continue;
            };
            let mut conditions: Vec<ConditionEntry> = s
                .results
                .iter()
                .filter(|r| r.family == family)
                .filter_map(|r| {
                    Some(ConditionEntry {
                        noise: r.noise?,
                        snr_db: r.snr_db?,
                        accuracy: r.result.accuracy,
                        delta: b - r.result.accuracy,
                    })
                })
                .collect();
            conditions.sort_by(|a, b| a.noise.cmp(&b.noise).then(a.snr_db.total_cmp(&b.snr_db)));
            families.push(FamilyEntry {
                family,
                bia: b,
                conditions,
            });
        }
        scenarios.push(ScenarioEntry {
            name: s.name,
            task_type: s.task_type,
            families,
            randomness: s.randomness.clone(),
            results: s.results.clone(),
        });
    }

    let report = EvaluationReport {
        schema_version: SCHEMA_VERSION.to_string(),
        scenarios,
        metrics: Metrics {
            bia,
            mitigation,
            spf,
            rtmr,
            claims,
        },
        reference: ReferenceValues::default(),
        provenance: inputs.provenance,
    };
    report.validate()?;
    Ok(report)
}

fn schema_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        msg: msg.into(),
    }
}

fn check_unit(path: String, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(schema_err(path, format!("{v} is outside [0, 1]")))
    }
}

fn check_signed(path: String, v: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(schema_err(path, format!("{v} is outside [-1, 1]")))
    }
}

impl EvaluationReport {
    /// Range, fingerprint and traceability checks. Every Δ must equal the
    /// difference of the stored results it came from.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema_err(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            for (j, r) in s.results.iter().enumerate() {
                check_unit(
                    format!("scenarios[{i}].results[{j}].result.accuracy"),
                    r.result.accuracy,
                )?;
            }
            for (j, f) in s.families.iter().enumerate() {
                check_unit(format!("scenarios[{i}].families[{j}].bia"), f.bia)?;
                for (k, c) in f.conditions.iter().enumerate() {
                    check_unit(
                        format!("scenarios[{i}].families[{j}].conditions[{k}].accuracy"),
                        c.accuracy,
                    )?;
                    check_signed(
                        format!("scenarios[{i}].families[{j}].conditions[{k}].delta"),
                        c.delta,
                    )?;
                }
            }
        }
        let stored =
            |scenario: ScenarioName, family: Family, noise: Option<NoiseKind>, snr: Option<f64>| {
                self.scenarios
                    .iter()
                    .find(|s| s.name == scenario)?
                    .results
                    .iter()
                    .find(|r| r.family == family && r.noise == noise && r.snr_db == snr)
                    .map(|r| r.result.accuracy)
            };
        let snr = self.provenance.snr_db;
        for (i, c) in self.metrics.mitigation.cells.iter().enumerate() {
            let path = format!("metrics.mitigation.cells[{i}]");
            check_signed(format!("{path}.delta"), c.delta)?;
            let bia = stored(c.scenario, c.family, None, None);
            let mia = stored(c.scenario, c.family, Some(c.noise), Some(snr));
            if bia != Some(c.bia) || mia != Some(c.mia) || c.delta != c.bia - c.mia {
                return Err(schema_err(path, "does not match the stored results"));
            }
        }
        for (i, row) in self.metrics.bia.rows.iter().enumerate() {
            for (j, c) in row.cells.iter().enumerate() {
                if stored(row.scenario, c.family, None, None) != Some(c.accuracy) {
                    return Err(schema_err(
                        format!("metrics.bia.rows[{i}].cells[{j}]"),
                        "does not match the stored results",
                    ));
                }
            }
        }
        let spf = &self.metrics.spf;
        for (name, v) in [("spf_white", spf.spf_white), ("spf_gan", spf.spf_gan)] {
            check_unit(format!("metrics.spf.{name}"), v)?;
        }
        if let Some(c) = self.metrics.rtmr.coefficient {
            check_signed("metrics.rtmr.coefficient".into(), c)?;
        }
        if self.provenance.fingerprint != self.provenance.compute_fingerprint() {
            return Err(schema_err(
                "provenance.fingerprint",
                "does not match the recorded configuration",
            ));
        }
        Ok(())
    }

    /// Pretty JSON with a trailing newline; identical reports give
    /// identical bytes.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Parses and validates a report data file. Structural errors carry the
/// JSON path of the offending field.
pub fn parse_report(json: &str) -> Result<EvaluationReport> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let report: EvaluationReport = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let msg = e.inner().to_string();
        if let Some(field) = msg
            .strip_prefix("missing field `")
            .and_then(|r| r.split('`').next())
        {
            path = if path == "." {
                field.to_string()
            } else {
                format!("{path}.{field}")
            };
        }
        schema_err(path, msg)
    })?;
    report.validate()?;
    Ok(report)
}

fn pct(v: f64) -> f64 {
    100.0 * v
}

/// Writes the data file, its schema and the bar charts. Returns the
/// written paths.
pub fn emit_report(report: &EvaluationReport, out: &Path) -> Result<Vec<PathBuf>> {
    report.validate()?;
    let figures = out.join("figures");
    fs::create_dir_all(&figures)?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, body: &str| -> Result<()> {
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put(out.join(REPORT_FILE), &report.to_json()?)?;
    put(out.join(SCHEMA_FILE), SCHEMA_JSON)?;

    let m = &report.metrics;
    let bia_groups: Vec<BarGroup> = m
        .bia
        .rows
        .iter()
        .map(|r| BarGroup {
            label: r.scenario.to_string(),
            bars: r
                .cells
                .iter()
                .map(|c| (c.family.to_string(), pct(c.accuracy)))
                .collect(),
        })
        .collect();
    put(
        figures.join("bia.svg"),
        &bar_chart_svg(
            "Baseline inference accuracy",
            "accuracy (%)",
            &bia_groups,
            100.0,
        ),
    )?;

    for row in &m.bia.rows {
        let groups: Vec<BarGroup> = row
            .cells
            .iter()
            .map(|c| {
                let mut bars = vec![("clean".to_string(), pct(c.accuracy))];
                for noise in [NoiseKind::White, NoiseKind::Gan] {
                    if let Some(cell) = m.mitigation.cells.iter().find(|x| {
                        x.scenario == row.scenario && x.family == c.family && x.noise == noise
                    }) {
                        bars.push((format!("+{noise}"), pct(cell.mia)));
                    }
                }
                BarGroup {
                    label: c.family.to_string(),
                    bars,
                }
            })
            .collect();
        let title = format!(
            "{} accuracy with masking at {} dB SNR",
            row.scenario, report.provenance.snr_db
        );
        put(
            figures.join(format!("mitigation_{}.svg", row.scenario)),
            &bar_chart_svg(&title, "accuracy (%)", &groups, 100.0),
        )?;
    }

    let spf_groups = vec![BarGroup {
        label: format!("{} {}", m.spf.scenario, m.spf.family),
        bars: vec![
            ("clean".into(), pct(m.spf.clean)),
            ("+white".into(), pct(m.spf.white)),
            ("+gan".into(), pct(m.spf.gan)),
        ],
    }];
    put(
        figures.join("spf.svg"),
        &bar_chart_svg(
            "Speech content accuracy",
            "accuracy (%)",
            &spf_groups,
            100.0,
        ),
    )?;

    let points: Vec<(String, f64, f64)> = m
        .rtmr
        .pairs
        .iter()
        .map(|p| (p.label.clone(), p.randomness, pct(p.delta)))
        .collect();
    let title = match m.rtmr.coefficient {
        Some(c) => format!("Randomness vs. accuracy drop (Spearman {c:.2})"),
        None => "Randomness vs. accuracy drop (Spearman undefined)".to_string(),
    };
    put(
        figures.join("rtmr.svg"),
        &scatter_svg(
            &title,
            "randomness score",
            "accuracy drop (points)",
            &points,
        ),
    )?;
    Ok(written)
}

/// JSON Schema (draft 2020-12) of the report data file.
pub const SCHEMA_JSON: &str = r##"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "EvaluationReport",
  "type": "object",
  "required": ["schema_version", "scenarios", "metrics", "reference", "provenance"],
  "properties": {
    "schema_version": { "const": "1.0.0" },
    "scenarios": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["name", "task_type", "families", "randomness", "results"],
        "properties": {
          "name": { "enum": ["MGI", "UDI", "SEI", "SPF"] },
          "task_type": { "enum": ["multiclass", "multilabel"] },
          "families": {
            "type": "array",
            "items": {
              "type": "object",
              "required": ["family", "bia", "conditions"],
              "properties": {
                "family": { "$ref": "#/$defs/family" },
                "bia": { "$ref": "#/$defs/unit" },
                "conditions": {
                  "type": "array",
                  "items": {
                    "type": "object",
                    "required": ["noise", "snr_db", "accuracy", "delta"],
                    "properties": {
                      "noise": { "$ref": "#/$defs/noise" },
                      "snr_db": { "type": "number" },
                      "accuracy": { "$ref": "#/$defs/unit" },
                      "delta": { "$ref": "#/$defs/signed" }
                    }
                  }
                }
              }
            }
          },
          "randomness": {
            "type": "array",
            "items": {
              "type": "object",
              "required": ["noise", "snr_db", "clip_count", "skipped", "mean_wald_wolfowitz", "mean_cox_stuart", "combined"],
              "properties": {
                "noise": { "oneOf": [{ "$ref": "#/$defs/noise" }, { "type": "null" }] },
                "snr_db": { "type": ["number", "null"] },
                "clip_count": { "type": "integer", "minimum": 0 },
                "skipped": { "type": "integer", "minimum": 0 },
                "mean_wald_wolfowitz": { "$ref": "#/$defs/unit" },
                "mean_cox_stuart": { "$ref": "#/$defs/unit" },
                "combined": { "$ref": "#/$defs/unit" }
              }
            }
          },
          "results": {
            "type": "array",
            "items": {
              "type": "object",
              "required": ["family", "noise", "snr_db", "result"],
              "properties": {
                "family": { "$ref": "#/$defs/family" },
                "noise": { "oneOf": [{ "$ref": "#/$defs/noise" }, { "type": "null" }] },
                "snr_db": { "type": ["number", "null"] },
                "result": {
                  "type": "object",
                  "required": ["condition", "accuracy", "samples", "tasks"],
                  "properties": {
                    "condition": { "type": "string" },
                    "accuracy": { "$ref": "#/$defs/unit" },
                    "samples": { "type": "integer", "minimum": 1 },
                    "tasks": {
                      "type": "array",
                      "items": {
                        "type": "object",
                        "required": ["task", "classes", "accuracy", "confusion", "support", "per_class_accuracy"]
                      }
                    }
                  }
                }
              }
            }
          }
        }
      }
    },
    "metrics": {
      "type": "object",
      "required": ["bia", "mitigation", "spf", "rtmr", "claims"],
      "properties": {
        "bia": {
          "type": "object",
          "required": ["rows"],
          "properties": {
            "rows": {
              "type": "array",
              "items": {
                "type": "object",
                "required": ["scenario", "cells"],
                "properties": {
                  "cells": {
                    "type": "array",
                    "items": {
                      "type": "object",
                      "required": ["family", "accuracy", "is_max"],
                      "properties": {
                        "family": { "$ref": "#/$defs/family" },
                        "accuracy": { "$ref": "#/$defs/unit" },
                        "is_max": { "type": "boolean" }
                      }
                    }
                  }
                }
              }
            }
          }
        },
        "mitigation": {
          "type": "object",
          "required": ["cells", "max_delta"],
          "properties": {
            "cells": {
              "type": "array",
              "items": {
                "type": "object",
                "required": ["scenario", "family", "noise", "bia", "mia", "delta"],
                "properties": {
                  "bia": { "$ref": "#/$defs/unit" },
                  "mia": { "$ref": "#/$defs/unit" },
                  "delta": { "$ref": "#/$defs/signed" }
                }
              }
            },
            "max_delta": { "type": "object" }
          }
        },
        "spf": {
          "type": "object",
          "required": ["scenario", "family", "snr_db", "clean", "white", "gan", "spf_white", "spf_gan"],
          "properties": {
            "spf_white": { "$ref": "#/$defs/unit" },
            "spf_gan": { "$ref": "#/$defs/unit" }
          }
        },
        "rtmr": {
          "type": "object",
          "required": ["coefficient", "pairs"],
          "properties": {
            "coefficient": { "oneOf": [{ "$ref": "#/$defs/signed" }, { "type": "null" }] },
            "pairs": {
              "type": "array",
              "minItems": 3,
              "items": {
                "type": "object",
                "required": ["label", "randomness", "delta"]
              }
            }
          }
        },
        "claims": {
          "type": "object",
          "required": [
            "snr_db", "randomness_white", "randomness_gan", "randomness_gan_higher",
            "delta_white", "delta_gan", "delta_gan_higher", "spf_gan_higher", "rtmr_positive"
          ]
        }
      }
    },
    "reference": {
      "type": "object",
      "required": ["mgi_best_bia", "udi_crnn_bia", "white_noise_drop_below", "gan_noise_drop", "note"]
    },
    "provenance": {
      "type": "object",
      "required": [
        "seeds", "snr_db", "sweep_snr_db", "peak_dbfs", "gan_steps", "attack_epochs",
        "config", "gan_checkpoint_hash", "fingerprint"
      ],
      "properties": {
        "seeds": {
          "type": "object",
          "required": ["data", "noise", "gan", "attack"]
        },
        "gan_checkpoint_hash": { "type": "string", "pattern": "^[0-9a-f]{64}$" },
        "fingerprint": { "type": "string", "pattern": "^[0-9a-f]{64}$" }
      }
    }
  },
  "$defs": {
    "unit": { "type": "number", "minimum": 0, "maximum": 1 },
    "signed": { "type": "number", "minimum": -1, "maximum": 1 },
    "family": { "enum": ["cnn", "rnn", "crnn"] },
    "noise": { "enum": ["white", "gan"] }
  }
}
"##;
