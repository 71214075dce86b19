//! Mitigation metrics over stored attack and randomness results: baseline
//! and masked inference accuracy, accuracy drop, semantic preservation
//! and the randomness-to-mitigation rank correlation.

mod charts;
mod report;

pub use charts::{bar_chart_svg, scatter_svg, BarGroup};
pub use report::{
    build_report, emit_report, parse_report, sha256_hex, Claims, ConditionEntry, EvaluationReport,
    FamilyEntry, Metrics, Provenance, RandomnessEntry, ReferenceValues, ReportInputs,
    ScenarioEntry, ScenarioInputs, Seeds, SpfBlock, StoredResult, REPORT_FILE, SCHEMA_FILE,
    SCHEMA_JSON, SCHEMA_VERSION,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attacks::Family;
use crate::datasets::ScenarioName;
use crate::error::{Error, Result};
use crate::noise::NoiseKind;

/// Clean-condition accuracy of one (scenario, family) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanCell {
    pub scenario: ScenarioName,
    pub family: Family,
    pub accuracy: f64,
}

/// Masked-condition accuracy of one (scenario, family, noise) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskedCell {
    pub scenario: ScenarioName,
    pub family: Family,
    pub noise: NoiseKind,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiaCell {
    pub family: Family,
    pub accuracy: f64,
    /// Highest accuracy in its scenario (ties all marked).
    pub is_max: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiaRow {
    pub scenario: ScenarioName,
    pub cells: Vec<BiaCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiaTable {
    pub rows: Vec<BiaRow>,
}

impl BiaTable {
    pub fn get(&self, scenario: ScenarioName, family: Family) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario)?
            .cells
            .iter()
            .find(|c| c.family == family)
            .map(|c| c.accuracy)
    }
}

/// Baseline table keyed by scenario × family with the row maximum marked.
pub fn compute_bia(
    scenarios: &[ScenarioName],
    families: &[Family],
    clean: &[CleanCell],
) -> Result<BiaTable> {
    let mut rows = Vec::with_capacity(scenarios.len());
    for &scenario in scenarios {
        let mut cells = Vec::with_capacity(families.len());
        for &family in families {
            let found: Vec<&CleanCell> = clean
                .iter()
                .filter(|c| c.scenario == scenario && c.family == family)
                .collect();
            match found.as_slice() {
                [one] => cells.push(BiaCell {
                    family,
                    accuracy: one.accuracy,
                    is_max: false,
                }),
                [] => return Err(Error::MissingCell(format!("{scenario}/{family}"))),
                _ => {
                    return Err(Error::KeyMismatch(format!(
                        "{scenario}/{family} has {} clean results",
                        found.len()
                    )))
                }
            }
        }
        let max = cells
            .iter()
            .map(|c| c.accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        cells.iter_mut().for_each(|c| c.is_max = c.accuracy == max);
        rows.push(BiaRow { scenario, cells });
    }
    Ok(BiaTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationCell {
    pub scenario: ScenarioName,
    pub family: Family,
    pub noise: NoiseKind,
    pub bia: f64,
    pub mia: f64,
    /// `bia - mia`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationTable {
    pub cells: Vec<MitigationCell>,
    /// Largest Δ per noise kind.
    pub max_delta: BTreeMap<NoiseKind, f64>,
}

impl MitigationTable {
    /// Mean Δ for one noise kind, optionally restricted to one scenario.
    pub fn mean_delta(&self, noise: NoiseKind, scenario: Option<ScenarioName>) -> Option<f64> {
        let d: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.noise == noise && scenario.is_none_or(|s| c.scenario == s))
            .map(|c| c.delta)
            .collect();
        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
    }
}

/// Δ = BIA − MIA per (scenario, family, noise). Every noise kind present
/// must cover exactly the clean keys.
pub fn compute_mia(clean: &[CleanCell], masked: &[MaskedCell]) -> Result<MitigationTable> {
    let mut bia = BTreeMap::new();
    for c in clean {
        if bia.insert((c.scenario, c.family), c.accuracy).is_some() {
            return Err(Error::KeyMismatch(format!(
                "duplicate clean result {}/{}",
                c.scenario, c.family
            )));
        }
    }
    let clean_keys: BTreeSet<_> = bia.keys().copied().collect();
    let mut by_noise: BTreeMap<NoiseKind, BTreeSet<(ScenarioName, Family)>> = BTreeMap::new();
    let mut cells = Vec::with_capacity(masked.len());
    for m in masked {
        let key = (m.scenario, m.family);
        let Some(&b) = bia.get(&key) else {
            return Err(Error::KeyMismatch(format!(
                "{}/{} +{} has no clean result",
                m.scenario, m.family, m.noise
            )));
        };
        if !by_noise.entry(m.noise).or_default().insert(key) {
            return Err(Error::KeyMismatch(format!(
                "duplicate {}/{} +{}",
                m.scenario, m.family, m.noise
            )));
        }
        cells.push(MitigationCell {
            scenario: m.scenario,
            family: m.family,
            noise: m.noise,
            bia: b,
            mia: m.accuracy,
            delta: b - m.accuracy,
        });
    }
    for (noise, keys) in &by_noise {
        if let Some((s, f)) = clean_keys.difference(keys).next() {
            return Err(Error::KeyMismatch(format!(
                "{s}/{f} has no +{noise} result"
            )));
        }
    }
    let mut max_delta = BTreeMap::new();
    for c in &cells {
        let e = max_delta.entry(c.noise).or_insert(f64::NEG_INFINITY);
        *e = f64::max(*e, c.delta);
    }
    Ok(MitigationTable { cells, max_delta })
}

/// Masked over clean speech-recognition accuracy, capped at 1.
pub fn compute_spf(clean: f64, masked: f64, label: &str) -> Result<f64> {
    if clean <= 0.0 {
        return Err(Error::ZeroBaseline(label.to_string()));
    }
    Ok((masked / clean).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtmrPair {
    pub label: String,
    pub randomness: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rtmr {
    /// Spearman coefficient; `None` when either axis has no rank spread.
    pub coefficient: Option<f64>,
    pub pairs: Vec<RtmrPair>,
}

/// Ranks starting at 1, ties sharing their mean rank.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        idx[i..=j].iter().for_each(|&k| ranks[k] = r);
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (mid_ranks(x), mid_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn compute_rtmr(pairs: Vec<RtmrPair>) -> Result<Rtmr> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientPairs {
            got: pairs.len(),
            required: 3,
        });
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.randomness).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.delta).collect();
    Ok(Rtmr {
        coefficient: spearman(&x, &y),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(
            mid_ranks(&[10.0, 20.0, 20.0, 5.0]),
            vec![2.0, 3.5, 3.5, 1.0]
        );
    }

    #[test]
    fn spearman_of_constant_axis_is_undefined() {
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }
}
