//! Runs tests for randomness over PCM sample sequences.
//!
//! Both tests report a two-sided p-value and use it as a 0–1 randomness
//! score: values near 1 are consistent with an i.i.d. sequence, values near
//! 0 indicate structure (long runs or a trend).

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Usable observations required by the runs test's normal approximation.
pub const MIN_RUNS_OBSERVATIONS: usize = 30;
/// Untied pairs required by the sign test.
pub const MIN_SIGN_PAIRS: usize = 30;
/// Per-clip cap on the number of values fed to the tests.
pub const DEFAULT_MAX_VALUES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunsTestResult {
    pub n: usize,
    /// Observations above the median.
    pub n1: usize,
    /// Observations below the median.
    pub n2: usize,
    pub runs: usize,
    pub expected_runs: f64,
    pub variance_runs: f64,
    /// `(R - E(R)) / sqrt(V(R))`.
    pub z: f64,
    /// `(R - E(R)) / V(R)`, the unnormalized ratio; diagnostic only.
    pub z_unscaled: f64,
    pub p_value: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxStuartResult {
    /// Untied pairs.
    pub m: usize,
    /// `floor(n / 2)`, the number of pairs formed.
    pub c: usize,
    pub s_plus: usize,
    pub p_value: f64,
    pub score: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn check_finite(sequence: &[f64]) -> Result<()> {
    if sequence.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSequence("non-finite value".into()));
    }
    Ok(())
}

/// Wald–Wolfowitz runs test about the median.
pub fn wald_wolfowitz(sequence: &[f64]) -> Result<RunsTestResult> {
    wald_wolfowitz_with_min(sequence, MIN_RUNS_OBSERVATIONS)
}

/// [`wald_wolfowitz`] with an explicit minimum of usable observations.
pub fn wald_wolfowitz_with_min(sequence: &[f64], min_usable: usize) -> Result<RunsTestResult> {
    check_finite(sequence)?;
    let n = sequence.len();
    if n == 0 {
        return Err(Error::InsufficientSamples {
            usable: 0,
            required: min_usable,
        });
    }
    if sequence.iter().all(|&v| v == sequence[0]) {
        return Err(Error::DegenerateSequence("all values equal".into()));
    }
    let med = median(sequence);
    let signs: Vec<bool> = sequence
        .iter()
        .filter(|&&v| v != med)
        .map(|&v| v > med)
        .collect();
    let n1 = signs.iter().filter(|&&s| s).count();
    let n2 = signs.len() - n1;
    if n1 == 0 || n2 == 0 {
        return Err(Error::DegenerateSequence(
            "no values on one side of the median".into(),
        ));
    }
    let usable = n1 + n2;
    if usable < min_usable {
        return Err(Error::InsufficientSamples {
            usable,
            required: min_usable,
        });
    }
    let runs = 1 + signs.windows(2).filter(|w| w[0] != w[1]).count();
    let (a, b, np) = (n1 as f64, n2 as f64, usable as f64);
    let expected_runs = 2.0 * a * b / np + 1.0;
    let variance_runs = 2.0 * a * b * (2.0 * a * b - np) / (np * np * (np - 1.0));
    if variance_runs <= 0.0 {
        return Err(Error::DegenerateSequence("zero run-count variance".into()));
    }
    let diff = runs as f64 - expected_runs;
    let z = diff / variance_runs.sqrt();
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(RunsTestResult {
        n,
        n1,
        n2,
        runs,
        expected_runs,
        variance_runs,
        z,
        z_unscaled: diff / variance_runs,
        p_value,
        score: p_value,
    })
}

/// `P(S >= s)` for `S ~ Binomial(m, 1/2)`.
fn binomial_upper_tail(m: usize, s: usize) -> f64 {
    if s == 0 {
        return 1.0;
    }
    if s > m {
        return 0.0;
    }
    let ln_half_m = m as f64 * std::f64::consts::LN_2;
    // ln C(m, k) advanced by the term ratio (m - k) / (k + 1)
    let mut ln_term = ln_binomial(m as u64, s as u64) - ln_half_m;
    let mut total = 0.0;
    for k in s..=m {
        let t = ln_term.exp();
        total += t;
        if t < total * 1e-18 && k > m / 2 {
            break;
        }
        if k < m {
            ln_term += ((m - k) as f64).ln() - ((k + 1) as f64).ln();
        }
    }
    total.min(1.0)
}

/// Two-sided exact sign-test p-value: `2 * min(P(S <= s), P(S >= s))`,
/// capped at 1.
pub fn sign_test_p_value(m: usize, s_plus: usize) -> f64 {
    let upper = binomial_upper_tail(m, s_plus);
    // symmetry: P(S <= s) = P(S >= m - s)
    let lower = binomial_upper_tail(m, m - s_plus);
    (2.0 * upper.min(lower)).min(1.0)
}

/// Cox–Stuart sign test for trend.
pub fn cox_stuart(sequence: &[f64]) -> Result<CoxStuartResult> {
    cox_stuart_with_min(sequence, MIN_SIGN_PAIRS)
}

/// [`cox_stuart`] with an explicit minimum number of untied pairs.
///
/// The first `floor(n/2)` values are paired with the last `floor(n/2)`; for
/// odd `n` the middle value takes no part. The sign of each pair is
/// `sign(later - earlier)` and ties are dropped.
pub fn cox_stuart_with_min(sequence: &[f64], min_pairs: usize) -> Result<CoxStuartResult> {
    check_finite(sequence)?;
    let n = sequence.len();
    let c = n / 2;
    let offset = n - c;
    let mut m = 0;
    let mut s_plus = 0;
    for i in 0..c {
        let d = sequence[i + offset] - sequence[i];
        if d != 0.0 {
            m += 1;
            if d > 0.0 {
                s_plus += 1;
            }
        }
    }
    if m == 0 {
        return Err(Error::DegenerateSequence("all pairs tied".into()));
    }
    if m < min_pairs {
        return Err(Error::InsufficientSamples {
            usable: m,
            required: min_pairs,
        });
    }
    let p_value = sign_test_p_value(m, s_plus);
    Ok(CoxStuartResult {
        m,
        c,
        s_plus,
        p_value,
        score: p_value,
    })
}

/// PCM integers as reals, uniformly strided down to at most `max_values`.
pub fn clip_sequence(clip: &AudioClip, max_values: usize) -> Vec<f64> {
    let stride = clip.len().div_ceil(max_values.max(1)).max(1);
    clip.samples()
        .iter()
        .step_by(stride)
        .map(|&s| s as f64)
        .collect()
}

/// Both tests on one clip.
pub fn score_clip(
    clip: &AudioClip,
    max_values: usize,
) -> Result<(RunsTestResult, CoxStuartResult)> {
    let seq = clip_sequence(clip, max_values);
    Ok((wald_wolfowitz(&seq)?, cox_stuart(&seq)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRandomness {
    pub id: String,
    pub wald_wolfowitz: RunsTestResult,
    pub cox_stuart: CoxStuartResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedClip {
    pub id: String,
    pub reason: String,
}

/// Per-clip results and dataset means for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomnessReport {
    pub condition: String,
    pub clip_count: usize,
    pub clips: Vec<ClipRandomness>,
    pub skipped: Vec<SkippedClip>,
    pub mean_wald_wolfowitz: f64,
    pub mean_cox_stuart: f64,
}

impl RandomnessReport {
    /// Average of the two tests' dataset means.
    pub fn combined_score(&self) -> f64 {
        (self.mean_wald_wolfowitz + self.mean_cox_stuart) / 2.0
    }
}

/// Scores every clip, separating scorable clips from those either test
/// rejects as degenerate or too short.
pub fn score_each<'a>(
    clips: impl IntoIterator<Item = (String, &'a AudioClip)>,
    max_values: usize,
) -> (Vec<ClipRandomness>, Vec<SkippedClip>) {
    let mut scored = Vec::new();
    let mut skipped = Vec::new();
    for (id, clip) in clips {
        match score_clip(clip, max_values) {
            Ok((ww, cs)) => scored.push(ClipRandomness {
                id,
                wald_wolfowitz: ww,
                cox_stuart: cs,
            }),
            Err(e) => skipped.push(SkippedClip {
                id,
                reason: e.to_string(),
            }),
        }
    }
    (scored, skipped)
}

/// Dataset means of both scores; clips failing either test are excluded and
/// listed under `skipped`.
pub fn score_dataset<'a>(
    clips: impl IntoIterator<Item = (String, &'a AudioClip)>,
    condition: &str,
) -> Result<RandomnessReport> {
    let (scored, skipped) = score_each(clips, DEFAULT_MAX_VALUES);
    report_from(scored, skipped, condition)
}

pub fn report_from(
    scored: Vec<ClipRandomness>,
    skipped: Vec<SkippedClip>,
    condition: &str,
) -> Result<RandomnessReport> {
    if scored.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = scored.len() as f64;
    let mean_ww = scored.iter().map(|c| c.wald_wolfowitz.score).sum::<f64>() / k;
    let mean_cs = scored.iter().map(|c| c.cox_stuart.score).sum::<f64>() / k;
    Ok(RandomnessReport {
        condition: condition.to_string(),
        clip_count: scored.len() + skipped.len(),
        clips: scored,
        skipped,
        mean_wald_wolfowitz: mean_ww,
        mean_cox_stuart: mean_cs,
    })
}
