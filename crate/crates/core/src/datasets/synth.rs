use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LabeledClip, ScenarioName, ScenarioSpec, TaskSpec};
use crate::audio::AudioClip;
use crate::error::{Error, Result};

fn mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

fn clip_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut s = seed ^ 0x5851_F42D_4C95_7F2D;
    for v in [a, b] {
        s = s
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(v.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    }
    ChaCha8Rng::seed_from_u64(s)
}

#[derive(Debug, Clone, Copy)]
enum Envelope {
    Flat,
    Decay,
    Rise,
    Tremolo,
}

impl Envelope {
    fn of(k: usize) -> Self {
        [Self::Flat, Self::Decay, Self::Rise, Self::Tremolo][k % 4]
    }

    fn gain(self, t: f64, dur: f64) -> f64 {
        let fade = (t / 0.02).min((dur - t) / 0.02).clamp(0.0, 1.0);
        let shape = match self {
            Self::Flat => 1.0,
            Self::Decay => (-t / 0.6).exp(),
            Self::Rise => 0.15 + 0.85 * (t / dur),
            Self::Tremolo => 1.0 - 0.8 * (0.5 + 0.5 * (2.0 * PI * 4.0 * t).sin()),
        };
        fade * shape
    }
}

/// Sum of partials `(frequency, amplitude, phase)` under an envelope.
fn render(partials: &[(f64, f64, f64)], env: Envelope, n: usize, rate: u32) -> Vec<f64> {
    let dur = n as f64 / rate as f64;
    let nyquist = 0.45 * rate as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let s: f64 = partials
                .iter()
                .filter(|p| p.0 < nyquist)
                .map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum();
            s * env.gain(t, dur)
        })
        .collect()
}

/// Scales to a seeded peak between -12 and -6 dBFS, adds low-passed
/// background noise at a seeded SNR between 5 and 30 dB and quantizes.
fn finish(mut x: Vec<f64>, rng: &mut ChaCha8Rng, rate: u32) -> Result<AudioClip> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::Config("synthesized silence".into()));
    }
    let target = 10f64.powf(rng.gen_range(-12.0..-6.0) / 20.0);
    x.iter_mut().for_each(|v| *v = *v / peak * target);
    let mut state = 0.0;
    let bg: Vec<f64> = (0..x.len())
        .map(|_| {
            state = 0.7 * state + rng.gen_range(-1.0..1.0);
            state
        })
        .collect();
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
    let gain = rms(&x) / rms(&bg) * 10f64.powf(-rng.gen_range(5.0..30.0) / 20.0);
    for (v, b) in x.iter_mut().zip(&bg) {
        *v += gain * b;
    }
    AudioClip::from_normalized(&x, rate)
}

/// Harmonic-stack corpus: class `k` has its own fundamental band and
/// amplitude envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub duration: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// Fundamental bands are mel-spaced between these frequencies.
    pub f_low: f64,
    pub f_high: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            per_class: 50,
            duration: 2.0,
            sample_rate: 16000,
            seed: 0,
            f_low: 200.0,
            f_high: 3200.0,
        }
    }
}

/// Relative spread of the fundamental within its class band.
const F0_JITTER: f64 = 0.04;

impl SynthSpec {
    pub fn class_name(k: usize) -> String {
        format!("c{k}")
    }

    /// Centre frequency of class `k`'s fundamental band.
    pub fn center(&self, k: usize) -> f64 {
        let (lo, hi) = (mel(self.f_low), mel(self.f_high));
        inv_mel(lo + (k as f64 + 0.5) / self.classes as f64 * (hi - lo))
    }

    /// Frequency range the fundamental of class `k` is drawn from.
    pub fn fundamental_band(&self, k: usize) -> (f64, f64) {
        let c = self.center(k);
        (c * (1.0 - F0_JITTER), c * (1.0 + F0_JITTER))
    }

    pub fn scenario(&self, name: ScenarioName) -> ScenarioSpec {
        let names: Vec<String> = (0..self.classes).map(Self::class_name).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut s = ScenarioSpec::multiclass(name, "class", &refs);
        s.clip_seconds = self.duration;
        s.sample_rate = self.sample_rate;
        s
    }
}

/// Deterministic labeled corpus, class-major order, each clip its own
/// source.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Vec<LabeledClip>> {
    if spec.classes < 2 {
        return Err(Error::Config(
            "synthetic corpus needs at least 2 classes".into(),
        ));
    }
    if spec.per_class == 0
        || !(spec.duration > 0.0)
        || spec.sample_rate == 0
        || !(spec.f_low > 0.0 && spec.f_high > spec.f_low)
    {
        return Err(Error::Config("invalid synthetic corpus spec".into()));
    }
    let n = (spec.duration * spec.sample_rate as f64).round() as usize;
    let mut out = Vec::with_capacity(spec.classes * spec.per_class);
    for k in 0..spec.classes {
        let (lo, hi) = spec.fundamental_band(k);
        for i in 0..spec.per_class {
            let mut rng = clip_rng(spec.seed, k as u64, i as u64);
            let f0 = rng.gen_range(lo..hi);
            let partials: Vec<(f64, f64, f64)> = (1..=4)
                .map(|h| {
                    (
                        f0 * h as f64,
                        0.25f64.powi(h - 1),
                        rng.gen_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            let x = render(&partials, Envelope::of(k), n, spec.sample_rate);
            let clip = finish(x, &mut rng, spec.sample_rate)?;
            let id = format!("synth-{}-{i:03}", SynthSpec::class_name(k));
            let class = SynthSpec::class_name(k);
            out.push(LabeledClip::new(id.clone(), id, clip, &[("class", &class)]));
        }
    }
    Ok(out)
}

/// Multi-attribute voice-like corpus: gender sets the pitch register, age
/// the amplitude envelope and accent a resonant partial cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSynthSpec {
    /// Clips per attribute combination.
    pub per_combination: usize,
    pub duration: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for MultiSynthSpec {
    fn default() -> Self {
        Self {
            per_combination: 12,
            duration: 2.0,
            sample_rate: 16000,
            seed: 0,
        }
    }
}

const GENDERS: [(&str, f64); 2] = [("female", 210.0), ("male", 120.0)];
const AGES: [(&str, Envelope); 3] = [
    ("young", Envelope::Flat),
    ("adult", Envelope::Decay),
    ("senior", Envelope::Tremolo),
];
const ACCENTS: [(&str, f64); 3] = [("north", 900.0), ("south", 1700.0), ("west", 3100.0)];

impl MultiSynthSpec {
    pub fn scenario(&self) -> ScenarioSpec {
        let mut s = ScenarioSpec::multilabel(
            ScenarioName::Udi,
            vec![
                TaskSpec::new("age", &AGES.map(|a| a.0)),
                TaskSpec::new("gender", &GENDERS.map(|g| g.0)),
                TaskSpec::new("accent", &ACCENTS.map(|a| a.0)),
            ],
        );
        s.clip_seconds = self.duration;
        s.sample_rate = self.sample_rate;
        s
    }
}

pub fn synth_multilabel(spec: &MultiSynthSpec) -> Result<Vec<LabeledClip>> {
    if spec.per_combination == 0 || !(spec.duration > 0.0) || spec.sample_rate == 0 {
        return Err(Error::Config("invalid multilabel corpus spec".into()));
    }
    let n = (spec.duration * spec.sample_rate as f64).round() as usize;
    let mut out = Vec::new();
    let mut combo = 0u64;
    for (gender, f_center) in GENDERS {
        for (age, env) in AGES {
            for (accent, formant) in ACCENTS {
                for i in 0..spec.per_combination {
                    let mut rng = clip_rng(spec.seed, combo, i as u64);
                    let f0 = f_center * rng.gen_range(0.95..1.05);
                    let mut partials: Vec<(f64, f64, f64)> = (1..=8)
                        .map(|h| {
                            (
                                f0 * h as f64,
                                0.6f64.powi(h - 1),
                                rng.gen_range(0.0..2.0 * PI),
                            )
                        })
                        .collect();
                    let fc = formant * rng.gen_range(0.97..1.03);
                    for ratio in [0.97, 1.0, 1.03] {
                        partials.push((fc * ratio, 0.3, rng.gen_range(0.0..2.0 * PI)));
                    }
                    let clip = finish(
                        render(&partials, env, n, spec.sample_rate),
                        &mut rng,
                        spec.sample_rate,
                    )?;
                    let id = format!("voice-{gender}-{age}-{accent}-{i:03}");
                    out.push(LabeledClip::new(
                        id.clone(),
                        id,
                        clip,
                        &[("age", age), ("gender", gender), ("accent", accent)],
                    ));
                }
                combo += 1;
            }
        }
    }
    Ok(out)
}

/// Spoken-command stand-in: each word is two voiced syllables with their
/// own vowel formants and pitch contour, spoken by several synthetic
/// speakers with their own pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandSynthSpec {
    pub words: usize,
    pub speakers: usize,
    /// Takes per (word, speaker).
    pub takes: usize,
    pub duration: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for CommandSynthSpec {
    fn default() -> Self {
        Self {
            words: 6,
            speakers: 12,
            takes: 3,
            duration: 2.0,
            sample_rate: 16000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Contour {
    Rise,
    Fall,
    Flat,
}

impl Contour {
    /// Pitch multiplier at fraction `u` through the syllable.
    fn at(self, u: f64) -> f64 {
        match self {
            Self::Rise => 1.0 + 0.25 * u,
            Self::Fall => 1.25 - 0.25 * u,
            Self::Flat => 1.1,
        }
    }
}

/// First and second formant frequencies (Hz).
type Vowel = (f64, f64);

const A: Vowel = (730.0, 1090.0);
const I: Vowel = (270.0, 2290.0);
const U: Vowel = (300.0, 870.0);
const E: Vowel = (530.0, 1840.0);
const O: Vowel = (570.0, 840.0);

const WORD_SYLLABLES: [((Vowel, Contour), (Vowel, Contour)); 10] = {
    use Contour::*;
    [
        ((E, Rise), (A, Fall)),
        ((O, Flat), (U, Fall)),
        ((U, Rise), (I, Flat)),
        ((A, Fall), (U, Fall)),
        ((E, Flat), (O, Rise)),
        ((A, Rise), (I, Fall)),
        ((O, Fall), (A, Flat)),
        ((I, Flat), (E, Fall)),
        ((U, Flat), (O, Rise)),
        ((I, Rise), (A, Rise)),
    ]
};

/// Formant envelope gain at `f`.
fn formant_gain(f: f64, (f1, f2): Vowel) -> f64 {
    let peak = |c: f64, bw: f64| (-0.5 * ((f - c) / bw).powi(2)).exp();
    0.03 + peak(f1, 120.0) + 0.7 * peak(f2, 180.0)
}

impl CommandSynthSpec {
    pub fn word_names(&self) -> Vec<String> {
        super::ScenarioSpec::speech_commands().tasks[0].classes[..self.words].to_vec()
    }

    pub fn scenario(&self) -> ScenarioSpec {
        let names = self.word_names();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut s = ScenarioSpec::multiclass(ScenarioName::Spf, "word", &refs);
        s.clip_seconds = self.duration;
        s.sample_rate = self.sample_rate;
        s
    }
}

fn syllable(
    out: &mut [f64],
    start: usize,
    len: usize,
    base: f64,
    (vowel, contour): (Vowel, Contour),
    rate: u32,
    phases: &[f64],
) {
    let mut phase = vec![0.0; phases.len()];
    for i in 0..len.min(out.len().saturating_sub(start)) {
        let u = i as f64 / len as f64;
        let f = base * contour.at(u);
        let env = (PI * u).sin().powf(0.5);
        let mut s = 0.0;
        for (h, ph) in phase.iter_mut().enumerate() {
            let fh = f * (h + 1) as f64;
            *ph += 2.0 * PI * fh / rate as f64;
            if fh < 4000.0f64.min(0.45 * rate as f64) {
                s += formant_gain(fh, vowel) * (*ph + phases[h]).sin();
            }
        }
        out[start + i] += env * s;
    }
}

pub fn synth_commands(spec: &CommandSynthSpec) -> Result<Vec<LabeledClip>> {
    if spec.words < 2 || spec.words > WORD_SYLLABLES.len() {
        return Err(Error::Config(format!(
            "words must be in 2..={}",
            WORD_SYLLABLES.len()
        )));
    }
    if spec.speakers == 0 || spec.takes == 0 || !(spec.duration >= 1.2) || spec.sample_rate == 0 {
        return Err(Error::Config(
            "invalid command corpus spec (duration must be at least 1.2 s)".into(),
        ));
    }
    let n = (spec.duration * spec.sample_rate as f64).round() as usize;
    let rate = spec.sample_rate as f64;
    let syl = (0.35 * rate) as usize;
    let gap = (0.15 * rate) as usize;
    let names = spec.word_names();
    let mut out = Vec::new();
    for (w, word) in names.iter().enumerate() {
        let (s1, s2) = WORD_SYLLABLES[w];
        for s in 0..spec.speakers {
            // speaker registers spread over 100-300 Hz
            let base = 100.0 * 3f64.powf(s as f64 / spec.speakers.max(2) as f64);
            for take in 0..spec.takes {
                let mut rng = clip_rng(spec.seed, (w * 1000 + s) as u64, take as u64);
                let f = base * rng.gen_range(0.97..1.03);
                let latest = n.saturating_sub(2 * syl + gap + (0.1 * rate) as usize);
                let onset =
                    rng.gen_range((0.1 * rate) as usize..latest.max((0.1 * rate) as usize + 1));
                let phases: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
                let mut x = vec![0.0; n];
                syllable(&mut x, onset, syl, f, s1, spec.sample_rate, &phases);
                syllable(
                    &mut x,
                    onset + syl + gap,
                    syl,
                    f,
                    s2,
                    spec.sample_rate,
                    &phases,
                );
                let clip = finish(x, &mut rng, spec.sample_rate)?;
                out.push(LabeledClip::new(
                    format!("cmd-{word}-s{s:02}-{take}"),
                    format!("speaker{s:02}"),
                    clip,
                    &[("word", word)],
                ));
            }
        }
    }
    Ok(out)
}
