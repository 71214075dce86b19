//! Inference attacks: CNN, RNN and CRNN classifiers over normalized
//! log-mel spectrograms, with multiclass (softmax) and multilabel
//! (independent sigmoid) heads.

mod result;
mod train;

pub use result::{score_predictions, AttackResult, TaskResult};
pub use train::{evaluate, train_attack, AttackTrainConfig, EpochRecord, TrainedAttack};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{LabeledClip, ScenarioSpec, TaskType};
use crate::error::{Error, Result};
use crate::features::{MelConfig, MelExtractor};
use crate::nn::loss::{sigmoid, sigmoid_binary_cross_entropy, softmax, softmax_cross_entropy};
use crate::nn::{Conv2d, Dense, Gru, MaxPool2d, Relu, Reshape, Sequential, Tensor, ToSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cnn,
    Rnn,
    Crnn,
}

impl Family {
    pub const ALL: [Family; 3] = [Self::Cnn, Self::Rnn, Self::Crnn];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Cnn => "cnn",
            Self::Rnn => "rnn",
            Self::Crnn => "crnn",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Self::Cnn),
            "rnn" => Ok(Self::Rnn),
            "crnn" => Ok(Self::Crnn),
            _ => Err(Error::Config(format!(
                "unknown model family {s:?} (expected cnn, rnn or crnn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    /// Output channels of each conv + pool block. The CNN uses all of
    /// them, the CRNN the first two.
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub pool: usize,
    /// Recurrent state width.
    pub hidden: usize,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            conv_channels: vec![8, 16, 16],
            kernel: 3,
            pool: 2,
            hidden: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModelSpec {
    pub family: Family,
    pub task_type: TaskType,
    /// Class count per task; exactly one task for multiclass.
    pub classes: Vec<usize>,
    pub layers: LayerConfig,
    pub seed: u64,
}

impl AttackModelSpec {
    pub fn new(family: Family, scenario: &ScenarioSpec, seed: u64) -> Self {
        Self {
            family,
            task_type: scenario.task_type,
            classes: scenario.tasks.iter().map(|t| t.classes.len()).collect(),
            layers: LayerConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.classes.iter().any(|&k| k < 2) {
            return Err(Error::Config("every task needs at least 2 classes".into()));
        }
        if self.task_type == TaskType::Multiclass && self.classes.len() != 1 {
            return Err(Error::Config(
                "multiclass models have exactly one task".into(),
            ));
        }
        let l = &self.layers;
        if l.kernel.is_multiple_of(2)
            || l.pool == 0
            || l.hidden == 0
            || l.conv_channels.contains(&0)
        {
            return Err(Error::Config(
                "odd kernel and positive pool, hidden and channel widths required".into(),
            ));
        }
        let needed = match self.family {
            Family::Cnn => 1,
            Family::Crnn => 2,
            Family::Rnn => 0,
        };
        if l.conv_channels.len() < needed {
            return Err(Error::Config(format!(
                "{} needs at least {needed} conv blocks",
                self.family
            )));
        }
        Ok(())
    }

    /// `(offset, width)` of each task's outputs. Binary multilabel tasks
    /// use one sigmoid; wider tasks one sigmoid per class.
    pub fn head_layout(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.classes
            .iter()
            .map(|&k| {
                let w = match self.task_type {
                    TaskType::Multiclass => k,
                    TaskType::Multilabel if k == 2 => 1,
                    TaskType::Multilabel => k,
                };
                let r = (off, w);
                off += w;
                r
            })
            .collect()
    }

    pub fn outputs(&self) -> usize {
        self.head_layout().iter().map(|&(_, w)| w).sum()
    }
}

/// Spectrogram dimensions `(frames, mel bands)`.
pub type InputShape = (usize, usize);

pub struct AttackModel {
    spec: AttackModelSpec,
    input_shape: InputShape,
    net: Sequential,
}

fn conv_blocks(
    net: &mut Sequential,
    channels: &[usize],
    l: &LayerConfig,
    rng: &mut ChaCha8Rng,
    (t, f): InputShape,
) -> Result<(usize, usize, usize)> {
    let (mut c, mut h, mut w) = (1, t, f);
    for &out in channels {
        net.push(Conv2d::new(c, out, l.kernel, rng));
        net.push(Relu::new());
        net.push(MaxPool2d::new(l.pool));
        (h, w) = MaxPool2d::output_dims(h, w, l.pool);
        c = out;
        if h == 0 || w == 0 {
            return Err(Error::Config(format!(
                "input {t}x{f} too small for {} pooling blocks",
                channels.len()
            )));
        }
    }
    Ok((c, h, w))
}

/// Builds an untrained model for `[B, 1, frames, bands]` inputs.
pub fn build(spec: &AttackModelSpec, input_shape: InputShape) -> Result<AttackModel> {
    spec.validate()?;
    let (t, f) = input_shape;
    if t == 0 || f == 0 {
        return Err(Error::Config("empty input shape".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = &spec.layers;
    let out = spec.outputs();
    let mut net = Sequential::new();
    match spec.family {
        Family::Cnn => {
            let (c, h, w) = conv_blocks(&mut net, &l.conv_channels, l, &mut rng, input_shape)?;
            net.push(Dense::new(c * h * w, out, &mut rng));
        }
        Family::Rnn => {
            net.push(Reshape::new(vec![t, f]));
            net.push(Gru::new(f, l.hidden, true, &mut rng));
            net.push(Gru::new(l.hidden, l.hidden, false, &mut rng));
            net.push(Dense::new(l.hidden, out, &mut rng));
        }
        Family::Crnn => {
            let (c, _, w) = conv_blocks(&mut net, &l.conv_channels[..2], l, &mut rng, input_shape)?;
            net.push(ToSequence::new());
            net.push(Gru::new(c * w, l.hidden, false, &mut rng));
            net.push(Dense::new(l.hidden, out, &mut rng));
        }
    }
    Ok(AttackModel {
        spec: spec.clone(),
        input_shape,
        net,
    })
}

impl AttackModel {
    pub fn spec(&self) -> &AttackModelSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> InputShape {
        self.input_shape
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential {
        &mut self.net
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Raw head outputs for `[B, 1, T, F]` input.
    pub fn logits(&self, x: &Tensor) -> Tensor {
        self.net.infer(x)
    }

    /// Per item: softmax probabilities (multiclass) or independent sigmoid
    /// probabilities (multilabel), in head order.
    pub fn probabilities(&self, x: &Tensor) -> Vec<Vec<f64>> {
        head_probabilities(&self.spec, &self.logits(x))
    }

    /// Predicted class index per task for each item.
    pub fn predict(&self, x: &Tensor) -> Vec<Vec<usize>> {
        decode(&self.spec, &self.probabilities(x))
    }
}

pub fn head_probabilities(spec: &AttackModelSpec, logits: &Tensor) -> Vec<Vec<f64>> {
    match spec.task_type {
        TaskType::Multiclass => softmax(logits),
        TaskType::Multilabel => logits
            .data
            .chunks_exact(logits.shape[1])
            .map(|row| row.iter().map(|&l| sigmoid(l)).collect())
            .collect(),
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Class per task: argmax within each task's outputs, or threshold 0.5
/// for single-sigmoid binary tasks.
pub fn decode(spec: &AttackModelSpec, probs: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let layout = spec.head_layout();
    probs
        .iter()
        .map(|p| {
            layout
                .iter()
                .map(|&(off, w)| {
                    if w == 1 {
                        usize::from(p[off] >= 0.5)
                    } else {
                        argmax(&p[off..off + w])
                    }
                })
                .collect()
        })
        .collect()
}

/// Head loss and its gradient with respect to the logits. `targets`
/// holds one class index per task for each item.
pub fn head_loss(spec: &AttackModelSpec, logits: &Tensor, targets: &[Vec<usize>]) -> (f64, Tensor) {
    match spec.task_type {
        TaskType::Multiclass => {
            let t: Vec<usize> = targets.iter().map(|t| t[0]).collect();
            softmax_cross_entropy(logits, &t)
        }
        TaskType::Multilabel => {
            let layout = spec.head_layout();
            let width = spec.outputs();
            let mut dense = vec![0.0; targets.len() * width];
            for (row, t) in dense.chunks_exact_mut(width).zip(targets) {
                for (&(off, w), &class) in layout.iter().zip(t) {
                    if w == 1 {
                        row[off] = class as f64;
                    } else {
                        row[off + class] = 1.0;
                    }
                }
            }
            sigmoid_binary_cross_entropy(logits, &dense)
        }
    }
}

/// Per-mel-band mean and standard deviation from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(features: &[Vec<f64>], bands: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Config("no training features".into()));
        }
        let mut sum = vec![0.0; bands];
        let mut sq = vec![0.0; bands];
        let mut n = 0usize;
        for f in features {
            for frame in f.chunks_exact(bands) {
                for (b, &v) in frame.iter().enumerate() {
                    sum[b] += v;
                    sq[b] += v * v;
                }
                n += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n as f64 - m * m).max(0.0).sqrt().max(1e-6))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, feature: &[f64]) -> Vec<f64> {
        let bands = self.mean.len();
        feature
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - self.mean[i % bands]) / self.std[i % bands])
            .collect()
    }
}

/// Log-mel inputs and encoded labels for a set of clips.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub ids: Vec<String>,
    /// Row-major `frames × bands` per clip.
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<usize>>,
    pub shape: InputShape,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Normalized `[B, 1, T, F]` batch of the given items.
    pub fn batch(&self, idx: &[usize], norm: &NormStats) -> Tensor {
        let (t, f) = self.shape;
        let mut data = Vec::with_capacity(idx.len() * t * f);
        for &i in idx {
            data.extend(norm.apply(&self.inputs[i]));
        }
        Tensor::new(vec![idx.len(), 1, t, f], data)
    }
}

pub fn featurize(
    clips: &[LabeledClip],
    scenario: &ScenarioSpec,
    mel: &MelConfig,
) -> Result<FeatureSet> {
    let Some(first) = clips.first() else {
        return Err(Error::Config("no clips to featurize".into()));
    };
    let extractor = MelExtractor::new(*mel, first.clip.sample_rate())?;
    let mut inputs = Vec::with_capacity(clips.len());
    let mut targets = Vec::with_capacity(clips.len());
    let mut shape = None;
    for c in clips {
        let m = extractor.extract(&c.clip)?;
        let s = (m.frames(), m.mel_bands());
        if *shape.get_or_insert(s) != s {
            return Err(Error::Config(format!(
                "clip {} has {}x{} features, expected {:?}",
                c.id, s.0, s.1, shape
            )));
        }
        inputs.push(m.values().to_vec());
        targets.push(scenario.encode(c)?);
    }
    Ok(FeatureSet {
        ids: clips.iter().map(|c| c.id.clone()).collect(),
        inputs,
        targets,
        shape: shape.unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{ScenarioName, TaskSpec};

    fn spec(family: Family, task_type: TaskType, classes: Vec<usize>) -> AttackModelSpec {
        AttackModelSpec {
            family,
            task_type,
            classes,
            layers: LayerConfig::default(),
            seed: 3,
        }
    }

    fn input(b: usize, t: usize, f: usize) -> Tensor {
        Tensor::new(
            vec![b, 1, t, f],
            (0..b * t * f)
                .map(|i| ((i * 7919) % 97) as f64 / 50.0 - 1.0)
                .collect(),
        )
    }

    #[test]
    fn multiclass_heads_sum_to_one() {
        for family in Family::ALL {
            let m = build(&spec(family, TaskType::Multiclass, vec![4]), (40, 16)).unwrap();
            for p in m.probabilities(&input(2, 40, 16)) {
                assert_eq!(p.len(), 4);
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn multilabel_binary_tasks_use_one_sigmoid_each() {
        let s = spec(Family::Cnn, TaskType::Multilabel, vec![2, 2, 2]);
        assert_eq!(s.outputs(), 3);
        let m = build(&s, (24, 16)).unwrap();
        let p = m.probabilities(&input(3, 24, 16));
        assert!(p
            .iter()
            .all(|row| row.len() == 3 && row.iter().all(|&v| v > 0.0 && v < 1.0)));
        let wide = spec(Family::Rnn, TaskType::Multilabel, vec![3, 2, 3]);
        assert_eq!(wide.head_layout(), vec![(0, 3), (3, 1), (4, 3)]);
    }

    #[test]
    fn default_shapes_build() {
        let cnn = build(&spec(Family::Cnn, TaskType::Multiclass, vec![4]), (198, 64)).unwrap();
        // 8*1*9+8, 16*8*9+16, 16*16*9+16, 3072*4+4
        assert_eq!(cnn.param_count(), 80 + 1168 + 2320 + 12292);
        let crnn = build(
            &spec(Family::Crnn, TaskType::Multiclass, vec![4]),
            (198, 64),
        )
        .unwrap();
        assert_eq!(
            crnn.param_count(),
            80 + 1168 + Gru::param_count(256, 32) + 132
        );
        let rnn = build(&spec(Family::Rnn, TaskType::Multiclass, vec![4]), (198, 64)).unwrap();
        assert_eq!(
            rnn.param_count(),
            Gru::param_count(64, 32) + Gru::param_count(32, 32) + 132
        );
        for m in [&cnn, &crnn, &rnn] {
            assert!(m.param_count() < 1_000_000);
        }
    }

    #[test]
    fn same_seed_same_initialization() {
        let s = spec(Family::Crnn, TaskType::Multiclass, vec![3]);
        let a = build(&s, (40, 16)).unwrap();
        let b = build(&s, (40, 16)).unwrap();
        assert_eq!(a.net().snapshot(), b.net().snapshot());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(build(&spec(Family::Cnn, TaskType::Multiclass, vec![1]), (40, 16)).is_err());
        assert!(build(
            &spec(Family::Cnn, TaskType::Multiclass, vec![2, 2]),
            (40, 16)
        )
        .is_err());
        assert!(build(&spec(Family::Cnn, TaskType::Multiclass, vec![2]), (4, 4)).is_err());
    }

    #[test]
    fn decode_thresholds_binary_and_argmaxes_wider_tasks() {
        let s = spec(Family::Cnn, TaskType::Multilabel, vec![2, 3]);
        let d = decode(&s, &[vec![0.7, 0.1, 0.8, 0.3], vec![0.2, 0.5, 0.1, 0.2]]);
        assert_eq!(d, vec![vec![1, 1], vec![0, 0]]);
    }

    #[test]
    fn multilabel_targets_encode_per_task() {
        let s = spec(Family::Cnn, TaskType::Multilabel, vec![2, 3]);
        let logits = Tensor::zeros(vec![1, 4]);
        let (loss, grad) = head_loss(&s, &logits, &[vec![1, 2]]);
        // four sigmoids at 0.5 -> 4 ln 2
        assert!((loss - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(grad.data, vec![-0.5, 0.5, 0.5, -0.5]);
    }

    #[test]
    fn norm_stats_standardize_each_band() {
        let feats = vec![vec![1.0, 10.0, 3.0, 30.0], vec![5.0, 50.0, 7.0, 70.0]];
        let n = NormStats::fit(&feats, 2).unwrap();
        assert_eq!(n.mean, vec![4.0, 40.0]);
        let z = n.apply(&feats[0]);
        assert!((z[0] + 3.0 / 5f64.sqrt()).abs() < 1e-12);
        let _ = ScenarioSpec::multilabel(ScenarioName::Udi, vec![TaskSpec::new("a", &["x", "y"])]);
    }
}
