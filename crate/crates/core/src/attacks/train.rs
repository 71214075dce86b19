use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::result::{score_predictions, AttackResult};
use super::{
    build, decode, head_loss, head_probabilities, AttackModel, AttackModelSpec, FeatureSet,
    InputShape, NormStats,
};
use crate::datasets::ScenarioSpec;
use crate::error::{Error, Result};
use crate::nn::checkpoint::Container;
use crate::nn::optim::Adam;

const KIND: &str = "attack";
const EVAL_BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for AttackTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            lr: 1e-3,
            patience: 5,
            seed: 0,
        }
    }
}

impl AttackTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config(
                "epochs, batch size and patience must be positive".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("invalid learning rate {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// A trained model restored to its best validation epoch, with the
/// normalization it was trained under.
pub struct TrainedAttack {
    pub scenario: ScenarioSpec,
    pub model: AttackModel,
    pub norm: NormStats,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose weights are kept.
    pub best_epoch: usize,
}

fn check_set(set: &FeatureSet, shape: InputShape, what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Config(format!("{what} split is empty")));
    }
    if set.shape != shape {
        return Err(Error::Config(format!(
            "{what} features are {:?}, model expects {shape:?}",
            set.shape
        )));
    }
    Ok(())
}

/// Mean loss and decoded predictions over a whole set.
fn assess(model: &AttackModel, norm: &NormStats, set: &FeatureSet) -> (f64, Vec<Vec<usize>>) {
    let mut loss = 0.0;
    let mut predicted = Vec::with_capacity(set.len());
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let x = set.batch(chunk, norm);
        let logits = model.logits(&x);
        let targets: Vec<Vec<usize>> = chunk.iter().map(|&i| set.targets[i].clone()).collect();
        loss += head_loss(model.spec(), &logits, &targets).0 * chunk.len() as f64;
        predicted.extend(decode(
            model.spec(),
            &head_probabilities(model.spec(), &logits),
        ));
    }
    (loss / set.len() as f64, predicted)
}

fn accuracy(predicted: &[Vec<usize>], targets: &[Vec<usize>]) -> f64 {
    let tasks = targets[0].len();
    let hits: usize = predicted
        .iter()
        .zip(targets)
        .map(|(p, t)| p.iter().zip(t).filter(|(a, b)| a == b).count())
        .sum();
    hits as f64 / (targets.len() * tasks) as f64
}

/// Minibatch Adam on the training split with early stopping on
/// validation accuracy; the best validation epoch is restored.
pub fn train_attack(
    scenario: &ScenarioSpec,
    spec: &AttackModelSpec,
    train: &FeatureSet,
    val: &FeatureSet,
    tc: &AttackTrainConfig,
) -> Result<TrainedAttack> {
    tc.validate()?;
    let mut model = build(spec, train.shape)?;
    check_set(train, train.shape, "training")?;
    check_set(val, train.shape, "validation")?;
    let norm = NormStats::fit(&train.inputs, train.shape.1)?;
    let mut opt = Adam::new(tc.lr, 0.9, 0.999);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    let mut step = 0;

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(tc.batch_size) {
            step += 1;
            let x = train.batch(chunk, &norm);
            let targets: Vec<Vec<usize>> =
                chunk.iter().map(|&i| train.targets[i].clone()).collect();
            let net = model.net_mut();
            net.zero_grad();
            let logits = net.forward(&x);
            let (loss, grad) = head_loss(spec, &logits, &targets);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    step,
                    what: format!("{} training loss", spec.family),
                });
            }
            net.backward(&grad, true);
            opt.update(net.params_mut());
            if !net.params_finite() {
                return Err(Error::Divergence {
                    step,
                    what: format!("{} parameters", spec.family),
                });
            }
            total += loss * chunk.len() as f64;
        }
        let (val_loss, predicted) = assess(&model, &norm, val);
        let record = EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_loss,
            val_accuracy: accuracy(&predicted, &val.targets),
        };
        log::debug!(
            "{} epoch {epoch}: train loss {:.4}, val loss {:.4}, val acc {:.3}",
            spec.family,
            record.train_loss,
            record.val_loss,
            record.val_accuracy
        );
        let improved = best
            .as_ref()
            .is_none_or(|(b, _, _)| record.val_accuracy > *b);
        if improved {
            best = Some((record.val_accuracy, epoch, model.net().snapshot()));
        }
        history.push(record);
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if epoch - best_epoch >= tc.patience {
            break;
        }
    }

    let (_, best_epoch, weights) = best.expect("at least one epoch ran");
    model.net_mut().restore(&weights)?;
    Ok(TrainedAttack {
        scenario: scenario.clone(),
        model,
        norm,
        history,
        best_epoch,
    })
}

/// Test-split accuracy and confusion under a named condition.
pub fn evaluate(
    attack: &TrainedAttack,
    test: &FeatureSet,
    condition: &str,
) -> Result<AttackResult> {
    check_set(test, attack.model.input_shape(), "test")?;
    let (_, predicted) = assess(&attack.model, &attack.norm, test);
    score_predictions(&attack.scenario, condition, &predicted, &test.targets)
}

#[derive(Serialize, Deserialize)]
struct Meta {
    kind: String,
    scenario: ScenarioSpec,
    spec: AttackModelSpec,
    input_shape: InputShape,
    norm: NormStats,
    history: Vec<EpochRecord>,
    best_epoch: usize,
}

impl TrainedAttack {
    pub fn predict(&self, set: &FeatureSet) -> Vec<Vec<usize>> {
        assess(&self.model, &self.norm, set).1
    }

    pub fn to_container(&self) -> Result<Container> {
        let meta = Meta {
            kind: KIND.to_string(),
            scenario: self.scenario.clone(),
            spec: self.model.spec().clone(),
            input_shape: self.model.input_shape(),
            norm: self.norm.clone(),
            history: self.history.clone(),
            best_epoch: self.best_epoch,
        };
        let mut c = Container::new(serde_json::to_value(meta)?);
        for (name, p) in self.model.net().named_params() {
            c.push(name, p.shape.clone(), p.value.clone());
        }
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let meta: Meta = serde_json::from_value(c.meta.clone())?;
        if meta.kind != KIND {
            return Err(Error::Checkpoint(format!(
                "expected an {KIND} checkpoint, found {}",
                meta.kind
            )));
        }
        let mut model = build(&meta.spec, meta.input_shape)?;
        let expected: Vec<(String, Vec<usize>)> = model
            .net()
            .named_params()
            .into_iter()
            .map(|(n, p)| (n, p.shape.clone()))
            .collect();
        let matches = expected.len() == c.arrays.len()
            && expected
                .iter()
                .zip(&c.arrays)
                .all(|((n, s), a)| *n == a.name && *s == a.shape);
        if !matches {
            return Err(Error::Checkpoint(
                "stored arrays do not match the model layout".into(),
            ));
        }
        let values: Vec<Vec<f64>> = c.arrays.iter().map(|a| a.values.clone()).collect();
        model.net_mut().restore(&values)?;
        Ok(Self {
            scenario: meta.scenario,
            model,
            norm: meta.norm,
            history: meta.history,
            best_epoch: meta.best_epoch,
        })
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        self.to_container()?.write(w)
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        Self::from_container(&Container::read(r)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
