use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Discriminator, GanConfig, Generator, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{Container, NamedArray};
use crate::nn::optim::Adam;
use crate::nn::Sequential;

const KIND: &str = "maskgan";

/// Generator and discriminator weights with optimizer state and the
/// configuration they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GanCheckpoint {
    pub config: GanConfig,
    pub train: Option<TrainConfig>,
    /// Training steps completed when the snapshot was taken.
    pub step: usize,
    pub flatness: Option<f64>,
    pub generator: Vec<NamedArray>,
    pub discriminator: Vec<NamedArray>,
    pub adam_g: Adam,
    pub adam_d: Adam,
}

#[derive(Serialize, Deserialize)]
struct AdamMeta {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    kind: String,
    config: GanConfig,
    train: Option<TrainConfig>,
    step: usize,
    flatness: Option<f64>,
    adam_g: AdamMeta,
    adam_d: AdamMeta,
}

fn arrays(net: &Sequential) -> Vec<NamedArray> {
    net.named_params()
        .into_iter()
        .map(|(name, p)| NamedArray {
            name,
            shape: p.shape.clone(),
            values: p.value.clone(),
        })
        .collect()
}

fn load_into(net: &mut Sequential, stored: &[NamedArray], what: &str) -> Result<()> {
    let expected: Vec<(String, Vec<usize>)> = net
        .named_params()
        .into_iter()
        .map(|(n, p)| (n, p.shape.clone()))
        .collect();
    if expected.len() != stored.len() {
        return Err(Error::Checkpoint(format!(
            "{what}: expected {} arrays, found {}",
            expected.len(),
            stored.len()
        )));
    }
    for ((name, shape), a) in expected.iter().zip(stored) {
        if name != &a.name || shape != &a.shape {
            return Err(Error::Checkpoint(format!(
                "{what}: array {} {:?} does not match layer {} {:?}",
                a.name, a.shape, name, shape
            )));
        }
    }
    let values: Vec<Vec<f64>> = stored.iter().map(|a| a.values.clone()).collect();
    net.restore(&values)
}

fn adam_meta(a: &Adam) -> AdamMeta {
    AdamMeta {
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        eps: a.eps,
        step: a.step,
    }
}

fn push_adam(c: &mut Container, prefix: &str, a: &Adam) {
    for (i, (m, v)) in a.m.iter().zip(&a.v).enumerate() {
        c.push(format!("{prefix}/m/{i}"), vec![m.len()], m.clone());
        c.push(format!("{prefix}/v/{i}"), vec![v.len()], v.clone());
    }
}

fn read_adam(c: &Container, prefix: &str, meta: AdamMeta) -> Adam {
    let m_prefix = format!("{prefix}/m/");
    let v_prefix = format!("{prefix}/v/");
    Adam {
        lr: meta.lr,
        beta1: meta.beta1,
        beta2: meta.beta2,
        eps: meta.eps,
        step: meta.step,
        m: c.with_prefix(&m_prefix).map(|a| a.values.clone()).collect(),
        v: c.with_prefix(&v_prefix).map(|a| a.values.clone()).collect(),
    }
}

fn strip(c: &Container, prefix: &str) -> Vec<NamedArray> {
    c.with_prefix(prefix)
        .map(|a| NamedArray {
            name: a.name[prefix.len()..].to_string(),
            shape: a.shape.clone(),
            values: a.values.clone(),
        })
        .collect()
}

impl GanCheckpoint {
    pub fn from_parts(
        g: &Generator,
        d: &Discriminator,
        train: Option<TrainConfig>,
        step: usize,
        adam_g: &Adam,
        adam_d: &Adam,
        flatness: Option<f64>,
    ) -> Self {
        Self {
            config: g.config().clone(),
            train,
            step,
            flatness,
            generator: arrays(g.net()),
            discriminator: arrays(d.net()),
            adam_g: adam_g.clone(),
            adam_d: adam_d.clone(),
        }
    }

    /// Freshly initialized networks, no training.
    pub fn initial(config: &GanConfig, train: &TrainConfig) -> Result<Self> {
        let g = Generator::new(config, super::train::derive_seed(train.seed, 1))?;
        let d = Discriminator::new(config, super::train::derive_seed(train.seed, 2))?;
        let opt_g = Adam::new(train.lr_g, train.beta1, train.beta2);
        let opt_d = Adam::new(train.lr_d, train.beta1, train.beta2);
        Ok(Self::from_parts(
            &g,
            &d,
            Some(train.clone()),
            0,
            &opt_g,
            &opt_d,
            None,
        ))
    }

    pub fn generator(&self) -> Result<Generator> {
        let mut g = Generator::new(&self.config, 0)?;
        load_into(g.net_mut(), &self.generator, "generator")?;
        Ok(g)
    }

    pub fn discriminator(&self) -> Result<Discriminator> {
        let mut d = Discriminator::new(&self.config, 0)?;
        load_into(d.net_mut(), &self.discriminator, "discriminator")?;
        Ok(d)
    }

    pub fn params_finite(&self) -> bool {
        self.generator
            .iter()
            .chain(&self.discriminator)
            .all(|a| a.values.iter().all(|v| v.is_finite()))
    }

    pub fn to_container(&self) -> Result<Container> {
        let meta = Meta {
            kind: KIND.to_string(),
            config: self.config.clone(),
            train: self.train.clone(),
            step: self.step,
            flatness: self.flatness,
            adam_g: adam_meta(&self.adam_g),
            adam_d: adam_meta(&self.adam_d),
        };
        let mut c = Container::new(serde_json::to_value(meta)?);
        for a in &self.generator {
            c.push(
                format!("generator/{}", a.name),
                a.shape.clone(),
                a.values.clone(),
            );
        }
        for a in &self.discriminator {
            c.push(
                format!("discriminator/{}", a.name),
                a.shape.clone(),
                a.values.clone(),
            );
        }
        push_adam(&mut c, "adam_g", &self.adam_g);
        push_adam(&mut c, "adam_d", &self.adam_d);
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let meta: Meta = serde_json::from_value(c.meta.clone())?;
        if meta.kind != KIND {
            return Err(Error::Checkpoint(format!(
                "expected a {KIND} checkpoint, found {}",
                meta.kind
            )));
        }
        meta.config.validate()?;
        let ck = Self {
            config: meta.config,
            train: meta.train,
            step: meta.step,
            flatness: meta.flatness,
            generator: strip(c, "generator/"),
            discriminator: strip(c, "discriminator/"),
            adam_g: read_adam(c, "adam_g", meta.adam_g),
            adam_d: read_adam(c, "adam_d", meta.adam_d),
        };
        // shape checks against the declared architecture
        ck.generator()?;
        ck.discriminator()?;
        Ok(ck)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        self.to_container()?.write(w)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(self.to_container()?.to_bytes())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        Self::from_container(&Container::read(r)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
