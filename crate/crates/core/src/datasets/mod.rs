//! Labeled clips for the inference scenarios: corpus adapters, hermetic
//! synthetic corpora and grouped, stratified splitting.

mod ingest;
mod split;
mod synth;

pub use ingest::{ingest, IngestResult, SkippedItem};
pub use split::{k_folds, split, Splits};
pub use synth::{
    synth_commands, synth_corpus, synth_multilabel, CommandSynthSpec, MultiSynthSpec, SynthSpec,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScenarioName {
    /// Music genre inference.
    Mgi,
    /// User demographic inference.
    Udi,
    /// Speech emotion inference.
    Sei,
    /// Speech content recognition, used for semantic preservation.
    Spf,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [Self::Mgi, Self::Udi, Self::Sei, Self::Spf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mgi => "MGI",
            Self::Udi => "UDI",
            Self::Sei => "SEI",
            Self::Spf => "SPF",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MGI" => Ok(Self::Mgi),
            "UDI" => Ok(Self::Udi),
            "SEI" => Ok(Self::Sei),
            "SPF" => Ok(Self::Spf),
            _ => Err(Error::Config(format!(
                "unknown scenario {s:?} (expected MGI, UDI, SEI or SPF)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Multiclass,
    Multilabel,
}

/// One labeled attribute and its class inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub classes: Vec<String>,
}

impl TaskSpec {
    pub fn new(name: &str, classes: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            classes: classes.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn class_index(&self, value: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::Config("split ratios must be positive".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split ratios must sum to 1".into()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub task_type: TaskType,
    /// One task for multiclass scenarios, one per attribute for multilabel.
    pub tasks: Vec<TaskSpec>,
    pub split: SplitRatios,
    pub clip_seconds: f64,
    pub sample_rate: u32,
}

impl ScenarioSpec {
    pub fn multiclass(name: ScenarioName, task: &str, classes: &[&str]) -> Self {
        Self {
            name,
            task_type: TaskType::Multiclass,
            tasks: vec![TaskSpec::new(task, classes)],
            split: SplitRatios::default(),
            clip_seconds: 2.0,
            sample_rate: 16000,
        }
    }

    pub fn multilabel(name: ScenarioName, tasks: Vec<TaskSpec>) -> Self {
        Self {
            name,
            task_type: TaskType::Multilabel,
            tasks,
            split: SplitRatios::default(),
            clip_seconds: 2.0,
            sample_rate: 16000,
        }
    }

    /// Top-level genres of the small FMA subset.
    pub fn fma() -> Self {
        Self::multiclass(
            ScenarioName::Mgi,
            "genre",
            &[
                "Electronic",
                "Experimental",
                "Folk",
                "Hip-Hop",
                "Instrumental",
                "International",
                "Pop",
                "Rock",
            ],
        )
    }

    /// Common Voice demographic fields.
    pub fn common_voice() -> Self {
        Self::multilabel(
            ScenarioName::Udi,
            vec![
                TaskSpec::new(
                    "age",
                    &[
                        "teens",
                        "twenties",
                        "thirties",
                        "fourties",
                        "fifties",
                        "sixties",
                        "seventies",
                        "eighties",
                        "nineties",
                    ],
                ),
                TaskSpec::new("gender", &["male", "female", "other"]),
                TaskSpec::new(
                    "accent",
                    &[
                        "us",
                        "england",
                        "indian",
                        "australia",
                        "canada",
                        "scotland",
                        "african",
                        "newzealand",
                        "ireland",
                        "philippines",
                        "wales",
                        "bermuda",
                        "malaysia",
                        "singapore",
                        "hongkong",
                        "southatlandtic",
                    ],
                ),
            ],
        )
    }

    /// The seven non-neutral RAVDESS emotions.
    pub fn ravdess() -> Self {
        Self::multiclass(
            ScenarioName::Sei,
            "emotion",
            &[
                "calm",
                "happy",
                "sad",
                "angry",
                "fearful",
                "disgust",
                "surprised",
            ],
        )
    }

    /// The ten core speech-command words.
    pub fn speech_commands() -> Self {
        Self::multiclass(
            ScenarioName::Spf,
            "word",
            &[
                "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go",
            ],
        )
    }

    pub fn preset(name: ScenarioName) -> Self {
        match name {
            ScenarioName::Mgi => Self::fma(),
            ScenarioName::Udi => Self::common_voice(),
            ScenarioName::Sei => Self::ravdess(),
            ScenarioName::Spf => Self::speech_commands(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Config(format!("{}: no tasks", self.name)));
        }
        if self.task_type == TaskType::Multiclass && self.tasks.len() != 1 {
            return Err(Error::Config(format!(
                "{}: multiclass scenarios have exactly one task",
                self.name
            )));
        }
        for t in &self.tasks {
            if t.classes.len() < 2 {
                return Err(Error::Config(format!(
                    "{}: task {} needs at least 2 classes",
                    self.name, t.name
                )));
            }
        }
        if !(self.clip_seconds.is_finite() && self.clip_seconds > 0.0) || self.sample_rate == 0 {
            return Err(Error::Config(
                "clip duration and rate must be positive".into(),
            ));
        }
        self.split.validate()
    }

    pub fn task(&self, name: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn clip_len(&self) -> usize {
        (self.clip_seconds * self.sample_rate as f64).round() as usize
    }

    /// Class index per task, in task order.
    pub fn encode(&self, clip: &LabeledClip) -> Result<Vec<usize>> {
        self.tasks
            .iter()
            .map(|t| {
                let value = clip.labels.get(&t.name).ok_or_else(|| {
                    Error::Config(format!("clip {} has no {} label", clip.id, t.name))
                })?;
                t.class_index(value).ok_or_else(|| {
                    Error::Config(format!(
                        "clip {}: {value:?} is not a {} class",
                        clip.id, t.name
                    ))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledClip {
    pub id: String,
    /// Recording the clip came from; clips sharing a source never straddle
    /// splits.
    pub source: String,
    pub clip: AudioClip,
    /// Task name to class value.
    pub labels: BTreeMap<String, String>,
}

impl LabeledClip {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        clip: AudioClip,
        labels: &[(&str, &str)],
    ) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            clip,
            labels: labels
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Canonical `task=value` list, used as the stratum key.
    pub fn label_key(&self) -> String {
        self.labels
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Same labels, different audio (for example after noise mixing).
    pub fn with_clip(&self, clip: AudioClip) -> Self {
        Self {
            id: self.id.clone(),
            source: self.source.clone(),
            clip,
            labels: self.labels.clone(),
        }
    }
}

/// Per-class counts for one task.
pub fn class_counts(clips: &[LabeledClip], task: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for c in clips {
        if let Some(v) = c.labels.get(task) {
            *counts.entry(v.clone()).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_parse() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        assert_eq!("sei".parse::<ScenarioName>().unwrap(), ScenarioName::Sei);
        assert!("XYZ".parse::<ScenarioName>().is_err());
    }

    #[test]
    fn presets_are_valid() {
        for n in ScenarioName::ALL {
            ScenarioSpec::preset(n).validate().unwrap();
        }
        assert_eq!(ScenarioSpec::fma().tasks[0].classes.len(), 8);
        assert_eq!(ScenarioSpec::ravdess().tasks[0].classes.len(), 7);
        assert_eq!(ScenarioSpec::common_voice().task_type, TaskType::Multilabel);
    }

    #[test]
    fn encode_maps_labels_to_indices() {
        let spec = ScenarioSpec::ravdess();
        let clip = AudioClip::new(vec![1; 10], 16000).unwrap();
        let lc = LabeledClip::new("a", "s", clip.clone(), &[("emotion", "sad")]);
        assert_eq!(spec.encode(&lc).unwrap(), vec![2]);
        let bad = LabeledClip::new("b", "s", clip, &[("emotion", "neutral")]);
        assert!(spec.encode(&bad).is_err());
    }

    #[test]
    fn single_class_task_rejected() {
        let spec = ScenarioSpec::multiclass(ScenarioName::Mgi, "genre", &["Rock"]);
        assert!(spec.validate().is_err());
    }
}
