use serde::{Deserialize, Serialize};

use crate::datasets::ScenarioSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: String,
    pub classes: Vec<String>,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub support: Vec<usize>,
    /// Recall per class; `None` where the class has no test items.
    pub per_class_accuracy: Vec<Option<f64>>,
}

/// Test-split performance of one attack under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub condition: String,
    /// Mean of the per-task accuracies.
    pub accuracy: f64,
    pub samples: usize,
    pub tasks: Vec<TaskResult>,
}

/// Scores predicted class indices against targets, one index per task.
pub fn score_predictions(
    scenario: &ScenarioSpec,
    condition: &str,
    predicted: &[Vec<usize>],
    targets: &[Vec<usize>],
) -> Result<AttackResult> {
    if predicted.len() != targets.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} targets",
            predicted.len(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_tasks = scenario.tasks.len();
    let mut tasks = Vec::with_capacity(n_tasks);
    for (ti, spec) in scenario.tasks.iter().enumerate() {
        let k = spec.classes.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for (p, t) in predicted.iter().zip(targets) {
            if p.len() != n_tasks || t.len() != n_tasks {
                return Err(Error::Config(format!("expected {n_tasks} labels per item")));
            }
            if p[ti] >= k || t[ti] >= k {
                return Err(Error::Config(format!(
                    "class index out of range for task {}",
                    spec.name
                )));
            }
            confusion[t[ti]][p[ti]] += 1;
        }
        let support: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
        let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = (0..k)
            .map(|c| (support[c] > 0).then(|| confusion[c][c] as f64 / support[c] as f64))
            .collect();
        tasks.push(TaskResult {
            task: spec.name.clone(),
            classes: spec.classes.clone(),
            accuracy: correct as f64 / targets.len() as f64,
            confusion,
            support,
            per_class_accuracy,
        });
    }
    let accuracy = tasks.iter().map(|t| t.accuracy).sum::<f64>() / n_tasks as f64;
    Ok(AttackResult {
        condition: condition.to_string(),
        accuracy,
        samples: targets.len(),
        tasks,
    })
}
