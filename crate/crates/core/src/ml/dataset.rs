use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
    Clustering,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
            TaskKind::Clustering => "clustering",
        }
    }

    /// Whether a learner of kind `self` can train on data labelled `data`.
    /// Clustering runs on anything with class labels (or none at all).
    pub fn accepts(self, data: TaskKind) -> bool {
        match self {
            TaskKind::Clustering => data != TaskKind::Regression,
            k => k == data,
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classification" => Ok(TaskKind::Classification),
            "regression" => Ok(TaskKind::Regression),
            "clustering" => Ok(TaskKind::Clustering),
            other => Err(format!("unknown task kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub task: TaskKind,
    pub features: Matrix,
    pub targets: Option<Vec<f64>>,
    /// Share of rows used for fitting; the rest is the evaluation split.
    pub train_fraction: f64,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        task: TaskKind,
        features: Matrix,
        targets: Option<Vec<f64>>,
    ) -> Result<Dataset, MlError> {
        if let Some(t) = &targets {
            if t.len() != features.rows() {
                return Err(MlError::LengthMismatch { left: features.rows(), right: t.len() });
            }
        }
        Ok(Dataset { name: name.into(), task, features, targets, train_fraction: 1.0, provenance: String::new() })
    }

    pub fn with_split(mut self, train_fraction: f64) -> Result<Dataset, MlError> {
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(MlError::BadParam {
                param: "split".into(),
                value: train_fraction.to_string(),
                reason: "train fraction must lie in (0,1]".into(),
            });
        }
        self.train_fraction = train_fraction;
        Ok(self)
    }

    pub fn with_provenance(mut self, tag: impl Into<String>) -> Dataset {
        self.provenance = tag.into();
        self
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            task: self.task,
            features: self.features.select_rows(idx),
            targets: self.targets.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect()),
            train_fraction: 1.0,
            provenance: self.provenance.clone(),
        }
    }

    /// Seeded shuffle split into (train, eval) row indices. A fraction of 1
    /// uses every row for both.
    pub fn split_indices(&self, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let all: Vec<usize> = (0..n).collect();
        if self.train_fraction >= 1.0 || n < 2 {
            return (all.clone(), all);
        }
        let mut idx = all;
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((n as f64 * self.train_fraction).round() as usize).clamp(1, n - 1);
        let eval = idx.split_off(cut);
        (idx, eval)
    }

    pub fn class_count(&self) -> Option<usize> {
        let t = self.targets.as_ref()?;
        Some(t.iter().map(|v| v.to_bits()).collect::<BTreeSet<_>>().len())
    }
}
