use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{MlError, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Measure {
    Accuracy,
    Mse,
    FowlkesMallows,
    Homogeneity,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Accuracy, Measure::Mse, Measure::FowlkesMallows, Measure::Homogeneity];

    pub fn id(self) -> &'static str {
        match self {
            Measure::Accuracy => "accuracy",
            Measure::Mse => "mse",
            Measure::FowlkesMallows => "fowlkes_mallows",
            Measure::Homogeneity => "homogeneity",
        }
    }

    pub fn applies_to(self, task: TaskKind) -> bool {
        matches!(
            (self, task),
            (Measure::Accuracy, TaskKind::Classification)
                | (Measure::Mse, TaskKind::Regression)
                | (Measure::FowlkesMallows | Measure::Homogeneity, TaskKind::Clustering)
        )
    }

    pub fn compute(self, truth: &[f64], predicted: &[f64]) -> Result<f64, MlError> {
        match self {
            Measure::Accuracy => accuracy(truth, predicted),
            Measure::Mse => mse(truth, predicted),
            Measure::FowlkesMallows => fowlkes_mallows(truth, predicted),
            Measure::Homogeneity => homogeneity(truth, predicted),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Measure {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy" => Ok(Measure::Accuracy),
            "mse" | "mean_squared_error" => Ok(Measure::Mse),
            "fowlkes_mallows" | "fm" => Ok(Measure::FowlkesMallows),
            "homogeneity" => Ok(Measure::Homogeneity),
            _ => Err(MlError::UnknownMeasure(s.to_string())),
        }
    }
}

impl Serialize for Measure {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn check(truth: &[f64], predicted: &[f64]) -> Result<(), MlError> {
    if truth.is_empty() {
        return Err(MlError::EmptyInput);
    }
    if truth.len() != predicted.len() {
        return Err(MlError::LengthMismatch { left: truth.len(), right: predicted.len() });
    }
    Ok(())
}

pub fn accuracy(truth: &[f64], predicted: &[f64]) -> Result<f64, MlError> {
    check(truth, predicted)?;
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

pub fn mse(truth: &[f64], predicted: &[f64]) -> Result<f64, MlError> {
    check(truth, predicted)?;
    Ok(truth.iter().zip(predicted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64)
}

// Labels are compared by bit pattern, so 1.0 and 1.0 meet but NaN never
// merges with anything unexpected.
fn key(x: f64) -> u64 {
    if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() }
}

fn contingency(truth: &[f64], predicted: &[f64]) -> BTreeMap<(u64, u64), usize> {
    let mut table = BTreeMap::new();
    for (a, b) in truth.iter().zip(predicted) {
        *table.entry((key(*a), key(*b))).or_insert(0) += 1;
    }
    table
}

fn pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

fn marginal(truth: &[f64]) -> BTreeMap<u64, usize> {
    let mut m = BTreeMap::new();
    for v in truth {
        *m.entry(key(*v)).or_insert(0) += 1;
    }
    m
}

/// `TP/√((TP+FP)(TP+FN))` over sample pairs. Two all-singleton
/// partitions agree completely and score 1.
pub fn fowlkes_mallows(truth: &[f64], predicted: &[f64]) -> Result<f64, MlError> {
    check(truth, predicted)?;
    let tk: f64 = contingency(truth, predicted).values().map(|&c| pairs(c)).sum();
    let pk: f64 = marginal(predicted).values().map(|&c| pairs(c)).sum();
    let qk: f64 = marginal(truth).values().map(|&c| pairs(c)).sum();
    if pk == 0.0 && qk == 0.0 {
        return Ok(1.0);
    }
    if tk == 0.0 {
        return Ok(0.0);
    }
    Ok(tk / (pk * qk).sqrt())
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `1 − H(C|K)/H(C)`, with a single true class counting as homogeneous.
pub fn homogeneity(truth: &[f64], predicted: &[f64]) -> Result<f64, MlError> {
    check(truth, predicted)?;
    let n = truth.len() as f64;
    let h_c = entropy(marginal(truth).into_values(), n);
    if h_c == 0.0 {
        return Ok(1.0);
    }
    let cluster_sizes = marginal(predicted);
    let mut h_ck = 0.0;
    for ((_, k), c) in contingency(truth, predicted) {
        let nk = cluster_sizes[&k] as f64;
        h_ck -= (c as f64 / n) * (c as f64 / nk).ln();
    }
    Ok((1.0 - h_ck / h_c).clamp(0.0, 1.0))
}
