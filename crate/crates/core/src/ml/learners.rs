//! Built-in desk-scale learners. Every fit is a pure function of the
//! training rows, the parameters and the seed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{cholesky_solve, manhattan, sq_euclidean};
use super::{Dataset, Matrix, MlError};
use crate::algebra::ParamSet;

pub trait Predictor: Send + Sync + fmt::Debug {
    fn dims(&self) -> usize;
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>, MlError> {
        if x.cols() != self.dims() {
            return Err(MlError::DimensionMismatch { expected: self.dims(), got: x.cols() });
        }
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }
}

fn raw<'a>(params: &'a ParamSet, key: &str) -> Option<&'a str> {
    params.get(key).filter(|v| !v.is_general()).map(|v| v.as_str())
}

fn bad(param: &str, value: &str, reason: &str) -> MlError {
    MlError::BadParam { param: param.into(), value: value.into(), reason: reason.into() }
}

pub fn param_f64(params: &ParamSet, key: &str, default: f64) -> Result<f64, MlError> {
    match raw(params, key) {
        None => Ok(default),
        Some(v) => v.parse::<f64>().map_err(|_| bad(key, v, "expected a number")),
    }
}

pub fn param_usize(params: &ParamSet, key: &str, default: usize) -> Result<usize, MlError> {
    match raw(params, key) {
        None => Ok(default),
        Some(v) => v.parse::<usize>().map_err(|_| bad(key, v, "expected a non-negative integer")),
    }
}

pub fn param_bool(params: &ParamSet, key: &str, default: bool) -> Result<bool, MlError> {
    match raw(params, key).map(|v| v.to_ascii_lowercase()) {
        None => Ok(default),
        Some(v) if v == "true" || v == "1" => Ok(true),
        Some(v) if v == "false" || v == "0" => Ok(false),
        Some(v) => Err(bad(key, &v, "expected true or false")),
    }
}

fn targets(data: &Dataset) -> Result<&[f64], MlError> {
    data.targets.as_deref().ok_or_else(|| MlError::MissingTargets(data.name.clone()))
}

fn non_empty(data: &Dataset) -> Result<(), MlError> {
    if data.is_empty() {
        Err(MlError::EmptyInput)
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    Manhattan,
}

impl Metric {
    pub fn from_params(params: &ParamSet) -> Result<Metric, MlError> {
        match raw(params, "metric") {
            None | Some("euclidean") => Ok(Metric::Euclidean),
            Some("manhattan") | Some("cityblock") => Ok(Metric::Manhattan),
            Some(other) => Err(bad("metric", other, "expected euclidean or manhattan")),
        }
    }

    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => sq_euclidean(a, b),
            Metric::Manhattan => manhattan(a, b),
        }
    }
}

/// Sorted distinct class labels.
fn classes(t: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = t.to_vec();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

#[derive(Debug, Clone)]
pub struct NearestCentroid {
    pub labels: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
    pub metric: Metric,
}

impl NearestCentroid {
    pub fn fit(data: &Dataset, params: &ParamSet) -> Result<NearestCentroid, MlError> {
        non_empty(data)?;
        let t = targets(data)?;
        let metric = Metric::from_params(params)?;
        let labels = classes(t);
        let d = data.dims();
        let mut sums = vec![vec![0.0; d]; labels.len()];
        let mut counts = vec![0usize; labels.len()];
        for (row, y) in data.features.iter_rows().zip(t) {
            let k = labels.binary_search_by(|l| l.total_cmp(y)).expect("label collected above");
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(row) {
                *s += v;
            }
        }
        let centroids = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| s.into_iter().map(|v| v / c as f64).collect())
            .collect();
        Ok(NearestCentroid { labels, centroids, metric })
    }
}

impl Predictor for NearestCentroid {
    fn dims(&self) -> usize {
        self.centroids.first().map_or(0, |c| c.len())
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut best = (f64::INFINITY, 0);
        for (k, c) in self.centroids.iter().enumerate() {
            let dist = self.metric.distance(x, c);
            if dist < best.0 {
                best = (dist, k);
            }
        }
        self.labels[best.1]
    }
}

#[derive(Debug, Clone)]
pub struct Knn {
    pub features: Matrix,
    pub targets: Vec<f64>,
    pub k: usize,
    pub regression: bool,
    pub metric: Metric,
}

impl Knn {
    pub fn fit(data: &Dataset, params: &ParamSet, regression: bool) -> Result<Knn, MlError> {
        non_empty(data)?;
        let k = param_usize(params, "n_neighbors", 5)?;
        if k == 0 {
            return Err(bad("n_neighbors", "0", "need at least one neighbour"));
        }
        Ok(Knn {
            features: data.features.clone(),
            targets: targets(data)?.to_vec(),
            k: k.min(data.len()),
            regression,
            metric: Metric::from_params(params)?,
        })
    }
}

impl Predictor for Knn {
    fn dims(&self) -> usize {
        self.features.cols()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> =
            self.features.iter_rows().enumerate().map(|(i, r)| (self.metric.distance(x, r), i)).collect();
        // Ties resolve towards the earlier training row.
        dist.select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let near = &dist[..self.k];
        if self.regression {
            return near.iter().map(|(_, i)| self.targets[*i]).sum::<f64>() / self.k as f64;
        }
        let mut votes: Vec<(f64, usize)> = Vec::new();
        for (_, i) in near {
            let y = self.targets[*i];
            match votes.iter_mut().find(|(l, _)| *l == y) {
                Some(v) => v.1 += 1,
                None => votes.push((y, 1)),
            }
        }
        // Most votes, then the smallest label.
        votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));
        votes[0].0
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl Linear {
    /// Ordinary least squares through the normal equations, with the
    /// intercept as an extra all-ones column.
    pub fn fit_ols(data: &Dataset, params: &ParamSet) -> Result<Linear, MlError> {
        non_empty(data)?;
        let y = targets(data)?;
        let fit_intercept = param_bool(params, "fit_intercept", true)?;
        let d = data.dims();
        let n = d + usize::from(fit_intercept);
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        let mut aug = vec![1.0; n];
        for (row, yi) in data.features.iter_rows().zip(y) {
            aug[..d].copy_from_slice(row);
            for i in 0..n {
                b[i] += aug[i] * yi;
                for j in 0..n {
                    a[i * n + j] += aug[i] * aug[j];
                }
            }
        }
        let w = cholesky_solve(&a, &b, n)?;
        Ok(Linear { weights: w[..d].to_vec(), intercept: if fit_intercept { w[d] } else { 0.0 } })
    }

    /// Ridge regression on centred data; the intercept is not penalised.
    pub fn fit_ridge(data: &Dataset, params: &ParamSet) -> Result<Linear, MlError> {
        non_empty(data)?;
        let y = targets(data)?;
        let alpha = param_f64(params, "alpha", 1.0)?;
        if alpha < 0.0 {
            return Err(bad("alpha", &alpha.to_string(), "penalty must be non-negative"));
        }
        let fit_intercept = param_bool(params, "fit_intercept", true)?;
        let d = data.dims();
        let (xm, ym) = if fit_intercept {
            (data.features.column_means(), y.iter().sum::<f64>() / y.len() as f64)
        } else {
            (vec![0.0; d], 0.0)
        };
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        let mut xc = vec![0.0; d];
        for (row, yi) in data.features.iter_rows().zip(y) {
            for j in 0..d {
                xc[j] = row[j] - xm[j];
            }
            for i in 0..d {
                b[i] += xc[i] * (yi - ym);
                for j in 0..d {
                    a[i * d + j] += xc[i] * xc[j];
                }
            }
        }
        for i in 0..d {
            a[i * d + i] += alpha;
        }
        let w = cholesky_solve(&a, &b, d)?;
        let intercept = ym - w.iter().zip(&xm).map(|(w, m)| w * m).sum::<f64>();
        Ok(Linear { weights: w, intercept })
    }
}

impl Predictor for Linear {
    fn dims(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after every assignment step.
    pub history: Vec<f64>,
}

impl KMeans {
    /// `n_clusters` may be `auto`, meaning the number of true classes.
    pub fn resolve_k(data: &Dataset, params: &ParamSet) -> Result<usize, MlError> {
        match raw(params, "n_clusters") {
            Some("auto") | None => data.class_count().ok_or_else(|| MlError::MissingTargets(data.name.clone())),
            Some(_) => param_usize(params, "n_clusters", 0),
        }
    }

    pub fn fit(data: &Dataset, params: &ParamSet, seed: u64) -> Result<KMeans, MlError> {
        non_empty(data)?;
        let k = KMeans::resolve_k(data, params)?;
        let max_iter = param_usize(params, "max_iter", 300)?;
        KMeans::fit_k(&data.features, k, max_iter, seed)
    }

    pub fn fit_k(x: &Matrix, k: usize, max_iter: usize, seed: u64) -> Result<KMeans, MlError> {
        let n = x.rows();
        if k == 0 || k > n {
            return Err(MlError::Degenerate(format!("k-means needs 1 <= k <= n, got k={k} n={n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = plus_plus(x, k, &mut rng);
        let mut assign = vec![usize::MAX; n];
        let mut history = Vec::new();
        for _ in 0..max_iter.max(1) {
            let mut changed = false;
            let mut sse = 0.0;
            for (i, row) in x.iter_rows().enumerate() {
                // Keep the current cluster unless another is strictly closer.
                let mut best = assign[i];
                let mut best_d = if best == usize::MAX { f64::INFINITY } else { sq_euclidean(row, &centroids[best]) };
                for (c, cen) in centroids.iter().enumerate() {
                    let d = sq_euclidean(row, cen);
                    if d < best_d {
                        best = c;
                        best_d = d;
                    }
                }
                changed |= best != assign[i];
                assign[i] = best;
                sse += best_d;
            }
            history.push(sse);
            if !changed {
                break;
            }
            let d = x.cols();
            let mut sums = vec![vec![0.0; d]; k];
            let mut counts = vec![0usize; k];
            for (row, &c) in x.iter_rows().zip(&assign) {
                counts[c] += 1;
                for (s, v) in sums[c].iter_mut().zip(row) {
                    *s += v;
                }
            }
            for c in 0..k {
                // An empty cluster keeps its previous centroid.
                if counts[c] > 0 {
                    centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                }
            }
        }
        Ok(KMeans { centroids, history })
    }
}

fn plus_plus(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centroids = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = x.iter_rows().map(|r| sq_euclidean(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (i, r) in x.iter_rows().enumerate() {
            nearest[i] = nearest[i].min(sq_euclidean(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

impl Predictor for KMeans {
    fn dims(&self) -> usize {
        self.centroids.first().map_or(0, |c| c.len())
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut best = (f64::INFINITY, 0);
        for (k, c) in self.centroids.iter().enumerate() {
            let d = sq_euclidean(x, c);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1 as f64
    }
}
