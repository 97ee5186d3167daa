use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::learners::{KMeans, Knn, Linear, NearestCentroid, Predictor};
use super::{Dataset, Measure, MlError, TaskKind};
use crate::algebra::ParamSet;

pub type Factory = Arc<dyn Fn(&ParamSet, &Dataset, u64) -> Result<Arc<dyn Predictor>, MlError> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub name: String,
    /// Every parameter the learner reads, with its default.
    pub schema: ParamSet,
    pub task: TaskKind,
    pub measures: Vec<Measure>,
}

impl LearnerSpec {
    pub fn new(name: &str, task: TaskKind, schema: &[(&str, &str)]) -> LearnerSpec {
        LearnerSpec {
            name: name.to_string(),
            schema: ParamSet::of(schema),
            task,
            measures: Measure::ALL.into_iter().filter(|m| m.applies_to(task)).collect(),
        }
    }
}

#[derive(Clone)]
pub struct Registered {
    pub spec: LearnerSpec,
    pub factory: Factory,
}

impl fmt::Debug for Registered {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registered").field("spec", &self.spec).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    learners: BTreeMap<String, Registered>,
}

impl Registry {
    pub fn empty() -> Registry {
        Registry::default()
    }

    /// nearest-centroid, knn, knn-regressor, linear, ridge and kmeans.
    pub fn with_builtins() -> Registry {
        let mut r = Registry::empty();
        for (spec, factory) in builtin_learners() {
            r.register(spec, factory).expect("built-in names are distinct");
        }
        r
    }

    pub fn register(&mut self, spec: LearnerSpec, factory: Factory) -> Result<(), MlError> {
        if self.learners.contains_key(&spec.name) {
            return Err(MlError::DuplicateLearner(spec.name));
        }
        self.learners.insert(spec.name.clone(), Registered { spec, factory });
        Ok(())
    }

    /// Registers `name` with its own schema but the fitting code of an
    /// already registered learner.
    pub fn register_alias(&mut self, name: &str, schema: &[(&str, &str)], backing: &str) -> Result<(), MlError> {
        let base = self.get(backing)?.clone();
        let mut spec = base.spec.clone();
        spec.name = name.to_string();
        spec.schema = ParamSet::of(schema);
        self.register(spec, base.factory)
    }

    pub fn get(&self, name: &str) -> Result<&Registered, MlError> {
        self.learners.get(name).ok_or_else(|| MlError::UnknownLearner(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.learners.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.learners.keys().map(|s| s.as_str()).collect()
    }

    pub fn specs(&self) -> impl Iterator<Item = &LearnerSpec> {
        self.learners.values().map(|r| &r.spec)
    }

    /// Fits `name` on the training split of `data` and scores the requested
    /// measures (those applicable) on the evaluation split.
    pub fn fit(
        &self,
        name: &str,
        params: &ParamSet,
        data: &Dataset,
        seed: u64,
        measures: &[Measure],
    ) -> Result<(FittedModel, Vec<Score>), MlError> {
        let reg = self.get(name)?;
        let task = reg.spec.task;
        if !task.accepts(data.task) {
            return Err(MlError::IncompatibleTask { learner: name.to_string(), learner_task: task, data_task: data.task });
        }
        let (train, eval) = if task == TaskKind::Clustering {
            let all: Vec<usize> = (0..data.len()).collect();
            (all.clone(), all)
        } else {
            data.split_indices(seed)
        };
        let predictor = (reg.factory)(params, &data.subset(&train), seed)?;
        let model = FittedModel {
            learner: name.to_string(),
            params: params.clone(),
            task,
            train_dataset: data.name.clone(),
            seed,
            predictor,
        };
        let scores = model.evaluate(&data.subset(&eval), measures)?;
        Ok((model, scores))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub measure: Measure,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub learner: String,
    pub params: ParamSet,
    pub task: TaskKind,
    pub train_dataset: String,
    pub seed: u64,
    pub predictor: Arc<dyn Predictor>,
}

impl FittedModel {
    /// One score per applicable measure; inapplicable ones are skipped, as
    /// are all of them when the data carries no ground truth.
    pub fn evaluate(&self, data: &Dataset, measures: &[Measure]) -> Result<Vec<Score>, MlError> {
        let wanted: Vec<Measure> = measures.iter().copied().filter(|m| m.applies_to(self.task)).collect();
        let Some(truth) = data.targets.as_deref() else { return Ok(Vec::new()) };
        if wanted.is_empty() {
            return Ok(Vec::new());
        }
        let predicted = self.predictor.predict(&data.features)?;
        wanted.into_iter().map(|m| Ok(Score { measure: m, value: m.compute(truth, &predicted)? })).collect()
    }
}

fn builtin_learners() -> Vec<(LearnerSpec, Factory)> {
    vec![
        (
            LearnerSpec::new("nearest-centroid", TaskKind::Classification, &[("metric", "euclidean")]),
            Arc::new(|p: &ParamSet, d: &Dataset, _| Ok(Arc::new(NearestCentroid::fit(d, p)?) as Arc<dyn Predictor>)),
        ),
        (
            LearnerSpec::new("knn", TaskKind::Classification, &[("metric", "euclidean"), ("n_neighbors", "5")]),
            Arc::new(|p: &ParamSet, d: &Dataset, _| Ok(Arc::new(Knn::fit(d, p, false)?) as Arc<dyn Predictor>)),
        ),
        (
            LearnerSpec::new("knn-regressor", TaskKind::Regression, &[("metric", "euclidean"), ("n_neighbors", "5")]),
            Arc::new(|p: &ParamSet, d: &Dataset, _| Ok(Arc::new(Knn::fit(d, p, true)?) as Arc<dyn Predictor>)),
        ),
        (
            LearnerSpec::new("linear", TaskKind::Regression, &[("fit_intercept", "true")]),
            Arc::new(|p: &ParamSet, d: &Dataset, _| Ok(Arc::new(Linear::fit_ols(d, p)?) as Arc<dyn Predictor>)),
        ),
        (
            LearnerSpec::new("ridge", TaskKind::Regression, &[("alpha", "1"), ("fit_intercept", "true")]),
            Arc::new(|p: &ParamSet, d: &Dataset, _| Ok(Arc::new(Linear::fit_ridge(d, p)?) as Arc<dyn Predictor>)),
        ),
        (
            LearnerSpec::new("kmeans", TaskKind::Clustering, &[("max_iter", "300"), ("n_clusters", "auto")]),
            Arc::new(|p: &ParamSet, d: &Dataset, seed| Ok(Arc::new(KMeans::fit(d, p, seed)?) as Arc<dyn Predictor>)),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::Matrix;

    #[test]
    fn builtins_and_duplicates() {
        let mut r = Registry::with_builtins();
        assert_eq!(r.names(), vec!["kmeans", "knn", "knn-regressor", "linear", "nearest-centroid", "ridge"]);
        let spec = r.get("knn").unwrap().spec.clone();
        assert!(matches!(r.register(spec, r.get("knn").unwrap().factory.clone()), Err(MlError::DuplicateLearner(_))));
        assert!(matches!(r.get("svm"), Err(MlError::UnknownLearner(_))));
        r.register_alias("NrCent", &[("metric", "euclidean")], "nearest-centroid").unwrap();
        assert_eq!(r.get("NrCent").unwrap().spec.task, TaskKind::Classification);
    }

    #[test]
    fn incompatible_task_rejected_and_inapplicable_measures_skipped() {
        let r = Registry::with_builtins();
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let reg = Dataset::new("r", TaskKind::Regression, x.clone(), Some(vec![0.0, 1.0, 2.0, 3.0])).unwrap();
        assert!(matches!(r.fit("knn", &ParamSet::new(), &reg, 1, &[]), Err(MlError::IncompatibleTask { .. })));
        let cls = Dataset::new("c", TaskKind::Classification, x, Some(vec![0.0, 0.0, 1.0, 1.0])).unwrap();
        let (model, scores) = r.fit("kmeans", &ParamSet::new(), &cls, 1, &[Measure::Mse, Measure::Homogeneity]).unwrap();
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].measure, Measure::Homogeneity);
        assert!(model.evaluate(&cls, &[Measure::Mse]).unwrap().is_empty());
    }
}
