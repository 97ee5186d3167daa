//! The benchmark catalog: 24 labeled algorithm specs in 16 families backed by
//! the built-in learners, and the nine dataset stand-ins.

use crate::algebra::ParamSet;
use crate::holarchy::ResourceSpec;
use crate::ml::synthetic::STAND_INS;
use crate::ml::{Registry, TaskKind};

/// Family name, schema with defaults, backing built-in.
const FAMILIES: [(&str, &[(&str, &str)], &str); 16] = [
    ("SVC", &[("kernel", "rbf"), ("C", "1"), ("gamma", "scale")], "knn"),
    ("NuSVC", &[("kernel", "rbf"), ("nu", "0.5")], "knn"),
    ("ComNB", &[("alpha", "1")], "nearest-centroid"),
    ("DTree", &[("criterion", "gini")], "knn"),
    ("NrCent", &[("metric", "euclidean")], "nearest-centroid"),
    ("Linear", &[("fit_intercept", "true")], "linear"),
    ("Ridge", &[("alpha", "1"), ("fit_intercept", "true")], "ridge"),
    ("KRR", &[("kernel", "linear"), ("alpha", "1")], "ridge"),
    ("Lasso", &[("alpha", "1")], "ridge"),
    ("NuSVR", &[("kernel", "rbf"), ("nu", "0.5"), ("C", "1")], "knn-regressor"),
    ("ElasNet", &[("alpha", "1"), ("l1_ratio", "0.5")], "ridge"),
    ("KMeans", &[("n_clusters", "auto"), ("algorithm", "lloyd")], "kmeans"),
    ("MBKMeans", &[("n_clusters", "auto")], "kmeans"),
    ("DBSCAN", &[("eps", "0.5"), ("metric", "euclidean")], "kmeans"),
    ("Birch", &[("n_clusters", "auto"), ("threshold", "0.5")], "kmeans"),
    ("HAC", &[("n_clusters", "auto"), ("linkage", "ward")], "kmeans"),
];

/// Label, family, non-default parameters.
const ALGORITHMS: [(&str, &str, &[(&str, &str)]); 24] = [
    ("A01", "SVC", &[("kernel", "linear")]),
    ("A02", "SVC", &[("kernel", "sigmoid")]),
    ("A03", "SVC", &[("gamma", "0.001")]),
    ("A04", "SVC", &[("C", "100"), ("gamma", "0.001")]),
    ("A05", "NuSVC", &[]),
    ("A06", "ComNB", &[]),
    ("A07", "DTree", &[]),
    ("A08", "NrCent", &[]),
    ("A09", "Linear", &[]),
    ("A10", "Ridge", &[("fit_intercept", "false")]),
    ("A11", "Ridge", &[("alpha", "0.5")]),
    ("A12", "KRR", &[]),
    ("A13", "Lasso", &[("alpha", "0.1")]),
    ("A14", "NuSVR", &[]),
    ("A15", "NuSVR", &[("nu", "0.1")]),
    ("A16", "ElasNet", &[]),
    ("A17", "KMeans", &[]),
    ("A18", "KMeans", &[("algorithm", "full")]),
    ("A19", "MBKMeans", &[]),
    ("A20", "DBSCAN", &[]),
    ("A21", "DBSCAN", &[("metric", "cityblock")]),
    ("A22", "DBSCAN", &[("metric", "cosine")]),
    ("A23", "Birch", &[]),
    ("A24", "HAC", &[]),
];

/// Built-ins plus the 16 benchmark families.
pub fn registry() -> Registry {
    let mut r = Registry::with_builtins();
    for (name, schema, backing) in FAMILIES {
        r.register_alias(name, schema, backing).expect("catalog families are distinct");
    }
    r
}

/// The family schema (identifiers with defaults) of a catalog family.
pub fn family_schema(name: &str) -> Option<ParamSet> {
    FAMILIES.iter().find(|f| f.0 == name).map(|f| ParamSet::of(f.1))
}

/// The 24 labeled specs, each padded to its family schema.
pub fn algorithms() -> Vec<ResourceSpec> {
    ALGORITHMS
        .iter()
        .map(|(label, family, params)| {
            let mut full = family_schema(family).expect("every entry names a family");
            for (k, v) in params.iter() {
                full.set(*k, crate::algebra::ParamValue::parse(v)).expect("catalog identifiers are valid");
            }
            ResourceSpec::algorithm(*family, full).with_label(*label)
        })
        .collect()
}

pub fn algorithm(label: &str) -> Option<ResourceSpec> {
    algorithms().into_iter().find(|a| a.label.as_deref() == Some(label))
}

/// Labeled specs whose learner handles `task`.
pub fn algorithms_for(task: TaskKind) -> Vec<ResourceSpec> {
    let r = registry();
    algorithms().into_iter().filter(|a| r.get(&a.name).map(|l| l.spec.task == task).unwrap_or(false)).collect()
}

pub fn datasets() -> &'static [&'static str] {
    &STAND_INS
}

pub fn dataset_task(name: &str) -> Option<TaskKind> {
    match name {
        "iris" | "wine" | "breast_cancer" | "digits" | "art_class" | "moon" => Some(TaskKind::Classification),
        "boston" | "diabetes" | "art_regr" => Some(TaskKind::Regression),
        _ => None,
    }
}

/// Datasets each algorithm task trains on. Clustering runs on every
/// labeled classification set.
pub fn training_sets(task: TaskKind) -> Vec<&'static str> {
    let want = match task {
        TaskKind::Regression => TaskKind::Regression,
        _ => TaskKind::Classification,
    };
    STAND_INS.iter().copied().filter(|d| dataset_task(d) == Some(want)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_shape() {
        let algs = algorithms();
        assert_eq!(algs.len(), 24);
        let pairs: usize = [TaskKind::Classification, TaskKind::Regression, TaskKind::Clustering]
            .into_iter()
            .map(|t| algorithms_for(t).len() * training_sets(t).len())
            .sum();
        assert_eq!(pairs, 120);
        let rbf: Vec<_> = algs
            .iter()
            .filter(|a| a.params.get("kernel").is_some_and(|k| k.as_str() == "rbf"))
            .map(|a| a.label.clone().unwrap())
            .collect();
        assert_eq!(rbf, ["A03", "A04", "A05", "A14", "A15"]);
        let r = registry();
        for a in &algs {
            assert_eq!(r.get(&a.name).unwrap().spec.schema.identifiers().collect::<Vec<_>>(), a.params.identifiers().collect::<Vec<_>>());
        }
    }
}
