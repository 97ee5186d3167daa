//! Query files: parsing, validation with JSON-path diagnostics, and
//! expansion of Λ×Δ into single-pair operations.
//!
//! Grammar (JSON object, unknown keys rejected):
//!
//! ```text
//! query   := { "id": string, "lambda": [entry+], "delta": [entry+], "output": output }
//! entry   := { "name": token, "params"?: { ident: token }, "source"?: source }
//! output  := { "type"?: "train" | "test", "format"?: "csv" | "json" | "plot",
//!              "measures": [measure+], "matrix"?: bool, "task_type_hint"?: task }
//! token   := string | number | bool      "*" is the general symbol
//! source  := { "kind": "synthetic", "generator": string, "variant"?: "train"|"test", "seed"?: int }
//!          | { "kind": "csv", "path": string, "task_kind": task, "target_column"?: string,
//!              "normalize"?: bool, "split"?: number }
//! ```
//!
//! `type` defaults to `test`. Training queries take concrete names and
//! values only, and `source` is only read on training `delta` entries.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::algebra::{ParamSet, ParamValue};
use crate::holarchy::ResourceSpec;
use crate::ml::{DataSource, Measure, Registry, TaskKind};
use crate::protocol::Criterion;

/// One actionable complaint about a query file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub expected: String,
    pub found: String,
}

impl Diagnostic {
    fn new(path: &str, expected: impl Into<String>, found: impl Into<String>) -> Diagnostic {
        Diagnostic { path: path.to_string(), expected: expected.into(), found: found.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, found {}", self.path, self.expected, self.found)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Plot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub format: Format,
    pub measures: Vec<Measure>,
    /// Also emit an algorithms × datasets grid per measure.
    #[serde(default)]
    pub matrix: bool,
    #[serde(default)]
    pub task_type_hint: Option<TaskKind>,
}

impl OutputConfig {
    pub fn new(format: Format, measures: &[Measure]) -> OutputConfig {
        OutputConfig { format, measures: measures.to_vec(), matrix: false, task_type_hint: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryType {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: ParamValue,
    pub params: ParamSet,
    pub source: Option<DataSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub kind: QueryType,
    pub lambda: Vec<Entry>,
    pub delta: Vec<Entry>,
    pub output: OutputConfig,
}

/// A single-pair request ready for dispatch.
#[derive(Debug, Clone, PartialEq)]
pub enum Operation {
    Train { id: String, algorithm: ResourceSpec, data: ResourceSpec, source: Option<DataSource>, measures: Vec<Measure> },
    Test { id: String, algorithms: Criterion, data: Criterion, measures: Vec<Measure> },
}

impl Operation {
    pub fn id(&self) -> &str {
        match self {
            Operation::Train { id, .. } | Operation::Test { id, .. } => id,
        }
    }
}

fn kind_of(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => format!("boolean {b}"),
        Value::Number(n) => format!("number {n}"),
        Value::String(s) => format!("string {s:?}"),
        Value::Array(a) => format!("array of {}", a.len()),
        Value::Object(_) => "object".into(),
    }
}

struct Checker<'a> {
    registry: &'a Registry,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn fail(&mut self, path: &str, expected: impl Into<String>, found: impl Into<String>) {
        self.diags.push(Diagnostic::new(path, expected, found));
    }

    fn object<'v>(&mut self, path: &str, v: &'v Value, keys: &[&str]) -> Option<&'v Map<String, Value>> {
        let Some(obj) = v.as_object() else {
            self.fail(path, "an object", kind_of(v));
            return None;
        };
        for k in obj.keys() {
            if !keys.contains(&k.as_str()) {
                self.fail(&format!("{path}.{k}"), format!("one of {}", keys.join(", ")), format!("unknown key {k:?}"));
            }
        }
        Some(obj)
    }

    fn token(&mut self, path: &str, v: &Value) -> Option<ParamValue> {
        match ParamValue::from_json(v) {
            Ok(t) => Some(t),
            Err(_) => {
                self.fail(path, "a string, number or boolean", kind_of(v));
                None
            }
        }
    }

    fn entries(&mut self, path: &str, v: Option<&Value>, training: bool, data_side: bool) -> Vec<Entry> {
        let Some(v) = v else {
            self.fail(path, "a non-empty array of {name, params}", "nothing");
            return Vec::new();
        };
        let Some(items) = v.as_array().filter(|a| !a.is_empty()) else {
            self.fail(path, "a non-empty array of {name, params}", kind_of(v));
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let at = format!("{path}[{i}]");
            if let Some(e) = self.entry(&at, item, training, data_side) {
                out.push(e);
            }
        }
        out
    }

    fn entry(&mut self, path: &str, v: &Value, training: bool, data_side: bool) -> Option<Entry> {
        let obj = self.object(path, v, &["name", "params", "source"])?;
        let before = self.diags.len();
        let name = match obj.get("name") {
            Some(Value::String(s)) if !s.is_empty() => ParamValue::parse(s),
            Some(other) => {
                self.fail(&format!("{path}.name"), "a non-empty string", kind_of(other));
                ParamValue::General
            }
            None => {
                self.fail(&format!("{path}.name"), "a non-empty string", "nothing");
                ParamValue::General
            }
        };
        if training && name.is_general() && self.diags.len() == before {
            self.fail(&format!("{path}.name"), "a concrete name in a training query", "\"*\"");
        }
        let mut params = ParamSet::new();
        match obj.get("params") {
            None | Some(Value::Null) => {}
            Some(Value::Object(map)) => {
                for (k, raw) in map {
                    let at = format!("{path}.params.{k}");
                    let Some(value) = self.token(&at, raw) else { continue };
                    if training && value.is_general() {
                        self.fail(&at, "a concrete value in a training query", "\"*\"");
                        continue;
                    }
                    if let Err(e) = params.set(k.clone(), value) {
                        self.fail(&at, "a valid parameter identifier", e.to_string());
                    }
                }
            }
            Some(other) => self.fail(&format!("{path}.params"), "an object of parameter values", kind_of(other)),
        }
        // A registered learner pins its identifiers.
        if !data_side && !name.is_general() {
            match self.registry.get(name.as_str()) {
                Ok(reg) => {
                    let known: Vec<&str> = reg.spec.schema.identifiers().collect();
                    for id in params.identifiers() {
                        if !known.contains(&id) {
                            self.fail(&format!("{path}.params.{id}"), format!("one of {}", known.join(", ")), format!("unknown parameter {id:?}"));
                        }
                    }
                }
                Err(_) if training => {
                    let mut names = self.registry.names();
                    names.sort_unstable();
                    self.fail(&format!("{path}.name"), format!("a registered learner ({})", names.join(", ")), format!("{:?}", name.as_str()));
                }
                Err(_) => {}
            }
        }
        let mut source = None;
        if let Some(raw) = obj.get("source") {
            if !(training && data_side) {
                self.fail(&format!("{path}.source"), "no source outside training delta entries", kind_of(raw));
            } else {
                match serde_json::from_value::<DataSource>(raw.clone()) {
                    Ok(s) => source = Some(s),
                    Err(e) => self.fail(&format!("{path}.source"), "a synthetic or csv data source", e.to_string()),
                }
            }
        }
        (self.diags.len() == before).then_some(Entry { name, params, source })
    }

    fn output(&mut self, v: Option<&Value>) -> (QueryType, Option<OutputConfig>) {
        let path = "$.output";
        let Some(v) = v else {
            self.fail(path, "an object with measures", "nothing");
            return (QueryType::Test, None);
        };
        let Some(obj) = self.object(path, v, &["type", "format", "measures", "matrix", "task_type_hint"]) else {
            return (QueryType::Test, None);
        };
        let kind = match obj.get("type") {
            None => QueryType::Test,
            Some(Value::String(s)) if s == "test" => QueryType::Test,
            Some(Value::String(s)) if s == "train" => QueryType::Train,
            Some(other) => {
                self.fail("$.output.type", "\"train\" or \"test\"", kind_of(other));
                QueryType::Test
            }
        };
        let format = match obj.get("format") {
            None => Format::Csv,
            Some(raw) => match serde_json::from_value::<Format>(raw.clone()) {
                Ok(f) => f,
                Err(_) => {
                    self.fail("$.output.format", "\"csv\", \"json\" or \"plot\"", kind_of(raw));
                    Format::Csv
                }
            },
        };
        let mut measures = Vec::new();
        match obj.get("measures") {
            Some(Value::Array(items)) if !items.is_empty() => {
                for (i, m) in items.iter().enumerate() {
                    let at = format!("$.output.measures[{i}]");
                    match m.as_str().map(str::parse::<Measure>) {
                        Some(Ok(m)) if !measures.contains(&m) => measures.push(m),
                        Some(Ok(_)) => {}
                        _ => {
                            let ids: Vec<&str> = Measure::ALL.iter().map(|m| m.id()).collect();
                            self.fail(&at, format!("one of {}", ids.join(", ")), kind_of(m));
                        }
                    }
                }
            }
            Some(other) => self.fail("$.output.measures", "a non-empty array of measure ids", kind_of(other)),
            None => self.fail("$.output.measures", "a non-empty array of measure ids", "nothing"),
        }
        let matrix = match obj.get("matrix") {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(other) => {
                self.fail("$.output.matrix", "a boolean", kind_of(other));
                false
            }
        };
        let task_type_hint = match obj.get("task_type_hint") {
            None | Some(Value::Null) => None,
            Some(raw) => match serde_json::from_value::<TaskKind>(raw.clone()) {
                Ok(t) => Some(t),
                Err(_) => {
                    self.fail("$.output.task_type_hint", "\"classification\", \"regression\" or \"clustering\"", kind_of(raw));
                    None
                }
            },
        };
        (kind, Some(OutputConfig { format, measures, matrix, task_type_hint }))
    }
}

/// Parses and validates a query file. All problems are reported at once.
pub fn parse_query(text: &str, registry: &Registry) -> Result<Query, Vec<Diagnostic>> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        vec![Diagnostic::new("$", "well-formed JSON", format!("{e} (line {}, column {})", e.line(), e.column()))]
    })?;
    let mut c = Checker { registry, diags: Vec::new() };
    let Some(obj) = c.object("$", &root, &["id", "lambda", "delta", "output"]) else {
        return Err(c.diags);
    };
    let id = match obj.get("id") {
        Some(Value::String(s)) if !s.trim().is_empty() && !s.contains(['/', '\\']) => s.clone(),
        Some(other) => {
            c.fail("$.id", "a non-empty string without path separators", kind_of(other));
            String::new()
        }
        None => {
            c.fail("$.id", "a non-empty string", "nothing");
            String::new()
        }
    };
    let (kind, output) = c.output(obj.get("output"));
    let training = kind == QueryType::Train;
    let lambda = c.entries("$.lambda", obj.get("lambda"), training, false);
    let delta = c.entries("$.delta", obj.get("delta"), training, true);
    match output {
        Some(output) if c.diags.is_empty() => Ok(Query { id, kind, lambda, delta, output }),
        _ => Err(c.diags),
    }
}

impl Query {
    /// One operation per (λ, δ) pair, in λ-major order. Ids get a `.k`
    /// suffix when there is more than one.
    pub fn expand(&self) -> Vec<Operation> {
        let total = self.lambda.len() * self.delta.len();
        let mut out = Vec::with_capacity(total);
        for a in &self.lambda {
            for d in &self.delta {
                let id = if total == 1 { self.id.clone() } else { format!("{}.{}", self.id, out.len() + 1) };
                let measures = self.output.measures.clone();
                out.push(match self.kind {
                    QueryType::Train => Operation::Train {
                        id,
                        algorithm: ResourceSpec::algorithm(a.name.as_str(), a.params.clone()),
                        data: ResourceSpec::data(d.name.as_str(), d.params.clone()),
                        source: d.source.clone(),
                        measures,
                    },
                    QueryType::Test => Operation::Test {
                        id,
                        algorithms: Criterion { name: a.name.clone(), params: a.params.clone() },
                        data: Criterion { name: d.name.clone(), params: d.params.clone() },
                        measures,
                    },
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> Registry {
        crate::catalog::registry()
    }

    #[test]
    fn worked_example_expands_to_two_operations() {
        let text = r#"{"id": "00",
            "lambda": [{"name": "svm", "params": {"kernel": "rbf"}}, {"name": "c4.5", "params": {}}],
            "delta": [{"name": "iris"}],
            "output": {"type": "test", "format": "plot", "measures": ["accuracy"]}}"#;
        let q = parse_query(text, &reg()).unwrap();
        let ops = q.expand();
        assert_eq!(ops.len(), 2);
        assert_eq!(ops.iter().map(Operation::id).collect::<Vec<_>>(), ["00.1", "00.2"]);
        match &ops[0] {
            Operation::Test { algorithms, data, measures, .. } => {
                assert_eq!(algorithms.name.as_str(), "svm");
                assert_eq!(algorithms.params, ParamSet::of(&[("kernel", "rbf")]));
                assert_eq!(data.name.as_str(), "iris");
                assert_eq!(measures, &[Measure::Accuracy]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_measure_points_at_the_entry() {
        let text = r#"{"id": "q", "lambda": [{"name": "*"}], "delta": [{"name": "*"}],
            "output": {"measures": ["accuracy", "roc_auc"]}}"#;
        let d = parse_query(text, &reg()).unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].path, "$.output.measures[1]");
        assert!(d[0].found.contains("roc_auc"));
        assert!(d[0].expected.contains("accuracy"));
    }

    #[test]
    fn training_rejects_the_general_symbol() {
        let text = r#"{"id": "t", "lambda": [{"name": "*"}, {"name": "SVC", "params": {"kernel": "*"}}],
            "delta": [{"name": "iris", "params": {"type": "train"}}],
            "output": {"type": "train", "measures": ["accuracy"]}}"#;
        let d = parse_query(text, &reg()).unwrap_err();
        let paths: Vec<&str> = d.iter().map(|d| d.path.as_str()).collect();
        assert_eq!(paths, ["$.lambda[0].name", "$.lambda[1].params.kernel"]);
    }

    #[test]
    fn training_checks_the_learner_schema() {
        let text = r#"{"id": "t", "lambda": [{"name": "SVC", "params": {"kernal": "rbf"}}, {"name": "c4.5"}],
            "delta": [{"name": "iris"}], "output": {"type": "train", "measures": ["accuracy"]}}"#;
        let d = parse_query(text, &reg()).unwrap_err();
        assert_eq!(d[0].path, "$.lambda[0].params.kernal");
        assert!(d[0].expected.contains("kernel"));
        assert_eq!(d[1].path, "$.lambda[1].name");
    }

    #[test]
    fn structural_errors_carry_paths() {
        let d = parse_query("[1]", &reg()).unwrap_err();
        assert_eq!((d[0].path.as_str(), d[0].found.as_str()), ("$", "array of 1"));
        let d = parse_query("{\"id\": 3", &reg()).unwrap_err();
        assert_eq!(d[0].path, "$");
        let d = parse_query(r#"{"id": "x", "lambda": [], "delta": [{"name": 4}], "output": {"measures": ["mse"], "colour": 1}}"#, &reg())
            .unwrap_err();
        let paths: Vec<&str> = d.iter().map(|d| d.path.as_str()).collect();
        assert_eq!(paths, ["$.output.colour", "$.lambda", "$.delta[0].name"]);
    }

    #[test]
    fn training_sources_parse() {
        let text = r#"{"id": "t", "lambda": [{"name": "Ridge", "params": {"alpha": 0.5}}],
            "delta": [{"name": "d", "params": {"type": "train"},
                       "source": {"kind": "synthetic", "generator": "diabetes", "seed": 3}}],
            "output": {"type": "train", "measures": ["mse"]}}"#;
        let q = parse_query(text, &reg()).unwrap();
        match &q.expand()[0] {
            Operation::Train { id, algorithm, source, .. } => {
                assert_eq!(id, "t");
                assert_eq!(algorithm.params.get("alpha").unwrap().as_str(), "0.5");
                assert!(matches!(source, Some(DataSource::Synthetic { seed: 3, .. })));
            }
            other => panic!("{other:?}"),
        }
    }
}
