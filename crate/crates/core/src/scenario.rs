//! Scripted runs: a JSON list of inserts, queries and checks replayed
//! against one session.
//!
//! ```text
//! scenario = {seed?, deterministic?, config?, steps: [step]}
//! step     = {"step": "add-alg" | "add-data", id?, name, params?, defaults?,
//!             label?, type_chain?, source?, defer?}
//!          | {"step": "train" | "test", query: object | path, hold?, defer?}
//!          | {"step": "release", ids: [string]}
//!          | {"step": "run"}
//!          | {"step": "assert", "assert": kind, ...}
//! ```
//!
//! Every step except `release` runs the system to quiescence unless it
//! sets `defer`; a `run` step flushes deferred work. Held trainings stop
//! after their first pass until released. Holon references are `"SYS"`,
//! `"ALG"`, `"DATA"`, a numeric id, or `{side, name, params}` naming a leaf.
//! Paths are relative to the scenario file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::algebra::ParamSet;
use crate::frontend::{parse_query, Report};
use crate::holarchy::{export_dot, validate, EntityKind, HolonId, HolonKind, Side};
use crate::ml::{DataSource, Measure};
use crate::protocol::Config;
use crate::session::{ResourceFile, Session, SessionError};
use crate::system::{Executor, Options, System, SystemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Validation,
    Runtime,
    Assert,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Runtime => 1,
            ErrorKind::Config => 2,
            ErrorKind::Validation => 3,
            ErrorKind::Assert => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{}{message}", .step.map(|s| format!("step {s}: ")).unwrap_or_default())]
pub struct ScenarioError {
    pub kind: ErrorKind,
    /// Zero-based index into `steps`.
    pub step: Option<usize>,
    pub message: String,
}

impl ScenarioError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> ScenarioError {
        ScenarioError { kind, step: None, message: message.into() }
    }

    fn at(mut self, step: usize) -> ScenarioError {
        self.step.get_or_insert(step);
        self
    }
}

impl From<SessionError> for ScenarioError {
    fn from(e: SessionError) -> Self {
        let kind = match &e {
            SessionError::System(SystemError::Config(_)) | SessionError::Data { .. } => ErrorKind::Config,
            SessionError::System(SystemError::Runtime(_) | SystemError::NoReport(_)) => ErrorKind::Runtime,
            SessionError::System(SystemError::Invalid(_)) | SessionError::Query(_) => ErrorKind::Validation,
        };
        ScenarioError::new(kind, e.to_string())
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default)]
    pub config: Option<Config>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "step", rename_all = "kebab-case")]
pub enum Step {
    AddAlg(AddStep),
    AddData(AddStep),
    Train(QueryStep),
    Test(QueryStep),
    Release { ids: Vec<String> },
    Run,
    Assert(Assertion),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddStep {
    #[serde(default)]
    pub id: Option<String>,
    pub name: String,
    #[serde(default)]
    pub params: ParamSet,
    #[serde(default)]
    pub defaults: ParamSet,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub type_chain: Vec<String>,
    #[serde(default)]
    pub source: Option<DataSource>,
    #[serde(default)]
    pub defer: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryStep {
    pub query: Value,
    #[serde(default)]
    pub hold: bool,
    #[serde(default)]
    pub defer: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum HolonRef {
    Id(u64),
    Name(String),
    Leaf {
        side: Side,
        name: String,
        #[serde(default)]
        params: ParamSet,
    },
}

fn alg_root() -> HolonRef {
    HolonRef::Name("ALG".into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "assert", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Assertion {
    /// The DOT export under `root` equals the fixture file.
    Dot {
        #[serde(default = "alg_root")]
        root: HolonRef,
        #[serde(default)]
        models: bool,
        fixture: PathBuf,
    },
    /// `holon`'s address book sends `query` to `target`.
    Address { holon: HolonRef, query: String, target: HolonRef },
    /// Following `query` from `start` visits `via` (when given) and ends
    /// on a holon of kind `ends_at` (when given).
    Path {
        start: HolonRef,
        query: String,
        #[serde(default)]
        via: Option<Vec<HolonRef>>,
        #[serde(default)]
        ends_at: Option<HolonKind>,
    },
    /// Checks on the reports of `query` and its expanded `query.k` parts.
    Report {
        query: String,
        /// Rows without an error.
        #[serde(default)]
        rows: Option<usize>,
        #[serde(default)]
        errors: Option<usize>,
        #[serde(default)]
        warnings_contain: Vec<String>,
        /// Exact set of algorithm labels among rows without an error.
        #[serde(default)]
        labels: Option<Vec<String>>,
        /// Exact set of measures reported.
        #[serde(default)]
        measures: Option<Vec<Measure>>,
        #[serde(default)]
        incomplete: Option<bool>,
    },
    /// Number of leaves of one side, or of models.
    Count { kind: EntityKind, equals: usize },
    /// The holarchy passes every structural invariant.
    Valid,
    /// Every model in the holarchy has a result row in `query`.
    Covers { query: String },
}

/// What a finished scenario leaves behind.
pub struct ScenarioRun {
    pub session: Session,
    /// Reports in arrival order.
    pub reports: Vec<Report>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::new(ErrorKind::Config, format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::new(ErrorKind::Config, format!("{}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    /// Options implied by the file: its config and seed, with the threaded
    /// executor and timing when not deterministic.
    pub fn options(&self) -> Options {
        let mut config = self.config.clone().unwrap_or_default();
        config.seed = self.seed;
        config.timing = !self.deterministic;
        let mut opts = Options::deterministic(config);
        if !self.deterministic {
            opts.executor = Executor::Threaded(4);
        }
        opts
    }

    /// Replays the steps. `base` anchors relative paths.
    pub fn run(&self, opts: Options, base: &Path) -> Result<ScenarioRun, ScenarioError> {
        let seed = opts.config.seed;
        let sys = System::new(opts, crate::catalog::registry()).map_err(SessionError::from)?;
        let mut run = ScenarioRun { session: Session::new(sys, seed), reports: Vec::new() };
        for (i, step) in self.steps.iter().enumerate() {
            run.step(step, base).map_err(|e| e.at(i))?;
        }
        Ok(run)
    }
}

impl ScenarioRun {
    fn step(&mut self, step: &Step, base: &Path) -> Result<(), ScenarioError> {
        let defer = match step {
            Step::AddAlg(a) | Step::AddData(a) => {
                let kind = if matches!(step, Step::AddAlg(_)) { EntityKind::Algorithm } else { EntityKind::Data };
                let file = ResourceFile {
                    kind,
                    name: a.name.clone(),
                    type_chain: a.type_chain.clone(),
                    params: a.params.clone(),
                    defaults: a.defaults.clone(),
                    label: a.label.clone(),
                    source: a.source.clone().map(|s| rebase(s, base)),
                };
                self.session.submit_add(a.id.as_deref(), &file)?;
                a.defer
            }
            Step::Train(q) | Step::Test(q) => {
                let kind = if matches!(step, Step::Train(_)) { "train" } else { "test" };
                let text = query_text(&q.query, kind, base)?;
                let query = parse_query(&text, self.session.system().registry()).map_err(SessionError::Query)?;
                self.session.submit_query(&query, q.hold)?;
                q.defer
            }
            Step::Release { ids } => {
                for id in ids {
                    self.session.release(id);
                }
                true
            }
            Step::Run => false,
            Step::Assert(a) => return self.check(a, base),
        };
        if !defer {
            self.reports.extend(self.session.run()?);
        }
        Ok(())
    }

    /// Reports whose id is `query` or `query.k`.
    pub fn reports_for(&self, query: &str) -> Vec<&Report> {
        self.reports
            .iter()
            .filter(|r| {
                let id = &r.outcome.query_id;
                id == query || id.strip_prefix(query).and_then(|rest| rest.strip_prefix('.')).is_some_and(|k| k.parse::<u32>().is_ok())
            })
            .collect()
    }

    fn resolve(&self, r: &HolonRef) -> Result<HolonId, ScenarioError> {
        match r {
            HolonRef::Id(n) => Ok(HolonId(*n)),
            HolonRef::Name(s) => s.parse().map_err(|e: String| ScenarioError::new(ErrorKind::Config, e)),
            HolonRef::Leaf { side, name, params } => self
                .session
                .system()
                .find_leaf(*side, name, params)
                .ok_or_else(|| ScenarioError::new(ErrorKind::Assert, format!("no {name} leaf with {params}"))),
        }
    }

    fn check(&self, a: &Assertion, base: &Path) -> Result<(), ScenarioError> {
        let h = self.session.system().snapshot();
        let fail = |msg: String| Err(ScenarioError::new(ErrorKind::Assert, msg));
        match a {
            Assertion::Dot { root, models, fixture } => {
                let path = base.join(fixture);
                let want = std::fs::read_to_string(&path).map_err(|e| ScenarioError::new(ErrorKind::Config, format!("{}: {e}", path.display())))?;
                let got = export_dot(&h, self.resolve(root)?, *models);
                if got.trim_end() != want.trim_end() {
                    return fail(format!("DOT differs from {}:\n{got}", fixture.display()));
                }
            }
            Assertion::Address { holon, query, target } => {
                let (id, want) = (self.resolve(holon)?, self.resolve(target)?);
                let got = h.get(id).and_then(|s| s.address_book.get(query)).copied();
                if got != Some(want) {
                    return fail(format!("{id} maps {query} to {got:?}, expected {want}"));
                }
            }
            Assertion::Path { start, query, via, ends_at } => {
                let path = h.follow_addresses(self.resolve(start)?, query);
                if let Some(via) = via {
                    let want = via.iter().map(|r| self.resolve(r)).collect::<Result<Vec<_>, _>>()?;
                    if path != want {
                        return fail(format!("{query} follows {path:?}, expected {want:?}"));
                    }
                }
                if let Some(kind) = ends_at {
                    let end = path.last().and_then(|id| h.get(*id)).map(|s| s.kind);
                    if end != Some(*kind) {
                        return fail(format!("{query} ends on {end:?}, expected {kind:?}"));
                    }
                }
            }
            Assertion::Report { query, rows, errors, warnings_contain, labels, measures, incomplete } => {
                let reports = self.reports_for(query);
                if reports.is_empty() {
                    return fail(format!("no report for {query}"));
                }
                let all: Vec<_> = reports.iter().flat_map(|r| &r.outcome.rows).collect();
                let ok: Vec<_> = all.iter().filter(|r| r.error.is_none()).collect();
                if let Some(n) = rows {
                    if ok.len() != *n {
                        return fail(format!("{query}: {} rows, expected {n}", ok.len()));
                    }
                }
                if let Some(n) = errors {
                    if all.len() - ok.len() != *n {
                        return fail(format!("{query}: {} error rows, expected {n}", all.len() - ok.len()));
                    }
                }
                let warnings: Vec<&String> = reports.iter().flat_map(|r| &r.outcome.warnings).collect();
                for w in warnings_contain {
                    if !warnings.iter().any(|x| x.contains(w.as_str())) {
                        return fail(format!("{query}: no warning contains `{w}` in {warnings:?}"));
                    }
                }
                if let Some(want) = labels {
                    let got: BTreeSet<&str> = ok.iter().map(|r| r.algorithm_label.as_str()).collect();
                    let want: BTreeSet<&str> = want.iter().map(String::as_str).collect();
                    if got != want {
                        return fail(format!("{query}: labels {got:?}, expected {want:?}"));
                    }
                }
                if let Some(want) = measures {
                    let got: BTreeSet<Measure> = ok.iter().filter_map(|r| r.measure).collect();
                    if got != want.iter().copied().collect() {
                        return fail(format!("{query}: measures {got:?}, expected {want:?}"));
                    }
                }
                if let Some(want) = incomplete {
                    let got = reports.iter().any(|r| r.outcome.incomplete);
                    if got != *want {
                        return fail(format!("{query}: incomplete is {got}"));
                    }
                }
            }
            Assertion::Count { kind, equals } => {
                let got = match kind.side() {
                    Some(side) => h.leaves(side).len(),
                    None => h.count_kind(HolonKind::Model),
                };
                if got != *equals {
                    return fail(format!("{} {kind:?} holons, expected {equals}", got));
                }
            }
            Assertion::Valid => {
                let problems = validate(&h);
                if !problems.is_empty() {
                    return fail(format!("invalid holarchy: {problems:?}"));
                }
            }
            Assertion::Covers { query } => {
                let seen: BTreeSet<HolonId> =
                    self.reports_for(query).iter().flat_map(|r| &r.outcome.rows).filter(|r| r.error.is_none()).map(|r| r.model_id).collect();
                let missing: Vec<HolonId> = h.iter().filter(|s| s.kind == HolonKind::Model && !seen.contains(&s.id)).map(|s| s.id).collect();
                if !missing.is_empty() {
                    return fail(format!("{query} misses models {missing:?}"));
                }
            }
        }
        Ok(())
    }
}

// Inline queries are objects; strings name a query file. The step decides
// the query type, so a conflicting `output.type` is an error.
fn query_text(raw: &Value, kind: &str, base: &Path) -> Result<String, ScenarioError> {
    let mut v = match raw {
        Value::String(p) => {
            let path = base.join(p);
            let text = std::fs::read_to_string(&path).map_err(|e| ScenarioError::new(ErrorKind::Config, format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| ScenarioError::new(ErrorKind::Validation, format!("{}: {e}", path.display())))?
        }
        other => other.clone(),
    };
    if let Some(output) = v.get_mut("output").and_then(Value::as_object_mut) {
        match output.get("type").and_then(Value::as_str) {
            Some(t) if t != kind => return Err(ScenarioError::new(ErrorKind::Validation, format!("a {kind} step carries a {t} query"))),
            _ => {
                output.insert("type".into(), Value::String(kind.into()));
            }
        }
    }
    Ok(v.to_string())
}

fn rebase(source: DataSource, base: &Path) -> DataSource {
    match source {
        DataSource::Csv { path, descriptor } if path.is_relative() => DataSource::Csv { path: base.join(path), descriptor },
        other => other,
    }
}

/// Measured values of a report set keyed by (algorithm label, dataset,
/// measure), for comparisons across runs.
pub fn values(reports: &[&Report]) -> BTreeMap<(String, String, Measure), f64> {
    reports
        .iter()
        .flat_map(|r| &r.outcome.rows)
        .filter_map(|r| Some(((r.algorithm_label.clone(), r.dataset.clone(), r.measure?), r.value?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<ScenarioRun, ScenarioError> {
        let s = Scenario::parse(text)?;
        s.run(s.options(), Path::new("."))
    }

    #[test]
    fn assertions_pass_and_fail_with_the_step_index() {
        let ok = run(r#"{"steps": [
            {"step": "add-alg", "name": "Ridge", "params": {"alpha": "1", "fit_intercept": "true"}, "label": "R"},
            {"step": "train", "query": {"id": "t", "lambda": [{"name": "Ridge", "params": {"alpha": "1"}}],
                "delta": [{"name": "diabetes", "params": {"type": "train"}}], "output": {"measures": ["mse"]}}},
            {"step": "assert", "assert": "report", "query": "t", "rows": 1, "labels": ["R"], "measures": ["mse"]},
            {"step": "assert", "assert": "count", "kind": "model", "equals": 1},
            {"step": "assert", "assert": "path", "start": "ALG", "query": "t", "ends_at": "Model"},
            {"step": "assert", "assert": "valid"}
        ]}"#);
        assert!(ok.is_ok(), "{}", ok.err().unwrap());

        let err = run(r#"{"steps": [{"step": "run"}, {"step": "assert", "assert": "count", "kind": "data", "equals": 2}]}"#).err().unwrap();
        assert_eq!((err.kind, err.step), (ErrorKind::Assert, Some(1)));
        assert_eq!(err.kind.exit_code(), 4);
    }

    #[test]
    fn step_type_and_query_type_must_agree() {
        let err = run(r#"{"steps": [{"step": "train", "query": {"id": "t", "lambda": [{"name": "Ridge"}],
            "delta": [{"name": "iris"}], "output": {"type": "test", "measures": ["mse"]}}}]}"#)
        .err()
        .unwrap();
        assert_eq!((err.kind, err.step), (ErrorKind::Validation, Some(0)));
        let err = run(r#"{"steps": [{"step": "dance"}]}"#).err().unwrap();
        assert_eq!(err.kind.exit_code(), 2);
    }
}
