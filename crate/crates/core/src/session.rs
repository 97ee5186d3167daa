//! Owner-side driver shared by the CLI and scenarios: resolves dataset
//! sources, dispatches expanded operations, and pairs outcomes with their
//! output settings.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::ParamSet;
use crate::frontend::{Diagnostic, Operation, OutputConfig, Query, Report};
use crate::holarchy::{EntityKind, ResourceSpec, Side};
use crate::ml::synthetic::{Variant, STAND_INS};
use crate::ml::{DataSource, Dataset};
use crate::protocol::QueryOutcome;
use crate::system::{System, SystemError};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Query(Vec<Diagnostic>),
    #[error("dataset `{name}`: {reason}")]
    Data { name: String, reason: String },
}

/// Resource spec file: `{kind, name, type_chain, params, defaults}`, plus
/// an optional display label and, for data, where the rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceFile {
    pub kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub type_chain: Vec<String>,
    #[serde(default)]
    pub params: ParamSet,
    #[serde(default)]
    pub defaults: ParamSet,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub source: Option<DataSource>,
}

impl ResourceFile {
    pub fn side(&self) -> Result<Side, SessionError> {
        self.kind.side().ok_or_else(|| SystemError::Invalid("model holons cannot be added directly".into()).into())
    }

    pub fn spec(&self) -> ResourceSpec {
        ResourceSpec { entity_kind: self.kind, name: self.name.clone(), type_chain: self.type_chain.clone(), params: self.params.clone(), label: self.label.clone() }
    }
}

pub struct Session {
    sys: System,
    seed: u64,
    cache: BTreeMap<String, Arc<Dataset>>,
    outputs: BTreeMap<String, OutputConfig>,
}

impl Session {
    pub fn new(sys: System, seed: u64) -> Session {
        Session { sys, seed, cache: BTreeMap::new(), outputs: BTreeMap::new() }
    }

    pub fn system(&self) -> &System {
        &self.sys
    }

    pub fn system_mut(&mut self) -> &mut System {
        &mut self.sys
    }

    /// Rows for a data spec: the explicit source if any, else the
    /// synthetic stand-in of that name (the `type` parameter picks the
    /// train or test draw), else none.
    pub fn dataset(&mut self, name: &str, params: &ParamSet, source: Option<&DataSource>) -> Result<Option<Arc<Dataset>>, SessionError> {
        let source = match source {
            Some(s) => s.clone(),
            None if STAND_INS.contains(&name) => {
                let variant = if params.get("type").is_some_and(|t| t.as_str() == "test") { Variant::Test } else { Variant::Train };
                DataSource::synthetic(name, variant, self.seed)
            }
            None => return Ok(None),
        };
        let key = format!("{name}\u{1f}{}", serde_json::to_string(&source).expect("sources serialize"));
        if let Some(d) = self.cache.get(&key) {
            return Ok(Some(d.clone()));
        }
        let d = source.materialize(name).map_err(|e| SessionError::Data { name: name.to_string(), reason: e.to_string() })?;
        let d = Arc::new(d);
        self.cache.insert(key, d.clone());
        Ok(Some(d))
    }

    /// Queues an add-only insert under `id` (a fresh id when absent).
    pub fn submit_add(&mut self, id: Option<&str>, file: &ResourceFile) -> Result<String, SessionError> {
        let side = file.side()?;
        let dataset = match side {
            Side::Data => self.dataset(&file.name, &file.params, file.source.as_ref())?,
            Side::Alg => None,
        };
        let id = id.map(str::to_string).unwrap_or_else(|| self.sys.fresh_id());
        self.sys.submit_add(&id, side, &file.spec(), &file.defaults, dataset)?;
        self.outputs.insert(id.clone(), OutputConfig::new(Default::default(), &[]));
        Ok(id)
    }

    /// Queues one expanded operation. A held training waits for
    /// [`Session::release`] before its second pass.
    pub fn submit(&mut self, op: &Operation, output: &OutputConfig, hold: bool) -> Result<(), SessionError> {
        match op {
            Operation::Train { id, algorithm, data, source, measures } => {
                let dataset = self.dataset(&data.name, &data.params, source.as_ref())?;
                if hold {
                    self.sys.hold(id);
                }
                self.sys.submit_train(id, algorithm, data, dataset, measures)?;
            }
            Operation::Test { id, algorithms, data, measures } => {
                self.sys.submit_test(id, algorithms.clone(), data.clone(), measures)?;
            }
        }
        self.outputs.insert(op.id().to_string(), output.clone());
        Ok(())
    }

    /// Queues every operation of `q` and returns their ids.
    pub fn submit_query(&mut self, q: &Query, hold: bool) -> Result<Vec<String>, SessionError> {
        let ops = q.expand();
        for op in &ops {
            self.submit(op, &q.output, hold)?;
        }
        Ok(ops.iter().map(|o| o.id().to_string()).collect())
    }

    pub fn release(&mut self, id: &str) {
        self.sys.release(id);
    }

    /// Runs to quiescence; reports come back in arrival order.
    pub fn run(&mut self) -> Result<Vec<Report>, SessionError> {
        let outcomes = self.sys.run()?;
        Ok(outcomes.into_iter().map(|o| self.report(o)).collect())
    }

    fn report(&mut self, outcome: QueryOutcome) -> Report {
        let output = self.outputs.remove(&outcome.query_id).unwrap_or_else(|| OutputConfig::new(Default::default(), &[]));
        Report { outcome, output }
    }
}
