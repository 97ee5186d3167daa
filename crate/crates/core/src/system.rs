//! Owner-side facade: builds the runtime with SYS, ALG and DATA, normalizes
//! requests against family schemas, and collects per-query outcomes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{ParamSet, ParamValue};
use crate::holarchy::{EntityKind, Holarchy, HolonId, HolonKind, ResourceSpec, Side};
use crate::ml::{Dataset, Measure, Registry};
use crate::protocol::{Body, Config, Criterion, Holon, InsertReq, Mode, Msg, QueryOutcome, TestReq, TrainReq};
use crate::runtime::{Deterministic, Envelope, HopTrace, Policy, RunStats, Runtime, RuntimeError, Threaded, TraceLevel, TraceLine};

#[derive(Debug, Error)]
pub enum SystemError {
    /// Bad configuration or an unusable resource description.
    #[error("configuration error: {0}")]
    Config(String),
    /// A request that fails structural validation.
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("query {0} produced no report")]
    NoReport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executor {
    Deterministic(Policy),
    Threaded(usize),
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: Config,
    pub executor: Executor,
    pub trace: TraceLevel,
}

impl Default for Options {
    fn default() -> Self {
        Options { config: Config::default(), executor: Executor::Deterministic(Policy::Fifo), trace: TraceLevel::Counters }
    }
}

impl Options {
    pub fn deterministic(config: Config) -> Options {
        Options { config, ..Options::default() }
    }
}

/// Parameter identifiers a family was declared with, and their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub identifiers: BTreeSet<String>,
    pub defaults: ParamSet,
}

pub struct System {
    rt: Box<dyn Runtime<Holon>>,
    cfg: Arc<Config>,
    registry: Arc<Registry>,
    families: BTreeMap<(Side, String), Family>,
    used_ids: BTreeSet<String>,
    next_query: u64,
    reports: BTreeMap<String, QueryOutcome>,
}

fn runtime(opts: &Options) -> Box<dyn Runtime<Holon>> {
    match opts.executor {
        Executor::Deterministic(p) => Box::new(Deterministic::new(p, opts.trace)),
        Executor::Threaded(n) => Box::new(Threaded::new(n, opts.trace)),
    }
}

impl System {
    /// A bootstrapped system: SYS over the empty ALG and DATA roots.
    pub fn new(opts: Options, registry: Registry) -> Result<System, SystemError> {
        opts.config.similarity.validate().map_err(|e| SystemError::Config(e.to_string()))?;
        let cfg = Arc::new(opts.config.clone());
        let registry = Arc::new(registry);
        let mut rt = runtime(&opts);
        rt.spawn(HolonId::SYS, Holon::sys(cfg.clone(), registry.clone()));
        rt.spawn(HolonId::ALG, Holon::root(Side::Alg, cfg.clone(), registry.clone()));
        rt.spawn(HolonId::DATA, Holon::root(Side::Data, cfg.clone(), registry.clone()));
        Ok(System { rt, cfg, registry, families: BTreeMap::new(), used_ids: BTreeSet::new(), next_query: 1, reports: BTreeMap::new() })
    }

    /// Rebuilds actors from a quiesced snapshot. Datasets and fitted models
    /// are not part of snapshots; family schemas are recovered from the
    /// level-2 holons.
    pub fn from_snapshot(h: &Holarchy, opts: Options, registry: Registry) -> Result<System, SystemError> {
        opts.config.similarity.validate().map_err(|e| SystemError::Config(e.to_string()))?;
        for root in [HolonId::SYS, HolonId::ALG, HolonId::DATA] {
            if h.get(root).is_none() {
                return Err(SystemError::Config(format!("snapshot lacks the {root} holon")));
            }
        }
        let cfg = Arc::new(opts.config.clone());
        let registry = Arc::new(registry);
        let mut rt = runtime(&opts);
        let ids = rt.ids();
        for state in h.iter() {
            ids.reserve_past(state.id);
            let models: BTreeSet<HolonId> = h.model_subs(state.id).into_iter().collect();
            rt.spawn(state.id, Holon::from_state(state.clone(), models, cfg.clone(), registry.clone()));
        }
        let mut families = BTreeMap::new();
        for side in [Side::Alg, Side::Data] {
            for id in h.tree_subs(side.root()) {
                let s = h.get(id).expect("tree sub exists");
                let identifiers = s.capability.identifiers().map(str::to_string).collect();
                families.entry((side, s.name.clone())).or_insert(Family { identifiers, defaults: ParamSet::new() });
            }
        }
        let used_ids = h.iter().flat_map(|s| s.address_book.keys().cloned()).collect();
        Ok(System { rt, cfg, registry, families, used_ids, next_query: 1, reports: BTreeMap::new() })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn family(&self, side: Side, name: &str) -> Option<&Family> {
        self.families.get(&(side, name.to_string()))
    }

    /// Next unused `qN` id.
    pub fn fresh_id(&mut self) -> String {
        loop {
            let id = format!("q{}", self.next_query);
            self.next_query += 1;
            if !self.used_ids.contains(&id) {
                return id;
            }
        }
    }

    fn claim_id(&mut self, id: &str) -> Result<(), SystemError> {
        if id.is_empty() {
            return Err(SystemError::Invalid("query id must not be empty".into()));
        }
        if !self.used_ids.insert(id.to_string()) {
            return Err(SystemError::Invalid(format!("query id {id} was already used")));
        }
        Ok(())
    }

    /// Pads `spec` to its family schema. The first spec of a family fixes
    /// the schema: the registered learner's schema when there is one,
    /// otherwise the spec's own identifiers plus `defaults`.
    pub fn normalize(&mut self, side: Side, spec: &ResourceSpec, defaults: &ParamSet) -> Result<ResourceSpec, SystemError> {
        if spec.entity_kind != side.entity() {
            return Err(SystemError::Invalid(format!("{} is a {:?} spec, expected {:?}", spec.name, spec.entity_kind, side.entity())));
        }
        if spec.name.is_empty() || ParamValue::parse(&spec.name).is_general() {
            return Err(SystemError::Invalid(format!("`{}` is not a valid resource name", spec.name)));
        }
        let key = (side, spec.name.clone());
        let family = match self.families.get(&key) {
            Some(f) => f.clone(),
            None => match (side, self.registry.get(&spec.name)) {
                (Side::Alg, Ok(reg)) => Family { identifiers: reg.spec.schema.identifiers().map(str::to_string).collect(), defaults: reg.spec.schema.clone() },
                _ => {
                    let mut identifiers: BTreeSet<String> = spec.params.identifiers().map(str::to_string).collect();
                    identifiers.extend(defaults.identifiers().map(str::to_string));
                    Family { identifiers, defaults: defaults.clone() }
                }
            },
        };
        if let Some(bad) = spec.params.identifiers().find(|p| !family.identifiers.contains(*p)) {
            return Err(SystemError::Invalid(format!(
                "{} has no parameter `{bad}`; known: {}",
                spec.name,
                family.identifiers.iter().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
        let mut params = spec.params.clone();
        for id in &family.identifiers {
            if params.contains_param(id) {
                continue;
            }
            let value = defaults.get(id).or_else(|| family.defaults.get(id)).cloned().ok_or_else(|| {
                SystemError::Invalid(format!("{} is missing `{id}` and no default is known", spec.name))
            })?;
            params.set(id.clone(), value).map_err(|e| SystemError::Invalid(e.to_string()))?;
        }
        self.families.entry(key).or_insert(family);
        Ok(ResourceSpec { params, ..spec.clone() })
    }

    fn inject(&mut self, query: &str, body: Body) {
        self.rt.inject(Envelope::new(HolonId::EXTERNAL, HolonId::SYS, Msg::new(query, body)));
    }

    /// Queues an add-only insert. Nothing runs until [`System::run`].
    pub fn submit_add(&mut self, query: &str, side: Side, spec: &ResourceSpec, defaults: &ParamSet, dataset: Option<Arc<Dataset>>) -> Result<(), SystemError> {
        let spec = self.normalize(side, spec, defaults)?;
        self.claim_id(query)?;
        let req = InsertReq { query: query.to_string(), side, spec, mode: Mode::AddOnly, dataset };
        self.inject(query, Body::SubmitAdd(req));
        Ok(())
    }

    pub fn submit_train(
        &mut self,
        query: &str,
        algorithm: &ResourceSpec,
        data: &ResourceSpec,
        dataset: Option<Arc<Dataset>>,
        measures: &[Measure],
    ) -> Result<(), SystemError> {
        let algorithm = self.normalize(Side::Alg, algorithm, &ParamSet::new())?;
        let data = self.normalize(Side::Data, data, &ParamSet::new())?;
        for s in [&algorithm, &data] {
            if !s.params.is_concrete() {
                return Err(SystemError::Invalid(format!("training needs concrete parameters, got {}", s.display())));
            }
        }
        if !self.registry.contains(&algorithm.name) {
            return Err(SystemError::Invalid(format!("no learner named `{}` is registered", algorithm.name)));
        }
        self.claim_id(query)?;
        let req = TrainReq { query: query.to_string(), algorithm, data, dataset, measures: measures.to_vec() };
        self.inject(query, Body::SubmitTrain(req));
        Ok(())
    }

    pub fn submit_test(&mut self, query: &str, algorithms: Criterion, data: Criterion, measures: &[Measure]) -> Result<(), SystemError> {
        self.claim_id(query)?;
        let req = TestReq { query: query.to_string(), algorithms, data, measures: measures.to_vec() };
        self.inject(query, Body::SubmitTest(req));
        Ok(())
    }

    /// Keeps the second training pass of `query` from starting until
    /// [`System::release`]. Must be submitted before the query itself.
    pub fn hold(&mut self, query: &str) {
        self.inject(query, Body::Hold);
    }

    pub fn release(&mut self, query: &str) {
        self.inject(query, Body::Release);
    }

    /// Runs until quiescent and returns the reports that arrived, in
    /// arrival order.
    pub fn run(&mut self) -> Result<Vec<QueryOutcome>, SystemError> {
        self.run_stats().map(|(o, _)| o)
    }

    pub fn run_stats(&mut self) -> Result<(Vec<QueryOutcome>, RunStats), SystemError> {
        let stats = self.rt.run()?;
        let mut out = Vec::new();
        for env in self.rt.drain_external() {
            if let Body::Report(o) = env.payload.body {
                self.reports.insert(o.query_id.clone(), (*o).clone());
                out.push(*o);
            }
        }
        Ok((out, stats))
    }

    fn run_one(&mut self, query: &str) -> Result<QueryOutcome, SystemError> {
        self.run()?;
        self.reports.remove(query).ok_or_else(|| SystemError::NoReport(query.to_string()))
    }

    /// Report for `query` from an earlier run, if any.
    pub fn take_report(&mut self, query: &str) -> Option<QueryOutcome> {
        self.reports.remove(query)
    }

    pub fn add_algorithm(&mut self, spec: &ResourceSpec) -> Result<QueryOutcome, SystemError> {
        let q = self.fresh_id();
        self.submit_add(&q, Side::Alg, spec, &ParamSet::new(), None)?;
        self.run_one(&q)
    }

    pub fn add_data(&mut self, spec: &ResourceSpec, dataset: Option<Arc<Dataset>>) -> Result<QueryOutcome, SystemError> {
        let q = self.fresh_id();
        self.submit_add(&q, Side::Data, spec, &ParamSet::new(), dataset)?;
        self.run_one(&q)
    }

    pub fn train(&mut self, algorithm: &ResourceSpec, data: &ResourceSpec, dataset: Option<Arc<Dataset>>, measures: &[Measure]) -> Result<QueryOutcome, SystemError> {
        let q = self.fresh_id();
        self.submit_train(&q, algorithm, data, dataset, measures)?;
        self.run_one(&q)
    }

    pub fn test(&mut self, algorithms: Criterion, data: Criterion, measures: &[Measure]) -> Result<QueryOutcome, SystemError> {
        let q = self.fresh_id();
        self.submit_test(&q, algorithms, data, measures)?;
        self.run_one(&q)
    }

    /// Copies every holon's state. Only meaningful between runs.
    pub fn snapshot(&self) -> Holarchy {
        let mut h = Holarchy::default();
        self.rt.visit(&mut |_, a: &Holon| h.insert(a.state.clone()));
        h
    }

    /// Ids of the leaf that holds the given exact spec, if one exists.
    pub fn find_leaf(&self, side: Side, name: &str, params: &ParamSet) -> Option<HolonId> {
        let kind = side.holon_kind();
        let mut found = None;
        self.rt.visit(&mut |id, a: &Holon| {
            if found.is_none() && a.state.kind == kind && a.is_atomic() && a.state.name == name && a.state.capability == *params {
                found = Some(id);
            }
        });
        found
    }

    pub fn mute(&mut self, id: HolonId, muted: bool) {
        self.rt.set_muted(id, muted);
    }

    pub fn retire(&mut self, id: HolonId) {
        self.rt.retire(id);
    }

    /// Fault injection: the data holon refuses access requests.
    pub fn deny_access(&mut self, id: HolonId, deny: bool) -> bool {
        self.rt.with_actor(id, &mut |a| a.set_deny_access(deny))
    }

    /// Attaches rows to an existing data holon (snapshots drop them).
    pub fn attach_dataset(&mut self, id: HolonId, dataset: Arc<Dataset>) -> bool {
        let mut ok = false;
        self.rt.with_actor(id, &mut |a| {
            if a.state.kind == HolonKind::Data {
                ok = a.attach_dataset(dataset.clone());
            }
        });
        ok
    }

    pub fn traces(&self) -> BTreeMap<String, HopTrace> {
        self.rt.traces()
    }

    pub fn take_log(&mut self) -> Vec<TraceLine> {
        self.rt.take_log()
    }

    pub fn clear_traces(&mut self) {
        self.rt.clear_traces();
    }
}

/// Shorthand for a resource spec whose entity kind follows from the side.
pub fn spec(side: Side, name: &str, params: ParamSet) -> ResourceSpec {
    match side.entity() {
        EntityKind::Algorithm => ResourceSpec::algorithm(name, params),
        _ => ResourceSpec::data(name, params),
    }
}
