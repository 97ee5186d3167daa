//! Message vocabulary and the single holon actor that speaks it.
//!
//! Every multi-step exchange (CFP rounds, lookups, fan-outs, the two
//! training passes) is a continuation stored in the holon's pending table
//! under a ticket that the reply echoes back.

mod construct;
mod holon;
mod query;
mod sys;
mod train;

pub use holon::{Holon, Role};

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::algebra::{leq, ParamPair, ParamSet, ParamValue, SimilarityConfig};
use crate::holarchy::{HolonId, ResourceSpec, Side, SkillEntry};
use crate::ml::{Dataset, Measure};
use crate::runtime::{Message, Performative};

/// Knobs shared by every holon of one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub similarity: SimilarityConfig,
    /// Exact-match lookup inside the family before similarity placement.
    pub exact_lookup: bool,
    /// Collect every proposal instead of stopping at the first winner.
    pub strict_cfp: bool,
    /// Test gate requires a data skill named exactly like the query's data
    /// name instead of one the name admits; a general name then admits
    /// nothing.
    pub strict_skill: bool,
    #[serde(with = "secs")]
    pub proposal_timeout: Duration,
    #[serde(with = "secs")]
    pub branch_timeout: Duration,
    pub seed: u64,
    /// Record wall-clock fit/evaluate times. Off in deterministic runs so
    /// reports stay byte-identical.
    pub timing: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            similarity: SimilarityConfig::default(),
            exact_lookup: true,
            strict_cfp: false,
            strict_skill: false,
            proposal_timeout: Duration::from_secs(5),
            branch_timeout: Duration::from_secs(30),
            seed: 0,
            timing: false,
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let x = f64::deserialize(d)?;
        Duration::try_from_secs_f64(x).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Test,
}

/// One reported measurement, or one error line when `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub query_id: String,
    pub phase: Phase,
    pub algorithm_id: HolonId,
    pub algorithm_label: String,
    pub algorithm_name: String,
    pub algorithm_params: ParamSet,
    pub model_id: HolonId,
    pub dataset: String,
    pub dataset_id: HolonId,
    pub dataset_params: ParamSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Measure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRow {
    /// Report order: dataset, then algorithm label, then measure. Unlabeled
    /// `id:name` labels sort numerically.
    pub fn sort_key(&self) -> (String, String, String, u64, u64) {
        let label = match self.algorithm_label.split_once(':') {
            Some((id, rest)) if id.bytes().all(|b| b.is_ascii_digit()) => format!("{id:0>20}:{rest}"),
            _ => self.algorithm_label.clone(),
        };
        (
            self.dataset.clone(),
            label,
            self.measure.map(|m| m.id().to_string()).unwrap_or_default(),
            self.dataset_id.0,
            self.model_id.0,
        )
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by_key(|r| r.sort_key());
}

/// Where an insert ended up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "holon", rename_all = "snake_case")]
pub enum Placement {
    Existing(HolonId),
    NewLeaf(HolonId),
    /// Training pair already has a model under this leaf.
    Duplicate(HolonId),
    Failed(String),
}

impl Placement {
    pub fn leaf(&self) -> Option<HolonId> {
        match self {
            Placement::Existing(h) | Placement::NewLeaf(h) | Placement::Duplicate(h) => Some(*h),
            Placement::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Add,
    Train,
    Test,
}

/// Everything SYS reports back for one query id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_id: String,
    pub kind: QueryKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub placements: Vec<(Side, Placement)>,
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
    /// Some branch timed out; rows are a subset of the full answer.
    #[serde(default)]
    pub incomplete: bool,
}

impl QueryOutcome {
    pub fn new(query_id: &str, kind: QueryKind) -> QueryOutcome {
        QueryOutcome { query_id: query_id.to_string(), kind, placements: Vec::new(), rows: Vec::new(), warnings: Vec::new(), incomplete: false }
    }

    pub fn placement(&self, side: Side) -> Option<&Placement> {
        self.placements.iter().find(|(s, _)| *s == side).map(|(_, p)| p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    AddOnly,
    /// First training pass; the alg side carries the companion data spec
    /// for duplicate detection.
    Train { companion: Option<ResourceSpec> },
}

#[derive(Debug, Clone)]
pub struct InsertReq {
    pub query: String,
    pub side: Side,
    /// Already normalized to the family schema.
    pub spec: ResourceSpec,
    pub mode: Mode,
    pub dataset: Option<Arc<Dataset>>,
}

impl InsertReq {
    pub fn family(&self) -> &str {
        &self.spec.name
    }

    pub(crate) fn training(&self) -> bool {
        matches!(self.mode, Mode::Train { .. })
    }
}

/// `(name, params)` selection criterion; either part may be general.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: ParamValue,
    pub params: ParamSet,
}

impl Criterion {
    pub fn new(name: &str, params: ParamSet) -> Criterion {
        Criterion { name: ParamValue::parse(name), params }
    }

    pub fn any() -> Criterion {
        Criterion { name: ParamValue::General, params: ParamSet::new() }
    }

    /// Name leq plus parameter leq against a holon's name and capability.
    pub fn admits(&self, name: &str, capability: &ParamSet) -> bool {
        self.name_admits(name) && leq(&self.params, capability)
    }

    pub fn name_admits(&self, name: &str) -> bool {
        self.name.compatible(&ParamValue::literal(name))
    }

    pub fn name_pair(&self) -> ParamPair {
        ParamPair::name(self.name.clone())
    }
}

/// A data holon that matched a test query's data criterion.
#[derive(Debug, Clone)]
pub struct ResolvedData {
    pub id: HolonId,
    pub name: String,
    pub params: ParamSet,
    pub dataset: Option<Arc<Dataset>>,
}

#[derive(Debug, Clone)]
pub struct TestReq {
    pub query: String,
    pub algorithms: Criterion,
    pub data: Criterion,
    pub measures: Vec<Measure>,
}

#[derive(Debug, Clone)]
pub struct TrainReq {
    pub query: String,
    pub algorithm: ResourceSpec,
    pub data: ResourceSpec,
    pub dataset: Option<Arc<Dataset>>,
    pub measures: Vec<Measure>,
}

#[derive(Debug, Clone)]
pub struct Msg {
    pub conv: Arc<str>,
    pub body: Body,
}

impl Msg {
    pub fn new(conv: &str, body: Body) -> Msg {
        Msg { conv: Arc::from(conv), body }
    }

    pub(crate) fn reply(&self, body: Body) -> Msg {
        Msg { conv: self.conv.clone(), body }
    }
}

#[derive(Debug, Clone)]
pub enum CfpCriterion {
    Name(String),
    Params(ParamSet),
}

#[derive(Debug, Clone)]
pub enum Body {
    // requests injected at SYS
    SubmitAdd(InsertReq),
    SubmitTrain(TrainReq),
    SubmitTest(TestReq),
    Hold,
    Release,

    // construction
    Insert(InsertReq),
    Cfp { ticket: u64, criterion: CfpCriterion },
    Propose { ticket: u64, score: f64 },
    Lookup { ticket: u64, params: ParamSet },
    LookupResult { ticket: u64, found: Option<HolonId> },
    Add(InsertReq),
    CreateHolon { ticket: u64, name: String, capability: ParamSet, skills: std::collections::BTreeSet<SkillEntry> },
    NewSuper { ticket: u64, id: HolonId, level: u32 },
    Adopt { sub: HolonId, capability: ParamSet, family: String, side: Side },
    Level(u32),
    Settle(InsertReq),
    /// Capability change travelling up after an insert finished.
    Inserted { family: String, side: Side, placement: Placement, capability: ParamSet },
    Placed { side: Side, placement: Placement },

    // training
    InformAddress { side: Side, dest: HolonId },
    SecondPass { side: Side, target: HolonId, companion: HolonId, measures: Vec<Measure>, cancel: bool },
    Access { ticket: u64 },
    Grant { ticket: u64, name: String, capability: ParamSet, dataset: Arc<Dataset> },
    Deny { ticket: u64, reason: String },
    JoinData { model: HolonId, entry: SkillEntry },
    Skill(SkillEntry),
    Trained { model: HolonId, rows: Vec<ResultRow>, data_entry: Option<SkillEntry> },
    TrainResult { rows: Vec<ResultRow>, data_entry: Option<SkillEntry> },

    // testing
    ResolveData { ticket: u64, criterion: Criterion },
    Resolved { ticket: u64, items: Vec<ResolvedData>, incomplete: bool },
    Test { ticket: u64, criterion: Criterion, data_name: ParamValue, resolved: Arc<Vec<ResolvedData>>, measures: Vec<Measure> },
    TestResults { ticket: u64, rows: Vec<ResultRow>, incomplete: bool },

    Report(Box<QueryOutcome>),
    Timeout { ticket: u64, child: Option<HolonId> },
    Undeliverable { ticket: Option<u64>, verb: &'static str },
}

impl Message for Msg {
    fn performative(&self) -> Performative {
        use Body::*;
        match &self.body {
            Cfp { .. } => Performative::Cfp,
            Propose { .. } => Performative::Propose,
            NewSuper { .. } | Adopt { .. } | Level(_) | Inserted { .. } | Placed { .. } | Skill(_) | Timeout { .. } => {
                Performative::Inform
            }
            LookupResult { .. } | Grant { .. } | Deny { .. } | Trained { .. } | TrainResult { .. } | Resolved { .. }
            | TestResults { .. } | Report(_) | Undeliverable { .. } => Performative::Result,
            _ => Performative::Ask,
        }
    }

    fn verb(&self) -> &'static str {
        use Body::*;
        match &self.body {
            SubmitAdd(_) => "SUBMIT-ADD",
            SubmitTrain(_) => "SUBMIT-TRAIN",
            SubmitTest(_) => "SUBMIT-TEST",
            Hold => "HOLD",
            Release => "RELEASE",
            Insert(r) | Add(r) if r.training() => "TRAIN FIRST PASS",
            Insert(_) | Add(_) => "ADD",
            Cfp { .. } => "CFP",
            Propose { .. } => "PROPOSE",
            Lookup { .. } => "LOOKUP",
            LookupResult { .. } => "LOOKUP-RESULT",
            CreateHolon { .. } => "CREATE-HOLON",
            NewSuper { .. } => "NEW-SUPER",
            Adopt { .. } => "JOIN",
            Level(_) => "LEVEL",
            Settle(_) => "SPAWN",
            Inserted { .. } => "CAPABILITY",
            Placed { .. } => "PLACED",
            InformAddress { .. } => "INFORM-ADDRESS",
            SecondPass { .. } => "TRAIN SECOND PASS",
            Access { .. } => "ACCESS",
            Grant { .. } => "GRANT",
            Deny { .. } => "DENY",
            JoinData { .. } => "JOIN-DATA",
            Skill(_) => "SKILL",
            Trained { .. } => "TRAINED",
            TrainResult { .. } => "RESULTS",
            ResolveData { .. } => "RESOLVE-DATA",
            Resolved { .. } => "RESOLVED",
            Test { .. } => "TEST",
            TestResults { .. } => "RESULTS",
            Report(_) => "REPORT",
            Timeout { .. } => "TIMEOUT",
            Undeliverable { .. } => "UNDELIVERABLE",
        }
    }

    fn conversation(&self) -> &str {
        &self.conv
    }

    fn summary(&self) -> String {
        use Body::*;
        match &self.body {
            Insert(r) | Add(r) | Settle(r) => format!("{} {}", self.verb(), r.spec.display()),
            Cfp { criterion: CfpCriterion::Name(n), .. } => format!("CFP name={n}"),
            Cfp { criterion: CfpCriterion::Params(p), .. } => format!("CFP {p}"),
            Propose { score, .. } => format!("PROPOSE {score}"),
            Lookup { params, .. } => format!("LOOKUP {params}"),
            LookupResult { found, .. } => format!("LOOKUP-RESULT {found:?}"),
            NewSuper { id, level, .. } => format!("NEW-SUPER {id} level {level}"),
            Adopt { sub, .. } => format!("JOIN {sub}"),
            Inserted { placement, capability, .. } => format!("CAPABILITY {capability} {placement:?}"),
            Placed { side, placement } => format!("PLACED {side:?} {placement:?}"),
            InformAddress { side, dest } => format!("INFORM-ADDRESS {side:?} {dest}"),
            SecondPass { target, companion, cancel, .. } => format!("TRAIN SECOND PASS {target} with {companion} cancel={cancel}"),
            Resolved { items, .. } => format!("RESOLVED {}", items.len()),
            TestResults { rows, .. } => format!("RESULTS {}", rows.len()),
            TrainResult { rows, .. } => format!("RESULTS {}", rows.len()),
            _ => self.verb().to_string(),
        }
    }

    fn undeliverable(&self, _to: HolonId) -> Option<Msg> {
        use Body::*;
        let ticket = match &self.body {
            Cfp { ticket, .. } | Lookup { ticket, .. } | CreateHolon { ticket, .. } | Access { ticket } => Some(*ticket),
            ResolveData { ticket, .. } | Test { ticket, .. } => Some(*ticket),
            Undeliverable { .. } | Timeout { .. } | Report(_) => return None,
            _ => None,
        };
        Some(self.reply(Undeliverable { ticket, verb: self.verb() }))
    }
}
