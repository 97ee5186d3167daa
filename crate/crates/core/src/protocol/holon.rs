use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use super::sys::SysData;
use super::{Body, CfpCriterion, Config, InsertReq, Msg, ResolvedData, ResultRow};
use crate::holarchy::{HolonId, HolonKind, HolonState, Side};
use crate::ml::{Dataset, FittedModel, Registry};
use crate::runtime::{Actor, Ctx, Envelope, TimerId};

/// One agent of the holarchy. SYS, the abstract roots, algorithm and data
/// holons and models all share this type and differ by [`Role`].
pub struct Holon {
    pub state: HolonState,
    pub role: Role,
    pub(crate) cfg: Arc<Config>,
    pub(crate) registry: Arc<Registry>,
    next_ticket: u64,
    pub(crate) pending: BTreeMap<u64, Pending>,
}

pub enum Role {
    Sys(SysData),
    Root(RootData),
    Node(NodeData),
    Model(ModelData),
}

/// Per-family insert serialization at ALG and DATA.
#[derive(Default)]
pub struct RootData {
    pub side: Option<Side>,
    pub(crate) busy: BTreeSet<String>,
    pub(crate) queue: BTreeMap<String, VecDeque<InsertReq>>,
}

#[derive(Default)]
pub struct NodeData {
    /// Model subs; every other sub is a tree sub.
    pub models: BTreeSet<HolonId>,
    /// Model id to the `name{params}` key of the data it trains on, used for
    /// duplicate detection.
    pub records: BTreeMap<HolonId, String>,
    pub dataset: Option<Arc<Dataset>>,
    /// Fault injection: refuse every access request.
    pub deny_access: bool,
}

#[derive(Default)]
pub struct ModelData {
    pub query: String,
    pub fitted: Option<FittedModel>,
    pub data: Option<(HolonId, String, crate::algebra::ParamSet)>,
}

pub(crate) enum CfpPurpose {
    /// Root-level family routing.
    Name(InsertReq),
    /// Similarity placement inside a family, against the holon's own score.
    Place { req: InsertReq, own: f64 },
}

impl CfpPurpose {
    pub(crate) fn wins(&self, score: f64) -> bool {
        match self {
            CfpPurpose::Name(_) => score >= 1.0,
            CfpPurpose::Place { own, .. } => score > *own,
        }
    }
}

pub(crate) struct CfpRound {
    pub purpose: CfpPurpose,
    pub criterion: CfpCriterion,
    pub queue: VecDeque<HolonId>,
    pub outstanding: BTreeMap<HolonId, TimerId>,
    pub best: Option<(f64, HolonId)>,
    pub winner: Option<HolonId>,
}

pub(crate) enum GatherKind {
    Lookup(Option<HolonId>),
    Resolve(Vec<ResolvedData>),
    Test(Vec<ResultRow>),
}

pub(crate) struct Gather {
    pub reply_to: HolonId,
    pub reply_ticket: u64,
    pub outstanding: BTreeSet<HolonId>,
    pub kind: GatherKind,
    pub incomplete: bool,
    pub timer: Option<TimerId>,
}

pub(crate) enum Pending {
    Cfp(CfpRound),
    /// Root waiting for the family holon's exact-match answer.
    RootLookup { req: InsertReq, family_holon: HolonId, timer: TimerId },
    Gather(Gather),
    /// Atomic holon waiting for its new super.
    Create { req: InsertReq },
    /// Model waiting for the data holon's grant.
    Access { companion: HolonId, measures: Vec<crate::ml::Measure> },
    SysResolve,
    SysTest,
}

impl Holon {
    pub fn new(state: HolonState, role: Role, cfg: Arc<Config>, registry: Arc<Registry>) -> Holon {
        Holon { state, role, cfg, registry, next_ticket: 1, pending: BTreeMap::new() }
    }

    pub fn sys(cfg: Arc<Config>, registry: Arc<Registry>) -> Holon {
        Holon::new(HolonState::sys(), Role::Sys(SysData::default()), cfg, registry)
    }

    pub fn root(side: Side, cfg: Arc<Config>, registry: Arc<Registry>) -> Holon {
        let role = Role::Root(RootData { side: Some(side), ..RootData::default() });
        Holon::new(HolonState::abstract_root(side), role, cfg, registry)
    }

    /// Rebuilds an actor from a snapshot entry. Datasets and fitted models
    /// are not part of snapshots and come back empty.
    pub fn from_state(state: HolonState, models: BTreeSet<HolonId>, cfg: Arc<Config>, registry: Arc<Registry>) -> Holon {
        let role = match state.kind {
            HolonKind::Sys => Role::Sys(SysData::default()),
            HolonKind::Abstract => {
                let side = if state.id == HolonId::DATA { Side::Data } else { Side::Alg };
                Role::Root(RootData { side: Some(side), ..RootData::default() })
            }
            HolonKind::Algorithm | HolonKind::Data => Role::Node(NodeData { models, ..NodeData::default() }),
            HolonKind::Model => Role::Model(ModelData::default()),
        };
        Holon::new(state, role, cfg, registry)
    }

    pub fn id(&self) -> HolonId {
        self.state.id
    }

    pub fn node(&self) -> Option<&NodeData> {
        match &self.role {
            Role::Node(n) => Some(n),
            _ => None,
        }
    }

    pub(crate) fn node_mut(&mut self) -> Option<&mut NodeData> {
        match &mut self.role {
            Role::Node(n) => Some(n),
            _ => None,
        }
    }

    pub fn model(&self) -> Option<&ModelData> {
        match &self.role {
            Role::Model(m) => Some(m),
            _ => None,
        }
    }

    pub fn set_deny_access(&mut self, deny: bool) {
        if let Some(n) = self.node_mut() {
            n.deny_access = deny;
        }
    }

    pub fn attach_dataset(&mut self, d: Arc<Dataset>) -> bool {
        match self.node_mut() {
            Some(n) => {
                n.dataset = Some(d);
                true
            }
            None => false,
        }
    }

    pub fn side(&self) -> Option<Side> {
        match self.state.kind {
            HolonKind::Algorithm => Some(Side::Alg),
            HolonKind::Data => Some(Side::Data),
            HolonKind::Abstract => match &self.role {
                Role::Root(r) => r.side,
                _ => None,
            },
            _ => None,
        }
    }

    /// Subs that are algorithm or data holons, ascending.
    pub fn tree_subs(&self) -> Vec<HolonId> {
        let models = self.node().map(|n| &n.models);
        self.state.subs.iter().copied().filter(|s| models.is_none_or(|m| !m.contains(s))).collect()
    }

    pub fn is_atomic(&self) -> bool {
        self.tree_subs().is_empty()
    }

    pub(crate) fn ticket(&mut self) -> u64 {
        let t = self.next_ticket;
        self.next_ticket += 1;
        t
    }

    pub(crate) fn super_id(&self) -> HolonId {
        self.state.tree_super().unwrap_or(HolonId::SYS)
    }

    // ---- fan-out bookkeeping shared by lookup, resolve and test ----

    /// Sends `make(ticket)` to each child and records a gather; replies
    /// immediately when there are no children.
    pub(crate) fn start_gather(
        &mut self,
        ctx: &mut Ctx<Holon>,
        conv: &Msg,
        reply_to: HolonId,
        reply_ticket: u64,
        children: Vec<HolonId>,
        kind: GatherKind,
        make: impl Fn(u64) -> Body,
    ) {
        let ticket = self.ticket();
        let mut g = Gather { reply_to, reply_ticket, outstanding: children.iter().copied().collect(), kind, incomplete: false, timer: None };
        if children.is_empty() {
            self.finish_gather(ctx, conv, g);
            return;
        }
        for c in &children {
            ctx.send(*c, conv.reply(make(ticket)));
        }
        // deeper holons give up first so partial answers still reach the top
        let wait = self.cfg.branch_timeout.div_f64(f64::from(self.state.level) + 1.0);
        g.timer = Some(ctx.set_timer(wait, conv.reply(Body::Timeout { ticket, child: None })));
        self.pending.insert(ticket, Pending::Gather(g));
    }

    /// Folds one child's answer into the gather; `None` marks an absent
    /// child.
    pub(crate) fn gather_reply(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, from: HolonId, part: Option<GatherKind>, incomplete: bool) {
        let Some(Pending::Gather(mut g)) = self.pending.remove(&ticket) else { return };
        if !g.outstanding.remove(&from) {
            self.pending.insert(ticket, Pending::Gather(g));
            return;
        }
        g.incomplete |= incomplete || part.is_none();
        let mut early = false;
        match (&mut g.kind, part) {
            (GatherKind::Lookup(found), Some(GatherKind::Lookup(Some(h)))) => {
                found.get_or_insert(h);
                early = true;
            }
            (GatherKind::Resolve(acc), Some(GatherKind::Resolve(items))) => acc.extend(items),
            (GatherKind::Test(acc), Some(GatherKind::Test(rows))) => acc.extend(rows),
            _ => {}
        }
        if early || g.outstanding.is_empty() {
            if let Some(t) = g.timer.take() {
                ctx.cancel_timer(t);
            }
            self.finish_gather(ctx, msg, g);
        } else {
            self.pending.insert(ticket, Pending::Gather(g));
        }
    }

    fn finish_gather(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, g: Gather) {
        let body = match g.kind {
            GatherKind::Lookup(found) => Body::LookupResult { ticket: g.reply_ticket, found },
            GatherKind::Resolve(items) => Body::Resolved { ticket: g.reply_ticket, items, incomplete: g.incomplete },
            GatherKind::Test(rows) => Body::TestResults { ticket: g.reply_ticket, rows, incomplete: g.incomplete },
        };
        if g.reply_to == self.id() {
            // SYS gathers on its own behalf
            self.local(ctx, msg.reply(body));
        } else {
            ctx.send(g.reply_to, msg.reply(body));
        }
    }

    fn gather_timeout(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64) {
        let Some(Pending::Gather(mut g)) = self.pending.remove(&ticket) else { return };
        g.incomplete = true;
        g.timer = None;
        self.finish_gather(ctx, msg, g);
    }

    /// Handles a message as if it had been delivered to this holon.
    pub(crate) fn local(&mut self, ctx: &mut Ctx<Holon>, msg: Msg) {
        let me = self.id();
        self.handle(Envelope::new(me, me, msg), ctx);
    }

    fn absent(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, from: HolonId) {
        match self.pending.get(&ticket) {
            Some(Pending::Cfp(_)) => self.cfp_reply(ctx, msg, ticket, from, None),
            Some(Pending::Gather(_)) => self.gather_reply(ctx, msg, ticket, from, None, true),
            Some(Pending::RootLookup { .. }) => self.root_lookup_result(ctx, msg, ticket, None),
            Some(Pending::Access { .. }) => {
                self.pending.remove(&ticket);
                self.model_denied(ctx, msg, "data holon unreachable".into());
            }
            Some(Pending::Create { .. }) => {
                if let Some(Pending::Create { req }) = self.pending.remove(&ticket) {
                    self.insert_failed(ctx, msg, &req, "super holon unreachable".into());
                }
            }
            _ => {}
        }
    }
}

impl Actor for Holon {
    type Msg = Msg;

    fn handle(&mut self, env: Envelope<Msg>, ctx: &mut Ctx<Holon>) {
        let from = env.from;
        let msg = env.payload;
        match msg.body.clone() {
            Body::SubmitAdd(req) => self.sys_add(ctx, &msg, req),
            Body::SubmitTrain(req) => self.sys_train(ctx, &msg, req),
            Body::SubmitTest(req) => self.sys_test(ctx, &msg, req),
            Body::Hold => self.sys_hold(&msg),
            Body::Release => self.sys_release(ctx, &msg),
            Body::Placed { side, placement } => self.sys_placed(ctx, &msg, side, placement),
            Body::Report(_) => {}

            Body::Insert(req) => self.root_insert(ctx, &msg, req),
            Body::Cfp { ticket, criterion } => self.on_cfp(ctx, &msg, from, ticket, criterion),
            Body::Propose { ticket, score } => self.cfp_reply(ctx, &msg, ticket, from, Some(score)),
            Body::Lookup { ticket, params } => self.on_lookup(ctx, &msg, from, ticket, params),
            Body::LookupResult { ticket, found } => {
                if matches!(self.pending.get(&ticket), Some(Pending::RootLookup { .. })) {
                    self.root_lookup_result(ctx, &msg, ticket, Some(found));
                } else {
                    self.gather_reply(ctx, &msg, ticket, from, Some(GatherKind::Lookup(found)), false);
                }
            }
            Body::Add(req) => self.on_add(ctx, &msg, req),
            Body::CreateHolon { ticket, name, capability, skills } => {
                self.on_create_holon(ctx, &msg, from, ticket, name, capability, skills)
            }
            Body::NewSuper { ticket, id, level } => self.on_new_super(ctx, &msg, ticket, id, level),
            Body::Adopt { sub, capability, family, side } => self.on_adopt(ctx, &msg, sub, capability, family, side),
            Body::Level(level) => self.state.level = level,
            Body::Settle(req) => self.settle(ctx, &msg, req),
            Body::Inserted { family, side, placement, capability } => {
                self.on_inserted(ctx, &msg, family, side, placement, capability)
            }

            Body::InformAddress { side, dest } => self.on_inform_address(ctx, &msg, from, side, dest),
            Body::SecondPass { side, target, companion, measures, cancel } => {
                self.on_second_pass(ctx, &msg, side, target, companion, measures, cancel)
            }
            Body::Access { ticket } => self.on_access(ctx, &msg, from, ticket),
            Body::Grant { ticket, name, capability, dataset } => self.on_grant(ctx, &msg, ticket, name, capability, dataset),
            Body::Deny { ticket, reason } => {
                if self.pending.remove(&ticket).is_some() {
                    self.model_denied(ctx, &msg, reason);
                }
            }
            Body::JoinData { model, entry } => self.on_join_data(ctx, &msg, model, entry),
            Body::Skill(entry) => self.on_skill(ctx, &msg, entry),
            Body::Trained { model, rows, data_entry } => self.on_trained(ctx, &msg, model, rows, data_entry),
            Body::TrainResult { rows, data_entry } => self.on_train_result(ctx, &msg, rows, data_entry),

            Body::ResolveData { ticket, criterion } => self.on_resolve(ctx, &msg, from, ticket, criterion),
            Body::Resolved { ticket, items, incomplete } => {
                if matches!(self.pending.get(&ticket), Some(Pending::SysResolve)) {
                    self.sys_resolved(ctx, &msg, ticket, items, incomplete);
                } else {
                    self.gather_reply(ctx, &msg, ticket, from, Some(GatherKind::Resolve(items)), incomplete);
                }
            }
            Body::Test { ticket, criterion, data_name, resolved, measures } => {
                self.on_test(ctx, &msg, from, ticket, criterion, data_name, resolved, measures)
            }
            Body::TestResults { ticket, rows, incomplete } => {
                if matches!(self.pending.get(&ticket), Some(Pending::SysTest)) {
                    self.sys_tested(ctx, &msg, ticket, rows, incomplete);
                } else {
                    self.gather_reply(ctx, &msg, ticket, from, Some(GatherKind::Test(rows)), incomplete);
                }
            }

            Body::Timeout { ticket, child } => match (self.pending.get(&ticket), child) {
                (Some(Pending::Cfp(_)), Some(c)) => self.cfp_reply(ctx, &msg, ticket, c, None),
                (Some(Pending::RootLookup { .. }), _) => self.root_lookup_result(ctx, &msg, ticket, None),
                (Some(Pending::Gather(_)), _) => self.gather_timeout(ctx, &msg, ticket),
                _ => {}
            },
            Body::Undeliverable { ticket: Some(t), .. } => self.absent(ctx, &msg, t, from),
            Body::Undeliverable { ticket: None, .. } => {}
        }
    }
}
