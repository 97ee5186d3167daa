//! Insertion: family routing at the side roots, exact-match lookup,
//! similarity placement and intermediate creation.

use std::collections::BTreeSet;

use super::holon::{CfpPurpose, CfpRound, GatherKind, NodeData, Pending, Role};
use super::{Body, CfpCriterion, Holon, InsertReq, Msg, Placement};
use crate::algebra::{leq, name_similarity, similarity, ParamPair, ParamSet, ParamValue};
use crate::holarchy::{HolonId, HolonKind, HolonState, Side, SkillEntry};
use crate::runtime::Ctx;

impl Holon {
    pub(crate) fn score(&self, params: &ParamSet) -> f64 {
        if params.is_empty() && self.state.capability.is_empty() {
            return 1.0;
        }
        similarity(params, &self.state.capability, &self.cfg.similarity).unwrap_or(0.0)
    }

    fn name_score(&self, name: &str) -> f64 {
        let mine = ParamPair::name(ParamValue::literal(&self.state.name));
        let theirs = ParamPair::name(ParamValue::literal(name));
        name_similarity(&mine, &theirs, &self.cfg.similarity).unwrap_or(0.0)
    }

    // ---- side roots ----

    pub(crate) fn root_insert(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: InsertReq) {
        let Role::Root(root) = &mut self.role else { return };
        let family = req.family().to_string();
        if !root.busy.insert(family.clone()) {
            root.queue.entry(family).or_default().push_back(req);
            return;
        }
        let subs = self.tree_subs();
        if subs.is_empty() {
            self.root_place_new(ctx, msg, req);
            return;
        }
        let criterion = CfpCriterion::Name(family);
        self.start_cfp(ctx, msg, CfpPurpose::Name(req), criterion, subs);
    }

    fn root_found_family(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: InsertReq, family_holon: HolonId) {
        if !self.cfg.exact_lookup {
            ctx.send(family_holon, msg.reply(Body::Add(req)));
            return;
        }
        let ticket = self.ticket();
        ctx.send(family_holon, msg.reply(Body::Lookup { ticket, params: req.spec.params.clone() }));
        let timer = ctx.set_timer(self.cfg.branch_timeout, msg.reply(Body::Timeout { ticket, child: None }));
        self.pending.insert(ticket, Pending::RootLookup { req, family_holon, timer });
    }

    /// `found` is `None` when the family holon never answered.
    pub(crate) fn root_lookup_result(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, found: Option<Option<HolonId>>) {
        let Some(Pending::RootLookup { req, family_holon, timer }) = self.pending.remove(&ticket) else { return };
        ctx.cancel_timer(timer);
        let target = found.flatten().unwrap_or(family_holon);
        ctx.send(target, msg.reply(Body::Add(req)));
    }

    fn root_place_new(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: InsertReq) {
        let placement = match creatable(&req) {
            Ok(()) => {
                let leaf = self.spawn_leaf(ctx, &req, self.id(), self.state.level + 1);
                self.state.subs.insert(leaf);
                if req.training() {
                    ctx.send(leaf, msg.reply(Body::Settle(req.clone())));
                }
                Placement::NewLeaf(leaf)
            }
            Err(reason) => Placement::Failed(reason),
        };
        self.root_finished(ctx, msg, req.family().to_string(), req.side, placement);
    }

    /// Unlocks the family, reports to SYS and starts the next queued insert.
    fn root_finished(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, family: String, side: Side, placement: Placement) {
        ctx.send(HolonId::SYS, msg.reply(Body::Placed { side, placement }));
        let Role::Root(root) = &mut self.role else { return };
        root.busy.remove(&family);
        let next = root.queue.get_mut(&family).and_then(|q| q.pop_front());
        if root.queue.get(&family).is_some_and(|q| q.is_empty()) {
            root.queue.remove(&family);
        }
        if let Some(next) = next {
            let m = Msg::new(&next.query, Body::Insert(next.clone()));
            self.root_insert(ctx, &m, next);
        }
    }

    // ---- CFP rounds ----

    fn start_cfp(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, purpose: CfpPurpose, criterion: CfpCriterion, children: Vec<HolonId>) {
        let ticket = self.ticket();
        let mut round = CfpRound { purpose, criterion, queue: children.into(), outstanding: Default::default(), best: None, winner: None };
        let batch = if self.cfg.strict_cfp { round.queue.len() } else { 1 };
        for _ in 0..batch {
            let child = round.queue.pop_front().expect("non-empty round");
            let timer = self.send_cfp(ctx, msg, ticket, child, &round.criterion);
            round.outstanding.insert(child, timer);
        }
        self.pending.insert(ticket, Pending::Cfp(round));
    }

    fn send_cfp(&self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, child: HolonId, criterion: &CfpCriterion) -> crate::runtime::TimerId {
        ctx.send(child, msg.reply(Body::Cfp { ticket, criterion: criterion.clone() }));
        ctx.set_timer(self.cfg.proposal_timeout, msg.reply(Body::Timeout { ticket, child: Some(child) }))
    }

    pub(crate) fn on_cfp(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, from: HolonId, ticket: u64, criterion: CfpCriterion) {
        let score = match &criterion {
            CfpCriterion::Name(n) => self.name_score(n),
            CfpCriterion::Params(p) => self.score(p),
        };
        ctx.send(from, msg.reply(Body::Propose { ticket, score }));
    }

    /// One proposal (or `None` for a child that timed out or is gone).
    pub(crate) fn cfp_reply(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, from: HolonId, score: Option<f64>) {
        let Some(Pending::Cfp(mut round)) = self.pending.remove(&ticket) else { return };
        let Some(timer) = round.outstanding.remove(&from) else {
            self.pending.insert(ticket, Pending::Cfp(round));
            return;
        };
        ctx.cancel_timer(timer);
        let score = score.unwrap_or(f64::NEG_INFINITY);
        let strict = self.cfg.strict_cfp;
        if round.best.is_none_or(|(b, _)| score > b) {
            round.best = Some((score, from));
        }
        if !strict && round.purpose.wins(score) {
            round.winner = Some(from);
            self.finish_cfp(ctx, msg, round);
            return;
        }
        if !strict {
            if let Some(next) = round.queue.pop_front() {
                let timer = self.send_cfp(ctx, msg, ticket, next, &round.criterion);
                round.outstanding.insert(next, timer);
            }
        }
        if round.outstanding.is_empty() {
            if strict {
                round.winner = round.best.filter(|(s, _)| round.purpose.wins(*s)).map(|(_, id)| id);
            }
            self.finish_cfp(ctx, msg, round);
        } else {
            self.pending.insert(ticket, Pending::Cfp(round));
        }
    }

    fn finish_cfp(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, round: CfpRound) {
        // strict rounds may finish with replies still listed; none remain here
        for (_, t) in round.outstanding {
            ctx.cancel_timer(t);
        }
        match (round.purpose, round.winner) {
            (CfpPurpose::Name(req), Some(f)) => self.root_found_family(ctx, msg, req, f),
            (CfpPurpose::Name(req), None) => self.root_place_new(ctx, msg, req),
            (CfpPurpose::Place { req, .. }, Some(w)) => ctx.send(w, msg.reply(Body::Add(req))),
            (CfpPurpose::Place { req, .. }, None) => self.place_here(ctx, msg, req),
        }
    }

    // ---- algorithm / data holons ----

    pub(crate) fn on_add(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: InsertReq) {
        if !self.is_atomic() {
            let own = self.score(&req.spec.params);
            let criterion = CfpCriterion::Params(req.spec.params.clone());
            let subs = self.tree_subs();
            self.start_cfp(ctx, msg, CfpPurpose::Place { req, own }, criterion, subs);
            return;
        }
        if req.spec.params == self.state.capability {
            self.settle_existing(ctx, msg, req);
            return;
        }
        if let Err(reason) = creatable(&req) {
            self.insert_failed(ctx, msg, &req, reason);
            return;
        }
        let ticket = self.ticket();
        let body = Body::CreateHolon {
            ticket,
            name: self.state.name.clone(),
            capability: self.state.capability.clone(),
            skills: self.state.skills.clone(),
        };
        ctx.send(self.super_id(), msg.reply(body));
        self.pending.insert(ticket, Pending::Create { req });
    }

    /// Composite whose own similarity beat every sub: the leaf goes here.
    fn place_here(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: InsertReq) {
        if let Err(reason) = creatable(&req) {
            self.insert_failed(ctx, msg, &req, reason);
            return;
        }
        let leaf = self.spawn_leaf(ctx, &req, self.id(), self.state.level + 1);
        self.state.subs.insert(leaf);
        let _ = self.state.update_capability(&req.spec.params);
        if req.training() {
            ctx.send(leaf, msg.reply(Body::Settle(req.clone())));
        }
        self.send_inserted(ctx, msg, &req, Placement::NewLeaf(leaf), self.state.capability.clone());
    }

    pub(crate) fn send_inserted(&self, ctx: &mut Ctx<Holon>, msg: &Msg, req: &InsertReq, placement: Placement, capability: ParamSet) {
        let body = Body::Inserted { family: req.family().to_string(), side: req.side, placement, capability };
        ctx.send(self.super_id(), msg.reply(body));
    }

    pub(crate) fn insert_failed(&self, ctx: &mut Ctx<Holon>, msg: &Msg, req: &InsertReq, reason: String) {
        self.send_inserted(ctx, msg, req, Placement::Failed(reason), ParamSet::new());
    }

    pub(crate) fn spawn_leaf(&self, ctx: &mut Ctx<Holon>, req: &InsertReq, parent: HolonId, level: u32) -> HolonId {
        let id = ctx.alloc_id();
        let mut state = HolonState::new(id, req.side.holon_kind(), &req.spec.name, req.spec.params.clone());
        state.level = level;
        state.supers.push(parent);
        state.label = req.spec.label.clone();
        state.type_chain = req.spec.type_chain.clone();
        let node = NodeData { dataset: if req.side == Side::Data { req.dataset.clone() } else { None }, ..NodeData::default() };
        ctx.spawn(id, Holon::new(state, Role::Node(node), self.cfg.clone(), self.registry.clone()));
        id
    }

    /// At the super of an atomic holon that could not absorb an insert:
    /// put a fresh composite between us and that holon.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn on_create_holon(
        &mut self,
        ctx: &mut Ctx<Holon>,
        msg: &Msg,
        from: HolonId,
        ticket: u64,
        name: String,
        capability: ParamSet,
        skills: BTreeSet<SkillEntry>,
    ) {
        let Some(side) = self.side() else { return };
        let id = ctx.alloc_id();
        let level = self.state.level + 1;
        let mut state = HolonState::new(id, side.holon_kind(), name, capability);
        state.level = level;
        state.skills = skills;
        state.supers.push(self.id());
        state.subs.insert(from);
        for q in self.state.rewire_addresses(from, id) {
            state.store_address(&q, from);
        }
        self.state.subs.remove(&from);
        self.state.subs.insert(id);
        ctx.spawn(id, Holon::new(state, Role::Node(NodeData::default()), self.cfg.clone(), self.registry.clone()));
        ctx.send(from, msg.reply(Body::NewSuper { ticket, id, level }));
    }

    pub(crate) fn on_new_super(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, id: HolonId, level: u32) {
        let Some(Pending::Create { req }) = self.pending.remove(&ticket) else { return };
        self.state.supers[0] = id;
        self.state.level = level + 1;
        for m in self.node().map(|n| n.models.clone()).unwrap_or_default() {
            ctx.send(m, msg.reply(Body::Level(self.state.level + 1)));
        }
        let leaf = self.spawn_leaf(ctx, &req, id, self.state.level);
        let adopt = Body::Adopt { sub: leaf, capability: req.spec.params.clone(), family: req.family().to_string(), side: req.side };
        ctx.send(id, msg.reply(adopt));
        if req.training() {
            ctx.send(leaf, msg.reply(Body::Settle(req)));
        }
    }

    pub(crate) fn on_adopt(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, sub: HolonId, capability: ParamSet, family: String, side: Side) {
        self.state.subs.insert(sub);
        let _ = self.state.update_capability(&capability);
        let body = Body::Inserted { family, side, placement: Placement::NewLeaf(sub), capability: self.state.capability.clone() };
        ctx.send(self.super_id(), msg.reply(body));
    }

    pub(crate) fn on_inserted(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, family: String, side: Side, placement: Placement, capability: ParamSet) {
        if self.state.kind == HolonKind::Abstract {
            self.root_finished(ctx, msg, family, side, placement);
            return;
        }
        let changed = self.state.update_capability(&capability).unwrap_or(false);
        let carried = if changed || !capability.is_empty() { self.state.capability.clone() } else { ParamSet::new() };
        ctx.send(self.super_id(), msg.reply(Body::Inserted { family, side, placement, capability: carried }));
    }

    pub(crate) fn on_lookup(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, from: HolonId, ticket: u64, params: ParamSet) {
        if self.is_atomic() {
            let found = (params == self.state.capability).then_some(self.id());
            ctx.send(from, msg.reply(Body::LookupResult { ticket, found }));
            return;
        }
        if !leq(&params, &self.state.capability) {
            ctx.send(from, msg.reply(Body::LookupResult { ticket, found: None }));
            return;
        }
        let subs = self.tree_subs();
        self.start_gather(ctx, msg, from, ticket, subs, GatherKind::Lookup(None), |t| Body::Lookup { ticket: t, params: params.clone() });
    }
}

/// Training a dataset nobody supplied cannot create its holon.
fn creatable(req: &InsertReq) -> Result<(), String> {
    if req.side == Side::Data && req.training() && req.dataset.is_none() {
        return Err(format!("dataset `{}` is not in the holarchy and the query carries no source for it", req.spec.display()));
    }
    Ok(())
}
