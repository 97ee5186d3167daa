//! Model spawning, address propagation and the second training pass.

use std::sync::Arc;
use std::time::Instant;

use super::holon::{ModelData, Pending, Role};
use super::{Body, Holon, InsertReq, Mode, Msg, Phase, Placement, ResultRow};
use crate::algebra::ParamSet;
use crate::holarchy::{EntityKind, HolonId, HolonKind, HolonState, ModelLinks, Side, SkillEntry};
use crate::ml::{Dataset, Measure};
use crate::runtime::Ctx;

impl Holon {
    /// Train-mode registration at a freshly created leaf.
    pub(crate) fn settle(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: InsertReq) {
        match req.side {
            Side::Alg => self.spawn_model(ctx, msg, &req),
            Side::Data => self.register_data(ctx, msg),
        }
    }

    /// The insert matched this leaf exactly.
    pub(crate) fn settle_existing(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: InsertReq) {
        let me = self.id();
        if let (Some(d), Some(node)) = (&req.dataset, self.node_mut()) {
            if node.dataset.is_none() {
                node.dataset = Some(d.clone());
            }
        }
        let placement = match (&req.mode, req.side) {
            (Mode::AddOnly, _) => Placement::Existing(me),
            (Mode::Train { companion }, Side::Alg) => {
                let key = companion.as_ref().map(|c| c.display()).unwrap_or_default();
                let trained = self.node().is_some_and(|n| n.records.values().any(|k| *k == key));
                if trained {
                    Placement::Duplicate(me)
                } else {
                    self.spawn_model(ctx, msg, &req);
                    Placement::Existing(me)
                }
            }
            (Mode::Train { .. }, Side::Data) => {
                self.register_data(ctx, msg);
                Placement::Existing(me)
            }
        };
        self.send_inserted(ctx, msg, &req, placement, ParamSet::new());
    }

    fn spawn_model(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: &InsertReq) {
        let Mode::Train { companion } = &req.mode else { return };
        let id = ctx.alloc_id();
        let mut state = HolonState::new(id, HolonKind::Model, &self.state.name, self.state.capability.clone());
        state.level = self.state.level + 1;
        state.supers.push(self.id());
        state.label = self.state.label.clone();
        let role = Role::Model(ModelData { query: req.query.clone(), ..ModelData::default() });
        ctx.spawn(id, Holon::new(state, role, self.cfg.clone(), self.registry.clone()));
        self.state.subs.insert(id);
        if let Some(node) = self.node_mut() {
            node.models.insert(id);
            node.records.insert(id, companion.as_ref().map(|c| c.display()).unwrap_or_default());
        }
        self.state.store_address(&msg.conv, id);
        ctx.send(self.super_id(), msg.reply(Body::InformAddress { side: Side::Alg, dest: id }));
    }

    fn register_data(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg) {
        let me = self.id();
        self.state.store_address(&msg.conv, me);
        ctx.send(self.super_id(), msg.reply(Body::InformAddress { side: Side::Data, dest: me }));
    }

    pub(crate) fn on_inform_address(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, from: HolonId, side: Side, dest: HolonId) {
        if matches!(self.role, Role::Sys(_)) {
            self.sys_address(ctx, msg, side, dest);
            return;
        }
        self.state.store_address(&msg.conv, from);
        ctx.send(self.super_id(), msg.reply(Body::InformAddress { side, dest }));
    }

    /// Follows this holon's address entry for the query one hop down.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn on_second_pass(
        &mut self,
        ctx: &mut Ctx<Holon>,
        msg: &Msg,
        side: Side,
        target: HolonId,
        companion: HolonId,
        measures: Vec<Measure>,
        cancel: bool,
    ) {
        if let Role::Model(_) = self.role {
            if cancel {
                ctx.retire();
                ctx.send(self.super_id(), msg.reply(Body::Trained { model: self.id(), rows: Vec::new(), data_entry: None }));
                return;
            }
            let ticket = self.ticket();
            self.pending.insert(ticket, Pending::Access { companion, measures });
            ctx.send(companion, msg.reply(Body::Access { ticket }));
            return;
        }
        match self.state.get_address(&msg.conv) {
            Ok(next) => ctx.send(next, msg.reply(Body::SecondPass { side, target, companion, measures, cancel })),
            Err(e) => {
                let row = self.error_row(&msg.conv, e.to_string());
                ctx.send(self.super_id(), msg.reply(Body::TrainResult { rows: vec![row], data_entry: None }));
            }
        }
    }

    pub(crate) fn on_access(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, from: HolonId, ticket: u64) {
        let Some(node) = self.node() else { return };
        let body = if node.deny_access {
            Body::Deny { ticket, reason: format!("data holon {} refused access", self.id()) }
        } else {
            match &node.dataset {
                Some(d) => Body::Grant { ticket, name: self.state.name.clone(), capability: self.state.capability.clone(), dataset: d.clone() },
                None => Body::Deny { ticket, reason: format!("data holon {} has no data attached", self.id()) },
            }
        };
        ctx.send(from, msg.reply(body));
    }

    pub(crate) fn on_grant(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, name: String, capability: ParamSet, dataset: Arc<Dataset>) {
        let Some(Pending::Access { companion, measures }) = self.pending.remove(&ticket) else { return };
        let started = self.cfg.timing.then(Instant::now);
        let fit = self.registry.fit(&self.state.name, &self.state.capability, &dataset, self.cfg.seed, &measures);
        let elapsed = started.map(|t| t.elapsed().as_secs_f64());
        let (fitted, scores) = match fit {
            Ok(x) => x,
            Err(e) => {
                self.model_denied(ctx, msg, format!("training failed: {e}"));
                return;
            }
        };
        let me = self.id();
        let leaf = self.super_id();
        let alg_entry = SkillEntry { entity_kind: EntityKind::Algorithm, entity_name: self.state.name.clone(), params: self.state.capability.clone() };
        let data_entry = SkillEntry { entity_kind: EntityKind::Data, entity_name: name.clone(), params: capability.clone() };
        self.state.supers.push(companion);
        self.state.model_links = Some(ModelLinks { algorithm: leaf, data: companion });
        self.state.skills = [alg_entry.clone(), data_entry.clone()].into_iter().collect();
        let rows = scores
            .iter()
            .map(|s| {
                let mut r = self.row(&msg.conv, Phase::Train, &name, companion, &capability);
                r.measure = Some(s.measure);
                r.value = Some(s.value);
                r.elapsed = elapsed;
                r
            })
            .collect();
        if let Role::Model(m) = &mut self.role {
            m.fitted = Some(fitted);
            m.data = Some((companion, name, capability));
        }
        ctx.send(companion, msg.reply(Body::JoinData { model: me, entry: alg_entry }));
        ctx.send(leaf, msg.reply(Body::Trained { model: me, rows, data_entry: Some(data_entry) }));
    }

    /// Access refused or fitting failed: report and leave.
    pub(crate) fn model_denied(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, reason: String) {
        let row = self.error_row(&msg.conv, reason);
        ctx.retire();
        ctx.send(self.super_id(), msg.reply(Body::Trained { model: self.id(), rows: vec![row], data_entry: None }));
    }

    pub(crate) fn on_join_data(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, model: HolonId, entry: SkillEntry) {
        self.state.subs.insert(model);
        if let Some(node) = self.node_mut() {
            node.models.insert(model);
        }
        self.state.skills.insert(entry.clone());
        ctx.send(self.super_id(), msg.reply(Body::Skill(entry)));
    }

    pub(crate) fn on_skill(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, entry: SkillEntry) {
        self.state.skills.insert(entry.clone());
        if self.state.kind != HolonKind::Abstract {
            ctx.send(self.super_id(), msg.reply(Body::Skill(entry)));
        }
    }

    /// At the algorithm leaf: keep or drop the model, then report upward.
    pub(crate) fn on_trained(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, model: HolonId, rows: Vec<ResultRow>, data_entry: Option<SkillEntry>) {
        match &data_entry {
            Some(e) => {
                self.state.skills.insert(e.clone());
            }
            None => {
                self.state.subs.remove(&model);
                self.state.address_book.retain(|_, v| *v != model);
                if let Some(node) = self.node_mut() {
                    node.models.remove(&model);
                    node.records.remove(&model);
                }
            }
        }
        ctx.send(self.super_id(), msg.reply(Body::TrainResult { rows, data_entry }));
    }

    pub(crate) fn on_train_result(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, rows: Vec<ResultRow>, data_entry: Option<SkillEntry>) {
        if matches!(self.role, Role::Sys(_)) {
            self.sys_train_result(ctx, msg, rows);
            return;
        }
        if let Some(e) = &data_entry {
            self.state.skills.insert(e.clone());
        }
        ctx.send(self.super_id(), msg.reply(Body::TrainResult { rows, data_entry }));
    }

    /// Row skeleton describing this model (or holon) and one dataset.
    pub(crate) fn row(&self, query: &str, phase: Phase, dataset: &str, dataset_id: HolonId, dataset_params: &ParamSet) -> ResultRow {
        let alg = self.state.tree_super().filter(|_| self.state.kind == HolonKind::Model).unwrap_or(self.id());
        ResultRow {
            query_id: query.to_string(),
            phase,
            algorithm_id: alg,
            algorithm_label: self.state.label.clone().unwrap_or_else(|| format!("{alg}:{}", self.state.name)),
            algorithm_name: self.state.name.clone(),
            algorithm_params: self.state.capability.clone(),
            model_id: if self.state.kind == HolonKind::Model { self.id() } else { HolonId(0) },
            dataset: dataset.to_string(),
            dataset_id,
            dataset_params: dataset_params.clone(),
            measure: None,
            value: None,
            elapsed: None,
            error: None,
        }
    }

    pub(crate) fn error_row(&self, query: &str, error: String) -> ResultRow {
        let (name, id, params) = match self.model().and_then(|m| m.data.clone()) {
            Some((id, name, params)) => (name, id, params),
            None => (String::new(), HolonId(0), ParamSet::new()),
        };
        let mut r = self.row(query, Phase::Train, &name, id, &params);
        r.error = Some(error);
        r
    }
}
