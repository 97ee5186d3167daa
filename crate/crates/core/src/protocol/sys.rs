//! The SYS holon: accepts requests, sequences the two training passes and
//! reports one outcome per query id.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::holon::{Pending, Role};
use super::{sort_rows, Body, Holon, InsertReq, Mode, Msg, Placement, QueryKind, QueryOutcome, ResolvedData, ResultRow, TestReq, TrainReq};
use crate::holarchy::{HolonId, Side};
use crate::ml::Measure;
use crate::runtime::Ctx;

#[derive(Default)]
pub struct SysData {
    queries: BTreeMap<String, SysQuery>,
    /// Training queries whose second pass waits for a release.
    held: BTreeSet<String>,
}

struct SysQuery {
    outcome: QueryOutcome,
    measures: Vec<Measure>,
    dest: BTreeMap<Side, HolonId>,
    second_pass_sent: bool,
    test: Option<TestReq>,
}

impl SysQuery {
    fn new(query: &str, kind: QueryKind) -> SysQuery {
        SysQuery { outcome: QueryOutcome::new(query, kind), measures: Vec::new(), dest: BTreeMap::new(), second_pass_sent: false, test: None }
    }

    fn placement(&self, side: Side) -> Option<&Placement> {
        self.outcome.placement(side)
    }
}

fn side_key(side: Side) -> &'static str {
    match side {
        Side::Alg => "alg",
        Side::Data => "data",
    }
}

impl Holon {
    fn sys_data(&mut self) -> &mut SysData {
        match &mut self.role {
            Role::Sys(s) => s,
            _ => unreachable!("SYS-only handler reached a non-SYS holon"),
        }
    }

    fn sys_begin(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, kind: QueryKind) -> bool {
        let q = msg.conv.to_string();
        if self.sys_data().queries.contains_key(&q) {
            let mut o = QueryOutcome::new(&q, kind);
            o.warnings.push(format!("query id {q} is already running"));
            ctx.send(HolonId::EXTERNAL, msg.reply(Body::Report(Box::new(o))));
            return false;
        }
        self.sys_data().queries.insert(q.clone(), SysQuery::new(&q, kind));
        true
    }

    pub(crate) fn sys_add(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: InsertReq) {
        if self.sys_begin(ctx, msg, QueryKind::Add) {
            ctx.send(req.side.root(), msg.reply(Body::Insert(req)));
        }
    }

    pub(crate) fn sys_train(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: TrainReq) {
        if !self.sys_begin(ctx, msg, QueryKind::Train) {
            return;
        }
        if let Some(q) = self.sys_data().queries.get_mut(&*msg.conv) {
            q.measures = req.measures.clone();
        }
        let alg = InsertReq {
            query: req.query.clone(),
            side: Side::Alg,
            spec: req.algorithm,
            mode: Mode::Train { companion: Some(req.data.clone()) },
            dataset: None,
        };
        let data = InsertReq { query: req.query, side: Side::Data, spec: req.data, mode: Mode::Train { companion: None }, dataset: req.dataset };
        ctx.send(HolonId::ALG, msg.reply(Body::Insert(alg)));
        ctx.send(HolonId::DATA, msg.reply(Body::Insert(data)));
    }

    pub(crate) fn sys_placed(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, side: Side, placement: Placement) {
        let Some(q) = self.sys_data().queries.get_mut(&*msg.conv) else { return };
        if let Placement::Failed(e) = &placement {
            q.outcome.warnings.push(format!("{} insert failed: {e}", side_key(side)));
        }
        q.outcome.placements.push((side, placement));
        match q.outcome.kind {
            QueryKind::Add => self.sys_finish(ctx, msg),
            _ => self.sys_progress(ctx, msg),
        }
    }

    pub(crate) fn sys_address(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, side: Side, dest: HolonId) {
        let key = format!("{}:{}", side_key(side), msg.conv);
        self.state.store_address(&key, side.root());
        let Some(q) = self.sys_data().queries.get_mut(&*msg.conv) else { return };
        q.dest.insert(side, dest);
        self.sys_progress(ctx, msg);
    }

    /// Starts the second pass once both first passes have settled.
    fn sys_progress(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg) {
        let conv = msg.conv.to_string();
        let held = self.sys_data().held.contains(&conv);
        let Some(q) = self.sys_data().queries.get_mut(&conv) else { return };
        if q.second_pass_sent {
            return;
        }
        let ready = |side: Side| match q.placement(side) {
            None => false,
            Some(Placement::Failed(_)) | Some(Placement::Duplicate(_)) => true,
            Some(_) => q.dest.contains_key(&side),
        };
        if !ready(Side::Alg) || !ready(Side::Data) {
            return;
        }
        let alg = q.placement(Side::Alg).cloned();
        let data_failed = matches!(q.placement(Side::Data), Some(Placement::Failed(_)));
        match alg {
            Some(Placement::Duplicate(leaf)) => {
                q.outcome.warnings.push(format!("duplicate training: holon {leaf} already has a model for this data; skipped"));
                self.sys_finish(ctx, msg);
            }
            Some(Placement::Failed(_)) => self.sys_finish(ctx, msg),
            _ if data_failed => {
                // drop the model the alg side already spawned
                q.second_pass_sent = true;
                let target = q.dest[&Side::Alg];
                let body = Body::SecondPass { side: Side::Alg, target, companion: HolonId(0), measures: Vec::new(), cancel: true };
                ctx.send(HolonId::ALG, msg.reply(body));
            }
            _ if held => {}
            _ => {
                q.second_pass_sent = true;
                let body = Body::SecondPass {
                    side: Side::Alg,
                    target: q.dest[&Side::Alg],
                    companion: q.dest[&Side::Data],
                    measures: q.measures.clone(),
                    cancel: false,
                };
                ctx.send(HolonId::ALG, msg.reply(body));
            }
        }
    }

    pub(crate) fn sys_train_result(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, rows: Vec<ResultRow>) {
        let Some(q) = self.sys_data().queries.get_mut(&*msg.conv) else { return };
        for r in rows.iter().filter_map(|r| r.error.as_ref()) {
            q.outcome.warnings.push(format!("training failed: {r}"));
        }
        q.outcome.rows.extend(rows);
        self.sys_finish(ctx, msg);
    }

    pub(crate) fn sys_hold(&mut self, msg: &Msg) {
        let q = msg.conv.to_string();
        self.sys_data().held.insert(q);
    }

    pub(crate) fn sys_release(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg) {
        let q = msg.conv.to_string();
        self.sys_data().held.remove(&q);
        self.sys_progress(ctx, msg);
    }

    pub(crate) fn sys_test(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, req: TestReq) {
        if !self.sys_begin(ctx, msg, QueryKind::Test) {
            return;
        }
        let ticket = self.ticket();
        let criterion = req.data.clone();
        if let Some(q) = self.sys_data().queries.get_mut(&*msg.conv) {
            q.test = Some(req);
        }
        self.pending.insert(ticket, Pending::SysResolve);
        ctx.send(HolonId::DATA, msg.reply(Body::ResolveData { ticket, criterion }));
    }

    pub(crate) fn sys_resolved(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, items: Vec<ResolvedData>, incomplete: bool) {
        self.pending.remove(&ticket);
        let Some(q) = self.sys_data().queries.get_mut(&*msg.conv) else { return };
        q.outcome.incomplete |= incomplete;
        let Some(req) = q.test.clone() else { return };
        if items.is_empty() {
            q.outcome.warnings.push(format!("no data holon matches {}", describe(&req.data)));
            self.sys_finish(ctx, msg);
            return;
        }
        let ticket = self.ticket();
        self.pending.insert(ticket, Pending::SysTest);
        let body = Body::Test {
            ticket,
            criterion: req.algorithms,
            data_name: req.data.name,
            resolved: Arc::new(items),
            measures: req.measures,
        };
        ctx.send(HolonId::ALG, msg.reply(body));
    }

    pub(crate) fn sys_tested(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, ticket: u64, rows: Vec<ResultRow>, incomplete: bool) {
        self.pending.remove(&ticket);
        let Some(q) = self.sys_data().queries.get_mut(&*msg.conv) else { return };
        q.outcome.incomplete |= incomplete;
        if let Some(req) = &q.test {
            if rows.is_empty() {
                q.outcome.warnings.push(format!(
                    "no result exists for {} on {}",
                    describe(&req.algorithms),
                    describe(&req.data)
                ));
            }
        }
        for r in rows.iter().filter_map(|r| r.error.as_ref()) {
            q.outcome.warnings.push(format!("evaluation failed: {r}"));
        }
        if incomplete {
            q.outcome.warnings.push("some branches did not answer in time; results are partial".into());
        }
        q.outcome.rows.extend(rows);
        self.sys_finish(ctx, msg);
    }

    fn sys_finish(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg) {
        let conv = msg.conv.to_string();
        let data = self.sys_data();
        data.held.remove(&conv);
        let Some(q) = data.queries.remove(&conv) else { return };
        let mut outcome = q.outcome;
        sort_rows(&mut outcome.rows);
        ctx.send(HolonId::EXTERNAL, msg.reply(Body::Report(Box::new(outcome))));
    }
}

fn describe(c: &super::Criterion) -> String {
    format!("{}{}", c.name, c.params)
}
