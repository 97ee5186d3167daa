//! Test-time traffic: data resolution on the DATA side and the gated
//! fan-out on the ALG side.

use std::sync::Arc;
use std::time::Instant;

use super::holon::{GatherKind, Role};
use super::{Body, Criterion, Holon, Msg, Phase, ResolvedData, ResultRow};
use crate::algebra::ParamValue;
use crate::holarchy::{EntityKind, HolonId, HolonKind};
use crate::ml::Measure;
use crate::runtime::Ctx;

impl Holon {
    pub(crate) fn on_resolve(&mut self, ctx: &mut Ctx<Holon>, msg: &Msg, from: HolonId, ticket: u64, criterion: Criterion) {
        let root = self.state.kind == HolonKind::Abstract;
        if !root && !criterion.admits(&self.state.name, &self.state.capability) {
            ctx.send(from, msg.reply(Body::Resolved { ticket, items: Vec::new(), incomplete: false }));
            return;
        }
        if !root && self.is_atomic() {
            let item = ResolvedData {
                id: self.id(),
                name: self.state.name.clone(),
                params: self.state.capability.clone(),
                dataset: self.node().and_then(|n| n.dataset.clone()),
            };
            ctx.send(from, msg.reply(Body::Resolved { ticket, items: vec![item], incomplete: false }));
            return;
        }
        let subs = self.tree_subs();
        self.start_gather(ctx, msg, from, ticket, subs, GatherKind::Resolve(Vec::new()), |t| Body::ResolveData {
            ticket: t,
            criterion: criterion.clone(),
        });
    }

    /// The admission gate: name, capability, and a data skill whose name the
    /// query's data name admits (or equals it, in strict mode).
    pub(crate) fn admits_test(&self, criterion: &Criterion, data_name: &ParamValue) -> bool {
        if !criterion.admits(&self.state.name, &self.state.capability) {
            return false;
        }
        let strict = self.cfg.strict_skill;
        self.state.skills.iter().filter(|s| s.entity_kind == EntityKind::Data).any(|s| {
            let skill = ParamValue::literal(&s.entity_name);
            if strict {
                *data_name == skill
            } else {
                data_name.compatible(&skill)
            }
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn on_test(
        &mut self,
        ctx: &mut Ctx<Holon>,
        msg: &Msg,
        from: HolonId,
        ticket: u64,
        criterion: Criterion,
        data_name: ParamValue,
        resolved: Arc<Vec<ResolvedData>>,
        measures: Vec<Measure>,
    ) {
        if let Role::Model(_) = self.role {
            let rows = self.evaluate_resolved(&msg.conv, &resolved, &measures);
            ctx.send(from, msg.reply(Body::TestResults { ticket, rows, incomplete: false }));
            return;
        }
        let root = self.state.kind == HolonKind::Abstract;
        if !root && !self.admits_test(&criterion, &data_name) {
            ctx.send(from, msg.reply(Body::TestResults { ticket, rows: Vec::new(), incomplete: false }));
            return;
        }
        let subs: Vec<HolonId> = self.state.subs.iter().copied().collect();
        self.start_gather(ctx, msg, from, ticket, subs, GatherKind::Test(Vec::new()), |t| Body::Test {
            ticket: t,
            criterion: criterion.clone(),
            data_name: data_name.clone(),
            resolved: resolved.clone(),
            measures: measures.clone(),
        });
    }

    /// A model scores every resolved dataset carrying its training data's
    /// name.
    fn evaluate_resolved(&self, query: &str, resolved: &[ResolvedData], measures: &[Measure]) -> Vec<ResultRow> {
        let Some(model) = self.model() else { return Vec::new() };
        let (Some(fitted), Some((_, trained_on, _))) = (&model.fitted, &model.data) else { return Vec::new() };
        let mut rows = Vec::new();
        for d in resolved.iter().filter(|d| d.name == *trained_on) {
            let base = self.row(query, Phase::Test, &d.name, d.id, &d.params);
            let Some(data) = &d.dataset else {
                rows.push(ResultRow { error: Some(format!("data holon {} has no data attached", d.id)), ..base });
                continue;
            };
            let started = self.cfg.timing.then(Instant::now);
            match fitted.evaluate(data, measures) {
                Ok(scores) => {
                    let elapsed = started.map(|t| t.elapsed().as_secs_f64());
                    rows.extend(scores.into_iter().map(|s| ResultRow {
                        measure: Some(s.measure),
                        value: Some(s.value),
                        elapsed,
                        ..base.clone()
                    }));
                }
                Err(e) => rows.push(ResultRow { error: Some(e.to_string()), ..base }),
            }
        }
        rows
    }
}
