use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{panic_message, Actor, Ctx, Envelope, HopTrace, IdAllocator, Message, RunStats, Runtime, RuntimeError, TimerId, TraceLevel, TraceLine, Tracer};
use crate::holarchy::HolonId;

/// Order in which queued envelopes are delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// One global queue in send order.
    Fifo,
    /// A seeded random choice among the non-empty sender/recipient
    /// channels; each channel stays FIFO.
    Shuffled(u64),
}

/// Single-threaded executor with a virtual clock. Timers fire only when no
/// envelope is pending, so timeouts never race real replies.
pub struct Deterministic<A: Actor> {
    actors: BTreeMap<HolonId, A>,
    retired: BTreeSet<HolonId>,
    muted: BTreeSet<HolonId>,
    fifo: VecDeque<Envelope<A::Msg>>,
    channels: BTreeMap<(HolonId, HolonId), VecDeque<Envelope<A::Msg>>>,
    rng: Option<ChaCha8Rng>,
    timers: BTreeMap<(Duration, TimerId), Envelope<A::Msg>>,
    timer_due: BTreeMap<TimerId, Duration>,
    clock: Duration,
    ids: IdAllocator,
    tracer: Tracer,
    external: Vec<Envelope<A::Msg>>,
    step_limit: u64,
}

impl<A: Actor> Deterministic<A> {
    pub fn new(policy: Policy, trace: TraceLevel) -> Deterministic<A> {
        Deterministic {
            actors: BTreeMap::new(),
            retired: BTreeSet::new(),
            muted: BTreeSet::new(),
            fifo: VecDeque::new(),
            channels: BTreeMap::new(),
            rng: match policy {
                Policy::Fifo => None,
                Policy::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            },
            timers: BTreeMap::new(),
            timer_due: BTreeMap::new(),
            clock: Duration::ZERO,
            ids: IdAllocator::new(),
            tracer: Tracer::new(trace),
            external: Vec::new(),
            step_limit: 50_000_000,
        }
    }

    pub fn with_step_limit(mut self, limit: u64) -> Deterministic<A> {
        self.step_limit = limit;
        self
    }

    pub fn clock(&self) -> Duration {
        self.clock
    }

    pub fn actor(&self, id: HolonId) -> Option<&A> {
        self.actors.get(&id)
    }

    fn enqueue(&mut self, env: Envelope<A::Msg>) {
        self.tracer.record(&env);
        if env.to == HolonId::EXTERNAL {
            self.external.push(env);
            return;
        }
        if self.rng.is_some() {
            self.channels.entry((env.from, env.to)).or_default().push_back(env);
        } else {
            self.fifo.push_back(env);
        }
    }

    fn next_envelope(&mut self) -> Option<Envelope<A::Msg>> {
        let Some(rng) = self.rng.as_mut() else { return self.fifo.pop_front() };
        if self.channels.is_empty() {
            return None;
        }
        let pick = rng.random_range(0..self.channels.len());
        let key = *self.channels.keys().nth(pick).expect("index in range");
        let queue = self.channels.get_mut(&key).expect("key exists");
        let env = queue.pop_front();
        if queue.is_empty() {
            self.channels.remove(&key);
        }
        env
    }

    fn fire_next_timer(&mut self) -> bool {
        let Some((&(due, id), _)) = self.timers.iter().next() else { return false };
        let env = self.timers.remove(&(due, id)).expect("present");
        self.timer_due.remove(&id);
        self.clock = self.clock.max(due);
        self.enqueue(env);
        true
    }

    fn deliver(&mut self, env: Envelope<A::Msg>, stats: &mut RunStats) -> Result<(), RuntimeError> {
        let to = env.to;
        if self.muted.contains(&to) {
            stats.dropped += 1;
            return Ok(());
        }
        let Some(actor) = self.actors.get_mut(&to) else {
            match env.payload.undeliverable(to) {
                Some(bounce) if env.from != to && self.actors.contains_key(&env.from) => {
                    stats.bounced += 1;
                    self.enqueue(Envelope::new(to, env.from, bounce));
                }
                _ => stats.dropped += 1,
            }
            return Ok(());
        };
        let mut ctx = Ctx::new(to, self.ids.clone());
        let outcome = catch_unwind(AssertUnwindSafe(|| actor.handle(env, &mut ctx)));
        stats.delivered += 1;
        if let Err(p) = outcome {
            return Err(RuntimeError::Panicked { holon: to, message: panic_message(&p) });
        }
        self.apply(ctx);
        Ok(())
    }

    fn apply(&mut self, ctx: Ctx<A>) {
        let me = ctx.me;
        for (id, actor) in ctx.spawns {
            self.actors.insert(id, actor);
        }
        for env in ctx.outbox {
            self.enqueue(env);
        }
        for id in ctx.cancels {
            if let Some(due) = self.timer_due.remove(&id) {
                self.timers.remove(&(due, id));
            }
        }
        for (id, delay, msg) in ctx.timers {
            let due = self.clock + delay;
            self.timer_due.insert(id, due);
            self.timers.insert((due, id), Envelope::new(me, me, msg));
        }
        if ctx.retire {
            self.actors.remove(&me);
            self.retired.insert(me);
        }
    }
}

impl<A: Actor> Runtime<A> for Deterministic<A> {
    fn ids(&self) -> IdAllocator {
        self.ids.clone()
    }

    fn spawn(&mut self, id: HolonId, actor: A) {
        self.ids.reserve_past(id);
        self.retired.remove(&id);
        self.actors.insert(id, actor);
    }

    fn inject(&mut self, env: Envelope<A::Msg>) {
        self.enqueue(env);
    }

    fn run(&mut self) -> Result<RunStats, RuntimeError> {
        let mut stats = RunStats::default();
        loop {
            if stats.delivered + stats.dropped >= self.step_limit {
                return Err(RuntimeError::StepLimit(self.step_limit));
            }
            if let Some(env) = self.next_envelope() {
                self.deliver(env, &mut stats)?;
                continue;
            }
            if self.fire_next_timer() {
                stats.timers_fired += 1;
                continue;
            }
            return Ok(stats);
        }
    }

    fn drain_external(&mut self) -> Vec<Envelope<A::Msg>> {
        std::mem::take(&mut self.external)
    }

    fn visit(&self, f: &mut dyn FnMut(HolonId, &A)) {
        for (id, a) in &self.actors {
            f(*id, a);
        }
    }

    fn with_actor(&mut self, id: HolonId, f: &mut dyn FnMut(&mut A)) -> bool {
        match self.actors.get_mut(&id) {
            Some(a) => {
                f(a);
                true
            }
            None => false,
        }
    }

    fn set_muted(&mut self, id: HolonId, muted: bool) {
        if muted {
            self.muted.insert(id);
        } else {
            self.muted.remove(&id);
        }
    }

    fn retire(&mut self, id: HolonId) {
        self.actors.remove(&id);
        self.retired.insert(id);
    }

    fn traces(&self) -> BTreeMap<String, HopTrace> {
        self.tracer.traces()
    }

    fn take_log(&mut self) -> Vec<TraceLine> {
        self.tracer.take_log()
    }

    fn clear_traces(&mut self) {
        self.tracer.clear();
    }
}
