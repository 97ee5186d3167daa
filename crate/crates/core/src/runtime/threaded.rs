use std::collections::{BTreeMap, HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, Sender};

use super::{panic_message, Actor, Ctx, Envelope, HopTrace, IdAllocator, Message, RunStats, Runtime, RuntimeError, TimerId, TraceLevel, TraceLine, Tracer};
use crate::holarchy::HolonId;

/// How many envelopes a worker takes from one mailbox before yielding.
const BATCH: usize = 32;

struct Slot<A: Actor> {
    id: HolonId,
    actor: Mutex<Option<A>>,
    mailbox: Mutex<VecDeque<Envelope<A::Msg>>>,
    scheduled: AtomicBool,
}

enum Job<A: Actor> {
    Run(Arc<Slot<A>>),
    Stop,
}

#[derive(Default)]
struct Counters {
    delivered: AtomicU64,
    dropped: AtomicU64,
    bounced: AtomicU64,
}

struct Shared<A: Actor> {
    slots: RwLock<HashMap<HolonId, Arc<Slot<A>>>>,
    muted: RwLock<std::collections::HashSet<HolonId>>,
    in_flight: Mutex<u64>,
    quiet: Condvar,
    ready: Sender<Job<A>>,
    external: Mutex<Vec<Envelope<A::Msg>>>,
    tracer: Mutex<Tracer>,
    timers: Mutex<BTreeMap<(Duration, TimerId), Envelope<A::Msg>>>,
    timer_due: Mutex<BTreeMap<TimerId, Duration>>,
    clock: Mutex<Duration>,
    counters: Counters,
    failure: Mutex<Option<RuntimeError>>,
    step_limit: u64,
}

/// Worker-pool executor. Each actor is driven by at most one worker at a
/// time, so per sender/recipient order is preserved. Timers use the same
/// virtual clock as [`super::Deterministic`]: they fire once every mailbox
/// is empty.
pub struct Threaded<A: Actor> {
    shared: Arc<Shared<A>>,
    jobs: Receiver<Job<A>>,
    workers: usize,
    ids: IdAllocator,
}

impl<A: Actor> Threaded<A> {
    pub fn new(workers: usize, trace: TraceLevel) -> Threaded<A> {
        let (tx, rx) = unbounded();
        Threaded {
            shared: Arc::new(Shared {
                slots: RwLock::new(HashMap::new()),
                muted: RwLock::new(Default::default()),
                in_flight: Mutex::new(0),
                quiet: Condvar::new(),
                ready: tx,
                external: Mutex::new(Vec::new()),
                tracer: Mutex::new(Tracer::new(trace)),
                timers: Mutex::new(BTreeMap::new()),
                timer_due: Mutex::new(BTreeMap::new()),
                clock: Mutex::new(Duration::ZERO),
                counters: Counters::default(),
                failure: Mutex::new(None),
                step_limit: 50_000_000,
            }),
            jobs: rx,
            workers: workers.max(1),
            ids: IdAllocator::new(),
        }
    }

    pub fn clock(&self) -> Duration {
        *self.shared.clock.lock().unwrap()
    }
}

impl<A: Actor> Shared<A> {
    fn slot(&self, id: HolonId) -> Option<Arc<Slot<A>>> {
        self.slots.read().unwrap().get(&id).cloned()
    }

    fn insert(&self, id: HolonId, actor: A) {
        let slot = Arc::new(Slot {
            id,
            actor: Mutex::new(Some(actor)),
            mailbox: Mutex::new(VecDeque::new()),
            scheduled: AtomicBool::new(false),
        });
        self.slots.write().unwrap().insert(id, slot);
    }

    fn enqueue(&self, env: Envelope<A::Msg>) {
        self.tracer.lock().unwrap().record(&env);
        if env.to == HolonId::EXTERNAL {
            self.external.lock().unwrap().push(env);
            return;
        }
        match self.slot(env.to) {
            Some(slot) => {
                *self.in_flight.lock().unwrap() += 1;
                slot.mailbox.lock().unwrap().push_back(env);
                self.schedule(&slot);
            }
            None => self.bounce(env),
        }
    }

    fn schedule(&self, slot: &Arc<Slot<A>>) {
        if !slot.scheduled.swap(true, Ordering::AcqRel) {
            let _ = self.ready.send(Job::Run(slot.clone()));
        }
    }

    fn bounce(&self, env: Envelope<A::Msg>) {
        let to = env.to;
        match env.payload.undeliverable(to) {
            Some(b) if env.from != to && self.slot(env.from).is_some() => {
                self.counters.bounced.fetch_add(1, Ordering::Relaxed);
                self.enqueue(Envelope::new(to, env.from, b));
            }
            _ => {
                self.counters.dropped.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    fn finish_one(&self) {
        let mut n = self.in_flight.lock().unwrap();
        *n -= 1;
        if *n == 0 {
            self.quiet.notify_all();
        }
    }

    fn fail(&self, err: RuntimeError) {
        self.failure.lock().unwrap().get_or_insert(err);
    }

    fn process(&self, slot: &Arc<Slot<A>>, ids: &IdAllocator) {
        for _ in 0..BATCH {
            let Some(env) = slot.mailbox.lock().unwrap().pop_front() else { break };
            self.deliver(slot, env, ids);
            self.finish_one();
        }
        slot.scheduled.store(false, Ordering::Release);
        if !slot.mailbox.lock().unwrap().is_empty() {
            self.schedule(slot);
        }
    }

    fn deliver(&self, slot: &Arc<Slot<A>>, env: Envelope<A::Msg>, ids: &IdAllocator) {
        let c = &self.counters;
        if c.delivered.load(Ordering::Relaxed) + c.dropped.load(Ordering::Relaxed) >= self.step_limit {
            c.dropped.fetch_add(1, Ordering::Relaxed);
            self.fail(RuntimeError::StepLimit(self.step_limit));
            return;
        }
        if self.muted.read().unwrap().contains(&slot.id) {
            c.dropped.fetch_add(1, Ordering::Relaxed);
            return;
        }
        let mut guard = slot.actor.lock().unwrap();
        let Some(actor) = guard.as_mut() else {
            drop(guard);
            self.bounce(env);
            return;
        };
        let mut ctx = Ctx::new(slot.id, ids.clone());
        let outcome = catch_unwind(AssertUnwindSafe(|| actor.handle(env, &mut ctx)));
        c.delivered.fetch_add(1, Ordering::Relaxed);
        if let Err(p) = outcome {
            self.fail(RuntimeError::Panicked { holon: slot.id, message: panic_message(&p) });
        }
        if ctx.retire {
            *guard = None;
        }
        drop(guard);
        self.apply(slot.id, ctx);
    }

    fn apply(&self, me: HolonId, ctx: Ctx<A>) {
        if ctx.retire {
            self.slots.write().unwrap().remove(&me);
        }
        for (id, actor) in ctx.spawns {
            self.insert(id, actor);
        }
        for env in ctx.outbox {
            self.enqueue(env);
        }
        let clock = *self.clock.lock().unwrap();
        let mut timers = self.timers.lock().unwrap();
        let mut due = self.timer_due.lock().unwrap();
        for id in ctx.cancels {
            if let Some(d) = due.remove(&id) {
                timers.remove(&(d, id));
            }
        }
        for (id, delay, msg) in ctx.timers {
            due.insert(id, clock + delay);
            timers.insert((clock + delay, id), Envelope::new(me, me, msg));
        }
    }

    fn wait_quiet(&self) {
        let mut n = self.in_flight.lock().unwrap();
        while *n > 0 {
            n = self.quiet.wait(n).unwrap();
        }
    }

    fn fire_next_timer(&self) -> bool {
        let env = {
            let mut timers = self.timers.lock().unwrap();
            let Some((&(due, id), _)) = timers.iter().next() else { return false };
            self.timer_due.lock().unwrap().remove(&id);
            let mut clock = self.clock.lock().unwrap();
            *clock = (*clock).max(due);
            timers.remove(&(due, id)).expect("present")
        };
        self.enqueue(env);
        true
    }
}

impl<A: Actor> Runtime<A> for Threaded<A> {
    fn ids(&self) -> IdAllocator {
        self.ids.clone()
    }

    fn spawn(&mut self, id: HolonId, actor: A) {
        self.ids.reserve_past(id);
        self.shared.insert(id, actor);
    }

    fn inject(&mut self, env: Envelope<A::Msg>) {
        self.shared.enqueue(env);
    }

    fn run(&mut self) -> Result<RunStats, RuntimeError> {
        let shared = &self.shared;
        let c = &shared.counters;
        let before = (c.delivered.load(Ordering::SeqCst), c.dropped.load(Ordering::SeqCst), c.bounced.load(Ordering::SeqCst));
        let mut timers_fired = 0;
        std::thread::scope(|s| {
            for _ in 0..self.workers {
                let jobs = self.jobs.clone();
                let ids = self.ids.clone();
                s.spawn(move || {
                    while let Ok(Job::Run(slot)) = jobs.recv() {
                        shared.process(&slot, &ids);
                    }
                });
            }
            loop {
                shared.wait_quiet();
                if shared.failure.lock().unwrap().is_some() || !shared.fire_next_timer() {
                    break;
                }
                timers_fired += 1;
            }
            for _ in 0..self.workers {
                let _ = shared.ready.send(Job::Stop);
            }
        });
        if let Some(err) = shared.failure.lock().unwrap().take() {
            return Err(err);
        }
        Ok(RunStats {
            delivered: c.delivered.load(Ordering::SeqCst) - before.0,
            dropped: c.dropped.load(Ordering::SeqCst) - before.1,
            bounced: c.bounced.load(Ordering::SeqCst) - before.2,
            timers_fired,
        })
    }

    fn drain_external(&mut self) -> Vec<Envelope<A::Msg>> {
        std::mem::take(&mut *self.shared.external.lock().unwrap())
    }

    fn visit(&self, f: &mut dyn FnMut(HolonId, &A)) {
        let slots: BTreeMap<HolonId, Arc<Slot<A>>> =
            self.shared.slots.read().unwrap().iter().map(|(k, v)| (*k, v.clone())).collect();
        for (id, slot) in slots {
            if let Some(a) = slot.actor.lock().unwrap().as_ref() {
                f(id, a);
            }
        }
    }

    fn with_actor(&mut self, id: HolonId, f: &mut dyn FnMut(&mut A)) -> bool {
        let Some(slot) = self.shared.slot(id) else { return false };
        let mut guard = slot.actor.lock().unwrap();
        match guard.as_mut() {
            Some(a) => {
                f(a);
                true
            }
            None => false,
        }
    }

    fn set_muted(&mut self, id: HolonId, muted: bool) {
        let mut m = self.shared.muted.write().unwrap();
        if muted {
            m.insert(id);
        } else {
            m.remove(&id);
        }
    }

    fn retire(&mut self, id: HolonId) {
        if let Some(slot) = self.shared.slots.write().unwrap().remove(&id) {
            *slot.actor.lock().unwrap() = None;
        }
    }

    fn traces(&self) -> BTreeMap<String, HopTrace> {
        self.shared.tracer.lock().unwrap().traces()
    }

    fn take_log(&mut self) -> Vec<TraceLine> {
        self.shared.tracer.lock().unwrap().take_log()
    }

    fn clear_traces(&mut self) {
        self.shared.tracer.lock().unwrap().clear();
    }
}
