//! In-process mailbox runtime. Handlers never block: they return after
//! queueing outbound envelopes, spawns and timers on a [`Ctx`].

mod deterministic;
mod threaded;
mod trace;

pub use deterministic::{Deterministic, Policy};
pub use threaded::Threaded;
pub use trace::{Hop, HopTrace, TraceLevel, TraceLine, Tracer};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::holarchy::HolonId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Performative {
    Cfp,
    Propose,
    Ask,
    Inform,
    Result,
}

impl fmt::Display for Performative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Performative::Cfp => "CFP",
            Performative::Propose => "PROPOSE",
            Performative::Ask => "ASK",
            Performative::Inform => "INFORM",
            Performative::Result => "RESULT",
        })
    }
}

/// Payload contract. Performative, verb and conversation are properties of
/// the message itself so senders cannot mislabel them.
pub trait Message: Send + fmt::Debug + 'static {
    fn performative(&self) -> Performative;
    fn verb(&self) -> &'static str;
    fn conversation(&self) -> &str;

    fn summary(&self) -> String {
        self.verb().to_string()
    }

    /// Bounce sent back to the sender when `self` could not be delivered
    /// to `to`. `None` drops it silently.
    fn undeliverable(&self, to: HolonId) -> Option<Self>
    where
        Self: Sized;
}

#[derive(Debug, Clone)]
pub struct Envelope<M> {
    pub from: HolonId,
    pub to: HolonId,
    pub payload: M,
}

impl<M: Message> Envelope<M> {
    pub fn new(from: HolonId, to: HolonId, payload: M) -> Envelope<M> {
        Envelope { from, to, payload }
    }

    pub fn performative(&self) -> Performative {
        self.payload.performative()
    }

    pub fn verb(&self) -> &'static str {
        self.payload.verb()
    }

    pub fn conversation(&self) -> &str {
        self.payload.conversation()
    }
}

pub trait Actor: Send + Sized + 'static {
    type Msg: Message;

    fn handle(&mut self, env: Envelope<Self::Msg>, ctx: &mut Ctx<Self>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimerId(pub u64);

/// Shared counters for holon ids (from 1) and timer ids.
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    holons: Arc<AtomicU64>,
    timers: Arc<AtomicU64>,
}

impl IdAllocator {
    pub fn new() -> IdAllocator {
        IdAllocator::starting_at(1)
    }

    pub fn starting_at(first: u64) -> IdAllocator {
        IdAllocator { holons: Arc::new(AtomicU64::new(first)), timers: Arc::new(AtomicU64::new(1)) }
    }

    pub fn next_holon(&self) -> HolonId {
        HolonId(self.holons.fetch_add(1, Ordering::SeqCst))
    }

    /// Makes sure future ids are above `id`.
    pub fn reserve_past(&self, id: HolonId) {
        if !id.is_root() && id != HolonId::EXTERNAL {
            self.holons.fetch_max(id.0 + 1, Ordering::SeqCst);
        }
    }

    fn next_timer(&self) -> TimerId {
        TimerId(self.timers.fetch_add(1, Ordering::SeqCst))
    }
}

/// Side effects a handler requests; applied by the executor once the
/// handler returns.
pub struct Ctx<A: Actor> {
    me: HolonId,
    ids: IdAllocator,
    pub(crate) outbox: Vec<Envelope<A::Msg>>,
    pub(crate) spawns: Vec<(HolonId, A)>,
    pub(crate) timers: Vec<(TimerId, Duration, A::Msg)>,
    pub(crate) cancels: Vec<TimerId>,
    pub(crate) retire: bool,
}

impl<A: Actor> Ctx<A> {
    pub fn new(me: HolonId, ids: IdAllocator) -> Ctx<A> {
        Ctx { me, ids, outbox: Vec::new(), spawns: Vec::new(), timers: Vec::new(), cancels: Vec::new(), retire: false }
    }

    pub fn me(&self) -> HolonId {
        self.me
    }

    pub fn send(&mut self, to: HolonId, msg: A::Msg) {
        self.outbox.push(Envelope::new(self.me, to, msg));
    }

    pub fn alloc_id(&mut self) -> HolonId {
        self.ids.next_holon()
    }

    /// Registers a new actor; it can receive messages sent from this same
    /// handler.
    pub fn spawn(&mut self, id: HolonId, actor: A) {
        self.spawns.push((id, actor));
    }

    /// Delivers `msg` to this actor after `delay` (virtual time in the
    /// deterministic executor).
    pub fn set_timer(&mut self, delay: Duration, msg: A::Msg) -> TimerId {
        let id = self.ids.next_timer();
        self.timers.push((id, delay, msg));
        id
    }

    pub fn cancel_timer(&mut self, id: TimerId) {
        self.cancels.push(id);
    }

    /// Unregisters this actor after the handler returns.
    pub fn retire(&mut self) {
        self.retire = true;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub delivered: u64,
    pub dropped: u64,
    pub bounced: u64,
    pub timers_fired: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("step limit of {0} deliveries reached before the system went quiet")]
    StepLimit(u64),
    #[error("handler for {holon} panicked: {message}")]
    Panicked { holon: HolonId, message: String },
}

/// What the system facade needs from an executor.
pub trait Runtime<A: Actor>: Send {
    fn ids(&self) -> IdAllocator;
    fn spawn(&mut self, id: HolonId, actor: A);
    fn inject(&mut self, env: Envelope<A::Msg>);
    /// Processes messages and timers until nothing is pending.
    fn run(&mut self) -> Result<RunStats, RuntimeError>;
    /// Envelopes addressed to [`HolonId::EXTERNAL`] since the last call.
    fn drain_external(&mut self) -> Vec<Envelope<A::Msg>>;
    fn visit(&self, f: &mut dyn FnMut(HolonId, &A));
    fn with_actor(&mut self, id: HolonId, f: &mut dyn FnMut(&mut A)) -> bool;
    /// A muted actor silently loses every message addressed to it.
    fn set_muted(&mut self, id: HolonId, muted: bool);
    fn retire(&mut self, id: HolonId);
    fn traces(&self) -> BTreeMap<String, HopTrace>;
    fn take_log(&mut self) -> Vec<TraceLine>;
    fn clear_traces(&mut self);
}

pub(crate) fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}
