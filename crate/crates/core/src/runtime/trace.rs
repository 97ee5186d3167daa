use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Envelope, Message, Performative};
use crate::holarchy::HolonId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    /// Per-conversation counters only.
    #[default]
    Counters,
    /// Counters plus every hop, and a JSON-lines log.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub from: HolonId,
    pub to: HolonId,
    pub performative: Performative,
    pub verb: String,
}

/// Append-only record of one conversation's traffic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopTrace {
    pub conversation: String,
    pub hops: Vec<Hop>,
    pub by_performative: BTreeMap<Performative, u64>,
    pub by_verb: BTreeMap<String, u64>,
}

impl HopTrace {
    pub fn total(&self) -> u64 {
        self.by_performative.values().sum()
    }

    pub fn count(&self, p: Performative) -> u64 {
        self.by_performative.get(&p).copied().unwrap_or(0)
    }

    pub fn verb(&self, verb: &str) -> u64 {
        self.by_verb.get(verb).copied().unwrap_or(0)
    }

    /// Hops carrying `verb` whose recipient satisfies `pred`. Needs a full
    /// trace.
    pub fn count_to(&self, verb: &str, pred: impl Fn(HolonId) -> bool) -> u64 {
        self.hops.iter().filter(|h| h.verb == verb && pred(h.to)).count() as u64
    }
}

/// One line of the JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub seq: u64,
    pub conversation: String,
    pub from: HolonId,
    pub to: HolonId,
    pub performative: Performative,
    pub verb: String,
    pub summary: String,
}

#[derive(Debug, Default)]
pub struct Tracer {
    pub level: TraceLevel,
    seq: u64,
    convs: BTreeMap<String, HopTrace>,
    log: Vec<TraceLine>,
}

impl Tracer {
    pub fn new(level: TraceLevel) -> Tracer {
        Tracer { level, ..Tracer::default() }
    }

    pub fn record<M: Message>(&mut self, env: &Envelope<M>) {
        self.seq += 1;
        let conv = env.conversation();
        let t = match self.convs.get_mut(conv) {
            Some(t) => t,
            None => self
                .convs
                .entry(conv.to_string())
                .or_insert_with(|| HopTrace { conversation: conv.to_string(), ..HopTrace::default() }),
        };
        *t.by_performative.entry(env.performative()).or_insert(0) += 1;
        *t.by_verb.entry(env.verb().to_string()).or_insert(0) += 1;
        if self.level == TraceLevel::Full {
            t.hops.push(Hop { from: env.from, to: env.to, performative: env.performative(), verb: env.verb().to_string() });
            self.log.push(TraceLine {
                seq: self.seq,
                conversation: conv.to_string(),
                from: env.from,
                to: env.to,
                performative: env.performative(),
                verb: env.verb().to_string(),
                summary: env.payload.summary(),
            });
        }
    }

    pub fn traces(&self) -> BTreeMap<String, HopTrace> {
        self.convs.clone()
    }

    pub fn take_log(&mut self) -> Vec<TraceLine> {
        std::mem::take(&mut self.log)
    }

    pub fn clear(&mut self) {
        self.convs.clear();
        self.log.clear();
    }
}
