//! Holon identity, kinds, capability/skill bookkeeping and quiesced
//! snapshots of the whole structure.

mod dot;
mod validate;

pub use dot::export_dot;
pub use validate::{validate, Violation};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::algebra::{psum, AlgebraError, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HolonId(pub u64);

impl HolonId {
    pub const SYS: HolonId = HolonId(u64::MAX);
    pub const ALG: HolonId = HolonId(u64::MAX - 1);
    pub const DATA: HolonId = HolonId(u64::MAX - 2);
    /// Sender address used for requests injected from outside the holarchy.
    pub const EXTERNAL: HolonId = HolonId(u64::MAX - 3);

    pub fn is_root(self) -> bool {
        self == HolonId::SYS || self == HolonId::ALG || self == HolonId::DATA
    }
}

impl fmt::Display for HolonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            HolonId::SYS => f.write_str("SYS"),
            HolonId::ALG => f.write_str("ALG"),
            HolonId::DATA => f.write_str("DATA"),
            HolonId::EXTERNAL => f.write_str("EXT"),
            HolonId(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for HolonId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "SYS" => Ok(HolonId::SYS),
            "ALG" => Ok(HolonId::ALG),
            "DATA" => Ok(HolonId::DATA),
            "EXT" => Ok(HolonId::EXTERNAL),
            other => other.parse::<u64>().map(HolonId).map_err(|_| format!("invalid holon id `{other}`")),
        }
    }
}

impl Serialize for HolonId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for HolonId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HolonKind {
    Sys,
    Abstract,
    Algorithm,
    Data,
    Model,
}

/// The two construction sides of the holarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Alg,
    Data,
}

impl Side {
    pub fn root(self) -> HolonId {
        match self {
            Side::Alg => HolonId::ALG,
            Side::Data => HolonId::DATA,
        }
    }

    pub fn holon_kind(self) -> HolonKind {
        match self {
            Side::Alg => HolonKind::Algorithm,
            Side::Data => HolonKind::Data,
        }
    }

    pub fn entity(self) -> EntityKind {
        match self {
            Side::Alg => EntityKind::Algorithm,
            Side::Data => EntityKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Algorithm,
    Data,
    Model,
}

impl EntityKind {
    pub fn side(self) -> Option<Side> {
        match self {
            EntityKind::Algorithm => Some(Side::Alg),
            EntityKind::Data => Some(Side::Data),
            EntityKind::Model => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SkillEntry {
    pub entity_kind: EntityKind,
    pub entity_name: String,
    pub params: ParamSet,
}

/// `⟨name, type, P⟩` descriptor of an algorithm, dataset or model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub entity_kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub type_chain: Vec<String>,
    #[serde(default)]
    pub params: ParamSet,
    /// Display id such as `A07`, used for report labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ResourceSpec {
    pub fn new(entity_kind: EntityKind, name: impl Into<String>, params: ParamSet) -> ResourceSpec {
        ResourceSpec { entity_kind, name: name.into(), type_chain: Vec::new(), params, label: None }
    }

    pub fn algorithm(name: impl Into<String>, params: ParamSet) -> ResourceSpec {
        ResourceSpec::new(EntityKind::Algorithm, name, params)
    }

    pub fn data(name: impl Into<String>, params: ParamSet) -> ResourceSpec {
        ResourceSpec::new(EntityKind::Data, name, params)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> ResourceSpec {
        self.label = Some(label.into());
        self
    }

    pub fn with_type_chain(mut self, chain: &[&str]) -> ResourceSpec {
        self.type_chain = chain.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn display(&self) -> String {
        format!("{}{}", self.name, self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelLinks {
    pub algorithm: HolonId,
    pub data: HolonId,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructuralError {
    #[error("holon {0} does not exist")]
    Unknown(HolonId),
    #[error("{child:?} holon cannot be placed under {parent:?} holon")]
    BadParent { parent: HolonKind, child: HolonKind },
    #[error("joining {new_super} would make {holon} its own ancestor")]
    Cycle { holon: HolonId, new_super: HolonId },
    #[error("no address stored for query `{query}` at holon {holon}")]
    MissingAddress { holon: HolonId, query: String },
    #[error("capability schema violation at holon {holon}: {source}")]
    Schema { holon: HolonId, source: AlgebraError },
    #[error("model {0} has unresolved super links")]
    UnresolvedModel(HolonId),
}

/// One holon's externally visible state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonState {
    pub id: HolonId,
    pub kind: HolonKind,
    pub level: u32,
    pub name: String,
    pub capability: ParamSet,
    pub skills: BTreeSet<SkillEntry>,
    /// Tree super first; a model's data super second.
    pub supers: Vec<HolonId>,
    pub subs: BTreeSet<HolonId>,
    pub address_book: BTreeMap<String, HolonId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_links: Option<ModelLinks>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub type_chain: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl HolonState {
    pub fn new(id: HolonId, kind: HolonKind, name: impl Into<String>, capability: ParamSet) -> HolonState {
        HolonState {
            id,
            kind,
            level: 0,
            name: name.into(),
            capability,
            skills: BTreeSet::new(),
            supers: Vec::new(),
            subs: BTreeSet::new(),
            address_book: BTreeMap::new(),
            model_links: None,
            type_chain: Vec::new(),
            label: None,
        }
    }

    pub fn sys() -> HolonState {
        let mut s = HolonState::new(HolonId::SYS, HolonKind::Sys, "SYS", ParamSet::new());
        s.subs.extend([HolonId::ALG, HolonId::DATA]);
        s
    }

    pub fn abstract_root(side: Side) -> HolonState {
        let name = match side {
            Side::Alg => "ALG",
            Side::Data => "DATA",
        };
        let mut s = HolonState::new(side.root(), HolonKind::Abstract, name, ParamSet::new());
        s.level = 1;
        s.supers.push(HolonId::SYS);
        s
    }

    pub fn tree_super(&self) -> Option<HolonId> {
        self.supers.first().copied()
    }

    pub fn store_address(&mut self, query: &str, target: HolonId) {
        self.address_book.insert(query.to_string(), target);
    }

    pub fn get_address(&self, query: &str) -> Result<HolonId, StructuralError> {
        self.address_book
            .get(query)
            .copied()
            .ok_or_else(|| StructuralError::MissingAddress { holon: self.id, query: query.to_string() })
    }

    /// Points every entry aimed at `moved` to `intermediate` and returns the
    /// query ids that were redirected; the intermediate should map exactly
    /// those ids to `moved`.
    pub fn rewire_addresses(&mut self, moved: HolonId, intermediate: HolonId) -> Vec<String> {
        let mut redirected = Vec::new();
        for (query, target) in self.address_book.iter_mut() {
            if *target == moved {
                *target = intermediate;
                redirected.push(query.clone());
            }
        }
        redirected
    }

    /// `C ← C ⊕ incoming`. Level-1 holons keep an empty capability.
    /// Returns whether the capability changed.
    pub fn update_capability(&mut self, incoming: &ParamSet) -> Result<bool, StructuralError> {
        if self.level <= 1 {
            return Ok(false);
        }
        let merged = psum(&self.capability, incoming)
            .map_err(|source| StructuralError::Schema { holon: self.id, source })?;
        let changed = merged != self.capability;
        self.capability = merged;
        Ok(changed)
    }

    pub fn label_or_id(&self) -> String {
        self.label.clone().unwrap_or_else(|| format!("{}:{}", self.id, self.name))
    }
}

/// Checks whether `child` may sit directly below `parent` on a tree link.
pub fn may_parent(parent: HolonKind, child: HolonKind) -> bool {
    use HolonKind::*;
    matches!(
        (parent, child),
        (Sys, Abstract) | (Abstract, Algorithm) | (Abstract, Data) | (Algorithm, Algorithm) | (Data, Data) | (Algorithm, Model)
    )
}

/// A quiesced copy of every holon's state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Holarchy {
    pub holons: BTreeMap<HolonId, HolonState>,
}

impl Holarchy {
    /// SYS with the two abstract roots.
    pub fn bootstrap() -> Holarchy {
        let mut h = Holarchy::default();
        h.insert(HolonState::sys());
        h.insert(HolonState::abstract_root(Side::Alg));
        h.insert(HolonState::abstract_root(Side::Data));
        h
    }

    pub fn insert(&mut self, state: HolonState) {
        self.holons.insert(state.id, state);
    }

    pub fn get(&self, id: HolonId) -> Option<&HolonState> {
        self.holons.get(&id)
    }

    pub fn len(&self) -> usize {
        self.holons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holons.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &HolonState> {
        self.holons.values()
    }

    pub fn count_kind(&self, kind: HolonKind) -> usize {
        self.iter().filter(|h| h.kind == kind).count()
    }

    /// Non-model subs of a holon, in id order.
    pub fn tree_subs(&self, id: HolonId) -> Vec<HolonId> {
        self.get(id)
            .map(|h| {
                h.subs
                    .iter()
                    .copied()
                    .filter(|s| self.get(*s).is_some_and(|c| c.kind != HolonKind::Model))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn model_subs(&self, id: HolonId) -> Vec<HolonId> {
        self.get(id)
            .map(|h| {
                h.subs
                    .iter()
                    .copied()
                    .filter(|s| self.get(*s).is_some_and(|c| c.kind == HolonKind::Model))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_atomic(&self, id: HolonId) -> bool {
        self.tree_subs(id).is_empty()
    }

    /// Atomic algorithm or data holons on one side, in id order.
    pub fn leaves(&self, side: Side) -> Vec<&HolonState> {
        let kind = side.holon_kind();
        self.iter().filter(|h| h.kind == kind && self.is_atomic(h.id)).collect()
    }

    /// All holons reachable from `root` over tree links (models included
    /// below their algorithm holon), depth first in id order.
    pub fn subtree(&self, root: HolonId) -> Vec<HolonId> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let Some(h) = self.get(id) else { continue };
            out.push(id);
            for s in h.subs.iter().rev() {
                let Some(child) = self.get(*s) else { continue };
                if child.tree_super() == Some(id) {
                    stack.push(*s);
                }
            }
        }
        out
    }

    /// Follows address-book entries for `query` from `start` and returns the
    /// visited path, stopping at a self-reference or a missing entry.
    pub fn follow_addresses(&self, start: HolonId, query: &str) -> Vec<HolonId> {
        let mut path = vec![start];
        let mut current = start;
        while let Some(next) = self.get(current).and_then(|h| h.address_book.get(query)).copied() {
            if next == current || path.contains(&next) {
                break;
            }
            path.push(next);
            current = next;
        }
        path
    }

    fn next_id(&self) -> HolonId {
        let max = self.holons.keys().filter(|id| !id.is_root()).map(|id| id.0).max().unwrap_or(0);
        HolonId(max + 1)
    }

    fn is_ancestor(&self, candidate: HolonId, of: HolonId) -> bool {
        let mut current = self.get(of).and_then(|h| h.tree_super());
        while let Some(id) = current {
            if id == candidate {
                return true;
            }
            current = self.get(id).and_then(|h| h.tree_super());
        }
        false
    }

    /// Registers a holon, optionally under `parent`. Without a parent the
    /// holon waits for `join_holon` to receive its level.
    pub fn create_holon(
        &mut self,
        name: &str,
        parent: Option<HolonId>,
        capability: ParamSet,
        skills: BTreeSet<SkillEntry>,
        kind: HolonKind,
    ) -> Result<HolonId, StructuralError> {
        if let Some(p) = parent {
            let pk = self.get(p).ok_or(StructuralError::Unknown(p))?.kind;
            if !may_parent(pk, kind) {
                return Err(StructuralError::BadParent { parent: pk, child: kind });
            }
        }
        let id = self.next_id();
        let mut state = HolonState::new(id, kind, name, capability);
        state.skills = skills;
        self.insert(state);
        if let Some(p) = parent {
            self.join_holon(id, p)?;
        }
        Ok(id)
    }

    /// Moves `holon` under `new_super` (replacing its tree super) and folds
    /// its capability into the new ancestors.
    pub fn join_holon(&mut self, holon: HolonId, new_super: HolonId) -> Result<(), StructuralError> {
        if holon == new_super || self.is_ancestor(holon, new_super) {
            return Err(StructuralError::Cycle { holon, new_super });
        }
        let parent = self.get(new_super).ok_or(StructuralError::Unknown(new_super))?.clone();
        let child = self.get(holon).ok_or(StructuralError::Unknown(holon))?.clone();
        if !may_parent(parent.kind, child.kind) {
            return Err(StructuralError::BadParent { parent: parent.kind, child: child.kind });
        }
        if let Some(old) = child.tree_super() {
            if let Some(o) = self.holons.get_mut(&old) {
                o.subs.remove(&holon);
            }
        }
        {
            let c = self.holons.get_mut(&holon).expect("checked above");
            if c.supers.is_empty() {
                c.supers.push(new_super);
            } else {
                c.supers[0] = new_super;
            }
        }
        self.holons.get_mut(&new_super).expect("checked above").subs.insert(holon);
        self.relevel(holon, parent.level + 1);
        if child.kind != HolonKind::Model {
            let mut current = Some(new_super);
            let mut incoming = child.capability.clone();
            while let Some(id) = current {
                let h = self.holons.get_mut(&id).expect("ancestor exists");
                if h.level <= 1 {
                    break;
                }
                h.update_capability(&incoming)?;
                incoming = h.capability.clone();
                current = h.tree_super();
            }
        }
        Ok(())
    }

    fn relevel(&mut self, root: HolonId, level: u32) {
        let mut stack = vec![(root, level)];
        while let Some((id, lvl)) = stack.pop() {
            let Some(h) = self.holons.get_mut(&id) else { continue };
            h.level = lvl;
            let subs: Vec<HolonId> = h.subs.iter().copied().collect();
            for s in subs {
                if self.get(s).and_then(|c| c.tree_super()) == Some(id) {
                    stack.push((s, lvl + 1));
                }
            }
        }
    }

    /// Attaches a trained model to its data holon and applies the skill
    /// equations along both ancestor chains.
    pub fn record_model_skill(&mut self, model: HolonId, data: HolonId) -> Result<(), StructuralError> {
        let m = self.get(model).ok_or(StructuralError::Unknown(model))?.clone();
        let alg = m.tree_super().ok_or(StructuralError::UnresolvedModel(model))?;
        let a = self.get(alg).ok_or(StructuralError::UnresolvedModel(model))?.clone();
        let d = self.get(data).ok_or(StructuralError::UnresolvedModel(model))?.clone();
        let alg_entry = SkillEntry { entity_kind: EntityKind::Algorithm, entity_name: a.name.clone(), params: a.capability.clone() };
        let data_entry = SkillEntry { entity_kind: EntityKind::Data, entity_name: d.name.clone(), params: d.capability.clone() };
        {
            let mm = self.holons.get_mut(&model).expect("model exists");
            if mm.supers.len() < 2 {
                mm.supers.push(data);
            }
            mm.model_links = Some(ModelLinks { algorithm: alg, data });
            mm.skills = [alg_entry.clone(), data_entry.clone()].into_iter().collect();
        }
        self.holons.get_mut(&data).expect("data exists").subs.insert(model);
        for (start, entry) in [(alg, data_entry), (data, alg_entry)] {
            let mut current = Some(start);
            while let Some(id) = current {
                let h = self.holons.get_mut(&id).expect("ancestor exists");
                if h.kind == HolonKind::Sys {
                    break;
                }
                h.skills.insert(entry.clone());
                current = h.tree_super();
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let holons: Vec<&HolonState> = self.holons.values().collect();
        serde_json::to_string_pretty(&holons).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Holarchy, serde_json::Error> {
        let holons: Vec<HolonState> = serde_json::from_str(text)?;
        Ok(Holarchy { holons: holons.into_iter().map(|h| (h.id, h)).collect() })
    }
}
