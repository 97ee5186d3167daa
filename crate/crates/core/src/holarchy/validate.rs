use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{EntityKind, Holarchy, HolonId, HolonKind, SkillEntry};
use crate::algebra::psum_all;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub holon: HolonId,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "holon {} [{}]: {}", self.holon, self.rule, self.detail)
    }
}

/// Lists every structural invariant the snapshot breaks. Empty means the
/// holarchy is consistent.
pub fn validate(h: &Holarchy) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |holon: HolonId, rule: &'static str, detail: String| out.push(Violation { holon, rule, detail });

    let sys_count = h.count_kind(HolonKind::Sys);
    if sys_count != 1 {
        flag(HolonId::SYS, "single-sys", format!("expected one SYS holon, found {sys_count}"));
    }

    for s in h.iter() {
        for sub in &s.subs {
            match h.get(*sub) {
                None => flag(s.id, "dangling-sub", format!("sub {sub} does not exist")),
                Some(c) if !c.supers.contains(&s.id) => {
                    flag(s.id, "link-symmetry", format!("sub {sub} does not list {} as super", s.id))
                }
                _ => {}
            }
        }
        for sup in &s.supers {
            match h.get(*sup) {
                None => flag(s.id, "dangling-super", format!("super {sup} does not exist")),
                Some(p) if !p.subs.contains(&s.id) => {
                    flag(s.id, "link-symmetry", format!("super {sup} does not list {} as sub", s.id))
                }
                _ => {}
            }
        }

        match s.kind {
            HolonKind::Sys => {
                if s.level != 0 || !s.supers.is_empty() {
                    flag(s.id, "sys-root", format!("level {} with supers {:?}", s.level, s.supers));
                }
            }
            HolonKind::Abstract => {
                if s.level != 1 || s.supers != [HolonId::SYS] {
                    flag(s.id, "abstract-root", format!("level {} with supers {:?}", s.level, s.supers));
                }
                if !s.capability.is_empty() {
                    flag(s.id, "abstract-capability", format!("expected empty capability, found {}", s.capability));
                }
            }
            HolonKind::Algorithm | HolonKind::Data => {
                if s.supers.len() != 1 {
                    flag(s.id, "single-super", format!("expected one super, found {:?}", s.supers));
                }
            }
            HolonKind::Model => {
                if s.supers.len() != 2 {
                    flag(s.id, "model-supers", format!("expected two supers, found {:?}", s.supers));
                } else {
                    let a = h.get(s.supers[0]).map(|x| x.kind);
                    let d = h.get(s.supers[1]).map(|x| x.kind);
                    if a != Some(HolonKind::Algorithm) || d != Some(HolonKind::Data) {
                        flag(s.id, "model-supers", format!("super kinds {a:?} and {d:?}"));
                    }
                    match s.model_links {
                        Some(l) if l.algorithm == s.supers[0] && l.data == s.supers[1] => {}
                        other => flag(s.id, "model-links", format!("links {other:?} disagree with supers")),
                    }
                }
            }
        }

        if let Some(parent) = s.tree_super().and_then(|p| h.get(p)) {
            if s.level != parent.level + 1 {
                flag(s.id, "level", format!("level {} under {} at level {}", s.level, parent.id, parent.level));
            }
            if !super::may_parent(parent.kind, s.kind) {
                flag(s.id, "parent-kind", format!("{:?} under {:?}", s.kind, parent.kind));
            }
        }
    }

    for s in h.iter() {
        if !matches!(s.kind, HolonKind::Algorithm | HolonKind::Data | HolonKind::Abstract) {
            continue;
        }
        let members = h.tree_subs(s.id);
        if members.is_empty() {
            if s.kind == HolonKind::Abstract {
                if !s.skills.is_empty() {
                    flag(s.id, "skill-abstract", format!("childless root holds skills {:?}", s.skills));
                }
                continue;
            }
            let want_kind = if s.kind == HolonKind::Algorithm { EntityKind::Data } else { EntityKind::Algorithm };
            let expected: BTreeSet<SkillEntry> = h
                .iter()
                .filter(|m| m.kind == HolonKind::Model && m.supers.contains(&s.id))
                .flat_map(|m| m.skills.iter().filter(|e| e.entity_kind == want_kind).cloned())
                .collect();
            if expected != s.skills {
                flag(s.id, "skill-atomic", format!("skills {:?} but models give {:?}", s.skills, expected));
            }
            continue;
        }
        if s.kind != HolonKind::Abstract {
            let caps: Vec<_> = members.iter().filter_map(|m| h.get(*m)).map(|m| &m.capability).collect();
            match psum_all(caps) {
                Ok(sum) if sum == s.capability => {}
                Ok(sum) => flag(s.id, "capability-sum", format!("capability {} but subs sum to {}", s.capability, sum)),
                Err(e) => flag(s.id, "capability-sum", format!("subs are not summable: {e}")),
            }
        }
        let union: BTreeSet<SkillEntry> =
            members.iter().filter_map(|m| h.get(*m)).flat_map(|m| m.skills.iter().cloned()).collect();
        if union != s.skills {
            flag(s.id, "skill-composite", format!("skills {:?} but subs give {:?}", s.skills, union));
        }
    }

    for m in h.iter().filter(|m| m.kind == HolonKind::Model && m.supers.len() == 2 && !m.skills.is_empty()) {
        let (Some(a), Some(d)) = (h.get(m.supers[0]), h.get(m.supers[1])) else { continue };
        let expected: BTreeSet<SkillEntry> = [
            SkillEntry { entity_kind: EntityKind::Algorithm, entity_name: a.name.clone(), params: a.capability.clone() },
            SkillEntry { entity_kind: EntityKind::Data, entity_name: d.name.clone(), params: d.capability.clone() },
        ]
        .into_iter()
        .collect();
        if expected != m.skills {
            flag(m.id, "skill-model", format!("skills {:?} but supers give {:?}", m.skills, expected));
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ParamSet;

    #[test]
    fn fresh_system_is_consistent() {
        assert!(validate(&Holarchy::bootstrap()).is_empty());
    }

    #[test]
    fn corrupted_capability_is_reported() {
        let mut h = Holarchy::bootstrap();
        let mid = h.create_holon("X", Some(HolonId::ALG), ParamSet::new(), Default::default(), HolonKind::Algorithm).unwrap();
        h.create_holon("X", Some(mid), ParamSet::of(&[("p", "a")]), Default::default(), HolonKind::Algorithm).unwrap();
        h.create_holon("X", Some(mid), ParamSet::of(&[("p", "b")]), Default::default(), HolonKind::Algorithm).unwrap();
        assert!(validate(&h).is_empty());
        h.holons.get_mut(&mid).unwrap().capability = ParamSet::of(&[("p", "a")]);
        let v = validate(&h);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "capability-sum");
    }

    #[test]
    fn broken_levels_and_links_are_reported() {
        let mut h = Holarchy::bootstrap();
        let x = h.create_holon("X", Some(HolonId::ALG), ParamSet::of(&[("p", "a")]), Default::default(), HolonKind::Algorithm).unwrap();
        h.holons.get_mut(&x).unwrap().level = 5;
        h.holons.get_mut(&HolonId::DATA).unwrap().subs.insert(HolonId(99));
        let rules: Vec<_> = validate(&h).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"level"));
        assert!(rules.contains(&"dangling-sub"));
    }
}
