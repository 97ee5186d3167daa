use std::collections::BTreeSet;
use std::fmt::Write;

use super::{Holarchy, HolonId, HolonKind};

fn node_label(h: &Holarchy, id: HolonId) -> String {
    match h.get(id) {
        Some(s) if id.is_root() => s.name.clone(),
        Some(s) => format!("{}:{}", id, s.name),
        None => id.to_string(),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz text for the subtree under `root`. Nodes are labelled `id:name`,
/// tree links are solid and the model-to-data links dashed.
pub fn export_dot(h: &Holarchy, root: HolonId, include_models: bool) -> String {
    let keep = |id: &HolonId| include_models || h.get(*id).is_some_and(|s| s.kind != HolonKind::Model);
    let nodes: BTreeSet<HolonId> = h.subtree(root).into_iter().filter(keep).collect();

    let mut out = String::from("digraph holarchy {\n  node [shape=box];\n");
    // Roots first so the drawing starts at SYS / ALG / DATA.
    let ordered = nodes.iter().filter(|id| id.is_root()).rev().chain(nodes.iter().filter(|id| !id.is_root()));
    for id in ordered {
        let style = match h.get(*id).map(|s| s.kind) {
            Some(HolonKind::Model) => ", shape=ellipse",
            _ => "",
        };
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"{}];", id, escape(&node_label(h, *id)), style);
    }

    let mut edges = BTreeSet::new();
    for id in &nodes {
        let s = h.get(*id).expect("node from snapshot");
        if let Some(parent) = s.tree_super() {
            if nodes.contains(&parent) {
                edges.insert((edge_key(parent), edge_key(*id), parent, *id, false));
            }
        }
        if s.kind == HolonKind::Model {
            if let Some(data) = s.supers.get(1) {
                if nodes.contains(data) {
                    edges.insert((edge_key(*data), edge_key(*id), *data, *id, true));
                }
            }
        }
    }
    for (_, _, from, to, dashed) in edges {
        let style = if dashed { " [style=dashed]" } else { "" };
        let _ = writeln!(out, "  \"{from}\" -> \"{to}\"{style};");
    }
    out.push_str("}\n");
    out
}

// Roots sort before numbered holons in edge listings.
fn edge_key(id: HolonId) -> (u8, u64) {
    if id.is_root() {
        (0, u64::MAX - id.0)
    } else {
        (1, id.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ParamSet;

    #[test]
    fn empty_system_has_three_nodes() {
        let dot = export_dot(&Holarchy::bootstrap(), HolonId::SYS, true);
        assert_eq!(dot.matches("[label=").count(), 3);
        assert!(dot.contains("\"SYS\" -> \"ALG\";"));
        assert!(dot.contains("\"SYS\" -> \"DATA\";"));
    }

    #[test]
    fn models_are_dashed_and_optional() {
        let mut h = Holarchy::bootstrap();
        let a = h.create_holon("SVC", Some(HolonId::ALG), ParamSet::of(&[("k", "rbf")]), Default::default(), HolonKind::Algorithm).unwrap();
        let d = h.create_holon("iris", Some(HolonId::DATA), ParamSet::of(&[("type", "train")]), Default::default(), HolonKind::Data).unwrap();
        let m = h.create_holon("SVC", Some(a), ParamSet::of(&[("k", "rbf")]), Default::default(), HolonKind::Model).unwrap();
        h.record_model_skill(m, d).unwrap();
        let full = export_dot(&h, HolonId::SYS, true);
        assert!(full.contains(&format!("\"{d}\" -> \"{m}\" [style=dashed];")));
        assert!(full.contains(&format!("\"{m}\" [label=\"{m}:SVC\", shape=ellipse];")));
        let bare = export_dot(&h, HolonId::SYS, false);
        assert!(!bare.contains("ellipse"));
        assert_eq!(bare.matches("[label=").count(), 5);
    }
}
