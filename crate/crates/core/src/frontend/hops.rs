//! Message counts from traced runs against the analytical bounds.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::algebra::ParamSet;
use crate::holarchy::{Holarchy, HolonId, HolonKind, Side};
use crate::runtime::HopTrace;

/// Smallest h with b^h >= n.
pub fn ceil_log(b: u64, n: u64) -> u32 {
    assert!(b >= 2, "branching factor below 2");
    let (mut h, mut reach) = (0, 1u64);
    while reach < n {
        reach = reach.saturating_mul(b);
        h += 1;
    }
    h
}

/// CFP messages one insert may send into a complete b-ary family of n leaves.
pub fn complete_cfp_bound(b: u64, n: u64) -> u64 {
    b * u64::from(ceil_log(b, n)) + 3
}

/// CFP messages one insert may send into a deep chain of n leaves.
pub fn chain_cfp_bound(n: u64) -> u64 {
    n + 3
}

/// Holons below SYS, ALG and DATA in a dense holarchy whose two sides are
/// complete trees: models plus the nodes of each tree.
pub fn total_complete(n_a: u64, b_a: u64, n_d: u64, b_d: u64) -> f64 {
    let side = |n: u64, b: u64| (b * n - 1) as f64 / (b - 1) as f64;
    (n_d * n_a) as f64 + side(n_d, b_d) + side(n_a, b_a)
}

/// The same count written for the deep layout, as height times branching.
pub fn total_chain(n_a: u64, b_a: u64, n_d: u64, b_d: u64) -> f64 {
    let side = |n: u64, b: u64| (b * (n - 1)) as f64 / (b - 1) as f64;
    (n_d * n_a) as f64 + side(n_d, b_d) + side(n_a, b_a)
}

/// Shape of one side of a snapshot, model holons excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Topology {
    pub leaves: u64,
    pub composites: u64,
    /// Fewest and most tree subs over composite holons below the side root.
    pub min_branching: u64,
    pub max_branching: u64,
    /// Longest root-to-leaf path below the side root, in edges.
    pub depth: u64,
}

pub fn topology(h: &Holarchy, side: Side) -> Topology {
    let mut t = Topology { min_branching: u64::MAX, ..Topology::default() };
    let mut stack: Vec<(HolonId, u64)> = h.tree_subs(side.root()).into_iter().map(|id| (id, 0)).collect();
    while let Some((id, d)) = stack.pop() {
        let subs = h.tree_subs(id);
        if subs.is_empty() {
            t.leaves += 1;
            t.depth = t.depth.max(d);
        } else {
            t.composites += 1;
            t.min_branching = t.min_branching.min(subs.len() as u64);
            t.max_branching = t.max_branching.max(subs.len() as u64);
            stack.extend(subs.into_iter().map(|s| (s, d + 1)));
        }
    }
    if t.composites == 0 {
        t.min_branching = 0;
    }
    t
}

pub fn model_count(h: &Holarchy) -> u64 {
    h.count_kind(HolonKind::Model) as u64
}

/// Family shapes for hand-built holarchies. `size` is the depth of a
/// complete tree and the number of composites in a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "layout")]
pub enum Layout {
    Complete { b: u64, size: u32 },
    /// Each composite holds one composite and b-1 leaves; the last holds b
    /// leaves.
    Chain { b: u64, size: u32 },
}

impl Layout {
    pub fn leaves(self) -> u64 {
        match self {
            Layout::Complete { b, size } => b.pow(size),
            Layout::Chain { b, size } => (b - 1) * u64::from(size) + 1,
        }
    }

    pub fn cfp_bound(self) -> u64 {
        match self {
            Layout::Complete { b, .. } => complete_cfp_bound(b, self.leaves()),
            Layout::Chain { .. } => chain_cfp_bound(self.leaves()),
        }
    }

    /// Parameter count of the family's schema.
    pub fn width(self) -> u32 {
        match self {
            Layout::Complete { size, .. } | Layout::Chain { size, .. } => size,
        }
    }

    /// A spec that is not in the family and routes to the composite
    /// visited last at every level: the worst case for a CFP descent.
    pub fn probe(self) -> ParamSet {
        let w = self.width() as usize;
        let values: Vec<String> = match self {
            Layout::Complete { b, .. } => (0..w).map(|i| if i + 1 == w { "z".into() } else { (b - 1).to_string() }).collect(),
            Layout::Chain { .. } => (0..w).map(|i| if i + 1 == w { "z".into() } else { "a".into() }).collect(),
        };
        params(&values)
    }
}

fn params(values: &[String]) -> ParamSet {
    let pairs: Vec<(String, &str)> = values.iter().enumerate().map(|(i, v)| (format!("p{}", i + 1), v.as_str())).collect();
    ParamSet::of(&pairs)
}

/// Adds one family of the given shape under a side root. Siblings on the
/// descent path of [`Layout::probe`] get the highest ids, so early-stop
/// routing looks at every other child first. Returns the leaves.
pub fn build_family(h: &mut Holarchy, side: Side, name: &str, layout: Layout) -> Vec<HolonId> {
    let kind = side.holon_kind();
    let w = layout.width() as usize;
    let add = |h: &mut Holarchy, parent: HolonId, values: &[String]| {
        h.create_holon(name, Some(parent), params(values), Default::default(), kind).expect("valid layout")
    };
    let mut leaves = Vec::new();
    match layout {
        Layout::Complete { b, .. } => {
            let mut frontier = vec![(side.root(), Vec::<String>::new())];
            let top = add(h, side.root(), &vec!["*".to_string(); w]);
            frontier[0] = (top, Vec::new());
            while let Some((parent, prefix)) = frontier.pop() {
                for digit in 0..b {
                    let mut values = prefix.clone();
                    values.push(digit.to_string());
                    let depth = values.len();
                    values.resize(w, "*".into());
                    let id = add(h, parent, &values);
                    if depth == w {
                        leaves.push(id);
                    } else {
                        values.truncate(depth);
                        frontier.push((id, values));
                    }
                }
            }
        }
        Layout::Chain { b, .. } => {
            let mut parent = add(h, side.root(), &vec!["*".to_string(); w]);
            for depth in 0..w {
                // Side leaves share the prefix and differ everywhere after
                // it, so they never outbid the composite below.
                let side_leaf = |v: &str| -> Vec<String> { (0..w).map(|i| if i < depth { "a".into() } else { v.into() }).collect() };
                for j in 1..b {
                    leaves.push(add(h, parent, &side_leaf(&format!("x{j}"))));
                }
                if depth + 1 == w {
                    leaves.push(add(h, parent, &vec!["a".to_string(); w]));
                } else {
                    let mut values: Vec<String> = vec!["a".into(); depth + 1];
                    values.resize(w, "*".into());
                    parent = add(h, parent, &values);
                }
            }
        }
    }
    leaves
}

/// A bootstrapped holarchy with one algorithm family `X` and one data
/// family `D`, and a model for every (algorithm leaf, data leaf) pair.
pub fn dense_holarchy(alg: Layout, data: Layout) -> Holarchy {
    let mut h = Holarchy::bootstrap();
    let algs = build_family(&mut h, Side::Alg, "X", alg);
    let datas = build_family(&mut h, Side::Data, "D", data);
    for a in &algs {
        for d in &datas {
            let cap = h.get(*a).expect("leaf exists").capability.clone();
            let m = h.create_holon("X", Some(*a), cap, Default::default(), HolonKind::Model).expect("model under leaf");
            h.record_model_skill(m, *d).expect("fresh model");
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopLine {
    pub query: String,
    pub measured: u64,
    pub bound: f64,
    pub pass: bool,
    /// Messages outside the bounded count (exact-match lookups for
    /// inserts, replies for tests), for reference.
    pub other: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HopReport {
    pub lines: Vec<HopLine>,
}

impl HopReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("query\tmeasured\tbound\tother\tresult\n");
        for l in &self.lines {
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", l.query, l.measured, l.bound, l.other, if l.pass { "pass" } else { "FAIL" });
        }
        s
    }
}

/// First-pass CFP counts of every traced conversation that ran a CFP,
/// against the bound for the layout.
pub fn insert_report(traces: &BTreeMap<String, HopTrace>, layout: Layout) -> HopReport {
    let bound = layout.cfp_bound();
    let lines = traces
        .values()
        .filter(|t| t.verb("CFP") > 0)
        .map(|t| {
            let measured = t.verb("CFP");
            HopLine { query: t.conversation.clone(), measured, bound: bound as f64, pass: measured <= bound, other: t.verb("LOOKUP") }
        })
        .collect();
    HopReport { lines }
}

/// Test-query requests delivered below SYS, ALG and DATA, against a holon
/// total. Needs a full trace.
pub fn test_report(trace: &HopTrace, total: f64) -> HopReport {
    let below = |id: HolonId| !id.is_root();
    let measured = trace.count_to("TEST", below) + trace.count_to("RESOLVE-DATA", below);
    HopReport {
        lines: vec![HopLine {
            query: trace.conversation.clone(),
            measured,
            bound: total,
            pass: measured as f64 <= total,
            other: trace.total() - measured,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_match_hand_counts() {
        assert_eq!(ceil_log(2, 32), 5);
        assert_eq!(ceil_log(3, 27), 3);
        assert_eq!(ceil_log(3, 28), 4);
        assert_eq!(ceil_log(4, 1), 0);
        assert_eq!(complete_cfp_bound(2, 32), 13);
        assert_eq!(chain_cfp_bound(10), 13);
        // 4 algorithms and 2 datasets in binary trees: 8 models, 3 + 7 nodes.
        assert_eq!(total_complete(4, 2, 2, 2), 18.0);
        assert_eq!(total_chain(4, 2, 2, 2), 8.0 + 2.0 + 6.0);
    }

    #[test]
    fn built_layouts_have_the_advertised_shape() {
        for b in 2..=4 {
            let layout = Layout::Complete { b, size: 3 };
            let h = dense_holarchy(layout, Layout::Chain { b, size: 2 });
            assert!(crate::holarchy::validate(&h).is_empty(), "{:?}", crate::holarchy::validate(&h));
            let t = topology(&h, Side::Alg);
            assert_eq!((t.leaves, t.min_branching, t.max_branching, t.depth), (b.pow(3), b, b, 3));
            let d = topology(&h, Side::Data);
            assert_eq!((d.leaves, d.composites, d.depth), (2 * b - 1, 2, 2));
            let below_roots = h.len() as u64 - 3;
            assert_eq!(below_roots as f64, total_complete(t.leaves, b, d.leaves, b));
            assert_eq!(model_count(&h), t.leaves * d.leaves);
        }
    }

    #[test]
    fn topology_of_a_small_family() {
        let mut h = Holarchy::bootstrap();
        let top = h.create_holon("X", Some(HolonId::ALG), ParamSet::of(&[("p", "*")]), Default::default(), HolonKind::Algorithm).unwrap();
        for v in ["a", "b", "c"] {
            h.create_holon("X", Some(top), ParamSet::of(&[("p", v)]), Default::default(), HolonKind::Algorithm).unwrap();
        }
        let t = topology(&h, Side::Alg);
        assert_eq!((t.leaves, t.composites, t.min_branching, t.max_branching, t.depth), (3, 1, 3, 3, 1));
        assert_eq!(topology(&h, Side::Data), Topology::default());
    }
}
