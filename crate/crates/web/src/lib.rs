//! Browser bindings for three demos: pairwise similarity, the tree built by
//! a list of inserts, and which holons a wildcard criterion gets through.
//!
//! Every export takes and returns JSON text. Failures come back as
//! `{"error": "..."}` so the page needs no exception handling and the
//! functions run unchanged in native tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hamlet_core::algebra::{leq, psum, similarity as sim, ParamSet, SimilarityConfig};
use hamlet_core::holarchy::{Holarchy, HolonId, ResourceSpec};
use hamlet_core::ml::Registry;
use hamlet_core::protocol::{Config, Criterion};
use hamlet_core::system::{Options, System};
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

#[derive(Deserialize)]
struct Insert {
    name: String,
    #[serde(default)]
    params: ParamSet,
}

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn params(text: &str) -> Result<ParamSet, String> {
    serde_json::from_str(text).map_err(|e| format!("parameters: {e}"))
}

fn weights(alpha: f64, beta: f64) -> Result<SimilarityConfig, String> {
    SimilarityConfig::new(alpha, beta).map_err(|e| e.to_string())
}

/// Similarity of two parameter sets, both orderings, and their sum.
#[wasm_bindgen]
pub fn similarity(left: &str, right: &str, alpha: f64, beta: f64) -> String {
    respond((|| {
        let (p, q) = (params(left)?, params(right)?);
        let cfg = weights(alpha, beta)?;
        let s = sim(&p, &q, &cfg).map_err(|e| e.to_string())?;
        let sum = psum(&p, &q).map_err(|e| e.to_string())?;
        Ok(json!({
            "similarity": s,
            "left_leq_right": leq(&p, &q),
            "right_leq_left": leq(&q, &p),
            "sum": sum,
        }))
    })())
}

fn build(inserts: &str, alpha: f64, beta: f64) -> Result<Holarchy, String> {
    let inserts: Vec<Insert> = serde_json::from_str(inserts).map_err(|e| format!("inserts: {e}"))?;
    let config = Config { similarity: weights(alpha, beta)?, ..Config::default() };
    let mut sys = System::new(Options::deterministic(config), Registry::with_builtins()).map_err(|e| e.to_string())?;
    for (i, ins) in inserts.iter().enumerate() {
        sys.add_algorithm(&ResourceSpec::algorithm(ins.name.as_str(), ins.params.clone())).map_err(|e| format!("insert {}: {e}", i + 1))?;
    }
    Ok(sys.snapshot())
}

/// SVG drawing of the algorithm tree grown by `inserts`, a JSON list of
/// `{name, params}`.
#[wasm_bindgen]
pub fn construction_svg(inserts: &str, alpha: f64, beta: f64) -> String {
    respond(build(inserts, alpha, beta).map(|h| json!({ "svg": tree_svg(&h, &BTreeMap::new()) })))
}

/// Walks the algorithm tree the way a test query does: a holon whose name
/// and capability admit the criterion passes it to every child. Trained
/// skills are not modelled here, so the gate is the structural part only.
#[wasm_bindgen]
pub fn gate_query(inserts: &str, name: &str, criterion: &str, alpha: f64, beta: f64) -> String {
    respond((|| {
        let h = build(inserts, alpha, beta)?;
        let c = Criterion::new(name, params(criterion)?);
        let mut marks = BTreeMap::new();
        let mut matched = Vec::new();
        let mut stack = vec![HolonId::ALG];
        while let Some(id) = stack.pop() {
            let s = h.get(id).expect("ids come from the snapshot");
            let open = id.is_root() || c.admits(&s.name, &s.capability);
            marks.insert(id, open);
            if !open {
                continue;
            }
            let subs = h.tree_subs(id);
            if subs.is_empty() && !id.is_root() {
                matched.push(format!("{id}:{}", s.name));
            }
            stack.extend(subs.into_iter().rev());
        }
        let visited: Vec<String> = marks.keys().map(ToString::to_string).collect();
        Ok(json!({ "visited": visited, "matched": matched, "svg": tree_svg(&h, &marks) }))
    })())
}

const DX: f64 = 110.0;
const DY: f64 = 80.0;

/// Leaves in depth-first order along x, parents centred above their
/// children. `marks` colours visited nodes: open gates green, closed red.
fn tree_svg(h: &Holarchy, marks: &BTreeMap<HolonId, bool>) -> String {
    fn place(h: &Holarchy, id: HolonId, depth: usize, next: &mut f64, pos: &mut BTreeMap<HolonId, (f64, f64)>) -> f64 {
        let subs = h.tree_subs(id);
        let x = if subs.is_empty() {
            *next += 1.0;
            *next - 1.0
        } else {
            let xs: Vec<f64> = subs.into_iter().map(|s| place(h, s, depth + 1, next, pos)).collect();
            (xs[0] + xs[xs.len() - 1]) / 2.0
        };
        pos.insert(id, (x, depth as f64));
        x
    }
    let mut pos = BTreeMap::new();
    let mut next = 0.0;
    place(h, HolonId::ALG, 0, &mut next, &mut pos);
    let depth = pos.values().map(|p| p.1).fold(0.0, f64::max);
    let (w, ht) = (next.max(1.0) * DX + 40.0, (depth + 1.0) * DY + 40.0);
    let at = |id: &HolonId| {
        let (x, y) = pos[id];
        (20.0 + DX / 2.0 + x * DX, 40.0 + y * DY)
    };

    let mut svg = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{ht}\" viewBox=\"0 0 {w} {ht}\" font-family=\"sans-serif\" font-size=\"12\">\n");
    for id in pos.keys() {
        for s in h.tree_subs(*id) {
            let ((x1, y1), (x2, y2)) = (at(id), at(&s));
            let _ = writeln!(svg, "<line x1=\"{x1}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y2}\" stroke=\"#888\"/>");
        }
    }
    for id in pos.keys() {
        let s = h.get(*id).expect("placed ids exist");
        let (x, y) = at(id);
        let fill = match marks.get(id) {
            Some(true) => "#c8e6c9",
            Some(false) => "#ffcdd2",
            None => "#fff",
        };
        let label = if id.is_root() { s.name.clone() } else { format!("{id}:{}", s.name) };
        let _ = writeln!(
            svg,
            "<g class=\"holon\" data-id=\"{id}\"><title>{}</title><rect x=\"{}\" y=\"{}\" width=\"90\" height=\"26\" rx=\"4\" fill=\"{fill}\" stroke=\"#333\"/><text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text></g>",
            escape(&s.capability.to_string()),
            x - 45.0,
            y - 13.0,
            y + 4.0,
            escape(&label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
