//! One line per acceptance criterion, with sub-checks indented below it.
//! Two criteria carry sub-checks that cannot pass as stated; the test pins
//! exactly those as red and fails on any other outcome.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use hamlet_core::algebra::{leq, psum, similarity, ParamSet, SimilarityConfig};
use hamlet_core::frontend::hops::{self, Layout};
use hamlet_core::frontend::render;
use hamlet_core::holarchy::{validate, HolonId, HolonKind, ResourceSpec, Side};
use hamlet_core::ml::learners::{KMeans, Linear, Predictor};
use hamlet_core::ml::metrics::{accuracy, fowlkes_mallows, homogeneity, mse};
use hamlet_core::ml::synthetic::{blobs, regression};
use hamlet_core::ml::{Dataset, Matrix, Measure, Registry, TaskKind};
use hamlet_core::protocol::{Config, Criterion};
use hamlet_core::runtime::TraceLevel;
use hamlet_core::scenario::{Scenario, ScenarioRun};
use hamlet_core::system::{Options, System};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALPHA: f64 = 0.5;
const BETA: f64 = 0.1;
const CFG: SimilarityConfig = SimilarityConfig { alpha: ALPHA, beta: BETA };

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Criterion_ {
    id: u32,
    title: &'static str,
    checks: Vec<Check>,
    elapsed: Duration,
    limit: Duration,
}

impl Criterion_ {
    fn pass(&self) -> bool {
        self.elapsed < self.limit && self.checks.iter().all(|c| c.pass)
    }
}

fn check(name: &'static str, pass: bool, detail: impl Into<String>) -> Check {
    Check { name, pass, detail: detail.into() }
}

fn timed(id: u32, title: &'static str, limit_secs: u64, f: impl FnOnce() -> Vec<Check>) -> Criterion_ {
    let t = Instant::now();
    let checks = f();
    Criterion_ { id, title, checks, elapsed: t.elapsed(), limit: Duration::from_secs(limit_secs) }
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run_scenario(name: &str, trace: bool) -> ScenarioRun {
    let s = Scenario::load(&scenarios().join(name)).unwrap();
    let mut opts = s.options();
    if trace {
        opts.trace = TraceLevel::Full;
    }
    s.run(opts, &scenarios()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Snapshot, rendered reports and the message log, as one string.
fn fingerprint(run: &mut ScenarioRun) -> String {
    let mut out = run.session.system().snapshot().to_json();
    for r in &run.reports {
        for (path, text) in render::render(r) {
            out.push_str(&path.to_string_lossy());
            out.push_str(&text);
        }
    }
    for line in run.session.system_mut().take_log() {
        out.push_str(&serde_json::to_string(&line).unwrap());
    }
    out
}

// String-level oracles, written from the definitions and kept apart from the
// library.

type Pairs = Vec<(String, String)>;

fn compat(a: &str, b: &str) -> bool {
    a == b || a == "*" || b == "*"
}

fn o_leq(p: &Pairs, q: &Pairs) -> bool {
    p.iter().all(|(k, v)| q.iter().any(|(k2, w)| k == k2 && compat(v, w)))
}

fn o_sum(p: &Pairs, q: &Pairs) -> Pairs {
    p.iter().zip(q).map(|((k, v), (_, w))| (k.clone(), if v == w { v.clone() } else { "*".into() })).collect()
}

fn o_sim(p: &Pairs, q: &Pairs) -> f64 {
    let (mut same, mut prod, mut any) = (0.0, 1.0, false);
    for ((_, v), (_, w)) in p.iter().zip(q) {
        if v == w {
            same += 1.0;
        } else {
            any = true;
            prod *= if v == "*" || w == "*" { ALPHA } else { BETA };
        }
    }
    (same + if any { prod } else { 0.0 }) / p.len() as f64
}

fn o_common(p: &Pairs, q: &Pairs) -> usize {
    p.iter().zip(q).filter(|(a, b)| a == b).count()
}

fn to_set(p: &Pairs) -> ParamSet {
    ParamSet::of(p)
}

fn random_pairs(rng: &mut ChaCha8Rng, n: usize, general: bool) -> Pairs {
    let values: &[&str] = if general { &["a", "b", "c", "*"] } else { &["a", "b", "c"] };
    (0..n).map(|i| (format!("p{i}"), values.choose(rng).unwrap().to_string())).collect()
}

fn show(p: &Pairs) -> String {
    let inner: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", inner.join(","))
}

fn criterion_1() -> Vec<Check> {
    let run = run_scenario("construction.scenario", false);
    let h = run.session.system().snapshot();
    let name = |id: HolonId| format!("{id}:{}", h.get(id).unwrap().name);
    let nodes: BTreeSet<String> = h.subtree(HolonId::ALG).into_iter().filter(|id| !id.is_root()).map(name).collect();
    let edges: BTreeSet<(String, String)> = h
        .subtree(HolonId::ALG)
        .into_iter()
        .flat_map(|p| h.tree_subs(p).into_iter().map(move |c| (p, c)))
        .map(|(p, c)| (if p.is_root() { "ALG".to_string() } else { name(p) }, name(c)))
        .collect();
    let want_nodes: BTreeSet<String> =
        ["1:X", "2:Y", "3:X", "4:X", "5:X", "6:X", "7:Y", "8:Y", "9:X", "10:X"].iter().map(|s| s.to_string()).collect();
    let want_edges: BTreeSet<(String, String)> = [
        ("ALG", "3:X"),
        ("ALG", "7:Y"),
        ("3:X", "5:X"),
        ("3:X", "9:X"),
        ("5:X", "4:X"),
        ("5:X", "6:X"),
        ("9:X", "1:X"),
        ("9:X", "10:X"),
        ("7:Y", "2:Y"),
        ("7:Y", "8:Y"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();

    let x = |v: [&str; 4]| -> Pairs { v.iter().enumerate().map(|(i, s)| (format!("p{}", i + 1), s.to_string())).collect() };
    let (leaf, incoming) = (x(["a", "b", "c", "d"]), x(["a", "e", "c", "d"]));
    let s = similarity(&to_set(&incoming), &to_set(&leaf), &CFG).unwrap();
    vec![
        check("nodes", nodes == want_nodes, format!("{} holons with the expected id:name labels", nodes.len())),
        check("edges", edges == want_edges, format!("{} tree edges; DOT fixture asserted by the scenario", edges.len())),
        check("similarity", s == 0.775 && o_sim(&incoming, &leaf) == 0.775, format!("step (c) similarity {s}")),
    ]
}

fn criterion_2() -> Vec<Check> {
    const CASES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut overlap = 0;
    let mut beats = (0, None);
    let mut lifts = 0;
    let mut nested = 0;
    let mut needs_summand = (0, None);
    let mut commute = 0;
    let mut range = 0;
    let mut oracle = 0;
    for _ in 0..CASES {
        let n = rng.random_range(1..=6);
        let (p1, p2) = (random_pairs(&mut rng, n, true), random_pairs(&mut rng, n, true));
        let (s1, s2) = (to_set(&p1), to_set(&p2));
        let p = o_sum(&p1, &p2);
        let lib_sum = psum(&s1, &s2).unwrap();
        if lib_sum != to_set(&p) || similarity(&s1, &s2, &CFG).unwrap() != o_sim(&p1, &p2) || leq(&s1, &s2) != o_leq(&p1, &p2) {
            oracle += 1;
        }

        // commutativity and the range bound
        let sim12 = similarity(&s1, &s2, &CFG).unwrap();
        if lib_sum != psum(&s2, &s1).unwrap() || sim12 != similarity(&s2, &s1, &CFG).unwrap() || leq(&s1, &s2) != leq(&s2, &s1) {
            commute += 1;
        }
        if !(sim12 >= CFG.lower_bound(n) && sim12 <= 1.0) {
            range += 1;
        }

        // similarity against overlap, and how many children beat their parent;
        // distinct summands, non-general query
        if p1 != p2 {
            let q = random_pairs(&mut rng, n, false);
            let own = o_sim(&q, &p);
            let (b1, b2) = (own < o_sim(&q, &p1), own < o_sim(&q, &p2));
            let lib = similarity(&to_set(&q), &lib_sum, &CFG).unwrap() < similarity(&to_set(&q), &s1, &CFG).unwrap();
            if lib != (o_common(&q, &p) < o_common(&q, &p1)) {
                overlap += 1;
            }
            if b1 && b2 {
                beats.0 += 1;
                beats.1.get_or_insert_with(|| format!("P'={} P''={} query={}", show(&p1), show(&p2), show(&q)));
            }
        }

        // order against a sum and its summands, general queries allowed
        let q = random_pairs(&mut rng, n, true);
        let qs = to_set(&q);
        let (l1, l2, l) = (leq(&qs, &s1), leq(&qs, &s2), leq(&qs, &lib_sum));
        if (l1 || l2) && !l {
            lifts += 1;
        }
        if !l1 && !l2 && l {
            needs_summand.0 += 1;
            needs_summand.1.get_or_insert_with(|| format!("P'={} P''={} query={}", show(&p1), show(&p2), show(&q)));
        }

        // order lifted through nested sums of several summands, random bracketing
        let k = rng.random_range(2..=5);
        let mut parts: Vec<Pairs> = (0..k).map(|_| random_pairs(&mut rng, n, true)).collect();
        let leaves = parts.clone();
        while parts.len() > 1 {
            let i = rng.random_range(0..parts.len() - 1);
            let right = parts.remove(i + 1);
            let left = std::mem::take(&mut parts[i]);
            parts[i] = psum(&to_set(&left), &to_set(&right)).unwrap().iter().map(|(k, v)| (k.to_string(), v.as_str().to_string())).collect();
        }
        if leaves.iter().any(|leaf| leq(&qs, &to_set(leaf))) && !leq(&qs, &to_set(&parts[0])) {
            nested += 1;
        }
    }
    let count = |name: &'static str, n: usize| check(name, n == 0, format!("{n} counterexamples in {CASES}"));
    let red = |name: &'static str, (n, w): (usize, Option<String>)| {
        check(name, n == 0, format!("{n} counterexamples in {CASES}, e.g. {}", w.unwrap_or_default()))
    };
    vec![
        count("oracle agreement", oracle),
        count("similarity tracks overlap", overlap),
        red("at most one child beats its parent", beats),
        count("order lifts to the sum", lifts),
        count("order lifts to nested sums", nested),
        red("order on the sum needs a summand", needs_summand),
        count("commutativity", commute),
        count("range bound", range),
    ]
}

fn criterion_3() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut duplicates = 0;
    let mut inserts = 0;
    for _ in 0..1000 {
        let pool: Vec<(&str, Pairs)> = (0..rng.random_range(2..=8))
            .map(|_| {
                let (name, n) = if rng.random_bool(0.7) { ("X", 3) } else { ("Y", 2) };
                (name, random_pairs(&mut rng, n, false))
            })
            .collect();
        let seq: Vec<&(&str, Pairs)> = (0..rng.random_range(4..=16)).map(|_| pool.choose(&mut rng).unwrap()).collect();
        let mut seen = Vec::new();
        for s in &seq {
            if !seen.contains(s) {
                seen.push(*s);
            }
        }
        let count = |specs: &[&(&str, Pairs)]| {
            let mut sys = System::new(Options::default(), Registry::with_builtins()).unwrap();
            for (name, p) in specs {
                sys.add_algorithm(&ResourceSpec::algorithm(*name, to_set(p))).unwrap();
            }
            let h = sys.snapshot();
            let leaves: Vec<String> = h.leaves(Side::Alg).iter().map(|l| format!("{}{}", l.name, l.capability)).collect();
            let distinct: BTreeSet<&String> = leaves.iter().collect();
            (h.len(), leaves.len() - distinct.len())
        };
        inserts += seq.len();
        let (full, dup) = count(&seq);
        let (dedup, _) = count(&seen);
        violations += usize::from(full != dedup);
        duplicates += dup;
    }

    let mut sys = System::new(Options::default(), Registry::with_builtins()).unwrap();
    let d = Arc::new(regression("diabetes", 40, 3, 1.0, 1));
    let alg = ResourceSpec::algorithm("ridge", ParamSet::of(&[("alpha", "1")]));
    let data = ResourceSpec::data("diabetes", ParamSet::of(&[("type", "train")]));
    sys.train(&alg, &data, Some(d.clone()), &[Measure::Mse]).unwrap();
    let before = sys.snapshot().len();
    let again = sys.train(&alg, &data, Some(d), &[Measure::Mse]).unwrap();
    let warned = again.warnings.iter().any(|w| w.contains("duplicate"));
    vec![
        check("holon counts", violations == 0, format!("{violations} of 1000 sequences differ from their deduplicated replay ({inserts} inserts)")),
        check("distinct leaves", duplicates == 0, format!("{duplicates} duplicate leaves")),
        check("training warning", warned && sys.snapshot().len() == before, format!("repeat warns: {warned}, holarchy unchanged")),
    ]
}

/// Algorithm specs for the random holarchies: full schemas, canonical tokens.
fn alg_pool() -> Vec<(&'static str, Pairs)> {
    let p = |pairs: &[(&str, &str)]| -> Pairs { pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() };
    let mut pool = Vec::new();
    for a in ["0.1", "0.5", "1", "2", "5", "10"] {
        for fi in ["true", "false"] {
            pool.push(("ridge", p(&[("alpha", a), ("fit_intercept", fi)])));
        }
    }
    for fi in ["true", "false"] {
        pool.push(("linear", p(&[("fit_intercept", fi)])));
    }
    for m in ["euclidean", "manhattan"] {
        for k in ["1", "2", "3", "4", "5", "6", "7"] {
            pool.push(("knn-regressor", p(&[("metric", m), ("n_neighbors", k)])));
        }
    }
    pool
}

fn random_criterion(rng: &mut ChaCha8Rng, names: &[&str], pool: &[(&str, Pairs)]) -> (String, Pairs) {
    let name = names.choose(rng).unwrap().to_string();
    let template = &pool.choose(rng).unwrap().1;
    let mut params = Vec::new();
    for (k, _) in template {
        if !rng.random_bool(0.4) {
            continue;
        }
        let seen: Vec<&String> = pool.iter().filter_map(|(_, p)| p.iter().find(|(k2, _)| k2 == k)).map(|(_, v)| v).collect();
        let v = if rng.random_bool(0.25) { "*".to_string() } else { seen.choose(rng).unwrap().to_string() };
        params.push((k.clone(), v));
    }
    (name, params)
}

type RowKey = (String, String, String, String);

fn criterion_4() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pool = alg_pool();
    let (mut queries, mut mismatches, mut rows_seen, mut invalid) = (0, 0, 0usize, 0);
    let mut first = None;
    for h_idx in 0..200 {
        let n_alg = rng.random_range(1..=pool.len().min(30));
        let algs: Vec<&(&str, Pairs)> = pool.choose_multiple(&mut rng, n_alg).collect();
        let n_data = rng.random_range(1..=10);
        let names: Vec<String> = (0..n_data).map(|i| format!("d{i}")).collect();
        let mut sys = System::new(Options::default(), Registry::with_builtins()).unwrap();
        for (i, (name, p)) in algs.iter().enumerate() {
            sys.submit_add(&format!("a{i}"), Side::Alg, &ResourceSpec::algorithm(*name, to_set(p)), &ParamSet::new(), None).unwrap();
        }
        let mut data_leaves: Vec<(String, Pairs)> = Vec::new();
        for (i, d) in names.iter().enumerate() {
            for variant in ["train", "test"] {
                let seed = (h_idx * 100 + i) as u64;
                let rows = regression(d, 16, 2, 1.0, seed).with_split(0.75).unwrap();
                let spec = ResourceSpec::data(d.as_str(), ParamSet::of(&[("type", variant)]));
                sys.submit_add(&format!("{d}-{variant}"), Side::Data, &spec, &ParamSet::new(), Some(Arc::new(rows))).unwrap();
                data_leaves.push((d.clone(), vec![("type".into(), variant.into())]));
            }
        }
        sys.run().unwrap();
        let mut trained: Vec<(&str, &Pairs, &String)> = Vec::new();
        for (i, (name, p)) in algs.iter().enumerate() {
            for d in &names {
                if rng.random_bool(0.3) {
                    let data = ResourceSpec::data(d.as_str(), ParamSet::of(&[("type", "train")]));
                    sys.submit_train(&format!("t{i}-{d}"), &ResourceSpec::algorithm(*name, to_set(p)), &data, None, &[Measure::Mse]).unwrap();
                    trained.push((name, p, d));
                }
            }
        }
        let outs = sys.run().unwrap();
        assert!(outs.iter().all(|o| o.rows.iter().all(|r| r.error.is_none())), "training failed");
        if !validate(&sys.snapshot()).is_empty() {
            invalid += 1;
        }

        let mut alg_names = vec!["*", "ridge", "linear", "knn-regressor", "lasso"];
        alg_names.truncate(5);
        let data_names: Vec<&str> = ["*", "dz"].into_iter().chain(names.iter().map(String::as_str)).collect();
        for _ in 0..50 {
            let (an, ap) = random_criterion(&mut rng, &alg_names, &pool);
            let dn = data_names.choose(&mut rng).unwrap().to_string();
            let dp: Pairs = match rng.random_range(0..4) {
                0 => vec![],
                1 => vec![("type".into(), "test".into())],
                2 => vec![("type".into(), "train".into())],
                _ => vec![("type".into(), "*".into())],
            };
            let out = sys.test(Criterion::new(&an, to_set(&ap)), Criterion::new(&dn, to_set(&dp)), &[Measure::Mse]).unwrap();
            let got: BTreeSet<RowKey> = out
                .rows
                .iter()
                .filter(|r| r.error.is_none())
                .map(|r| (r.algorithm_name.clone(), r.algorithm_params.to_string(), r.dataset.clone(), r.dataset_params.to_string()))
                .collect();
            let mut want = BTreeSet::new();
            for (name, p, d) in &trained {
                if !(compat(&an, name) && o_leq(&ap, p)) {
                    continue;
                }
                for (leaf, lp) in &data_leaves {
                    if leaf == *d && compat(&dn, leaf) && o_leq(&dp, lp) {
                        want.insert((name.to_string(), to_set(p).to_string(), leaf.clone(), to_set(lp).to_string()));
                    }
                }
            }
            queries += 1;
            rows_seen += got.len();
            if got != want || out.rows.len() != got.len() {
                mismatches += 1;
                first.get_or_insert_with(|| format!("holarchy {h_idx}: Λ=({an},{}) Δ=({dn},{}) got {} want {}", show(&ap), show(&dp), got.len(), want.len()));
            }
        }
    }
    vec![
        check(
            "oracle match",
            mismatches == 0,
            format!("{mismatches} of {queries} queries differ from the linear scan ({rows_seen} rows){}", first.map(|f| format!("; first: {f}")).unwrap_or_default()),
        ),
        check("valid holarchies", invalid == 0, format!("{invalid} invalid snapshots")),
    ]
}

fn traced(h: &hamlet_core::holarchy::Holarchy, strict: bool) -> System {
    let opts = Options { trace: TraceLevel::Full, ..Options::deterministic(Config { strict_cfp: strict, ..Config::default() }) };
    System::from_snapshot(h, opts, hamlet_core::catalog::registry()).unwrap()
}

fn insert_cfps(layout: Layout, strict: bool) -> u64 {
    let h = hops::dense_holarchy(layout, Layout::Complete { b: 2, size: 1 });
    let mut sys = traced(&h, strict);
    sys.add_algorithm(&ResourceSpec::algorithm("X", layout.probe())).unwrap();
    hops::insert_report(&sys.traces(), layout).lines[0].measured
}

fn criterion_5() -> Vec<Check> {
    let mut complete = (0, 0, String::new());
    let mut chain = (0, 0, 0, String::new());
    for b in 2..=4u64 {
        for size in 1.. {
            let layout = Layout::Complete { b, size };
            if layout.leaves() > 256 {
                break;
            }
            for strict in [false, true] {
                let m = insert_cfps(layout, strict);
                complete.0 += 1;
                if m > layout.cfp_bound() {
                    complete.1 += 1;
                }
                if size >= 2 && strict {
                    complete.2 = format!("b={b} n={}: {m} ≤ {}", layout.leaves(), layout.cfp_bound());
                }
            }
        }
        let max_size = (256 - 1) / (b - 1) as u32;
        for size in [1, 2, 3, 4, 8, 16, 32, 64, max_size] {
            let layout = Layout::Chain { b, size };
            let n = layout.leaves();
            for strict in [false, true] {
                let m = insert_cfps(layout, strict);
                chain.0 += 1;
                if m > hops::chain_cfp_bound(n) {
                    chain.1 += 1;
                }
                if m == 1 + b * (n - 1) / (b - 1) {
                    chain.2 += 1;
                }
                if b == 2 && size == 64 && !strict {
                    chain.3 = format!("b=2 n={n}: {m} > {}", hops::chain_cfp_bound(n));
                }
            }
        }
    }

    let (mut within_complete, mut within_deep, mut total_cases, mut over_deep) = (0, 0, 0, 0.0f64);
    for b in 2..=4u64 {
        for (alg, data) in [
            (Layout::Complete { b, size: 2 }, Layout::Complete { b, size: 1 }),
            (Layout::Complete { b, size: 3 }, Layout::Complete { b, size: 2 }),
            (Layout::Chain { b, size: 4 }, Layout::Chain { b, size: 2 }),
            (Layout::Chain { b, size: 8 }, Layout::Chain { b, size: 3 }),
        ] {
            let h = hops::dense_holarchy(alg, data);
            let mut sys = traced(&h, false);
            sys.test(Criterion::any(), Criterion::any(), &[Measure::Accuracy]).unwrap();
            let traces = sys.traces();
            let trace = traces.values().find(|t| t.verb("TEST") > 0).unwrap();
            let (ta, td) = (hops::topology(&h, Side::Alg), hops::topology(&h, Side::Data));
            let measured = hops::test_report(trace, 0.0).lines[0].measured as f64;
            total_cases += 1;
            if measured <= hops::total_complete(ta.leaves, b, td.leaves, b) {
                within_complete += 1;
            }
            let chain_total = hops::total_chain(ta.leaves, b, td.leaves, b);
            if measured <= chain_total {
                within_deep += 1;
            }
            over_deep = over_deep.max(measured - chain_total);
        }
    }
    vec![
        check("complete CFP ≤ b·⌈log_b n⌉+3", complete.1 == 0, format!("{} of {} inserts over; e.g. {}", complete.1, complete.0, complete.2)),
        check(
            "deep chain CFP ≤ n+3",
            chain.1 == 0,
            format!(
                "{} of {} inserts over, e.g. {}; all {} equal 1+b(n−1)/(b−1), the chain's holon count",
                chain.1, chain.0, chain.3, chain.2
            ),
        ),
        check("batch test ≤ complete-layout total", within_complete == total_cases, format!("{within_complete} of {total_cases} within")),
        check("batch test ≤ deep-layout total", within_deep == total_cases, format!("{within_deep} of {total_cases} within; the formula omits each side's top node, over by {over_deep}")),
    ]
}

fn criterion_6() -> Vec<Check> {
    let mut a = run_scenario("workload.scenario", false);
    let trainings: usize = ["train-cls", "train-reg", "train-clu"].iter().map(|q| a.reports_for(q).len()).sum();
    let tests = ["rbf", "svc-bc", "moon", "all"].iter().filter(|q| !a.reports_for(q).is_empty()).count();
    let labels = |q: &str| -> BTreeSet<String> {
        a.reports_for(q).iter().flat_map(|r| &r.outcome.rows).filter(|r| r.error.is_none()).map(|r| r.algorithm_label.clone()).collect()
    };
    let rbf = labels("rbf");
    let moon: BTreeSet<Measure> = a.reports_for("moon").iter().flat_map(|r| &r.outcome.rows).filter_map(|r| r.measure).collect();
    let h = a.session.system().snapshot();
    let models: BTreeSet<HolonId> = h.iter().filter(|s| s.kind == HolonKind::Model).map(|s| s.id).collect();
    let covered: BTreeSet<HolonId> = a.reports_for("all").iter().flat_map(|r| &r.outcome.rows).filter(|r| r.error.is_none()).map(|r| r.model_id).collect();
    let mut out_of_range = 0;
    for r in a.reports.iter().flat_map(|r| &r.outcome.rows) {
        if let (Some(m), Some(v)) = (r.measure, r.value) {
            let ok = if m == Measure::Mse { v >= 0.0 } else { (0.0..=1.0).contains(&v) };
            out_of_range += usize::from(!ok);
        }
    }
    let mut b = run_scenario("workload.scenario", false);
    let same = fingerprint(&mut a) == fingerprint(&mut b);
    let want_rbf: BTreeSet<String> = ["A03", "A04", "A05", "A14", "A15"].iter().map(|s| s.to_string()).collect();
    vec![
        check("tasks", trainings == 120 && tests == 4, format!("{trainings} trainings, {tests} batch tests")),
        check("rbf query", rbf == want_rbf, format!("labels {rbf:?}")),
        check("moon query", moon == BTreeSet::from([Measure::Accuracy, Measure::Homogeneity]), format!("measures {moon:?}")),
        check("all-vs-all", models.len() == 120 && models.is_subset(&covered), format!("{} of {} models reported", covered.len(), models.len())),
        check("metric ranges", out_of_range == 0, format!("{out_of_range} values out of range")),
        check("determinism", same, "two runs byte-identical"),
    ]
}

fn criterion_7() -> Vec<Check> {
    // The scenario itself asserts the address books before and after the
    // insert and both completed reports.
    let mut a = run_scenario("interleave.scenario", true);
    let mut b = run_scenario("interleave.scenario", true);
    let completed = ["q1", "q2"].iter().all(|q| a.reports_for(q).iter().any(|r| r.outcome.rows.iter().any(|row| row.error.is_none())));
    let (fa, fb) = (fingerprint(&mut a), fingerprint(&mut b));
    vec![
        check("both queries", completed, "q1 and q2 report after the interleaved insert"),
        check("replay", fa == fb, format!("{} bytes of snapshot, reports and trace, identical", fa.len())),
    ]
}

fn criterion_8() -> Vec<Check> {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 7) % 11) as f64, ((i * i) % 13) as f64]).collect();
    let y: Vec<f64> = rows.iter().map(|r| 3.0 + 2.0 * r[0] - r[1] + 0.5 * r[2]).collect();
    let d = Dataset::new("lin", TaskKind::Regression, Matrix::from_rows(&rows).unwrap(), Some(y.clone())).unwrap();
    let model = Linear::fit_ols(&d, &ParamSet::new()).unwrap();
    let err = mse(&y, &model.predict(&d.features).unwrap()).unwrap();

    let t = [2.0, 0.0, 1.0, 1.0, 0.0, 2.0, 2.0];
    let ones = [accuracy(&t, &t).unwrap(), fowlkes_mallows(&t, &t).unwrap(), homogeneity(&t, &t).unwrap()];
    let fm = fowlkes_mallows(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();

    let mut increases = 0;
    for seed in 0..100u64 {
        let d = blobs("k", &[30, 25, 20, 15], 3, 2.0, (-6.0, 6.0), seed);
        let m = KMeans::fit_k(&d.features, 2 + (seed % 5) as usize, 300, seed).unwrap();
        increases += m.history.windows(2).filter(|w| w[1] > w[0]).count();
    }
    vec![
        check("exact linear mse", err < 1e-9, format!("mse {err:e} (tol 1e-9)")),
        check("identical labels", ones == [1.0; 3], format!("accuracy, FM, homogeneity = {ones:?}")),
        check("crossed FM", fm == 0.0, format!("FM = {fm}")),
        check("k-means objective", increases == 0, format!("{increases} increases over 100 seeded runs")),
    ]
}

fn main() {
    let results = vec![
        timed(1, "worked construction example", 1, criterion_1),
        timed(2, "algebra constants and laws", 10, criterion_2),
        timed(3, "no duplication", 120, criterion_3),
        timed(4, "test soundness and completeness", 60, criterion_4),
        timed(5, "message complexity", 120, criterion_5),
        timed(6, "benchmark workload", 120, criterion_6),
        timed(7, "interleaving safety", 10, criterion_7),
        timed(8, "learner and metric sanity", 10, criterion_8),
    ];
    let mut red = BTreeSet::new();
    for c in &results {
        println!("criterion {} {}: {} ({:.2?} of {:?})", c.id, mark(c.pass()), c.title, c.elapsed, c.limit);
        for k in &c.checks {
            println!("    {} {}: {}", mark(k.pass), k.name, k.detail);
            if !k.pass {
                red.insert((c.id, k.name));
            }
        }
        if c.elapsed >= c.limit {
            red.insert((c.id, "time limit"));
        }
    }
    // Stated claims shown false by counterexample; see the checks' details.
    let known: BTreeSet<(u32, &str)> =
        [(2, "at most one child beats its parent"), (2, "order on the sum needs a summand"), (5, "deep chain CFP ≤ n+3"), (5, "batch test ≤ deep-layout total")].into_iter().collect();
    assert_eq!(red, known, "unexpected acceptance outcome");
}
