use hamlet_core::algebra::ParamSet;
use hamlet_core::holarchy::{validate, HolonId, ResourceSpec, Side};
use hamlet_core::ml::Registry;
use hamlet_core::protocol::{Config, Placement};
use hamlet_core::system::{Options, System};

fn x(vals: [&str; 4]) -> ResourceSpec {
    let pairs: Vec<(String, &str)> = vals.iter().enumerate().map(|(i, v)| (format!("p{}", i + 1), *v)).collect();
    ResourceSpec::algorithm("X", ParamSet::of(&pairs))
}

fn y(vals: [&str; 3]) -> ResourceSpec {
    let pairs: Vec<(String, &str)> = vals.iter().enumerate().map(|(i, v)| (format!("p{}", i + 1), *v)).collect();
    ResourceSpec::algorithm("Y", ParamSet::of(&pairs))
}

fn system(cfg: Config) -> System {
    System::new(Options::deterministic(cfg), Registry::with_builtins()).unwrap()
}

/// `parent -> [children]` over the algorithm side, as `id:name` strings.
fn edges(sys: &System) -> Vec<(String, Vec<String>)> {
    let h = sys.snapshot();
    let name = |id: HolonId| h.get(id).map(|s| if id.is_root() { s.name.clone() } else { format!("{}:{}", id, s.name) }).unwrap();
    h.subtree(HolonId::ALG)
        .into_iter()
        .filter(|id| !h.tree_subs(*id).is_empty())
        .map(|id| (name(id), h.tree_subs(id).into_iter().map(name).collect()))
        .collect()
}

fn e(parent: &str, kids: &[&str]) -> (String, Vec<String>) {
    (parent.to_string(), kids.iter().map(|s| s.to_string()).collect())
}

#[test]
fn worked_example_step_by_step() {
    let mut sys = system(Config::default());
    let out = sys.add_algorithm(&x(["a", "b", "c", "d"])).unwrap();
    assert_eq!(out.placement(Side::Alg), Some(&Placement::NewLeaf(HolonId(1))));
    assert_eq!(sys.snapshot().get(HolonId(1)).unwrap().level, 2);

    sys.add_algorithm(&y(["o", "p", "q"])).unwrap();
    assert_eq!(edges(&sys), vec![e("ALG", &["1:X", "2:Y"])]);

    let out = sys.add_algorithm(&x(["a", "e", "c", "d"])).unwrap();
    assert_eq!(out.placement(Side::Alg), Some(&Placement::NewLeaf(HolonId(4))));
    assert_eq!(edges(&sys), vec![e("ALG", &["2:Y", "3:X"]), e("3:X", &["1:X", "4:X"])]);
    let h = sys.snapshot();
    let three = h.get(HolonId(3)).unwrap();
    assert_eq!(three.capability, ParamSet::of(&[("p1", "a"), ("p2", "*"), ("p3", "c"), ("p4", "d")]));
    assert_eq!(three.level, 2);
    assert_eq!(h.get(HolonId(1)).unwrap().level, 3);
    assert_eq!(h.get(HolonId(4)).unwrap().level, 3);

    sys.add_algorithm(&x(["a", "e", "c", "f"])).unwrap();
    sys.add_algorithm(&y(["o", "p", "r"])).unwrap();
    sys.add_algorithm(&x(["a", "b", "c", "g"])).unwrap();
    assert_eq!(
        edges(&sys),
        vec![
            e("ALG", &["3:X", "7:Y"]),
            e("3:X", &["5:X", "9:X"]),
            e("5:X", &["4:X", "6:X"]),
            e("9:X", &["1:X", "10:X"]),
            e("7:Y", &["2:Y", "8:Y"]),
        ]
    );
    assert!(validate(&sys.snapshot()).is_empty(), "{:?}", validate(&sys.snapshot()));
}

#[test]
fn exact_duplicate_is_existing() {
    let mut sys = system(Config::default());
    for v in [["a", "b", "c", "d"], ["a", "e", "c", "d"], ["a", "e", "c", "f"]] {
        sys.add_algorithm(&x(v)).unwrap();
    }
    let before = sys.snapshot().len();
    let out = sys.add_algorithm(&x(["a", "b", "c", "d"])).unwrap();
    assert_eq!(out.placement(Side::Alg), Some(&Placement::Existing(HolonId(1))));
    assert_eq!(sys.snapshot().len(), before);
}

fn t(vals: [&str; 3]) -> ResourceSpec {
    let pairs: Vec<(String, &str)> = vals.iter().enumerate().map(|(i, v)| (format!("p{}", i + 1), *v)).collect();
    ResourceSpec::algorithm("T", ParamSet::of(&pairs))
}

#[test]
fn similarity_only_routing_can_duplicate() {
    // {a,b,c} then {x,b,c} wraps the first leaf in {*,b,c}; {a,y,z} wraps it
    // again in {a,*,*} and the top becomes {*,*,*}. Re-inserting {a,b,c}
    // then scores the {x,b,c} leaf highest and lands beside it.
    let seq = [["a", "b", "c"], ["x", "b", "c"], ["a", "y", "z"], ["a", "b", "c"]];
    for strict in [false, true] {
        let mut literal = system(Config { exact_lookup: false, strict_cfp: strict, ..Config::default() });
        let mut fixed = system(Config { strict_cfp: strict, ..Config::default() });
        for v in seq {
            literal.add_algorithm(&t(v)).unwrap();
            fixed.add_algorithm(&t(v)).unwrap();
        }
        let abc = ParamSet::of(&[("p1", "a"), ("p2", "b"), ("p3", "c")]);
        let copies = |s: &System| s.snapshot().leaves(Side::Alg).iter().filter(|l| l.capability == abc).count();
        assert_eq!(copies(&literal), 2, "strict={strict}");
        assert_eq!(copies(&fixed), 1, "strict={strict}");
        assert!(validate(&literal.snapshot()).is_empty());
    }
}

#[test]
fn strict_and_early_stop_build_the_same_tree() {
    let specs = [["a", "b", "c", "d"], ["a", "e", "c", "d"], ["a", "e", "c", "f"], ["a", "b", "c", "g"], ["z", "b", "c", "d"]];
    let build = |strict| {
        let mut s = system(Config { strict_cfp: strict, ..Config::default() });
        for v in specs {
            s.add_algorithm(&x(v)).unwrap();
        }
        edges(&s)
    };
    assert_eq!(build(false), build(true));
}

#[test]
fn schema_is_fixed_by_the_first_insert() {
    let mut sys = system(Config::default());
    sys.add_algorithm(&x(["a", "b", "c", "d"])).unwrap();
    let err = sys.add_algorithm(&ResourceSpec::algorithm("X", ParamSet::of(&[("p9", "a")]))).unwrap_err();
    assert!(err.to_string().contains("p9"), "{err}");
    let err = sys.add_algorithm(&ResourceSpec::algorithm("X", ParamSet::of(&[("p1", "a")]))).unwrap_err();
    assert!(err.to_string().contains("no default"), "{err}");

    // registered learners bring their own defaults
    let out = sys.add_algorithm(&ResourceSpec::algorithm("ridge", ParamSet::new())).unwrap();
    let leaf = out.placement(Side::Alg).and_then(|p| p.leaf()).unwrap();
    let cap = sys.snapshot().get(leaf).unwrap().capability.clone();
    assert_eq!(cap, sys.registry().get("ridge").unwrap().spec.schema);
}

#[test]
fn wildcard_names_are_rejected() {
    let mut sys = system(Config::default());
    assert!(sys.add_algorithm(&ResourceSpec::algorithm("*", ParamSet::new())).is_err());
}
