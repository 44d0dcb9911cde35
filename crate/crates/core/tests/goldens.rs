//! Snapshot tests. Run with `BLESS=1` to rewrite the files under `tests/golden/`.

use kanren_cost::bench::{emit_csv, run_series, suite, SeriesConfig, SeriesPoint};
use kanren_cost::engine::{dump_trace, init_arc};
use kanren_cost::scheme::{relation_scheme_by_name, Scheme};
use kanren_cost::{parse_goal, programs, EngineConfig};
use std::path::PathBuf;

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with BLESS=1 to create)", path.display()));
    assert_eq!(actual, expected, "snapshot {name} changed");
}

#[test]
fn appendo_scheme_text_and_dot() {
    let spec = programs::append();
    let rs = relation_scheme_by_name(&spec, "appendo", &["a", "b"]).unwrap();
    golden("appendo_scheme.txt", &rs.render_text(&spec));
    golden("appendo_scheme.dot", &rs.render_dot(&spec));
}

#[test]
fn appendo_scheme_structure() {
    let spec = programs::append();
    let rs = relation_scheme_by_name(&spec, "appendo", &["a", "b"]).unwrap();
    let Scheme::Fork { left, right, .. } = &rs.scheme else { panic!("root is not a fork") };
    let Scheme::UnifyNode { constraints, child, .. } = left.as_ref() else { panic!("left") };
    assert_eq!(constraints.len(), 1);
    assert!(matches!(child.as_ref(), Scheme::UnifyLeaf { dead: false, .. }));
    let Scheme::UnifyNode { constraints, child, .. } = right.as_ref() else { panic!("right") };
    assert_eq!(constraints.len(), 1);
    let Scheme::InvokeNode { rel, child, .. } = child.as_ref() else { panic!("call") };
    assert_eq!(spec.rel(*rel).name, "appendo");
    assert!(matches!(child.as_ref(), Scheme::UnifyLeaf { dead: false, .. }));
}

#[test]
fn appendo_opt_call_is_a_leaf() {
    let spec = programs::append();
    let rs = relation_scheme_by_name(&spec, "appendo_opt", &["a", "b"]).unwrap();
    let Scheme::Fork { right, .. } = &rs.scheme else { panic!("root is not a fork") };
    let mut node = right.as_ref();
    while let [only] = node.children()[..] {
        node = only;
    }
    assert!(matches!(node, Scheme::InvokeLeaf { .. }), "{node:?}");
}

#[test]
fn trace_of_small_append() {
    let spec = programs::append();
    let q = parse_goal("appendo(Cons(Zero, Nil), Nil, q)", &spec).unwrap();
    let mut out = String::new();
    let stats = dump_trace(init_arc(q.goal.clone()), &spec, &EngineConfig::default(), &q.vars, &mut out).unwrap();
    assert_eq!((stats.d, stats.t), (22, 50));
    golden("trace_append.txt", &out);
}

fn masked_csv(name: &str, sizes: &[usize]) -> String {
    let cfg = SeriesConfig { reps: 1, ..SeriesConfig::default() };
    let points: Vec<SeriesPoint> = run_series(suite(name).unwrap(), sizes, &cfg)
        .unwrap()
        .into_iter()
        .map(|p| SeriesPoint { wall_ns: 0, ..p })
        .collect();
    let mut out = Vec::new();
    emit_csv(&points, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn bench_csv_snapshots() {
    golden("bench_appendo.csv", &masked_csv("appendo", &[1, 2, 4, 8]));
    golden("bench_appendo_opt.csv", &masked_csv("appendo_opt", &[1, 2, 4, 8]));
    golden("bench_pluso_nm.csv", &masked_csv("pluso_nm", &[1, 2, 4, 8]));
}
