use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/job_2a.json");

fn spanplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spanplan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = spanplan(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty());
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn optimize_prints_a_plan() {
    let v = json_ok(&["optimize", "--graph", FIXTURE, "--algo", "exhaustive"]);
    assert_eq!(v["algorithm"], "exhaustive");
    assert_eq!(v["steps"].as_array().unwrap().len(), 4);
    let cost = v["internal_cost"].as_f64().unwrap();
    assert!((cost - 1.6e6).abs() / 1.6e6 < 0.1);
    assert_eq!(v["stats"]["elapsed_ms"], 0.0);
}

#[test]
fn este_reports_distinct_plans() {
    let v = json_ok(&["optimize", "--graph", FIXTURE]);
    assert_eq!(v["algorithm"], "este");
    assert!(v["distinct_plans"].as_u64().unwrap() >= 1);
}

#[test]
fn evaluation_catalog_recosts_the_chosen_plan() {
    let dir = tempfile::tempdir().unwrap();
    let doc = read_json(Path::new(FIXTURE));
    let doubled: serde_json::Map<String, Value> = doc["cardinalities"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), Value::from(v.as_u64().unwrap() * 2)))
        .collect();
    let catalog = dir.path().join("eval.json");
    std::fs::write(&catalog, serde_json::json!({ "cardinalities": doubled }).to_string()).unwrap();

    let plain = json_ok(&["optimize", "--graph", FIXTURE, "--algo", "prim"]);
    let v = json_ok(&[
        "optimize",
        "--graph",
        FIXTURE,
        "--algo",
        "prim",
        "--evaluation-catalog",
        catalog.to_str().unwrap(),
    ]);
    assert_eq!(v["steps"], plain["steps"]);
    let selected = v["internal_cost"].as_f64().unwrap();
    let evaluated = v["evaluated"]["internal_cost"].as_f64().unwrap();
    assert!(evaluated > selected);
}

#[test]
fn gen_writes_the_requested_topology() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, n, joins) in [("chain", "4", 3), ("clique", "5", 10), ("star", "6", 5), ("cycle", "5", 5)] {
        let path = dir.path().join(format!("{kind}.json"));
        let out = spanplan(&["gen", "--topology", kind, "--tables", n, "--seed", "1", "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
        let v = read_json(&path);
        assert_eq!(v["joins"].as_array().unwrap().len(), joins, "{kind}");
        assert_eq!(v["selectivities"].as_object().unwrap().len(), joins);
        // a generated file is itself a valid input
        json_ok(&["optimize", "--graph", path.to_str().unwrap(), "--algo", "kruskal"]);
    }
}

#[test]
fn count_on_a_generated_chain() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.json");
    spanplan(&["gen", "--topology", "chain", "--tables", "5", "--out", path.to_str().unwrap()]);
    let v = json_ok(&["count", "--graph", path.to_str().unwrap()]);
    assert_eq!(v["valid"], 24);
    assert_eq!(v["linear"], 8);
    assert_eq!(v["t_b"], 5040);
    assert_eq!(v["connected_subsets"], 10);
}

#[test]
fn bench_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    let status = spanplan(&[
        "bench",
        "--topology",
        "cycle",
        "--sizes",
        "4,5",
        "--seeds",
        "2",
        "--algo",
        "exhaustive,goo,este",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let ratio = headers.iter().position(|h| h == "cost_ratio").unwrap();
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 2 * 2 * 3);
    for r in &records {
        assert!(r[ratio].parse::<f64>().unwrap() >= 1.0);
    }
    let summary = read_json(&dir.path().join("runs.csv.summary.json"));
    assert!(summary["ratio_method"].as_str().unwrap().contains("sum"));
    assert!(!summary["rows"].as_array().unwrap().is_empty());
}

#[test]
fn bad_input_exits_with_1() {
    let missing = spanplan(&["optimize"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&missing.stderr).lines().count(), 1);

    let nofile = spanplan(&["optimize", "--graph", "/nonexistent/graph.json"]);
    assert_eq!(nofile.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"tables":[{"name":"a","cardinality":10}],"joins":[{"left":"a","right":"zz","predicate":"x"}]}"#).unwrap();
    let out = spanplan(&["optimize", "--graph", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz"));
    assert!(out.stdout.is_empty());
}

#[test]
fn exhaustive_timeout_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clique.json");
    spanplan(&["gen", "--topology", "clique", "--tables", "18", "--out", path.to_str().unwrap()]);
    let out = spanplan(&[
        "optimize",
        "--graph",
        path.to_str().unwrap(),
        "--algo",
        "exhaustive",
        "--timeout",
        "0.001",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn help_exits_with_0() {
    let out = spanplan(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    for cmd in ["optimize", "count", "gen", "bench"] {
        assert!(String::from_utf8_lossy(&out.stdout).contains(cmd));
    }
}
