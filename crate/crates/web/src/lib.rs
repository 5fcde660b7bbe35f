//! Browser bindings. Each export takes and returns JSON text; the plain
//! Rust functions below them are what the tests exercise.

use serde_json::{json, Value};
use spanplan::cost::CardinalityKind;
use spanplan::enumerate::optimize;
use spanplan::graph::{connected_subsets, gen_topology, parse_graph_with_statistics, GenConfig};
use spanplan::oracle::{binary_tree_space_size, count_ordered_trees, DEFAULT_ARRANGEMENT_LIMIT};
use spanplan::{Algorithm, CostModelParams, EnumOptions, JoinGraph, Statistics, TopologyKind};
use wasm_bindgen::prelude::*;

/// The keyword/company example query shipped with the repository.
pub const SAMPLE_QUERY: &str = include_str!("../../../data/job_2a.json");

/// Exhaustive search is skipped above this many tables in [`compare`].
pub const EXHAUSTIVE_MAX_TABLES: usize = 12;

fn load(document: &str) -> Result<(JoinGraph, Statistics), String> {
    let (graph, stats) = parse_graph_with_statistics(document, CardinalityKind::True).map_err(|e| e.to_string())?;
    let stats = stats.ok_or("the graph has no cardinalities or selectivities")?;
    Ok((graph, stats))
}

fn params(tau: f64, lambda: f64) -> Result<CostModelParams, String> {
    CostModelParams::new(tau, lambda).map_err(|e| e.to_string())
}

fn graph_summary(graph: &JoinGraph) -> Value {
    json!({
        "tables": graph.tables().iter().map(|t| json!({
            "name": t.name,
            "cardinality": t.base_cardinality,
            "indexed": t.indexed,
        })).collect::<Vec<_>>(),
        "joins": graph.edges().iter().map(|e| json!({
            "id": e.id,
            "left": graph.table(e.v1).name,
            "right": graph.table(e.v2).name,
        })).collect::<Vec<_>>(),
    })
}

/// Optimizes `document` with one algorithm and returns the plan.
pub fn optimize_document(document: &str, algorithm: &str, tau: f64, lambda: f64) -> Result<Value, String> {
    let (graph, stats) = load(document)?;
    let algorithm: Algorithm = algorithm.parse().map_err(|e: spanplan::Error| e.to_string())?;
    let out = optimize(algorithm, &graph, &stats, &params(tau, lambda)?, &EnumOptions::default())
        .map_err(|e| e.to_string())?;
    let mut v = out.plan.to_json(&graph, Some(&out.stats));
    if let Some(d) = out.distinct_plans {
        v["distinct_plans"] = json!(d);
    }
    v["graph"] = graph_summary(&graph);
    Ok(v)
}

/// Runs every algorithm on `document`; costs are relative to the best found.
pub fn compare(document: &str, tau: f64, lambda: f64) -> Result<Value, String> {
    let (graph, stats) = load(document)?;
    let p = params(tau, lambda)?;
    let mut rows = Vec::new();
    for alg in Algorithm::ALL {
        if alg == Algorithm::Exhaustive && graph.num_tables() > EXHAUSTIVE_MAX_TABLES {
            continue;
        }
        let out = optimize(alg, &graph, &stats, &p, &EnumOptions::default()).map_err(|e| e.to_string())?;
        rows.push((alg, out));
    }
    let best = rows
        .iter()
        .map(|(_, o)| o.plan.internal_cost)
        .fold(f64::INFINITY, f64::min);
    let rows: Vec<Value> = rows
        .iter()
        .map(|(alg, o)| {
            json!({
                "algorithm": alg.as_str(),
                "internal_cost": o.plan.internal_cost,
                "ratio": o.plan.internal_cost / best,
                "shape": o.plan.shape,
                "evaluations": o.stats.cost_evaluations,
                "subplans": o.stats.subplans_reached,
            })
        })
        .collect();
    Ok(json!({ "rows": rows, "exhaustive_included": graph.num_tables() <= EXHAUSTIVE_MAX_TABLES }))
}

/// Counts the join-tree search space of `document`.
pub fn search_space(document: &str) -> Result<Value, String> {
    let (graph, _) = load(document)?;
    let num = |x: u128| json!(u64::try_from(x).ok());
    let t_b = binary_tree_space_size(graph.num_tables()).map_or(Value::Null, num);
    let subsets = connected_subsets(&graph, 2).len();
    Ok(match count_ordered_trees(&graph, DEFAULT_ARRANGEMENT_LIMIT) {
        Ok(c) => json!({
            "bound": num(c.bound),
            "valid": num(c.valid),
            "invalid": num(c.invalid),
            "linear": num(c.linear),
            "bushy": num(c.bushy),
            "t_b": t_b,
            "connected_subsets": subsets,
        }),
        Err(e) => json!({ "error": e.to_string(), "t_b": t_b, "connected_subsets": subsets }),
    })
}

/// A synthetic graph document with selectivities.
pub fn generate(topology: &str, tables: usize, seed: u64) -> Result<String, String> {
    let kind: TopologyKind = topology.parse().map_err(|e: spanplan::Error| e.to_string())?;
    let (graph, model) = gen_topology(kind, tables, seed, &GenConfig::default()).map_err(|e| e.to_string())?;
    Ok(graph.to_json(Some(&Statistics::Selectivity(model))))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = sampleQuery)]
pub fn sample_query() -> String {
    SAMPLE_QUERY.to_string()
}

#[wasm_bindgen(js_name = optimizeQuery)]
pub fn optimize_query(document: &str, algorithm: &str, tau: f64, lambda: f64) -> Result<String, JsValue> {
    to_js(optimize_document(document, algorithm, tau, lambda))
}

#[wasm_bindgen(js_name = compareAlgorithms)]
pub fn compare_algorithms(document: &str, tau: f64, lambda: f64) -> Result<String, JsValue> {
    to_js(compare(document, tau, lambda))
}

#[wasm_bindgen(js_name = countSearchSpace)]
pub fn count_search_space(document: &str) -> Result<String, JsValue> {
    to_js(search_space(document))
}

#[wasm_bindgen(js_name = generateGraph)]
pub fn generate_graph(topology: &str, tables: usize, seed: u32) -> Result<String, JsValue> {
    generate(topology, tables, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
