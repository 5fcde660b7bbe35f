//! Plan enumerators and the plan representation they share.

mod este;
mod exhaustive;
mod forest;
mod goo;
mod kruskal;
mod prim;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use crate::clock::Deadline;
use crate::cost::{
    evaluate_operator, si_display, CardinalitySource, CostModelParams, OperatorChoice, OperatorKind,
    Side, Subplan,
};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, JoinGraph};
use crate::vertex_set::VertexSet;

pub use este::este;
pub use exhaustive::exhaustive;
pub use goo::goo;
pub use kruskal::{kruskal, kruskal_from};
pub use prim::{prim, prim_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Exhaustive,
    Prim,
    Kruskal,
    Goo,
    Este,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Exhaustive,
        Algorithm::Prim,
        Algorithm::Kruskal,
        Algorithm::Goo,
        Algorithm::Este,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Exhaustive => "exhaustive",
            Algorithm::Prim => "prim",
            Algorithm::Kruskal => "kruskal",
            Algorithm::Goo => "goo",
            Algorithm::Este => "este",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanShape {
    Linear,
    Bushy,
}

/// How equal-cost candidates are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    /// Smallest edge id (or smallest subset ids for GOO).
    Smallest,
    /// Seeded random order.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GooObjective {
    /// Per-step cost, comparable with the other enumerators.
    Cost,
    /// Output cardinality only.
    Cardinality,
}

#[derive(Debug, Clone, Copy)]
pub struct EnumOptions {
    /// Largest table count accepted by the subset DP.
    pub exhaustive_limit: usize,
    /// Prune DP subsets costlier than a greedy upper bound.
    pub prune: bool,
    pub tie_break: TieBreak,
    /// ESTE worker count; 1 runs inline.
    pub parallelism: usize,
    pub goo_objective: GooObjective,
    pub deadline: Deadline,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            exhaustive_limit: 20,
            prune: true,
            tie_break: TieBreak::Smallest,
            parallelism: 1,
            goo_objective: GooObjective::Cost,
            deadline: Deadline::none(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub edge: EdgeId,
    pub left: VertexSet,
    pub right: VertexSet,
    pub operator: OperatorChoice,
    pub out_card: f64,
    pub step_cost: f64,
    /// Cumulative cost of the subtree rooted at this join.
    pub cost: f64,
}

impl PlanStep {
    pub fn resulting_subset(&self) -> VertexSet {
        self.left.union(self.right)
    }

    /// The build child for HJ, the indexed inner for INL.
    pub fn designated(&self) -> VertexSet {
        match self.operator.side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub algorithm: Algorithm,
    pub steps: Vec<PlanStep>,
    pub filters: Vec<EdgeId>,
    pub internal_cost: f64,
    pub total_cost: f64,
    pub shape: PlanShape,
}

impl Plan {
    pub(crate) fn assemble(
        algorithm: Algorithm,
        graph: &JoinGraph,
        params: &CostModelParams,
        steps: Vec<PlanStep>,
        mut filters: Vec<EdgeId>,
    ) -> Plan {
        filters.sort_unstable();
        let internal_cost = steps.last().map_or(0.0, |s| s.cost);
        let mut total_cost = internal_cost;
        for s in &steps {
            if s.operator.kind == OperatorKind::IndexNestedLoop {
                let v = s.designated().min().expect("inner is a table");
                total_cost += crate::cost::leaf_cost(graph.table(v), params);
            }
        }
        if steps.is_empty() {
            total_cost = (0..graph.num_tables())
                .map(|v| crate::cost::leaf_cost(graph.table(v), params))
                .sum();
        }
        let shape = if steps.iter().all(|s| s.left.len() == 1 || s.right.len() == 1) {
            PlanShape::Linear
        } else {
            PlanShape::Bushy
        };
        Plan {
            algorithm,
            steps,
            filters,
            internal_cost,
            total_cost,
            shape,
        }
    }

    /// Order-independent text form: children sorted by subset id, each join
    /// tagged with its edge, operator and designated child.
    pub fn canonical_encoding(&self) -> String {
        let by_set: HashMap<VertexSet, &PlanStep> =
            self.steps.iter().map(|s| (s.resulting_subset(), s)).collect();
        fn encode(set: VertexSet, by_set: &HashMap<VertexSet, &PlanStep>, out: &mut String) {
            match by_set.get(&set) {
                None => {
                    out.push('T');
                    out.push_str(&set.min().unwrap_or(0).to_string());
                }
                Some(step) => {
                    let (a, b) = if step.left < step.right {
                        (step.left, step.right)
                    } else {
                        (step.right, step.left)
                    };
                    out.push_str(&format!(
                        "(e{}:{}:{}|",
                        step.edge,
                        step.operator.kind,
                        step.designated().bits()
                    ));
                    encode(a, by_set, out);
                    out.push('|');
                    encode(b, by_set, out);
                    out.push(')');
                }
            }
        }
        let mut out = String::new();
        if let Some(last) = self.steps.last() {
            encode(last.resulting_subset(), &by_set, &mut out);
        }
        out
    }

    /// Re-costs the same tree and operators under another cardinality source.
    pub fn recost(
        &self,
        graph: &JoinGraph,
        source: &dyn CardinalitySource,
        params: &CostModelParams,
    ) -> Result<Plan> {
        let mut subs: HashMap<VertexSet, Subplan> = (0..graph.num_tables())
            .map(|v| (VertexSet::singleton(v), Subplan::leaf(graph, v, params)))
            .collect();
        let mut steps = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let (l, r) = (subs[&s.left], subs[&s.right]);
            let out = source.cardinality(s.resulting_subset())?;
            let c = evaluate_operator(s.operator, &l, &r, out, params);
            subs.insert(s.resulting_subset(), c.subplan(&l, &r));
            steps.push(PlanStep {
                out_card: c.out_card,
                step_cost: c.step_cost,
                cost: c.cost,
                ..*s
            });
        }
        Ok(Plan::assemble(self.algorithm, graph, params, steps, self.filters.clone()))
    }

    pub fn to_json(&self, graph: &JoinGraph, stats: Option<&EnumStats>) -> serde_json::Value {
        let names = |s: VertexSet| -> Vec<&str> { s.iter().map(|v| graph.table(v).name.as_str()).collect() };
        let steps: Vec<_> = self
            .steps
            .iter()
            .map(|s| {
                json!({
                    "edge": s.edge,
                    "join": format!("{}-{}", graph.table(graph.edge(s.edge).v1).name, graph.table(graph.edge(s.edge).v2).name),
                    "left_subset": names(s.left),
                    "right_subset": names(s.right),
                    "operator": s.operator.kind,
                    "build_side": s.operator.side,
                    "out_card": s.out_card,
                    "step_cost": s.step_cost,
                    "step_cost_display": si_display(s.step_cost),
                })
            })
            .collect();
        let mut v = json!({
            "algorithm": self.algorithm,
            "internal_cost": self.internal_cost,
            "internal_cost_display": si_display(self.internal_cost),
            "total_cost": self.total_cost,
            "shape": self.shape,
            "steps": steps,
            "filters": self.filters,
        });
        if let Some(stats) = stats {
            v["stats"] = stats.to_json();
        }
        v
    }
}

/// Standalone structural check: the steps form a spanning forest-merge
/// sequence, and steps plus filters partition the edge set.
pub fn validate_plan(graph: &JoinGraph, plan: &Plan) -> std::result::Result<(), String> {
    let n = graph.num_tables();
    if plan.steps.len() + 1 != n {
        return Err(format!("{} steps for {} tables", plan.steps.len(), n));
    }
    let mut comp: Vec<VertexSet> = (0..n).map(VertexSet::singleton).collect();
    let mut seen = vec![0usize; graph.num_edges()];
    for (i, s) in plan.steps.iter().enumerate() {
        if s.edge >= graph.num_edges() {
            return Err(format!("step {i}: unknown edge {}", s.edge));
        }
        seen[s.edge] += 1;
        let e = graph.edge(s.edge);
        let (c1, c2) = (comp[e.v1], comp[e.v2]);
        if c1 == c2 {
            return Err(format!("step {i}: edge {} closes a cycle", s.edge));
        }
        let matches = (s.left == c1 && s.right == c2) || (s.left == c2 && s.right == c1);
        if !matches {
            return Err(format!("step {i}: inputs are not the components of edge {}", s.edge));
        }
        let merged = c1.union(c2);
        if !graph.is_connected(merged) {
            return Err(format!("step {i}: result is disconnected"));
        }
        if s.operator.kind == OperatorKind::IndexNestedLoop {
            let inner = s.designated();
            if inner.len() != 1 || !graph.table(inner.min().unwrap_or(0)).indexed {
                return Err(format!("step {i}: INL inner is not an indexed table"));
            }
        }
        for v in merged.iter() {
            comp[v] = merged;
        }
    }
    if n > 0 && comp[0] != graph.all() {
        return Err("plan does not span every table".into());
    }
    for &f in &plan.filters {
        if f >= graph.num_edges() {
            return Err(format!("unknown filter edge {f}"));
        }
        seen[f] += 1;
    }
    if let Some(e) = seen.iter().position(|&c| c != 1) {
        return Err(format!("edge {e} appears {} times among joins and filters", seen[e]));
    }
    Ok(())
}

/// Distinct subsets and subset pairs whose join cost was computed.
#[derive(Debug, Clone, Default)]
pub(crate) struct Coverage {
    pub subplans: HashSet<VertexSet>,
    pub pairs: HashSet<(VertexSet, VertexSet)>,
    pub evaluations: u64,
}

impl Coverage {
    pub fn record(&mut self, a: VertexSet, b: VertexSet) {
        self.evaluations += 1;
        self.subplans.insert(a.union(b));
        self.pairs.insert(if a < b { (a, b) } else { (b, a) });
    }

    pub fn absorb(&mut self, other: Coverage) {
        self.subplans.extend(other.subplans);
        self.pairs.extend(other.pairs);
        self.evaluations += other.evaluations;
    }

    pub fn stats(&self, plans: usize, elapsed: Duration) -> EnumStats {
        EnumStats {
            subplans_reached: self.subplans.len(),
            join_costs_computed: self.pairs.len(),
            plans_enumerated: plans,
            cost_evaluations: self.evaluations,
            elapsed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnumStats {
    /// Distinct connected subsets (size >= 2) that had a join cost computed.
    pub subplans_reached: usize,
    /// Distinct unordered (left, right) subset pairs costed.
    pub join_costs_computed: usize,
    pub plans_enumerated: usize,
    /// Raw number of operator-selection calls, duplicates included.
    pub cost_evaluations: u64,
    pub elapsed: Duration,
}

impl EnumStats {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "subplans": self.subplans_reached,
            "join_costs": self.join_costs_computed,
            "plans": self.plans_enumerated,
            "evaluations": self.cost_evaluations,
            "elapsed_ms": self.elapsed.as_secs_f64() * 1e3,
        })
    }
}

/// Result of one optimizer invocation.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub plan: Plan,
    pub stats: EnumStats,
    /// Distinct member plans, ESTE only.
    pub distinct_plans: Option<usize>,
}

pub fn optimize(
    algorithm: Algorithm,
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    options: &EnumOptions,
) -> Result<Outcome> {
    let (plan, stats, distinct_plans) = match algorithm {
        Algorithm::Exhaustive => {
            let (p, s) = exhaustive(graph, source, params, options)?;
            (p, s, None)
        }
        Algorithm::Prim => {
            let (p, s) = prim(graph, source, params, options)?;
            (p, s, None)
        }
        Algorithm::Kruskal => {
            let (p, s) = kruskal(graph, source, params, options)?;
            (p, s, None)
        }
        Algorithm::Goo => {
            let (p, s) = goo(graph, source, params, options)?;
            (p, s, None)
        }
        Algorithm::Este => {
            let (p, s, d) = este(graph, source, params, options)?;
            (p, s, Some(d))
        }
    };
    Ok(Outcome {
        plan,
        stats,
        distinct_plans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::SelectivityModel;
    use crate::graph::TableInfo;

    fn triangle() -> (JoinGraph, SelectivityModel) {
        let g = JoinGraph::new(
            (0..3).map(|i| TableInfo::new(format!("r{i}"), 1000).indexed(true)).collect(),
            vec![(0, 1, String::new()), (1, 2, String::new()), (0, 2, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.01; 3]).unwrap();
        (g, m)
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dijkstra".parse::<Algorithm>().is_err());
    }

    #[test]
    fn validator_rejects_broken_plans() {
        let (g, m) = triangle();
        let p = CostModelParams::default();
        let (plan, _) = prim(&g, &m, &p, &EnumOptions::default()).unwrap();
        assert_eq!(validate_plan(&g, &plan), Ok(()));

        let mut missing_filter = plan.clone();
        missing_filter.filters.clear();
        assert!(validate_plan(&g, &missing_filter).is_err());

        let mut cyclic = plan.clone();
        cyclic.steps[1].edge = cyclic.steps[0].edge;
        assert!(validate_plan(&g, &cyclic).is_err());

        let mut short = plan;
        short.steps.pop();
        assert!(validate_plan(&g, &short).is_err());
    }

    #[test]
    fn encoding_ignores_step_order() {
        let g = JoinGraph::new(
            (0..4).map(|i| TableInfo::new(format!("r{i}"), 10 + i as u64)).collect(),
            vec![(0, 1, String::new()), (2, 3, String::new()), (1, 2, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.5; 3]).unwrap();
        let p = CostModelParams::default();
        let (plan, _) = kruskal(&g, &m, &p, &EnumOptions::default()).unwrap();
        assert_eq!(plan.shape, PlanShape::Bushy);
        let mut swapped = plan.clone();
        swapped.steps.swap(0, 1);
        assert_eq!(plan.canonical_encoding(), swapped.canonical_encoding());
    }

    #[test]
    fn recost_under_same_source_is_identity() {
        let (g, m) = triangle();
        let p = CostModelParams::default();
        let (plan, _) = goo(&g, &m, &p, &EnumOptions::default()).unwrap();
        assert_eq!(plan.recost(&g, &m, &p).unwrap(), plan);
    }
}
