//! Ground truth by brute force: ordered spanning tree enumeration, search
//! space counting and certified optimal plans.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{choose_with_card, CardinalitySource, CostModelParams, JoinChoice, Subplan};
use crate::enumerate::{Algorithm, Plan, PlanStep};
use crate::error::{Error, Result};
use crate::graph::{connected_subsets, EdgeId, JoinGraph};
use crate::vertex_set::VertexSet;

pub const DEFAULT_ARRANGEMENT_LIMIT: u128 = 10_000_000;

/// Number of ordered binary join trees over `n` tables, (2n)!/(n+1)!.
pub fn binary_tree_space_size(n: usize) -> Result<u128> {
    if !(1..=15).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "table count {n} outside 1..=15"
        )));
    }
    Ok((n as u128 + 2..=2 * n as u128).product())
}

/// Upper bound on ordered (v-1)-edge arrangements, e!/(e-v+1)!.
pub fn arrangement_bound(v: usize, e: usize) -> Result<u128> {
    if v == 0 || e + 1 < v {
        return Err(Error::InvalidArgument(format!(
            "{e} edges cannot span {v} tables"
        )));
    }
    falling(e as u128, v as u128 - 1).ok_or_else(|| Error::ArrangementLimit {
        bound: u128::MAX,
        limit: u128::MAX,
    })
}

/// n · (n-1) · … over `k` factors, None on overflow.
fn falling(n: u128, k: u128) -> Option<u128> {
    (0..k).try_fold(1u128, |acc, i| acc.checked_mul(n - i))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedTree {
    pub edges: Vec<EdgeId>,
    pub linear: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TreeCounts {
    pub bound: u128,
    pub valid: u128,
    pub invalid: u128,
    pub linear: u128,
    pub bushy: u128,
}

impl TreeCounts {
    fn add(&mut self, other: &TreeCounts) {
        self.valid += other.valid;
        self.invalid += other.invalid;
        self.linear += other.linear;
        self.bushy += other.bushy;
    }
}

fn check_limit(graph: &JoinGraph, limit: u128) -> Result<u128> {
    let bound = arrangement_bound(graph.num_tables(), graph.num_edges())?;
    if bound > limit {
        return Err(Error::ArrangementLimit { bound, limit });
    }
    Ok(bound)
}

/// Walks every ordered arrangement of |V|-1 distinct edges. Valid trees are
/// passed to `visit`; arrangements pruned at their first cycle are counted
/// in bulk.
pub fn enumerate_ordered_trees(
    graph: &JoinGraph,
    limit: u128,
    mut visit: impl FnMut(&OrderedTree),
) -> Result<TreeCounts> {
    let bound = check_limit(graph, limit)?;
    let mut counts = TreeCounts {
        bound,
        ..TreeCounts::default()
    };
    let n = graph.num_tables();
    let mut walker = Walker::new(graph);
    let mut tree = OrderedTree {
        edges: Vec::with_capacity(n.saturating_sub(1)),
        linear: true,
    };
    walker.walk(&mut tree, &mut counts, &mut visit);
    Ok(counts)
}

/// Counts only; first-edge choices are spread over the rayon pool.
pub fn count_ordered_trees(graph: &JoinGraph, limit: u128) -> Result<TreeCounts> {
    let bound = check_limit(graph, limit)?;
    let n = graph.num_tables();
    let mut counts = TreeCounts {
        bound,
        ..TreeCounts::default()
    };
    if n == 1 {
        counts.valid = 1;
        counts.linear = 1;
        return Ok(counts);
    }
    let shards: Vec<TreeCounts> = (0..graph.num_edges())
        .into_par_iter()
        .map(|first| {
            let mut walker = Walker::new(graph);
            let mut c = TreeCounts::default();
            let mut tree = OrderedTree {
                edges: Vec::with_capacity(n - 1),
                linear: true,
            };
            walker.push(first, &mut tree);
            walker.walk(&mut tree, &mut c, &mut |_| {});
            c
        })
        .collect();
    for s in &shards {
        counts.add(s);
    }
    Ok(counts)
}

/// Component labels with undo, for backtracking.
struct Walker<'g> {
    graph: &'g JoinGraph,
    comp: Vec<VertexSet>,
    used: Vec<bool>,
    undo: Vec<(VertexSet, VertexSet)>,
    main: Vec<VertexSet>,
}

impl<'g> Walker<'g> {
    fn new(graph: &'g JoinGraph) -> Self {
        Walker {
            graph,
            comp: (0..graph.num_tables()).map(VertexSet::singleton).collect(),
            used: vec![false; graph.num_edges()],
            undo: Vec::new(),
            main: Vec::new(),
        }
    }

    fn slots_left(&self, tree: &OrderedTree) -> usize {
        self.graph.num_tables() - 1 - tree.edges.len()
    }

    fn push(&mut self, e: EdgeId, tree: &mut OrderedTree) {
        let edge = self.graph.edge(e);
        let (a, b) = (self.comp[edge.v1], self.comp[edge.v2]);
        let merged = a.union(b);
        for v in merged.iter() {
            self.comp[v] = merged;
        }
        self.used[e] = true;
        self.undo.push((a, b));
        let prev_main = self.main.last().copied();
        let extends = match prev_main {
            None => true,
            Some(m) => m == a || m == b,
        };
        self.main.push(merged);
        tree.edges.push(e);
        if !extends {
            // once a second component appears the tree cannot be linear
            tree.linear = false;
        }
    }

    fn pop(&mut self, tree: &mut OrderedTree, linear_before: bool) {
        let e = tree.edges.pop().expect("non-empty");
        let (a, b) = self.undo.pop().expect("matched push");
        for v in a.iter() {
            self.comp[v] = a;
        }
        for v in b.iter() {
            self.comp[v] = b;
        }
        self.used[e] = false;
        self.main.pop();
        tree.linear = linear_before;
    }

    fn walk(&mut self, tree: &mut OrderedTree, counts: &mut TreeCounts, visit: &mut dyn FnMut(&OrderedTree)) {
        if self.slots_left(tree) == 0 {
            counts.valid += 1;
            if tree.linear {
                counts.linear += 1;
            } else {
                counts.bushy += 1;
            }
            visit(tree);
            return;
        }
        let e_total = self.graph.num_edges();
        let depth = tree.edges.len();
        for e in 0..e_total {
            if self.used[e] {
                continue;
            }
            let edge = self.graph.edge(e);
            if self.comp[edge.v1] == self.comp[edge.v2] {
                // every completion of this prefix is invalid
                let free = (e_total - depth - 1) as u128;
                let slots = (self.slots_left(tree) - 1) as u128;
                counts.invalid += falling(free, slots).expect("within bound");
                continue;
            }
            let linear_before = tree.linear;
            self.push(e, tree);
            self.walk(tree, counts, visit);
            self.pop(tree, linear_before);
        }
    }
}

/// Builds the plan for an ordered tree: each edge merges the components of
/// its endpoints, operators chosen by the cost model, leftover edges become
/// filters.
pub fn plan_from_edges(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    edges: &[EdgeId],
    algorithm: Algorithm,
) -> Result<Plan> {
    let mut comp: Vec<Subplan> = (0..graph.num_tables())
        .map(|v| Subplan::leaf(graph, v, params))
        .collect();
    let mut steps = Vec::with_capacity(edges.len());
    for &e in edges {
        let edge = graph.edge(e);
        let (a, b) = (comp[edge.v1], comp[edge.v2]);
        if a.set == b.set {
            return Err(Error::InvalidArgument(format!("edge {e} closes a cycle")));
        }
        let out = source.cardinality(a.set.union(b.set))?;
        let c = choose_with_card(graph, &a, &b, out, params);
        let merged = c.subplan(&a, &b);
        for v in merged.set.iter() {
            comp[v] = merged;
        }
        steps.push(step(e, &a, &b, &c));
    }
    let filters = (0..graph.num_edges()).filter(|e| !edges.contains(e)).collect();
    Ok(Plan::assemble(algorithm, graph, params, steps, filters))
}

fn step(edge: EdgeId, a: &Subplan, b: &Subplan, c: &JoinChoice) -> PlanStep {
    PlanStep {
        edge,
        left: a.set,
        right: b.set,
        operator: c.operator,
        out_card: c.out_card,
        step_cost: c.step_cost,
        cost: c.cost,
    }
}

/// The minimum internal cost over every valid ordered spanning tree.
///
/// Among equal-cost trees the one with the smallest canonical encoding wins.
pub fn brute_force_optimal(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    limit: u128,
) -> Result<(Plan, f64)> {
    check_limit(graph, limit)?;
    let n = graph.num_tables();
    if n == 1 {
        let plan = plan_from_edges(graph, source, params, &[], Algorithm::Exhaustive)?;
        return Ok((plan, 0.0));
    }
    let mut cards = HashMap::new();
    for s in connected_subsets(graph, 2) {
        cards.insert(s, source.cardinality(s)?);
    }
    let search = Search {
        graph,
        params: *params,
        cards: &cards,
    };
    let shards: Vec<Option<(f64, Vec<EdgeId>)>> = (0..graph.num_edges())
        .into_par_iter()
        .map(|first| {
            let mut state = SearchState::new(graph, params);
            let mut best = None;
            search.descend(&mut state, first, &mut best);
            best
        })
        .collect();

    let mut winner: Option<(f64, String, Plan)> = None;
    for (cost, edges) in shards.into_iter().flatten() {
        let plan = plan_from_edges(graph, source, params, &edges, Algorithm::Exhaustive)?;
        let enc = plan.canonical_encoding();
        let better = winner.as_ref().map_or(true, |(c, e, _)| {
            cost.total_cmp(c).then_with(|| enc.cmp(e)).is_lt()
        });
        if better {
            winner = Some((cost, enc, plan));
        }
    }
    let (cost, _, plan) = winner.expect("connected graph has a spanning tree");
    Ok((plan, cost))
}

struct Search<'a> {
    graph: &'a JoinGraph,
    params: CostModelParams,
    cards: &'a HashMap<VertexSet, f64>,
}

struct SearchState {
    comp: Vec<Subplan>,
    used: Vec<bool>,
    seq: Vec<EdgeId>,
}

impl SearchState {
    fn new(graph: &JoinGraph, params: &CostModelParams) -> Self {
        SearchState {
            comp: (0..graph.num_tables()).map(|v| Subplan::leaf(graph, v, params)).collect(),
            used: vec![false; graph.num_edges()],
            seq: Vec::with_capacity(graph.num_tables()),
        }
    }
}

impl Search<'_> {
    /// Appends edge `e` and explores every continuation. Keeps the cheapest
    /// complete sequence; among equal costs, the first one found.
    fn descend(&self, st: &mut SearchState, e: EdgeId, best: &mut Option<(f64, Vec<EdgeId>)>) {
        let edge = self.graph.edge(e);
        let (a, b) = (st.comp[edge.v1], st.comp[edge.v2]);
        if a.set == b.set {
            return;
        }
        let out = self.cards[&a.set.union(b.set)];
        let c = choose_with_card(self.graph, &a, &b, out, &self.params);
        let merged = c.subplan(&a, &b);
        for v in merged.set.iter() {
            st.comp[v] = merged;
        }
        st.used[e] = true;
        st.seq.push(e);

        if st.seq.len() + 1 == self.graph.num_tables() {
            if best.as_ref().map_or(true, |(bc, _)| merged.cost < *bc) {
                *best = Some((merged.cost, st.seq.clone()));
            }
        } else {
            for next in 0..self.graph.num_edges() {
                if !st.used[next] {
                    self.descend(st, next, best);
                }
            }
        }

        st.seq.pop();
        st.used[e] = false;
        for v in a.set.iter() {
            st.comp[v] = a;
        }
        for v in b.set.iter() {
            st.comp[v] = b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_topology, GenConfig, TableInfo, TopologyKind};

    fn factorial(n: u128) -> u128 {
        (1..=n).product()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(binary_tree_space_size(1).unwrap(), 1);
        assert_eq!(binary_tree_space_size(2).unwrap(), 4);
        assert_eq!(binary_tree_space_size(5).unwrap(), 5040);
        assert!(binary_tree_space_size(0).is_err());
        assert!(binary_tree_space_size(16).is_err());
        assert_eq!(arrangement_bound(5, 5).unwrap(), 120);
        assert_eq!(arrangement_bound(2, 1).unwrap(), 1);
        assert_eq!(arrangement_bound(4, 6).unwrap(), 120);
        assert!(arrangement_bound(5, 3).is_err());
        for n in 1..=8u128 {
            assert_eq!(
                binary_tree_space_size(n as usize).unwrap(),
                factorial(2 * n) / factorial(n + 1)
            );
        }
    }

    #[test]
    fn triangle_counts() {
        let g = JoinGraph::new(
            (0..3).map(|i| TableInfo::new(format!("r{i}"), 10)).collect(),
            vec![(0, 1, String::new()), (1, 2, String::new()), (0, 2, String::new())],
        )
        .unwrap();
        let c = enumerate_ordered_trees(&g, DEFAULT_ARRANGEMENT_LIMIT, |_| {}).unwrap();
        assert_eq!(
            c,
            TreeCounts {
                bound: 6,
                valid: 6,
                invalid: 0,
                linear: 6,
                bushy: 0
            }
        );
    }

    #[test]
    fn chain_has_no_invalid_orders() {
        let (g, _) = gen_topology(TopologyKind::Chain, 5, 0, &GenConfig::default()).unwrap();
        let c = count_ordered_trees(&g, DEFAULT_ARRANGEMENT_LIMIT).unwrap();
        assert_eq!((c.valid, c.invalid), (24, 0));
        // a linear order grows a path outward: 3 choices of left/right extension
        assert_eq!((c.linear, c.bushy), (8, 16));
    }

    #[test]
    fn limit_enforced() {
        let (g, _) = gen_topology(TopologyKind::Clique, 7, 0, &GenConfig::default()).unwrap();
        assert!(matches!(
            count_ordered_trees(&g, DEFAULT_ARRANGEMENT_LIMIT),
            Err(Error::ArrangementLimit { .. })
        ));
    }
}
