use std::collections::HashMap;

use super::forest::Ctx;
use super::{kruskal, prim, Algorithm, EnumOptions, EnumStats, Plan, PlanStep, TieBreak};
use crate::clock::Stopwatch;
use crate::cost::{CardinalitySource, CostModelParams, JoinChoice, Subplan};
use crate::error::{Error, Result};
use crate::graph::{connected_subsets, JoinGraph};
use crate::vertex_set::VertexSet;

#[derive(Clone, Copy)]
struct Best {
    sub: Subplan,
    split: Option<(Subplan, Subplan, JoinChoice)>,
}

/// Optimal plan by dynamic programming over connected subsets.
///
/// Each connected subset keeps its cheapest plan over all splits into two
/// connected, edge-linked halves. With `options.prune`, subsets whose best
/// plan already exceeds a greedy upper bound are discarded.
pub fn exhaustive(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    options: &EnumOptions,
) -> Result<(Plan, EnumStats)> {
    let n = graph.num_tables();
    if n > options.exhaustive_limit {
        return Err(Error::SubsetLimit {
            tables: n,
            limit: options.exhaustive_limit,
        });
    }
    let clock = Stopwatch::start();
    let bound = if options.prune && n > 2 {
        let greedy = EnumOptions {
            tie_break: TieBreak::Smallest,
            ..*options
        };
        let (p, _) = prim::prim(graph, source, params, &greedy)?;
        let (k, _) = kruskal::kruskal(graph, source, params, &greedy)?;
        p.internal_cost.min(k.internal_cost)
    } else {
        f64::INFINITY
    };

    let mut ctx = Ctx::new(graph, source, params);
    let mut memo: HashMap<VertexSet, Best> = (0..n)
        .map(|v| (VertexSet::singleton(v), Best { sub: ctx.leaf(v), split: None }))
        .collect();
    let mut subsets = connected_subsets(graph, 2);
    subsets.sort_by_key(|s| (s.len(), *s));
    let full = graph.all();
    let mut plans = 0usize;

    for set in subsets {
        if options.deadline.expired() {
            return Err(Error::Timeout);
        }
        let low = VertexSet::singleton(set.min().expect("non-empty"));
        let rest = set.difference(low).bits();
        let mut best: Option<Best> = None;
        // submasks of `rest`, each unioned with the lowest vertex
        let mut sub = rest;
        loop {
            let s1 = low.union(VertexSet(sub));
            let s2 = set.difference(s1);
            if !s2.is_empty() {
                if let (Some(a), Some(b)) = (memo.get(&s1), memo.get(&s2)) {
                    if graph.has_edge_between(s1, s2) {
                        let (a, b) = (a.sub, b.sub);
                        let choice = ctx.evaluate(&a, &b)?;
                        if set == full {
                            plans += 1;
                        }
                        if best.as_ref().map_or(true, |x| choice.cost < x.sub.cost) {
                            best = Some(Best {
                                sub: choice.subplan(&a, &b),
                                split: Some((a, b, choice)),
                            });
                        }
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        if let Some(b) = best {
            if set == full || b.sub.cost <= bound {
                memo.insert(set, b);
            }
        }
    }

    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    if n > 1 {
        let root = memo.get(&full).ok_or_else(|| Error::Malformed("no plan covers every table".into()))?;
        emit(graph, &memo, root, &mut steps);
    }
    let used: Vec<bool> = {
        let mut u = vec![false; graph.num_edges()];
        for s in &steps {
            u[s.edge] = true;
        }
        u
    };
    let filters = (0..graph.num_edges()).filter(|&e| !used[e]).collect();
    let plan = Plan::assemble(Algorithm::Exhaustive, graph, params, steps, filters);
    Ok((plan, ctx.coverage.stats(plans.max(1), clock.elapsed())))
}

fn emit(graph: &JoinGraph, memo: &HashMap<VertexSet, Best>, node: &Best, steps: &mut Vec<PlanStep>) {
    let Some((a, b, choice)) = node.split else {
        return;
    };
    emit(graph, memo, &memo[&a.set], steps);
    emit(graph, memo, &memo[&b.set], steps);
    let edge = graph
        .edges_between(a.set, b.set)
        .next()
        .expect("split halves share an edge");
    steps.push(PlanStep {
        edge,
        left: a.set,
        right: b.set,
        operator: choice.operator,
        out_card: choice.out_card,
        step_cost: choice.step_cost,
        cost: choice.cost,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::SelectivityModel;
    use crate::enumerate::validate_plan;
    use crate::graph::TableInfo;

    #[test]
    fn two_tables() {
        let g = JoinGraph::new(
            vec![TableInfo::new("a", 10), TableInfo::new("b", 20)],
            vec![(0, 1, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.1]).unwrap();
        let (plan, stats) = exhaustive(&g, &m, &CostModelParams::default(), &EnumOptions::default()).unwrap();
        assert_eq!(plan.steps.len(), 1);
        assert_eq!(stats.plans_enumerated, 1);
        assert_eq!(validate_plan(&g, &plan), Ok(()));
    }

    #[test]
    fn subset_limit() {
        let g = JoinGraph::new(
            (0..4).map(|i| TableInfo::new(format!("r{i}"), 10)).collect(),
            (0..3).map(|i| (i, i + 1, String::new())).collect(),
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.1; 3]).unwrap();
        let opts = EnumOptions {
            exhaustive_limit: 3,
            ..EnumOptions::default()
        };
        assert_eq!(
            exhaustive(&g, &m, &CostModelParams::default(), &opts).unwrap_err(),
            Error::SubsetLimit { tables: 4, limit: 3 }
        );
    }

    #[test]
    fn pruning_keeps_the_optimum() {
        let g = JoinGraph::new(
            (0..6).map(|i| TableInfo::new(format!("r{i}"), 1000 + 37 * i as u64).indexed(i % 2 == 0)).collect(),
            vec![(0, 1, String::new()), (1, 2, String::new()), (2, 3, String::new()), (3, 4, String::new()), (4, 5, String::new()), (5, 0, String::new()), (1, 4, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.01, 0.002, 0.05, 0.001, 0.02, 0.003, 0.04]).unwrap();
        let p = CostModelParams::default();
        let on = exhaustive(&g, &m, &p, &EnumOptions::default()).unwrap().0;
        let off = exhaustive(&g, &m, &p, &EnumOptions { prune: false, ..EnumOptions::default() }).unwrap().0;
        assert_eq!(on.internal_cost, off.internal_cost);
    }
}
