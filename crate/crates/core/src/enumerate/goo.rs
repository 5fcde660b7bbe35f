use std::collections::HashMap;

use super::forest::{Ctx, Forest, Ties};
use super::{Algorithm, EnumOptions, EnumStats, GooObjective, Plan};
use crate::clock::Stopwatch;
use crate::cost::{CardinalitySource, CostModelParams, JoinChoice};
use crate::error::Result;
use crate::graph::JoinGraph;
use crate::vertex_set::VertexSet;

/// Greedy operator ordering: merge the cheapest connected component pair
/// until one component remains.
pub fn goo(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    options: &EnumOptions,
) -> Result<(Plan, EnumStats)> {
    let clock = Stopwatch::start();
    let mut ctx = Ctx::new(graph, source, params);
    let plan = run(&mut ctx, options)?;
    Ok((plan, ctx.coverage.stats(1, clock.elapsed())))
}

pub(crate) fn run(ctx: &mut Ctx<'_>, options: &EnumOptions) -> Result<Plan> {
    let graph = ctx.graph;
    let mut forest = Forest::new(ctx);
    let mut ties = Ties::new(options.tie_break);
    let mut cache: HashMap<(VertexSet, VertexSet), JoinChoice> = HashMap::new();

    while forest.components() > 1 {
        let mut roots: Vec<_> = (0..graph.num_tables())
            .filter(|&v| forest.find(v) == v)
            .map(|v| forest.component(v))
            .collect();
        roots.sort_by_key(|s| s.set);

        let mut best: Option<((f64, u64, VertexSet, VertexSet), usize, usize, JoinChoice)> = None;
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                let (a, b) = (roots[i], roots[j]);
                if !graph.has_edge_between(a.set, b.set) {
                    continue;
                }
                let choice = match cache.get(&(a.set, b.set)) {
                    Some(c) => *c,
                    None => {
                        let c = ctx.evaluate(&a, &b)?;
                        cache.insert((a.set, b.set), c);
                        c
                    }
                };
                let score = match options.goo_objective {
                    GooObjective::Cost => choice.step_cost,
                    GooObjective::Cardinality => choice.out_card,
                };
                let key = (score, ties.key(), a.set, b.set);
                let better = best.as_ref().map_or(true, |(k, ..)| {
                    key.0
                        .total_cmp(&k.0)
                        .then(key.1.cmp(&k.1))
                        .then(key.2.cmp(&k.2))
                        .then(key.3.cmp(&k.3))
                        .is_lt()
                });
                if better {
                    best = Some((key, i, j, choice));
                }
            }
        }
        let (_, i, j, choice) = best.expect("connected graph has a joinable pair");
        let (a, b) = (roots[i], roots[j]);
        let mut crossing = graph.edges_between(a.set, b.set);
        let edge = crossing.next().expect("pair shares an edge");
        let rest: Vec<_> = crossing.collect();
        forest.join(edge, a, b, choice);
        for e in rest {
            forest.filter(e);
        }
    }
    Ok(forest.finish(Algorithm::Goo, ctx))
}
