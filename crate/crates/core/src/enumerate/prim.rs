use super::forest::{two_way_costs, Ctx, Forest, Ties};
use super::{Algorithm, EnumOptions, EnumStats, Plan};
use crate::clock::Stopwatch;
use crate::cost::{CardinalitySource, CostModelParams};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, JoinGraph};

/// Prim seeded with the cheapest 2-way join.
pub fn prim(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    options: &EnumOptions,
) -> Result<(Plan, EnumStats)> {
    timed(graph, source, params, None, options)
}

/// Prim with `start` forced as the first join.
pub fn prim_from(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    start: EdgeId,
    options: &EnumOptions,
) -> Result<(Plan, EnumStats)> {
    if start >= graph.num_edges() {
        return Err(Error::InvalidArgument(format!("no edge {start}")));
    }
    timed(graph, source, params, Some(start), options)
}

fn timed(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    start: Option<EdgeId>,
    options: &EnumOptions,
) -> Result<(Plan, EnumStats)> {
    let clock = Stopwatch::start();
    let mut ctx = Ctx::new(graph, source, params);
    let plan = run(&mut ctx, start, options)?;
    Ok((plan, ctx.coverage.stats(1, clock.elapsed())))
}

pub(crate) fn run(ctx: &mut Ctx<'_>, start: Option<EdgeId>, options: &EnumOptions) -> Result<Plan> {
    let graph = ctx.graph;
    let mut forest = Forest::new(ctx);
    if graph.num_edges() == 0 {
        return Ok(forest.finish(Algorithm::Prim, ctx));
    }
    let mut ties = Ties::new(options.tie_break);
    let two_way = two_way_costs(ctx)?;
    let start = match start {
        Some(s) => s,
        None => (0..graph.num_edges())
            .map(|e| (two_way[e].step_cost, ties.key(), e))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
            .map(|c| c.2)
            .expect("graph has edges"),
    };
    let e = graph.edge(start);
    let mut main = forest.join(start, ctx.leaf(e.v1), ctx.leaf(e.v2), two_way[start]);

    while forest.components() > 1 {
        let mut best = None;
        for e in graph.edges() {
            if !forest.is_open(e.id) {
                continue;
            }
            let (in1, in2) = (main.set.contains(e.v1), main.set.contains(e.v2));
            if in1 && in2 {
                forest.filter(e.id);
            } else if in1 || in2 {
                let outside = if in1 { e.v2 } else { e.v1 };
                let leaf = ctx.leaf(outside);
                let choice = ctx.evaluate(&main, &leaf)?;
                let key = (choice.step_cost, ties.key(), e.id);
                let better = match &best {
                    None => true,
                    Some((k, _, _)) => {
                        let k: &(f64, u64, EdgeId) = k;
                        key.0.total_cmp(&k.0).then(key.1.cmp(&k.1)).then(key.2.cmp(&k.2)).is_lt()
                    }
                };
                if better {
                    best = Some((key, leaf, choice));
                }
            }
        }
        let ((_, _, edge), leaf, choice) = best.expect("connected graph has an adjacent edge");
        main = forest.join(edge, main, leaf, choice);
    }
    Ok(forest.finish(Algorithm::Prim, ctx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{leaf_cost, CardinalitySource, SelectivityModel};
    use crate::enumerate::{validate_plan, PlanShape};
    use crate::graph::TableInfo;
    use crate::VertexSet;

    #[test]
    fn chain_by_hand() {
        let g = JoinGraph::new(
            vec![
                TableInfo::new("a", 100),
                TableInfo::new("b", 1000),
                TableInfo::new("c", 10),
            ],
            vec![(0, 1, String::new()), (1, 2, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.01, 0.1]).unwrap();
        let p = CostModelParams::default();
        let (plan, stats) = prim_from(&g, &m, &p, 0, &EnumOptions::default()).unwrap();
        assert_eq!(plan.steps.iter().map(|s| s.edge).collect::<Vec<_>>(), vec![0, 1]);
        // |ab| = 1000, |abc| = 1000; no index, so hash joins throughout
        let scan = |v: usize| leaf_cost(g.table(v), &p);
        let ab = 1000.0 + 100.0 + scan(0) + scan(1);
        let abc = 1000.0 + 10.0 + scan(2) + ab;
        assert_eq!(m.cardinality(VertexSet(0b111)).unwrap(), 1000.0);
        assert!((plan.internal_cost - abc).abs() < 1e-9);
        assert_eq!(plan.shape, PlanShape::Linear);
        assert_eq!(validate_plan(&g, &plan), Ok(()));
        // two 2-way joins, then one extension
        assert_eq!(stats.cost_evaluations, 3);
        assert!(prim_from(&g, &m, &p, 7, &EnumOptions::default()).is_err());
    }

    #[test]
    fn single_edge() {
        let g = JoinGraph::new(
            vec![TableInfo::new("a", 5), TableInfo::new("b", 7)],
            vec![(0, 1, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.5]).unwrap();
        let p = CostModelParams::default();
        let (a, _) = prim(&g, &m, &p, &EnumOptions::default()).unwrap();
        let (b, _) = prim_from(&g, &m, &p, 0, &EnumOptions::default()).unwrap();
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.steps.len(), 1);
    }
}
