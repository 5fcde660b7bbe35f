use std::collections::BTreeSet;

use rayon::prelude::*;

use super::forest::Ctx;
use super::{kruskal, prim, Algorithm, Coverage, EnumOptions, EnumStats, Plan, TieBreak};
use crate::clock::Stopwatch;
use crate::cost::{CardinalitySource, CostModelParams};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, JoinGraph};

/// Ensemble of Prim and Kruskal runs seeded from every edge; keeps the
/// cheapest plan. Returns the number of distinct member plans as well.
pub fn este(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    options: &EnumOptions,
) -> Result<(Plan, EnumStats, usize)> {
    let clock = Stopwatch::start();
    if graph.num_edges() == 0 {
        let mut ctx = Ctx::new(graph, source, params);
        let mut plan = prim::run(&mut ctx, None, options)?;
        plan.algorithm = Algorithm::Este;
        return Ok((plan, ctx.coverage.stats(1, clock.elapsed()), 1));
    }
    let tasks: Vec<(EdgeId, bool)> = (0..graph.num_edges())
        .flat_map(|e| [(e, true), (e, false)])
        .collect();

    let member = |i: usize, &(edge, is_prim): &(EdgeId, bool)| -> Result<(Plan, Coverage)> {
        let opts = EnumOptions {
            tie_break: match options.tie_break {
                TieBreak::Smallest => TieBreak::Smallest,
                TieBreak::Random(seed) => TieBreak::Random(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
            },
            ..*options
        };
        let mut ctx = Ctx::new(graph, source, params);
        let plan = if is_prim {
            prim::run(&mut ctx, Some(edge), &opts)?
        } else {
            kruskal::run(&mut ctx, Some(edge), &opts)?
        };
        Ok((plan, ctx.coverage))
    };

    let results: Vec<Result<(Plan, Coverage)>> = if options.parallelism <= 1 {
        tasks.iter().enumerate().map(|(i, t)| member(i, t)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallelism)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().enumerate().map(|(i, t)| member(i, t)).collect())
    };

    let mut coverage = Coverage::default();
    let mut encodings = BTreeSet::new();
    let mut best: Option<(Plan, String)> = None;
    for r in results {
        let (plan, cov) = r?;
        coverage.absorb(cov);
        let enc = plan.canonical_encoding();
        encodings.insert(enc.clone());
        let better = best.as_ref().map_or(true, |(b, be)| {
            plan.internal_cost
                .total_cmp(&b.internal_cost)
                .then_with(|| enc.cmp(be))
                .is_lt()
        });
        if better {
            best = Some((plan, enc));
        }
    }
    let (mut plan, _) = best.expect("at least one member run");
    plan.algorithm = Algorithm::Este;
    let distinct = encodings.len();
    Ok((plan, coverage.stats(distinct, clock.elapsed()), distinct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::SelectivityModel;
    use crate::graph::TableInfo;

    #[test]
    fn single_edge_has_one_plan() {
        let g = JoinGraph::new(
            vec![TableInfo::new("a", 10), TableInfo::new("b", 20)],
            vec![(0, 1, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.1]).unwrap();
        let (_, _, distinct) = este(&g, &m, &CostModelParams::default(), &EnumOptions::default()).unwrap();
        assert_eq!(distinct, 1);
    }

    #[test]
    fn parallel_matches_sequential() {
        let (g, m) = crate::graph::gen_topology(
            crate::graph::TopologyKind::Clique,
            6,
            11,
            &crate::graph::GenConfig::default(),
        )
        .unwrap();
        let p = CostModelParams::default();
        let seq = este(&g, &m, &p, &EnumOptions::default()).unwrap();
        let par = este(&g, &m, &p, &EnumOptions { parallelism: 4, ..EnumOptions::default() }).unwrap();
        assert_eq!(seq.0, par.0);
        assert_eq!(seq.2, par.2);
        assert_eq!(seq.1.join_costs_computed, par.1.join_costs_computed);
        assert_eq!(seq.1.cost_evaluations, par.1.cost_evaluations);
    }
}
