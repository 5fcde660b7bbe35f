use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::forest::{two_way_costs, Ctx, Forest, Ties};
use super::{Algorithm, EnumOptions, EnumStats, Plan};
use crate::clock::Stopwatch;
use crate::cost::{CardinalitySource, CostModelParams, JoinChoice, Subplan};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, JoinGraph};

/// Kruskal with the cheapest 2-way join extracted first.
pub fn kruskal(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    params: &CostModelParams,
    options: &EnumOptions,
) -> Result<(Plan, EnumStats)> {
    timed(graph, source, params, None, options)
}

/// Kruskal whose first extraction is forced to `start`.
pub fn kruskal_from(
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

/// A candidate join, valid while both endpoint components keep the
/// generation stamps it was costed against.
struct Entry {
    cost: f64,
    key: u64,
    edge: EdgeId,
    stamps: (u64, u64),
    left: Subplan,
    right: Subplan,
    choice: JoinChoice,
}

impl Entry {
    fn order(&self) -> (f64, u64, EdgeId) {
        (self.cost, self.key, self.edge)
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.order(), other.order());
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(self.stamps.cmp(&other.stamps))
    }
}

pub(crate) fn run(ctx: &mut Ctx<'_>, start: Option<EdgeId>, options: &EnumOptions) -> Result<Plan> {
    let graph = ctx.graph;
    let mut forest = Forest::new(ctx);
    if graph.num_edges() == 0 {
        return Ok(forest.finish(Algorithm::Kruskal, ctx));
    }
    let mut ties = Ties::new(options.tie_break);
    let mut heap = BinaryHeap::new();
    let two_way = two_way_costs(ctx)?;
    for (e, choice) in graph.edges().iter().zip(&two_way) {
        heap.push(Reverse(Entry {
            cost: choice.step_cost,
            key: ties.key(),
            edge: e.id,
            stamps: (forest.stamp(e.v1), forest.stamp(e.v2)),
            left: ctx.leaf(e.v1),
            right: ctx.leaf(e.v2),
            choice: *choice,
        }));
    }

    if let Some(s) = start {
        let e = graph.edge(s);
        let merged = forest.join(s, ctx.leaf(e.v1), ctx.leaf(e.v2), two_way[s]);
        refresh(ctx, &mut forest, &mut heap, &mut ties, merged)?;
    }

    while let Some(Reverse(entry)) = heap.pop() {
        if forest.components() == 1 {
            break;
        }
        if !forest.is_open(entry.edge) {
            continue;
        }
        let e = graph.edge(entry.edge);
        let (r1, r2) = (forest.find(e.v1), forest.find(e.v2));
        if r1 == r2 {
            forest.filter(entry.edge);
            continue;
        }
        if (forest.stamp(e.v1), forest.stamp(e.v2)) != entry.stamps {
            continue;
        }
        let merged = forest.join(entry.edge, entry.left, entry.right, entry.choice);
        refresh(ctx, &mut forest, &mut heap, &mut ties, merged)?;
    }
    Ok(forest.finish(Algorithm::Kruskal, ctx))
}

/// Re-costs every open edge leaving the freshly merged component.
fn refresh(
    ctx: &mut Ctx<'_>,
    forest: &mut Forest,
    heap: &mut BinaryHeap<Reverse<Entry>>,
    ties: &mut Ties,
    merged: Subplan,
) -> Result<()> {
    let graph = ctx.graph;
    for e in graph.edges() {
        if !forest.is_open(e.id) || merged.set.contains(e.v1) == merged.set.contains(e.v2) {
            continue;
        }
        let (left, right) = (forest.component(e.v1), forest.component(e.v2));
        let choice = ctx.evaluate(&left, &right)?;
        heap.push(Reverse(Entry {
            cost: choice.step_cost,
            key: ties.key(),
            edge: e.id,
            stamps: (forest.stamp(e.v1), forest.stamp(e.v2)),
            left,
            right,
            choice,
        }));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::SelectivityModel;
    use crate::enumerate::{prim_from, validate_plan};
    use crate::graph::TableInfo;

    #[test]
    fn triangle_demotes_one_edge() {
        let g = JoinGraph::new(
            (0..3).map(|i| TableInfo::new(format!("r{i}"), 500)).collect(),
            vec![(0, 1, String::new()), (1, 2, String::new()), (2, 0, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.01; 3]).unwrap();
        let p = CostModelParams::default();
        let (plan, _) = kruskal(&g, &m, &p, &EnumOptions::default()).unwrap();
        assert_eq!(plan.filters.len(), 1);
        assert_eq!(plan.steps.len(), 2);
        // all ties resolve to the smallest ids
        assert_eq!(plan.steps[0].edge, 0);
        assert_eq!(plan.filters, vec![2]);
        assert_eq!(validate_plan(&g, &plan), Ok(()));
    }

    #[test]
    fn two_tables_match_prim() {
        let g = JoinGraph::new(
            vec![TableInfo::new("a", 5).indexed(true), TableInfo::new("b", 7)],
            vec![(0, 1, String::new())],
        )
        .unwrap();
        let m = SelectivityModel::new(&g, vec![0.5]).unwrap();
        let p = CostModelParams::default();
        let opts = EnumOptions::default();
        let (k, _) = kruskal_from(&g, &m, &p, 0, &opts).unwrap();
        let (pr, _) = prim_from(&g, &m, &p, 0, &opts).unwrap();
        assert_eq!(k.steps, pr.steps);
    }
}
