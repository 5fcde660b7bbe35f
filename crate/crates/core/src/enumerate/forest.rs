use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Algorithm, Coverage, Plan, PlanStep, TieBreak};
use crate::cost::{choose_operator, CardinalitySource, CostModelParams, JoinChoice, Subplan};
use crate::error::Result;
use crate::graph::{EdgeId, JoinGraph, VertexId};

/// Read-only inputs plus the coverage accumulated by one enumeration run.
pub(crate) struct Ctx<'a> {
    pub graph: &'a JoinGraph,
    pub source: &'a dyn CardinalitySource,
    pub params: CostModelParams,
    pub coverage: Coverage,
}

impl<'a> Ctx<'a> {
    pub fn new(graph: &'a JoinGraph, source: &'a dyn CardinalitySource, params: &CostModelParams) -> Self {
        Ctx {
            graph,
            source,
            params: *params,
            coverage: Coverage::default(),
        }
    }

    pub fn leaf(&self, v: VertexId) -> Subplan {
        Subplan::leaf(self.graph, v, &self.params)
    }

    pub fn evaluate(&mut self, left: &Subplan, right: &Subplan) -> Result<JoinChoice> {
        self.coverage.record(left.set, right.set);
        choose_operator(self.graph, self.source, left, right, &self.params)
    }
}

/// Secondary sort key for equal-cost candidates.
pub(crate) struct Ties(Option<ChaCha8Rng>);

impl Ties {
    pub fn new(tie_break: TieBreak) -> Self {
        match tie_break {
            TieBreak::Smallest => Ties(None),
            TieBreak::Random(seed) => Ties(Some(ChaCha8Rng::seed_from_u64(seed))),
        }
    }

    pub fn key(&mut self) -> u64 {
        self.0.as_mut().map_or(0, |r| r.next_u64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EdgeState {
    Open,
    Joined,
    Filter,
}

/// Disjoint components, each carrying its subplan. Roots are stamped with a
/// fresh generation on every merge so heap entries can detect staleness.
pub(crate) struct Forest {
    parent: Vec<VertexId>,
    subplan: Vec<Subplan>,
    stamp: Vec<u64>,
    next_stamp: u64,
    pub state: Vec<EdgeState>,
    pub steps: Vec<PlanStep>,
    components: usize,
}

impl Forest {
    pub fn new(ctx: &Ctx<'_>) -> Self {
        let n = ctx.graph.num_tables();
        Forest {
            parent: (0..n).collect(),
            subplan: (0..n).map(|v| ctx.leaf(v)).collect(),
            stamp: (0..n as u64).collect(),
            next_stamp: n as u64,
            state: vec![EdgeState::Open; ctx.graph.num_edges()],
            steps: Vec::with_capacity(n.saturating_sub(1)),
            components: n,
        }
    }

    pub fn find(&self, mut v: VertexId) -> VertexId {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }

    pub fn component(&self, v: VertexId) -> Subplan {
        self.subplan[self.find(v)]
    }

    pub fn stamp(&self, v: VertexId) -> u64 {
        self.stamp[self.find(v)]
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_open(&self, e: EdgeId) -> bool {
        self.state[e] == EdgeState::Open
    }

    pub fn filter(&mut self, e: EdgeId) {
        debug_assert_eq!(self.state[e], EdgeState::Open);
        self.state[e] = EdgeState::Filter;
    }

    /// Records `left ⋈ right` over `edge`, where `choice` was computed for
    /// exactly this argument order.
    pub fn join(&mut self, edge: EdgeId, left: Subplan, right: Subplan, choice: JoinChoice) -> Subplan {
        let (a, b) = (self.find_set(left), self.find_set(right));
        debug_assert_ne!(a, b);
        let merged = choice.subplan(&left, &right);
        let (root, child) = if a < b { (a, b) } else { (b, a) };
        self.parent[child] = root;
        self.subplan[root] = merged;
        self.stamp[root] = self.next_stamp;
        self.next_stamp += 1;
        self.components -= 1;
        self.state[edge] = EdgeState::Joined;
        self.steps.push(PlanStep {
            edge,
            left: left.set,
            right: right.set,
            operator: choice.operator,
            out_card: choice.out_card,
            step_cost: choice.step_cost,
            cost: choice.cost,
        });
        merged
    }

    fn find_set(&self, s: Subplan) -> VertexId {
        self.find(s.set.min().expect("non-empty component"))
    }

    /// Demotes every still-open edge to a filter and assembles the plan.
    pub fn finish(mut self, algorithm: Algorithm, ctx: &Ctx<'_>) -> Plan {
        debug_assert_eq!(self.components, 1);
        let mut filters = Vec::new();
        for (e, st) in self.state.iter_mut().enumerate() {
            if *st != EdgeState::Joined {
                *st = EdgeState::Filter;
                filters.push(e);
            }
        }
        Plan::assemble(algorithm, ctx.graph, &ctx.params, self.steps, filters)
    }
}

/// Costs of every edge as a 2-way join of its endpoint tables.
pub(crate) fn two_way_costs(ctx: &mut Ctx<'_>) -> Result<Vec<JoinChoice>> {
    let graph = ctx.graph;
    graph
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = (ctx.leaf(e.v1), ctx.leaf(e.v2));
            ctx.evaluate(&a, &b)
        })
        .collect()
}
