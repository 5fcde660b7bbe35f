//! Main-memory cost model.
//!
//! ```text
//! C(P) = τ·|R|                                    P = R or σ(R)
//!      = |P| + |P1| + C(P1) + C(P2)              P = P1 ⋈HJ P2, P1 builds
//!      = C(P1) + λ·|P1|·max(|P|/|P1|, 1)         P = P1 ⋈INL R, R indexed
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{JoinGraph, TableInfo};
use crate::vertex_set::VertexSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub tau: f64,
    pub lambda: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        CostModelParams {
            tau: 0.2,
            lambda: 2.0,
        }
    }
}

impl CostModelParams {
    pub fn new(tau: f64, lambda: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(tau) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        if !ok(lambda) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(CostModelParams { tau, lambda })
    }
}

pub fn leaf_cost(table: &TableInfo, params: &CostModelParams) -> f64 {
    params.tau * table.base_cardinality as f64
}

pub fn hash_join_cost(out_card: f64, build_card: f64, build_cost: f64, probe_cost: f64) -> f64 {
    out_card + build_card + build_cost + probe_cost
}

pub fn inl_join_cost(outer_card: f64, outer_cost: f64, join_out_card: f64, params: &CostModelParams) -> f64 {
    outer_cost + inl_lookup(outer_card, join_out_card, params)
}

fn inl_lookup(outer_card: f64, join_out_card: f64, params: &CostModelParams) -> f64 {
    if outer_card > 0.0 {
        params.lambda * outer_card * (join_out_card / outer_card).max(1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CardinalityKind {
    True,
    Estimated,
}

/// Row counts for a vertex subset.
pub trait CardinalitySource: Sync {
    fn cardinality(&self, set: VertexSet) -> Result<f64>;
}

/// Explicit subset → row count table.
#[derive(Debug, Clone, PartialEq)]
pub struct CardinalityCatalog {
    names: Vec<String>,
    entries: HashMap<VertexSet, f64>,
    pub kind: CardinalityKind,
}

impl CardinalityCatalog {
    /// A catalog holding only the singleton base cardinalities.
    pub fn new(graph: &JoinGraph, kind: CardinalityKind) -> Self {
        let entries = (0..graph.num_tables())
            .map(|v| (VertexSet::singleton(v), graph.table(v).base_cardinality as f64))
            .collect();
        CardinalityCatalog {
            names: graph.tables().iter().map(|t| t.name.clone()).collect(),
            entries,
            kind,
        }
    }

    pub fn insert(&mut self, set: VertexSet, rows: f64) -> Result<()> {
        if !(rows.is_finite() && rows >= 0.0) {
            return Err(Error::InvalidCardinality {
                name: self.describe(set),
                value: rows.to_string(),
            });
        }
        self.entries.insert(set, rows);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, set: VertexSet) -> Option<f64> {
        self.entries.get(&set).copied()
    }

    /// Materializes every connected subset from another source.
    pub fn materialize(graph: &JoinGraph, source: &dyn CardinalitySource, kind: CardinalityKind) -> Result<Self> {
        let mut catalog = CardinalityCatalog::new(graph, kind);
        for set in crate::graph::connected_subsets(graph, 2) {
            catalog.insert(set, source.cardinality(set)?)?;
        }
        Ok(catalog)
    }

    fn describe(&self, set: VertexSet) -> String {
        let mut names: Vec<&str> = set
            .iter()
            .map(|v| self.names.get(v).map(String::as_str).unwrap_or("?"))
            .collect();
        names.sort_unstable();
        format!("{{{}}}", names.join(","))
    }

    pub fn from_document(
        graph: &JoinGraph,
        doc: &BTreeMap<String, serde_json::Number>,
        kind: CardinalityKind,
    ) -> Result<Self> {
        let mut catalog = CardinalityCatalog::new(graph, kind);
        for (key, value) in doc {
            let mut set = VertexSet::empty();
            for name in key.split(',').map(str::trim) {
                let v = graph.vertex_by_name(name).ok_or_else(|| Error::UnknownTable {
                    name: name.to_string(),
                })?;
                set.insert(v);
            }
            let rows = value.as_f64().filter(|r| *r >= 0.0).ok_or_else(|| Error::InvalidCardinality {
                name: key.clone(),
                value: value.to_string(),
            })?;
            catalog.insert(set, rows)?;
        }
        Ok(catalog)
    }

    pub fn to_document(&self, graph: &JoinGraph) -> BTreeMap<String, serde_json::Number> {
        self.entries
            .iter()
            .filter(|(s, _)| s.len() >= 2)
            .map(|(&s, &rows)| (graph.subset_key(s), json_number(rows)))
            .collect()
    }
}

fn json_number(x: f64) -> serde_json::Number {
    if x.fract() == 0.0 && x >= 0.0 && x < 9.0e15 {
        serde_json::Number::from(x as u64)
    } else {
        serde_json::Number::from_f64(x).unwrap_or_else(|| serde_json::Number::from(0u64))
    }
}

impl CardinalitySource for CardinalityCatalog {
    fn cardinality(&self, set: VertexSet) -> Result<f64> {
        self.get(set).ok_or_else(|| Error::MissingCardinality {
            subset: self.describe(set),
        })
    }
}

/// Independence model: |S| = ⌈∏ base(v) · ∏ sel(e) over edges inside S⌉.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectivityModel {
    base: Vec<f64>,
    edges: Vec<(VertexSet, f64)>,
}

impl SelectivityModel {
    /// `selectivities[i]` belongs to edge id `i`.
    pub fn new(graph: &JoinGraph, selectivities: Vec<f64>) -> Result<Self> {
        if selectivities.len() != graph.num_edges() {
            return Err(Error::Malformed(format!(
                "expected {} selectivities, got {}",
                graph.num_edges(),
                selectivities.len()
            )));
        }
        for (e, &s) in graph.edges().iter().zip(&selectivities) {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::Malformed(format!(
                    "selectivity of {}-{} must lie in (0, 1], got {s}",
                    graph.table(e.v1).name,
                    graph.table(e.v2).name
                )));
            }
        }
        Ok(SelectivityModel {
            base: graph.tables().iter().map(|t| t.base_cardinality as f64).collect(),
            edges: graph.edges().iter().map(|e| e.endpoints()).zip(selectivities).collect(),
        })
    }

    pub fn selectivity(&self, edge: usize) -> f64 {
        self.edges[edge].1
    }

    /// The unrounded product.
    pub fn raw(&self, set: VertexSet) -> f64 {
        let mut rows: f64 = set.iter().map(|v| self.base[v]).product();
        for &(ends, sel) in &self.edges {
            if ends.is_subset(set) {
                rows *= sel;
            }
        }
        rows
    }

    pub fn from_document(graph: &JoinGraph, doc: &BTreeMap<String, f64>) -> Result<Self> {
        let mut sels = vec![None; graph.num_edges()];
        for (key, &sel) in doc {
            let names: Vec<&str> = key.split(',').map(str::trim).collect();
            let [a, b] = names[..] else {
                return Err(Error::Malformed(format!(
                    "selectivity key {key:?} must name two tables"
                )));
            };
            let lookup = |n: &str| {
                graph.vertex_by_name(n).ok_or_else(|| Error::UnknownTable { name: n.to_string() })
            };
            let set = VertexSet::singleton(lookup(a)?).union(VertexSet::singleton(lookup(b)?));
            let edge = graph
                .edges()
                .iter()
                .find(|e| e.endpoints() == set)
                .ok_or_else(|| Error::Malformed(format!("no join between {a} and {b}")))?;
            sels[edge.id] = Some(sel);
        }
        let sels = sels
            .into_iter()
            .enumerate()
            .map(|(id, s)| {
                s.ok_or_else(|| {
                    let e = graph.edge(id);
                    Error::Malformed(format!(
                        "missing selectivity for {}",
                        graph.subset_key(e.endpoints())
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SelectivityModel::new(graph, sels)
    }

    pub fn to_document(&self, graph: &JoinGraph) -> BTreeMap<String, f64> {
        self.edges
            .iter()
            .map(|&(ends, sel)| (graph.subset_key(ends), sel))
            .collect()
    }
}

impl CardinalitySource for SelectivityModel {
    fn cardinality(&self, set: VertexSet) -> Result<f64> {
        if set.is_empty() {
            return Ok(0.0);
        }
        // a positive product that underflows still describes a non-empty result
        Ok(self.raw(set).ceil().max(1.0))
    }
}

/// Statistics attached to a graph document.
#[derive(Debug, Clone, PartialEq)]
pub enum Statistics {
    Catalog(CardinalityCatalog),
    Selectivity(SelectivityModel),
}

impl CardinalitySource for Statistics {
    fn cardinality(&self, set: VertexSet) -> Result<f64> {
        match self {
            Statistics::Catalog(c) => c.cardinality(set),
            Statistics::Selectivity(m) => m.cardinality(set),
        }
    }
}

/// A costed subplan: its vertex set, output rows and cumulative cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subplan {
    pub set: VertexSet,
    pub card: f64,
    pub cost: f64,
}

impl Subplan {
    pub fn leaf(graph: &JoinGraph, v: usize, params: &CostModelParams) -> Self {
        let table = graph.table(v);
        Subplan {
            set: VertexSet::singleton(v),
            card: table.base_cardinality as f64,
            cost: leaf_cost(table, params),
        }
    }

    fn is_leaf(&self) -> bool {
        self.set.len() == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    #[serde(rename = "HJ")]
    HashJoin,
    #[serde(rename = "INL")]
    IndexNestedLoop,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::HashJoin => "HJ",
            OperatorKind::IndexNestedLoop => "INL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn pick<T>(self, left: T, right: T) -> (T, T) {
        match self {
            Side::Left => (left, right),
            Side::Right => (right, left),
        }
    }
}

/// Physical operator plus the child it designates: the hash build side for
/// HJ, the indexed inner table for INL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OperatorChoice {
    pub kind: OperatorKind,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JoinChoice {
    pub operator: OperatorChoice,
    pub out_card: f64,
    /// Cumulative cost of the joined subplan.
    pub cost: f64,
    /// Cost attributed to this join node: the operator term plus scans of
    /// leaf children it charges.
    pub step_cost: f64,
}

impl JoinChoice {
    pub fn subplan(&self, left: &Subplan, right: &Subplan) -> Subplan {
        Subplan {
            set: left.set.union(right.set),
            card: self.out_card,
            cost: self.cost,
        }
    }
}

fn charged(s: &Subplan) -> f64 {
    if s.is_leaf() {
        s.cost
    } else {
        0.0
    }
}

fn hash_join(left: &Subplan, right: &Subplan, out: f64) -> JoinChoice {
    // the smaller input builds; this also minimises the HJ formula
    let side = if left.card < right.card || (left.card == right.card && left.set < right.set) {
        Side::Left
    } else {
        Side::Right
    };
    let (build, probe) = side.pick(left, right);
    JoinChoice {
        operator: OperatorChoice {
            kind: OperatorKind::HashJoin,
            side,
        },
        out_card: out,
        cost: hash_join_cost(out, build.card, build.cost, probe.cost),
        step_cost: out + build.card + charged(build) + charged(probe),
    }
}

fn index_join(outer: &Subplan, out: f64, side: Side, params: &CostModelParams) -> JoinChoice {
    let lookup = inl_lookup(outer.card, out, params);
    JoinChoice {
        operator: OperatorChoice {
            kind: OperatorKind::IndexNestedLoop,
            side,
        },
        out_card: out,
        cost: inl_join_cost(outer.card, outer.cost, out, params),
        step_cost: lookup + charged(outer),
    }
}

fn inl_allowed(graph: &JoinGraph, inner: &Subplan) -> bool {
    inner.is_leaf() && inner.set.min().is_some_and(|v| graph.table(v).indexed)
}

/// Picks the cheapest operator for joining two subplans with `out` rows.
pub fn choose_with_card(
    graph: &JoinGraph,
    left: &Subplan,
    right: &Subplan,
    out: f64,
    params: &CostModelParams,
) -> JoinChoice {
    let mut best = hash_join(left, right, out);
    let mut inl: Option<JoinChoice> = None;
    for (inner, outer, side) in [(right, left, Side::Right), (left, right, Side::Left)] {
        if !inl_allowed(graph, inner) {
            continue;
        }
        let c = index_join(outer, out, side, params);
        let better = match &inl {
            None => true,
            Some(prev) => {
                let prev_inner = if prev.operator.side == Side::Left { left } else { right };
                c.cost < prev.cost || (c.cost == prev.cost && inner.set < prev_inner.set)
            }
        };
        if better {
            inl = Some(c);
        }
    }
    if let Some(c) = inl {
        if c.cost < best.cost {
            best = c;
        }
    }
    best
}

pub fn choose_operator(
    graph: &JoinGraph,
    source: &dyn CardinalitySource,
    left: &Subplan,
    right: &Subplan,
    params: &CostModelParams,
) -> Result<JoinChoice> {
    let out = source.cardinality(left.set.union(right.set))?;
    Ok(choose_with_card(graph, left, right, out, params))
}

/// Costs a fixed operator, e.g. to re-evaluate a plan under another catalog.
pub fn evaluate_operator(
    operator: OperatorChoice,
    left: &Subplan,
    right: &Subplan,
    out: f64,
    params: &CostModelParams,
) -> JoinChoice {
    match operator.kind {
        OperatorKind::HashJoin => {
            let (build, probe) = operator.side.pick(left, right);
            JoinChoice {
                operator,
                out_card: out,
                cost: hash_join_cost(out, build.card, build.cost, probe.cost),
                step_cost: out + build.card + charged(build) + charged(probe),
            }
        }
        OperatorKind::IndexNestedLoop => {
            let (_, outer) = operator.side.pick(left, right);
            index_join(outer, out, operator.side, params)
        }
    }
}

/// Short SI rendering, e.g. `1.6M`, `16K`.
pub fn si_display(x: f64) -> String {
    let units = [(1e12, "T"), (1e9, "G"), (1e6, "M"), (1e3, "K")];
    for (scale, suffix) in units {
        if x.abs() >= scale {
            let v = x / scale;
            return if v >= 100.0 {
                format!("{v:.0}{suffix}")
            } else {
                let s = format!("{v:.1}");
                format!("{}{suffix}", s.trim_end_matches(".0"))
            };
        }
    }
    let s = format!("{x:.1}");
    s.trim_end_matches(".0").to_string()
}
