//! Join graphs: tables as vertices, equi-join predicates as edges.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{CardinalityCatalog, CardinalityKind, SelectivityModel, Statistics};
use crate::error::{Error, Result};
use crate::vertex_set::VertexSet;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableInfo {
    pub name: String,
    #[serde(rename = "cardinality")]
    pub base_cardinality: u64,
    /// Carries selection predicates. A selected table is still scanned in full.
    #[serde(default)]
    pub selected: bool,
    /// Index on the join attributes, which makes the table eligible as an
    /// index nested-loop inner.
    #[serde(default)]
    pub indexed: bool,
}

impl TableInfo {
    pub fn new(name: impl Into<String>, base_cardinality: u64) -> Self {
        TableInfo {
            name: name.into(),
            base_cardinality,
            selected: false,
            indexed: false,
        }
    }

    pub fn indexed(mut self, indexed: bool) -> Self {
        self.indexed = indexed;
        self
    }

    pub fn selected(mut self, selected: bool) -> Self {
        self.selected = selected;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinEdge {
    pub id: EdgeId,
    pub v1: VertexId,
    pub v2: VertexId,
    pub predicate: String,
}

impl JoinEdge {
    pub fn endpoints(&self) -> VertexSet {
        VertexSet::singleton(self.v1).union(VertexSet::singleton(self.v2))
    }

    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.v1 {
            self.v2
        } else {
            self.v1
        }
    }

    /// True when exactly one endpoint lies in `a` and the other in `b`.
    pub fn crosses(&self, a: VertexSet, b: VertexSet) -> bool {
        (a.contains(self.v1) && b.contains(self.v2)) || (a.contains(self.v2) && b.contains(self.v1))
    }
}

/// An undirected, simple, connected join graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinGraph {
    tables: Vec<TableInfo>,
    edges: Vec<JoinEdge>,
    neighbors: Vec<VertexSet>,
}

impl JoinGraph {
    /// Builds and validates a graph from `(left, right, predicate)` triples
    /// over vertex ids. Parallel edges are merged, with predicates joined by
    /// `AND`; edge ids follow first appearance.
    pub fn new(tables: Vec<TableInfo>, joins: Vec<(VertexId, VertexId, String)>) -> Result<Self> {
        if tables.len() > VertexSet::MAX_VERTICES {
            return Err(Error::TooManyTables {
                tables: tables.len(),
                max: VertexSet::MAX_VERTICES,
            });
        }
        if tables.is_empty() {
            return Err(Error::Malformed("graph has no tables".into()));
        }
        let mut seen = HashMap::new();
        for (i, t) in tables.iter().enumerate() {
            if t.base_cardinality == 0 {
                return Err(Error::InvalidCardinality {
                    name: t.name.clone(),
                    value: "0".into(),
                });
            }
            if seen.insert(t.name.as_str(), i).is_some() {
                return Err(Error::DuplicateTable {
                    name: t.name.clone(),
                });
            }
        }

        let mut edges: Vec<JoinEdge> = Vec::new();
        let mut by_pair: HashMap<(VertexId, VertexId), EdgeId> = HashMap::new();
        for (v1, v2, predicate) in joins {
            for v in [v1, v2] {
                if v >= tables.len() {
                    return Err(Error::UnknownTable {
                        name: format!("#{v}"),
                    });
                }
            }
            if v1 == v2 {
                return Err(Error::SelfLoop {
                    table: tables[v1].name.clone(),
                });
            }
            let key = (v1.min(v2), v1.max(v2));
            match by_pair.get(&key) {
                Some(&id) => {
                    let edge = &mut edges[id];
                    if !predicate.is_empty() {
                        if edge.predicate.is_empty() {
                            edge.predicate = predicate;
                        } else {
                            edge.predicate = format!("{} AND {}", edge.predicate, predicate);
                        }
                    }
                }
                None => {
                    let id = edges.len();
                    by_pair.insert(key, id);
                    edges.push(JoinEdge {
                        id,
                        v1,
                        v2,
                        predicate,
                    });
                }
            }
        }

        let mut neighbors = vec![VertexSet::empty(); tables.len()];
        for e in &edges {
            neighbors[e.v1].insert(e.v2);
            neighbors[e.v2].insert(e.v1);
        }
        let graph = JoinGraph {
            tables,
            edges,
            neighbors,
        };
        let reach = graph.reachable_within(0, graph.all());
        if reach != graph.all() {
            let missing = graph.all().difference(reach).min().unwrap_or(0);
            return Err(Error::Disconnected {
                root: graph.tables[0].name.clone(),
                unreachable: graph.tables[missing].name.clone(),
            });
        }
        Ok(graph)
    }

    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn tables(&self) -> &[TableInfo] {
        &self.tables
    }

    pub fn table(&self, v: VertexId) -> &TableInfo {
        &self.tables[v]
    }

    pub fn edges(&self) -> &[JoinEdge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &JoinEdge {
        &self.edges[id]
    }

    pub fn all(&self) -> VertexSet {
        VertexSet::full(self.tables.len())
    }

    pub fn neighbors(&self, v: VertexId) -> VertexSet {
        self.neighbors[v]
    }

    /// Vertices adjacent to some member of `set`, excluding `set` itself.
    pub fn neighborhood(&self, set: VertexSet) -> VertexSet {
        set.iter()
            .fold(VertexSet::empty(), |acc, v| acc.union(self.neighbors[v]))
            .difference(set)
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.tables.iter().position(|t| t.name == name)
    }

    fn reachable_within(&self, start: VertexId, within: VertexSet) -> VertexSet {
        let mut seen = VertexSet::singleton(start);
        let mut frontier = seen;
        while !frontier.is_empty() {
            let next = frontier
                .iter()
                .fold(VertexSet::empty(), |acc, v| acc.union(self.neighbors[v]))
                .intersection(within)
                .difference(seen);
            seen = seen.union(next);
            frontier = next;
        }
        seen
    }

    /// Whether `set` induces a connected subgraph.
    pub fn is_connected(&self, set: VertexSet) -> bool {
        match set.min() {
            None => false,
            Some(v) => self.reachable_within(v, set) == set,
        }
    }

    /// Edge ids with one endpoint in `a` and the other in `b`, ascending.
    pub fn edges_between(&self, a: VertexSet, b: VertexSet) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().filter(move |e| e.crosses(a, b)).map(|e| e.id)
    }

    pub fn has_edge_between(&self, a: VertexSet, b: VertexSet) -> bool {
        !self.neighborhood(a).is_disjoint(b)
    }

    /// Sorted, comma-joined table names: the catalog key for `set`.
    pub fn subset_key(&self, set: VertexSet) -> String {
        let mut names: Vec<&str> = set.iter().map(|v| self.tables[v].name.as_str()).collect();
        names.sort_unstable();
        names.join(",")
    }

    pub fn subset_names(&self, set: VertexSet) -> String {
        format!("{{{}}}", self.subset_key(set))
    }

    /// Classifies the graph by edge count when it matches one of the
    /// canonical shapes exactly.
    pub fn topology(&self) -> Option<TopologyKind> {
        let n = self.num_tables();
        let m = self.num_edges();
        let degrees: Vec<usize> = self.neighbors.iter().map(|s| s.len()).collect();
        if n >= 2 && m == n * (n - 1) / 2 && n > 3 {
            return Some(TopologyKind::Clique);
        }
        if m == n && degrees.iter().all(|&d| d == 2) {
            return Some(TopologyKind::Cycle);
        }
        if m + 1 == n {
            if degrees.iter().all(|&d| d <= 2) {
                return Some(TopologyKind::Chain);
            }
            if degrees.iter().filter(|&&d| d == 1).count() == n - 1 {
                return Some(TopologyKind::Star);
            }
        }
        None
    }

    pub fn to_document(&self, statistics: Option<&Statistics>) -> GraphDocument {
        let mut doc = GraphDocument {
            tables: self.tables.clone(),
            joins: self
                .edges
                .iter()
                .map(|e| JoinDocument {
                    left: self.tables[e.v1].name.clone(),
                    right: self.tables[e.v2].name.clone(),
                    predicate: e.predicate.clone(),
                })
                .collect(),
            cardinalities: None,
            selectivities: None,
        };
        match statistics {
            Some(Statistics::Catalog(c)) => doc.cardinalities = Some(c.to_document(self)),
            Some(Statistics::Selectivity(m)) => doc.selectivities = Some(m.to_document(self)),
            None => {}
        }
        doc
    }

    pub fn to_json(&self, statistics: Option<&Statistics>) -> String {
        serde_json::to_string_pretty(&self.to_document(statistics))
            .expect("graph documents always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinDocument {
    pub left: String,
    pub right: String,
    #[serde(default)]
    pub predicate: String,
}

/// On-disk join graph with optional statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub tables: Vec<TableInfo>,
    pub joins: Vec<JoinDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinalities: Option<BTreeMap<String, serde_json::Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selectivities: Option<BTreeMap<String, f64>>,
}

impl GraphDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn graph(&self) -> Result<JoinGraph> {
        let index: HashMap<&str, VertexId> = self
            .tables
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.as_str(), i))
            .collect();
        let lookup = |name: &str| {
            index.get(name).copied().ok_or_else(|| Error::UnknownTable {
                name: name.to_string(),
            })
        };
        let mut joins = Vec::with_capacity(self.joins.len());
        for j in &self.joins {
            joins.push((lookup(&j.left)?, lookup(&j.right)?, j.predicate.clone()));
        }
        JoinGraph::new(self.tables.clone(), joins)
    }

    /// Statistics embedded in the document, if any.
    pub fn statistics(&self, graph: &JoinGraph, kind: CardinalityKind) -> Result<Option<Statistics>> {
        match (&self.cardinalities, &self.selectivities) {
            (Some(_), Some(_)) => Err(Error::Malformed(
                "cardinalities and selectivities are mutually exclusive".into(),
            )),
            (Some(c), None) => Ok(Some(Statistics::Catalog(CardinalityCatalog::from_document(
                graph, c, kind,
            )?))),
            (None, Some(s)) => Ok(Some(Statistics::Selectivity(SelectivityModel::from_document(
                graph, s,
            )?))),
            (None, None) => Ok(None),
        }
    }
}

/// Parses and validates a join graph document, ignoring any statistics.
pub fn parse_join_graph(document: &str) -> Result<JoinGraph> {
    GraphDocument::parse(document)?.graph()
}

/// Parses a standalone statistics file for `graph`: a full graph document,
/// an object with a `cardinalities` or `selectivities` section, or a bare
/// subset-key → rows map.
pub fn parse_statistics(graph: &JoinGraph, text: &str, kind: CardinalityKind) -> Result<Statistics> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Malformed("statistics file must hold a JSON object".into()))?;
    if let Some(sel) = obj.get("selectivities") {
        let map: BTreeMap<String, f64> = serde_json::from_value(sel.clone())?;
        return Ok(Statistics::Selectivity(SelectivityModel::from_document(graph, &map)?));
    }
    let section = obj.get("cardinalities").unwrap_or(&value);
    let map: BTreeMap<String, serde_json::Number> = serde_json::from_value(section.clone())?;
    Ok(Statistics::Catalog(CardinalityCatalog::from_document(graph, &map, kind)?))
}

/// Parses a graph document together with its embedded statistics.
pub fn parse_graph_with_statistics(
    document: &str,
    kind: CardinalityKind,
) -> Result<(JoinGraph, Option<Statistics>)> {
    let doc = GraphDocument::parse(document)?;
    let graph = doc.graph()?;
    let stats = doc.statistics(&graph, kind)?;
    Ok((graph, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Chain,
    Cycle,
    Star,
    Clique,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 4] = [
        TopologyKind::Chain,
        TopologyKind::Cycle,
        TopologyKind::Star,
        TopologyKind::Clique,
    ];

    pub fn edge_count(self, n: usize) -> usize {
        match self {
            TopologyKind::Chain | TopologyKind::Star => n.saturating_sub(1),
            // a 2-cycle collapses onto a single edge
            TopologyKind::Cycle if n == 2 => 1,
            TopologyKind::Cycle => n,
            TopologyKind::Clique => n * n.saturating_sub(1) / 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Chain => "chain",
            TopologyKind::Cycle => "cycle",
            TopologyKind::Star => "star",
            TopologyKind::Clique => "clique",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(TopologyKind::Chain),
            "cycle" => Ok(TopologyKind::Cycle),
            "star" => Ok(TopologyKind::Star),
            "clique" => Ok(TopologyKind::Clique),
            other => Err(Error::InvalidArgument(format!("unknown topology {other:?}"))),
        }
    }
}

/// Value ranges for synthetic workloads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub min_cardinality: u64,
    pub max_cardinality: u64,
    pub min_selectivity: f64,
    pub max_selectivity: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            min_cardinality: 1_000,
            max_cardinality: 1_000_000,
            min_selectivity: 1e-5,
            max_selectivity: 1e-1,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.min_cardinality == 0 || self.min_cardinality > self.max_cardinality {
            return Err(Error::InvalidArgument(format!(
                "cardinality range [{}, {}] is invalid",
                self.min_cardinality, self.max_cardinality
            )));
        }
        let ok = self.min_selectivity > 0.0
            && self.max_selectivity <= 1.0
            && self.min_selectivity <= self.max_selectivity;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "selectivity range [{}, {}] is invalid",
                self.min_selectivity, self.max_selectivity
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize, joins: &[(VertexId, VertexId)]) -> (Vec<u64>, Vec<f64>) {
        let cards = (0..n)
            .map(|_| rng.gen_range(self.min_cardinality..=self.max_cardinality))
            .collect();
        let (lo, hi) = (self.min_selectivity.log10(), self.max_selectivity.log10());
        let sels = joins
            .iter()
            .map(|_| {
                if hi > lo {
                    10f64.powf(rng.gen_range(lo..hi))
                } else {
                    self.min_selectivity
                }
            })
            .collect();
        (cards, sels)
    }
}

fn synthetic_graph(
    n: usize,
    joins: Vec<(VertexId, VertexId)>,
    rng: &mut ChaCha8Rng,
    config: &GenConfig,
) -> Result<(JoinGraph, SelectivityModel)> {
    let (cards, sels) = config.draw(rng, n, &joins);
    let tables = cards
        .iter()
        .enumerate()
        .map(|(i, &c)| TableInfo::new(format!("t{i}"), c).indexed(true))
        .collect();
    let graph = JoinGraph::new(
        tables,
        joins
            .iter()
            .map(|&(a, b)| (a, b, format!("t{a}.k{b} = t{b}.k{a}")))
            .collect(),
    )?;
    let model = SelectivityModel::new(&graph, sels)?;
    Ok((graph, model))
}

/// Generates a synthetic chain, cycle, star or clique over `n` tables.
/// Deterministic in `(kind, n, seed, config)`.
pub fn gen_topology(
    kind: TopologyKind,
    n: usize,
    seed: u64,
    config: &GenConfig,
) -> Result<(JoinGraph, SelectivityModel)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a topology needs at least 2 tables, got {n}"
        )));
    }
    if n > VertexSet::MAX_VERTICES {
        return Err(Error::TooManyTables {
            tables: n,
            max: VertexSet::MAX_VERTICES,
        });
    }
    config.validate()?;
    let joins: Vec<(VertexId, VertexId)> = match kind {
        TopologyKind::Chain => (1..n).map(|i| (i - 1, i)).collect(),
        TopologyKind::Cycle => {
            let mut j: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            if n > 2 {
                j.push((n - 1, 0));
            }
            j
        }
        TopologyKind::Star => (1..n).map(|i| (0, i)).collect(),
        TopologyKind::Clique => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthetic_graph(n, joins, &mut rng, config)
}

/// A random connected graph: a random spanning tree plus each remaining
/// vertex pair with probability `density`.
pub fn gen_random_connected(
    n: usize,
    density: f64,
    seed: u64,
    config: &GenConfig,
) -> Result<(JoinGraph, SelectivityModel)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a graph needs at least 2 tables, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density {density} not in [0, 1]")));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut joins = Vec::new();
    let mut present = vec![vec![false; n]; n];
    for v in 1..n {
        let u = rng.gen_range(0..v);
        joins.push((u, v));
        present[u][v] = true;
    }
    for u in 0..n {
        for v in u + 1..n {
            if !present[u][v] && rng.gen_bool(density) {
                joins.push((u, v));
            }
        }
    }
    synthetic_graph(n, joins, &mut rng, config)
}

/// All vertex subsets of size `>= min_size` inducing a connected subgraph,
/// in ascending canonical order.
///
/// Uses the csg enumeration of DPccp: each connected subset is emitted once
/// from its lowest vertex, growing only through higher-numbered neighbours.
pub fn connected_subsets(graph: &JoinGraph, min_size: usize) -> Vec<VertexSet> {
    let mut out = Vec::new();
    for v in (0..graph.num_tables()).rev() {
        let start = VertexSet::singleton(v);
        // vertices below v are excluded, as is v itself
        let excluded = VertexSet(start.bits() | (start.bits() - 1));
        out.push(start);
        expand(graph, start, excluded, &mut out);
    }
    out.retain(|s| s.len() >= min_size.max(1));
    out.sort_unstable();
    out
}

fn expand(graph: &JoinGraph, set: VertexSet, excluded: VertexSet, out: &mut Vec<VertexSet>) {
    let frontier = graph.neighborhood(set).difference(excluded);
    if frontier.is_empty() {
        return;
    }
    // every non-empty subset of the frontier extends `set`
    let bits = frontier.bits();
    let mut sub = bits;
    while sub != 0 {
        out.push(set.union(VertexSet(sub)));
        sub = (sub - 1) & bits;
    }
    let mut sub = bits;
    while sub != 0 {
        expand(graph, set.union(VertexSet(sub)), excluded.union(frontier), out);
        sub = (sub - 1) & bits;
    }
}
