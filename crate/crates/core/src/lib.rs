//! Join-order planning over the spanning trees of a join graph.
//!
//! A query plan is an ordered sequence of join-graph edges that spans every
//! table. Edge weights are not static: the cost of appending an edge depends
//! on the subplans it connects, so the classic minimum-spanning-tree
//! algorithms are adapted to recompute weights as components grow.
//!
//! The crate provides
//! - [`graph`]: join graphs, JSON ingestion and synthetic topologies,
//! - [`cost`]: the main-memory cost model with hash / index nested-loop joins,
//! - [`enumerate`]: exhaustive DP, Prim, Kruskal, the ensemble (ESTE) and GOO,
//! - [`oracle`]: brute-force ordered spanning tree enumeration and counting,
//! - [`bench`]: workload runner, cost ratios and CSV output.

pub mod bench;
mod clock;
pub mod cost;
pub mod enumerate;
pub mod error;
pub mod graph;
pub mod oracle;
mod vertex_set;

pub use cost::{
    CardinalityCatalog, CardinalityKind, CardinalitySource, CostModelParams, JoinChoice,
    OperatorChoice, OperatorKind, SelectivityModel, Side, Statistics, Subplan,
};
pub use enumerate::{Algorithm, EnumOptions, EnumStats, Plan, PlanShape, PlanStep};
pub use error::{Error, Result};
pub use graph::{EdgeId, JoinEdge, JoinGraph, TableInfo, TopologyKind, VertexId};
pub use vertex_set::VertexSet;
