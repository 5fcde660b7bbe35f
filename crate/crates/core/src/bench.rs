//! Workload runner: cost ratios against the exhaustive optimum, timings,
//! complexity groups and topology sweeps, with CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::{Deadline, Stopwatch};
use crate::cost::{CardinalitySource, CostModelParams, Statistics};
use crate::enumerate::{optimize, Algorithm, EnumOptions, Outcome};
use crate::error::{Error, Result};
use crate::graph::{gen_topology, GenConfig, JoinGraph, TopologyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityGroup {
    Simple,
    Moderate,
    Complex,
}

impl ComplexityGroup {
    /// Simple below 10 joins, moderate below 20, complex otherwise.
    pub fn of(graph: &JoinGraph) -> Self {
        match graph.num_edges() {
            0..=9 => ComplexityGroup::Simple,
            10..=19 => ComplexityGroup::Moderate,
            _ => ComplexityGroup::Complex,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ComplexityGroup::Simple => "simple",
            ComplexityGroup::Moderate => "moderate",
            ComplexityGroup::Complex => "complex",
        }
    }
}

impl fmt::Display for ComplexityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComplexityGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(ComplexityGroup::Simple),
            "moderate" => Ok(ComplexityGroup::Moderate),
            "complex" => Ok(ComplexityGroup::Complex),
            other => Err(Error::InvalidArgument(format!("unknown group {other:?}"))),
        }
    }
}

/// One benchmark query. Plans are chosen under `selection` and, when
/// `evaluation` is present, re-costed under it.
#[derive(Debug, Clone)]
pub struct Query {
    pub id: String,
    pub graph: JoinGraph,
    pub selection: Statistics,
    pub evaluation: Option<Statistics>,
    pub topology: Option<TopologyKind>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub params: CostModelParams,
    pub options: EnumOptions,
    /// Budget for the exhaustive baseline of each query.
    pub timeout: Option<Duration>,
    /// Queries run concurrently; 1 runs inline.
    pub jobs: usize,
    /// Zero all timings so output is byte-reproducible.
    pub record_timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            params: CostModelParams::default(),
            options: EnumOptions::default(),
            timeout: Some(Duration::from_secs(60)),
            jobs: 1,
            record_timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub query_id: String,
    pub group: ComplexityGroup,
    pub algorithm: Algorithm,
    pub internal_cost: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub opt_time_ms: f64,
    pub distinct_plans: Option<usize>,
    pub topology: Option<TopologyKind>,
    pub n_tables: usize,
    pub seed: Option<u64>,
    pub error: Option<String>,
}

/// Runs every algorithm on every query. Per-query failures land in the
/// record's `error`; the workload itself only fails on bad configuration.
pub fn run_workload(queries: &[Query], algorithms: &[Algorithm], config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let run = |q: &Query| run_query(q, algorithms, config);
    let mut records: Vec<BenchRecord> = if config.jobs <= 1 {
        queries.iter().flat_map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| queries.par_iter().map(run).collect::<Vec<_>>())
            .into_iter()
            .flatten()
            .collect()
    };
    records.sort_by(|a, b| a.query_id.cmp(&b.query_id).then(a.algorithm.cmp(&b.algorithm)));
    Ok(records)
}

fn run_query(q: &Query, algorithms: &[Algorithm], config: &BenchConfig) -> Vec<BenchRecord> {
    let evaluation: &dyn CardinalitySource = q.evaluation.as_ref().unwrap_or(&q.selection);
    let evaluate = |alg: Algorithm| -> (Result<(Outcome, f64)>, f64) {
        let mut options = config.options;
        options.parallelism = 1;
        if alg == Algorithm::Exhaustive {
            options.deadline = config.timeout.map_or(Deadline::none(), Deadline::after);
        }
        let clock = Stopwatch::start();
        let outcome = optimize(alg, &q.graph, &q.selection, &config.params, &options);
        let ms = if config.record_timing {
            clock.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let costed = outcome.and_then(|o| {
            let cost = o.plan.recost(&q.graph, evaluation, &config.params)?.internal_cost;
            Ok((o, cost))
        });
        (costed, ms)
    };

    let baseline = algorithms
        .contains(&Algorithm::Exhaustive)
        .then(|| evaluate(Algorithm::Exhaustive));
    let optimum = match &baseline {
        Some((Ok((_, c)), _)) => Some(*c),
        _ => None,
    };

    algorithms
        .iter()
        .map(|&alg| {
            let fresh;
            let (result, ms) = if alg == Algorithm::Exhaustive {
                baseline.as_ref().expect("computed above")
            } else {
                fresh = evaluate(alg);
                &fresh
            };
            let mut record = BenchRecord {
                query_id: q.id.clone(),
                group: ComplexityGroup::of(&q.graph),
                algorithm: alg,
                internal_cost: None,
                cost_ratio: None,
                opt_time_ms: *ms,
                distinct_plans: None,
                topology: q.topology,
                n_tables: q.graph.num_tables(),
                seed: q.seed,
                error: None,
            };
            match result {
                Ok((outcome, cost)) => {
                    record.internal_cost = Some(*cost);
                    record.distinct_plans = outcome.distinct_plans;
                    record.cost_ratio = optimum.filter(|o| *o > 0.0).map(|o| cost / o);
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            record
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `None` for the overall total.
    pub group: Option<ComplexityGroup>,
    pub algorithm: Algorithm,
    pub queries: usize,
    /// Sum of algorithm costs over sum of exhaustive costs, over queries
    /// with a successful baseline.
    pub cost_ratio: Option<f64>,
    pub opt_time_ms: f64,
}

/// Per-group and overall workload ratios and summed optimization times.
pub fn aggregate(records: &[BenchRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to aggregate".into()));
    }
    let optimum: BTreeMap<&str, f64> = records
        .iter()
        .filter(|r| r.algorithm == Algorithm::Exhaustive && r.error.is_none())
        .filter_map(|r| r.internal_cost.map(|c| (r.query_id.as_str(), c)))
        .collect();

    #[derive(Default)]
    struct Acc {
        queries: usize,
        cost: f64,
        best: f64,
        time: f64,
    }
    let mut acc: BTreeMap<(Option<ComplexityGroup>, Algorithm), Acc> = BTreeMap::new();
    let mut sorted: Vec<&BenchRecord> = records.iter().collect();
    // fixed summation order keeps the totals permutation-invariant
    sorted.sort_by(|a, b| a.query_id.cmp(&b.query_id).then(a.algorithm.cmp(&b.algorithm)));
    for r in sorted {
        for group in [Some(r.group), None] {
            let a = acc.entry((group, r.algorithm)).or_default();
            a.queries += 1;
            a.time += r.opt_time_ms;
            if let (Some(c), Some(o)) = (r.internal_cost, optimum.get(r.query_id.as_str())) {
                a.cost += c;
                a.best += o;
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|((group, algorithm), a)| SummaryRow {
            group,
            algorithm,
            queries: a.queries,
            cost_ratio: (a.best > 0.0).then(|| a.cost / a.best),
            opt_time_ms: a.time,
        })
        .collect())
}

/// Generates `kind` graphs for every size and seed, then runs the workload.
pub fn topology_sweep(
    kind: TopologyKind,
    sizes: &[usize],
    seeds: &[u64],
    algorithms: &[Algorithm],
    gen: &GenConfig,
    config: &BenchConfig,
) -> Result<Vec<BenchRecord>> {
    let mut queries = Vec::with_capacity(sizes.len() * seeds.len());
    for &n in sizes {
        for &seed in seeds {
            let (graph, model) = gen_topology(kind, n, seed, gen)?;
            queries.push(Query {
                id: format!("{kind}-n{n:02}-s{seed:04}"),
                graph,
                selection: Statistics::Selectivity(model),
                evaluation: None,
                topology: Some(kind),
                seed: Some(seed),
            });
        }
    }
    run_workload(&queries, algorithms, config)
}

pub const CSV_HEADER: [&str; 11] = [
    "query_id",
    "group",
    "algorithm",
    "internal_cost",
    "cost_ratio",
    "opt_time_ms",
    "distinct_plans",
    "topology",
    "n_tables",
    "seed",
    "error",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, ToString::to_string)
}

pub fn write_csv<W: io::Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.query_id.clone(),
            r.group.to_string(),
            r.algorithm.to_string(),
            opt(&r.internal_cost),
            opt(&r.cost_ratio),
            r.opt_time_ms.to_string(),
            opt(&r.distinct_plans),
            opt(&r.topology),
            r.n_tables.to_string(),
            opt(&r.seed),
            opt(&r.error),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Csv(format!("unexpected header {:?}", header)));
    }
    fn field<T: FromStr>(s: &str, name: &str) -> Result<Option<T>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| Error::Csv(format!("bad {name} {s:?}")))
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("");
        let required = |i: usize| -> Result<&str> {
            let s = get(i);
            if s.is_empty() {
                Err(Error::Csv(format!("missing {}", CSV_HEADER[i])))
            } else {
                Ok(s)
            }
        };
        out.push(BenchRecord {
            query_id: get(0).to_string(),
            group: required(1)?.parse()?,
            algorithm: required(2)?.parse()?,
            internal_cost: field(get(3), "internal_cost")?,
            cost_ratio: field(get(4), "cost_ratio")?,
            opt_time_ms: field(required(5)?, "opt_time_ms")?.unwrap_or(0.0),
            distinct_plans: field(get(6), "distinct_plans")?,
            topology: field(get(7), "topology")?,
            n_tables: field(required(8)?, "n_tables")?.unwrap_or(0),
            seed: field(get(9), "seed")?,
            error: (!get(10).is_empty()).then(|| get(10).to_string()),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, alg: Algorithm, cost: f64) -> BenchRecord {
        BenchRecord {
            query_id: id.into(),
            group: ComplexityGroup::Simple,
            algorithm: alg,
            internal_cost: Some(cost),
            cost_ratio: None,
            opt_time_ms: 1.0,
            distinct_plans: None,
            topology: None,
            n_tables: 3,
            seed: None,
            error: None,
        }
    }

    #[test]
    fn workload_ratio_is_sum_ratio() {
        let rs = vec![
            record("a", Algorithm::Exhaustive, 10.0),
            record("a", Algorithm::Prim, 10.0),
            record("b", Algorithm::Exhaustive, 10.0),
            record("b", Algorithm::Prim, 30.0),
        ];
        let summary = aggregate(&rs).unwrap();
        let prim = summary
            .iter()
            .find(|s| s.group.is_none() && s.algorithm == Algorithm::Prim)
            .unwrap();
        assert_eq!(prim.cost_ratio, Some(2.0));
        assert_eq!(prim.queries, 2);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn single_record_summary() {
        let summary = aggregate(&[record("q", Algorithm::Exhaustive, 5.0)]).unwrap();
        assert_eq!(summary.len(), 2);
        assert!(summary.iter().all(|s| s.cost_ratio == Some(1.0) && s.opt_time_ms == 1.0));
    }

    #[test]
    fn csv_round_trip() {
        let mut r = record("x,\"y\"", Algorithm::Este, 1.5);
        r.distinct_plans = Some(4);
        r.topology = Some(TopologyKind::Star);
        r.seed = Some(9);
        r.error = Some("boom, twice".into());
        let rs = vec![r, record("z", Algorithm::Goo, 0.1 + 0.2)];
        let mut buf = Vec::new();
        write_csv(&rs, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rs);
    }

    #[test]
    fn groups_by_edge_count() {
        let cfg = GenConfig::default();
        let g = |k, n| gen_topology(k, n, 0, &cfg).unwrap().0;
        assert_eq!(ComplexityGroup::of(&g(TopologyKind::Chain, 5)), ComplexityGroup::Simple);
        assert_eq!(ComplexityGroup::of(&g(TopologyKind::Clique, 5)), ComplexityGroup::Moderate);
        assert_eq!(ComplexityGroup::of(&g(TopologyKind::Clique, 7)), ComplexityGroup::Complex);
    }
}
