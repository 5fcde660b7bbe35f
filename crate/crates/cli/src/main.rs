use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spanplan::bench::{self, BenchConfig, Query};
use spanplan::cost::{CardinalityKind, Statistics};
use spanplan::enumerate::{optimize, Algorithm, Deadline, EnumOptions, TieBreak};
use spanplan::graph::{self, gen_topology, GenConfig, JoinGraph, TopologyKind};
use spanplan::oracle::{self, binary_tree_space_size, DEFAULT_ARRANGEMENT_LIMIT};
use spanplan::{CostModelParams, Error};

#[derive(Parser)]
#[command(name = "spanplan", version, about = "Join-order planning over join-graph spanning trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one query and print its plan as JSON.
    Optimize(OptimizeArgs),
    /// Count ordered spanning trees and search-space sizes.
    Count(CountArgs),
    /// Generate a synthetic join graph.
    Gen(GenArgs),
    /// Run a workload and write per-query CSV records.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Exhaustive,
    Prim,
    Kruskal,
    Goo,
    Este,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Exhaustive => Algorithm::Exhaustive,
            Algo::Prim => Algorithm::Prim,
            Algo::Kruskal => Algorithm::Kruskal,
            Algo::Goo => Algorithm::Goo,
            Algo::Este => Algorithm::Este,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Topology {
    Chain,
    Cycle,
    Star,
    Clique,
}

impl From<Topology> for TopologyKind {
    fn from(t: Topology) -> Self {
        match t {
            Topology::Chain => TopologyKind::Chain,
            Topology::Cycle => TopologyKind::Cycle,
            Topology::Star => TopologyKind::Star,
            Topology::Clique => TopologyKind::Clique,
        }
    }
}

#[derive(Args)]
struct CostArgs {
    /// Scan discount factor.
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    /// Index lookup factor.
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
}

impl CostArgs {
    fn params(&self) -> Result<CostModelParams, Error> {
        CostModelParams::new(self.tau, self.lambda)
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value = "este")]
    algo: Algo,
    /// Catalog used to pick the plan; defaults to the graph's own statistics.
    #[arg(long)]
    selection_catalog: Option<PathBuf>,
    /// Catalog used to re-cost the chosen plan.
    #[arg(long)]
    evaluation_catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Break cost ties randomly, seeded by --seed.
    #[arg(long)]
    random_ties: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Seconds allowed for the exhaustive search.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report wall-clock timings (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    cost: CostArgs,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Largest arrangement bound that will be enumerated.
    #[arg(long, default_value_t = DEFAULT_ARRANGEMENT_LIMIT)]
    limit: u128,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RangeArgs {
    #[arg(long, default_value_t = 1_000)]
    min_card: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_card: u64,
    #[arg(long, default_value_t = 1e-5)]
    min_sel: f64,
    #[arg(long, default_value_t = 1e-1)]
    max_sel: f64,
}

impl RangeArgs {
    fn config(&self) -> GenConfig {
        GenConfig {
            min_cardinality: self.min_card,
            max_cardinality: self.max_card,
            min_selectivity: self.min_sel,
            max_selectivity: self.max_sel,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    topology: Topology,
    #[arg(long)]
    tables: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    ranges: RangeArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Query graphs with embedded statistics; repeatable.
    #[arg(long)]
    graph: Vec<PathBuf>,
    /// Synthetic sweep instead of graph files.
    #[arg(long, value_enum, conflicts_with = "graph")]
    topology: Option<Topology>,
    /// Sweep sizes, e.g. `4,5,6` or `4-8`.
    #[arg(long, requires = "topology")]
    sizes: Option<String>,
    /// Seeds per sweep size, starting at --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Algorithms to run; all by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    algo: Vec<Algo>,
    #[arg(long)]
    selection_catalog: Option<PathBuf>,
    #[arg(long)]
    evaluation_catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON destination; defaults to `<out>.summary.json`.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    ranges: RangeArgs,
}

enum Failure {
    Input(String),
    Timeout,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Timeout => Failure::Timeout,
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn load_graph(path: &Path) -> Outcome<(JoinGraph, Option<Statistics>)> {
    Ok(graph::parse_graph_with_statistics(&read(path)?, CardinalityKind::True)?)
}

/// Selection and optional evaluation statistics for one graph.
fn catalogs(
    graph: &JoinGraph,
    embedded: Option<Statistics>,
    selection: Option<&Path>,
    evaluation: Option<&Path>,
) -> Outcome<(Statistics, Option<Statistics>)> {
    let selection = match selection {
        Some(p) => graph::parse_statistics(graph, &read(p)?, CardinalityKind::Estimated)?,
        None => embedded.ok_or_else(|| {
            Failure::Input("graph carries no statistics; pass --selection-catalog".into())
        })?,
    };
    let evaluation = evaluation
        .map(|p| -> Outcome<Statistics> { Ok(graph::parse_statistics(graph, &read(p)?, CardinalityKind::True)?) })
        .transpose()?;
    Ok((selection, evaluation))
}

fn timeout(seconds: f64) -> Outcome<Duration> {
    Duration::try_from_secs_f64(seconds).map_err(|_| Failure::Input(format!("invalid timeout {seconds}")))
}

fn cmd_optimize(a: &OptimizeArgs) -> Outcome<()> {
    let params = a.cost.params()?;
    if a.jobs == 0 {
        return Err(Failure::Input("--jobs must be at least 1".into()));
    }
    let (graph, embedded) = load_graph(&a.graph)?;
    let (selection, evaluation) = catalogs(
        &graph,
        embedded,
        a.selection_catalog.as_deref(),
        a.evaluation_catalog.as_deref(),
    )?;
    let options = EnumOptions {
        tie_break: if a.random_ties {
            TieBreak::Random(a.seed)
        } else {
            TieBreak::Smallest
        },
        parallelism: a.jobs,
        deadline: Deadline::after(timeout(a.timeout)?),
        ..EnumOptions::default()
    };
    let mut outcome = optimize(a.algo.into(), &graph, &selection, &params, &options)?;
    if !a.timing {
        outcome.stats.elapsed = Duration::ZERO;
    }
    let mut v = outcome.plan.to_json(&graph, Some(&outcome.stats));
    if let Some(d) = outcome.distinct_plans {
        v["distinct_plans"] = json!(d);
    }
    if let Some(eval) = evaluation {
        let re = outcome.plan.recost(&graph, &eval, &params)?;
        v["evaluated"] = json!({
            "internal_cost": re.internal_cost,
            "total_cost": re.total_cost,
        });
    }
    emit(a.out.as_deref(), &pretty(&v))
}

fn cmd_count(a: &CountArgs) -> Outcome<()> {
    let (graph, _) = load_graph(&a.graph)?;
    let counts = oracle::count_ordered_trees(&graph, a.limit)?;
    let num = |x: u128| json!(u64::try_from(x).ok());
    let t_b = binary_tree_space_size(graph.num_tables()).map_or(serde_json::Value::Null, num);
    let v = json!({
        "bound": num(counts.bound),
        "valid": num(counts.valid),
        "invalid": num(counts.invalid),
        "linear": num(counts.linear),
        "bushy": num(counts.bushy),
        "t_b": t_b,
        "connected_subsets": graph::connected_subsets(&graph, 2).len(),
    });
    emit(a.out.as_deref(), &pretty(&v))
}

fn cmd_gen(a: &GenArgs) -> Outcome<()> {
    let (graph, model) = gen_topology(a.topology.into(), a.tables, a.seed, &a.ranges.config())?;
    let mut text = graph.to_json(Some(&Statistics::Selectivity(model)));
    text.push('\n');
    emit(a.out.as_deref(), &text)
}

fn parse_sizes(spec: &str) -> Outcome<Vec<usize>> {
    let bad = || Failure::Input(format!("invalid --sizes {spec:?}"));
    let mut sizes = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi): (usize, usize) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
                if lo > hi {
                    return Err(bad());
                }
                sizes.extend(lo..=hi);
            }
            None => sizes.push(part.parse().map_err(|_| bad())?),
        }
    }
    if sizes.is_empty() {
        return Err(bad());
    }
    Ok(sizes)
}

fn cmd_bench(a: &BenchArgs) -> Outcome<()> {
    let params = a.cost.params()?;
    if a.jobs == 0 {
        return Err(Failure::Input("--jobs must be at least 1".into()));
    }
    let algorithms: Vec<Algorithm> = if a.algo.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        let mut v: Vec<Algorithm> = a.algo.iter().map(|&x| x.into()).collect();
        v.sort();
        v.dedup();
        v
    };
    let config = BenchConfig {
        params,
        options: EnumOptions::default(),
        timeout: Some(timeout(a.timeout)?),
        jobs: a.jobs,
        record_timing: a.timing,
    };
    let records = match (a.topology, a.graph.as_slice()) {
        (Some(kind), _) => {
            let sizes = parse_sizes(a.sizes.as_deref().unwrap_or("4-8"))?;
            let seeds: Vec<u64> = (0..a.seeds).map(|i| a.seed.wrapping_add(i)).collect();
            bench::topology_sweep(kind.into(), &sizes, &seeds, &algorithms, &a.ranges.config(), &config)?
        }
        (None, []) => return Err(Failure::Input("bench needs --graph or --topology".into())),
        (None, paths) => {
            if paths.len() > 1 && (a.selection_catalog.is_some() || a.evaluation_catalog.is_some()) {
                return Err(Failure::Input("catalog flags need exactly one --graph".into()));
            }
            let mut queries = Vec::new();
            for p in paths {
                let (graph, embedded) = load_graph(p)?;
                let (selection, evaluation) = catalogs(
                    &graph,
                    embedded,
                    a.selection_catalog.as_deref(),
                    a.evaluation_catalog.as_deref(),
                )?;
                let id = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                queries.push(Query {
                    id,
                    topology: graph.topology(),
                    graph,
                    selection,
                    evaluation,
                    seed: None,
                });
            }
            bench::run_workload(&queries, &algorithms, &config)?
        }
    };

    let mut csv = Vec::new();
    bench::write_csv(&records, &mut csv)?;
    emit(a.out.as_deref(), &String::from_utf8(csv).expect("csv output is utf-8"))?;

    let summary_path = a.summary.clone().or_else(|| {
        a.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".summary.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = summary_path {
        let rows = bench::aggregate(&records)?;
        let v = json!({ "ratio_method": "sum of plan costs / sum of optimal costs", "rows": rows });
        emit(Some(&path), &pretty(&v))?;
    }
    if !records.is_empty() && records.iter().all(|r| r.error.is_some()) {
        return Err(Failure::Input(format!(
            "every query failed; first error: {}",
            records[0].error.as_deref().unwrap_or("")
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let head: Vec<&str> = msg.lines().map(str::trim).take_while(|l| !l.is_empty()).collect();
            eprintln!("{} (see --help for usage)", head.join(" "));
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Optimize(a) => cmd_optimize(a),
        Command::Count(a) => cmd_count(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
        Err(Failure::Timeout) => {
            eprintln!("error: optimization timed out");
            ExitCode::from(2)
        }
    }
}
