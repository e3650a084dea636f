//! Experiment harness around `drw-core`: build or load graphs, run solves,
//! resistance queries, spanning-tree sampling, decompositions, and scaling
//! benches, and emit machine-readable JSON/CSV with oracle comparison
//! columns where the exact references are tractable.
//!
//! All output is rendered by [`run`] into a string so identical invocations
//! are byte-identical; the binary only parses arguments and writes the
//! result.

use std::collections::BTreeMap;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use drw_core::graph::{GraphKind, OneSinkSystem, WeightedGraph};
use drw_core::rst::{ExitModeChoice, RstConfig, WalkMode};
use drw_core::solver::{SolveMode, SolveReport, SolverConfig};
use drw_core::{oracle, par, rst, solver, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "drw", about = "queueing-network Laplacian solver harness", version)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Solve x^T L = b^T and compare against the dense oracle.
    Solve(SolveArgs),
    /// Effective resistance between two vertices.
    Reff(ReffArgs),
    /// Sample random spanning trees.
    Rst(RstArgs),
    /// Low-diameter decomposition only.
    Decompose(DecomposeArgs),
    /// Scaling sweep: measured rounds vs the horizon formula.
    Bench(BenchArgs),
    /// Exact references for a graph: solution, beta*, spectra, t_hit.
    Oracle(OracleArgs),
}

/// Arguments shared by every subcommand.
#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Generator spec (`path:10`, `k5`, `star:6`, `grid:4`, `tree:7`,
    /// `er:20:0.3`) or `file:PATH` with an edge list.
    #[arg(long)]
    pub graph: String,
    /// RNG seed; mandatory, there is no wall-clock default.
    #[arg(long)]
    pub seed: u64,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `endpoints` for b = e_first - e_last, or `file:PATH` with n reals.
    #[arg(long, default_value = "endpoints")]
    pub b: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.01)]
    pub kappa: f64,
    /// Independent repetitions on seeds seed..seed+reps.
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    /// Use the per-node incremental stopping rule instead of the two-phase
    /// horizon (fidelity experiments only; no guarantee).
    #[arg(long)]
    pub paper_listing: bool,
    /// Worst-case hitting-time upper bound; omitted means exact oracle.
    #[arg(long)]
    pub t_hit: Option<f64>,
    /// Skip the dense-oracle comparison columns.
    #[arg(long)]
    pub no_oracle: bool,
}

#[derive(Args, Debug)]
pub struct ReffArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// First endpoint (default 0).
    #[arg(long, default_value_t = 0)]
    pub u: usize,
    /// Second endpoint (default n-1).
    #[arg(long)]
    pub v: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
}

#[derive(Args, Debug)]
pub struct RstArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    /// Decomposition parameter; default 1/sqrt(n).
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Compute exit distributions with the queueing solver instead of the
    /// exact oracle.
    #[arg(long)]
    pub solver_exits: bool,
    /// Sample exits from the actual entry vertex's row instead of the
    /// aggregated mass.
    #[arg(long)]
    pub entry_conditioned: bool,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub phi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Graph family to sweep: `path` or `complete`.
    #[arg(long)]
    pub family: String,
    /// Comma-separated sizes, e.g. `8,16,32`.
    #[arg(long)]
    pub sizes: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.3)]
    pub kappa: f64,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "endpoints")]
    pub b: String,
}

/// Map an error to the documented process exit code: 2 usage, 3 validation,
/// 4 internal invariant violation.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Parse(_) => 2,
        Error::Internal(_) | Error::ProtocolViolation(_) => 4,
        _ => 3,
    }
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Reff(a) => cmd_reff(a),
        Cmd::Rst(a) => cmd_rst(a),
        Cmd::Decompose(a) => cmd_decompose(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Oracle(a) => cmd_oracle(a),
    }
}

/// The output destination for the subcommand, if redirected.
pub fn out_path(cli: &Cli) -> Option<&str> {
    match &cli.cmd {
        Cmd::Solve(a) => a.common.out.as_deref(),
        Cmd::Reff(a) => a.common.out.as_deref(),
        Cmd::Rst(a) => a.common.out.as_deref(),
        Cmd::Decompose(a) => a.common.out.as_deref(),
        Cmd::Bench(a) => a.out.as_deref(),
        Cmd::Oracle(a) => a.common.out.as_deref(),
    }
}

fn load_graph(spec: &str, seed: u64) -> Result<WeightedGraph> {
    if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)?;
        WeightedGraph::from_edge_list(&text)
    } else {
        GraphKind::parse(spec)?.build(seed)
    }
}

fn load_b(spec: &str, g: &WeightedGraph) -> Result<Vec<f64>> {
    if spec == "endpoints" {
        let mut b = vec![0.0; g.n()];
        b[0] = 1.0;
        b[g.n() - 1] = -1.0;
        return Ok(b);
    }
    let path = spec
        .strip_prefix("file:")
        .ok_or_else(|| Error::InvalidArgument(format!("bad b spec '{spec}'")))?;
    let text = std::fs::read_to_string(path)?;
    let b: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<_>>()?;
    if b.len() != g.n() {
        return Err(Error::Validation(format!(
            "b has {} entries, graph has {} vertices",
            b.len(),
            g.n()
        )));
    }
    Ok(b)
}

fn render(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json render");
    text.push('\n');
    text
}

fn report_json(rep: &SolveReport) -> serde_json::Value {
    serde_json::to_value(rep).expect("report json")
}

fn cmd_solve(a: &SolveArgs) -> Result<String> {
    let g = load_graph(&a.common.graph, a.common.seed)?;
    let b = load_b(&a.b, &g)?;
    let negs = b.iter().filter(|&&v| v < 0.0).count();
    let base = SolverConfig {
        mode: if a.paper_listing {
            SolveMode::PaperListing
        } else {
            SolveMode::FixedHorizon
        },
        t_hit_bound: a.t_hit,
        ..SolverConfig::new(a.eps, a.kappa, a.common.seed)
    };
    let reports = par::try_map(0..a.reps, |i| {
        let cfg = SolverConfig {
            seed: a.common.seed + i,
            ..base.clone()
        };
        if negs > 1 {
            solver::gen_drw_lsolve(&g, &b, &cfg)
        } else {
            solver::drw_lsolve(&g, &b, &cfg)
        }
    })?;
    let n = g.n();
    let mut mean = vec![0.0; n];
    for rep in &reports {
        for (m, x) in mean.iter_mut().zip(&rep.x) {
            *m += x / reports.len() as f64;
        }
    }
    let mut doc = json!({
        "schema": "drw/solve/1",
        "graph": a.common.graph,
        "n": n,
        "b": b,
        "eps": a.eps,
        "kappa": a.kappa,
        "seed": a.common.seed,
        "reps": a.reps,
        "mode": if a.paper_listing { "paper_listing" } else { "fixed_horizon" },
        "x_mean": mean,
        "reports": reports.iter().map(report_json).collect::<Vec<_>>(),
    });
    if !a.no_oracle && negs == 1 {
        let sys = OneSinkSystem::new(b.clone())?;
        let exact = oracle::exact_solve(&g, &sys)?;
        let rel: Vec<serde_json::Value> = (0..n)
            .map(|u| {
                let guaranteed = reports.iter().all(|r| r.guaranteed[u]);
                if guaranteed && exact.x[u].abs() > 1e-12 {
                    json!((mean[u] - exact.x[u]).abs() / exact.x[u].abs())
                } else {
                    serde_json::Value::Null
                }
            })
            .collect();
        doc["oracle"] = json!({ "x_exact": exact.x, "rel_error": rel });
    }
    Ok(render(&doc))
}

fn cmd_reff(a: &ReffArgs) -> Result<String> {
    let g = load_graph(&a.common.graph, a.common.seed)?;
    let v = a.v.unwrap_or(g.n() - 1);
    let runs = par::try_map(0..a.reps, |i| {
        solver::effective_resistance(&g, a.u, v, a.eps, a.common.seed + i)
    })?;
    let estimate =
        runs.iter().map(|(r, _)| r).sum::<f64>() / runs.len() as f64;
    let exact = oracle::effective_resistance_exact(&g, a.u, v)?;
    let rounds: u64 = runs.iter().map(|(_, rep)| rep.data_rounds).sum();
    let model_time: f64 = runs.iter().map(|(_, rep)| rep.model_time).sum();
    let doc = json!({
        "schema": "drw/reff/1",
        "graph": a.common.graph,
        "u": a.u,
        "v": v,
        "eps": a.eps,
        "seed": a.common.seed,
        "reps": a.reps,
        "estimate": estimate,
        "exact": exact,
        "rel_error": (estimate - exact).abs() / exact.abs(),
        "rounds": rounds,
        "model_time": model_time,
    });
    Ok(render(&doc))
}

fn tree_key(edges: &[(usize, usize)]) -> String {
    edges
        .iter()
        .map(|&(u, v)| format!("{u}-{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_rst(a: &RstArgs) -> Result<String> {
    let g = load_graph(&a.common.graph, a.common.seed)?;
    let cfg = RstConfig {
        phi: a.phi,
        exit_mode: if a.solver_exits {
            ExitModeChoice::Solver
        } else {
            ExitModeChoice::Oracle
        },
        walk_mode: if a.entry_conditioned {
            WalkMode::EntryConditioned
        } else {
            WalkMode::Aggregated
        },
        ..RstConfig::new(a.eps, a.common.seed)
    };
    let samples = par::try_map(0..a.reps, |i| {
        rst::sample_rst(
            &g,
            &RstConfig {
                seed: a.common.seed + i,
                ..cfg.clone()
            },
        )
    })?;
    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    for (tree, _) in &samples {
        *freq.entry(tree_key(&tree.edges)).or_insert(0) += 1;
    }
    let rounds_mean = samples.iter().map(|(_, r)| r.rounds as f64).sum::<f64>()
        / samples.len() as f64;
    let first = &samples[0].1;
    let mut doc = json!({
        "schema": "drw/rst/1",
        "graph": a.common.graph,
        "seed": a.common.seed,
        "reps": a.reps,
        "eps": a.eps,
        "phi": first.phi,
        "exit_mode": if a.solver_exits { "solver" } else { "oracle" },
        "walk_mode": if a.entry_conditioned { "entry_conditioned" } else { "aggregated" },
        "partitions_first_run": first.partitions,
        "cut_edges_first_run": first.cut_edges,
        "rounds_mean": rounds_mean,
        "unique_trees": freq.len(),
        "frequencies": freq,
    });
    if g.n() <= 8 && g.m() <= 16 {
        doc["tree_count_exact"] = json!(oracle::spanning_tree_count(&g));
    }
    Ok(render(&doc))
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<String> {
    let g = load_graph(&a.common.graph, a.common.seed)?;
    let phi = a.phi.unwrap_or(1.0 / (g.n() as f64).sqrt());
    let dec = rst::decompose(&g, phi, a.common.seed)?;
    let doc = json!({
        "schema": "drw/decompose/1",
        "graph": a.common.graph,
        "seed": a.common.seed,
        "phi": phi,
        "partitions": dec.k(),
        "partition": dec.partition,
        "leaders": dec.leaders,
        "cut_edges": dec.cut_edges.len(),
        "diameters": dec.diameters,
    });
    Ok(render(&doc))
}

/// Iteration bound from the binary-search analysis: the search starts at 1/2
/// and cannot go below 3 beta* (1-eps)/8.
fn predicted_horizon(g: &WeightedGraph, sys: &OneSinkSystem, cfg: &SolverConfig) -> Result<f64> {
    let t_hit = oracle::worst_case_hitting_time(g)?;
    let beta_star = oracle::exact_beta_star(g, sys.sink(), sys.j())?;
    let burn = cfg.burn_const * t_hit * (1.0 / cfg.eps1()).ln();
    let sample = cfg.sample_const * (g.n() as f64).ln()
        / (cfg.kappa * cfg.kappa * cfg.eps2() * cfg.eps2());
    let iters = (8.0 / (3.0 * beta_star)).log2().ceil().max(1.0);
    Ok(iters * (burn + sample + 2.0 * g.diameter() as f64))
}

fn cmd_bench(a: &BenchArgs) -> Result<String> {
    let sizes: Vec<usize> = a
        .sizes
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidArgument(format!("bad size '{t}': {e}")))
        })
        .collect::<Result<_>>()?;
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("empty size sweep".into()));
    }
    let rows = par::try_map(sizes, |n| {
        let kind = match a.family.as_str() {
            "path" => GraphKind::Path(n),
            "complete" => GraphKind::Complete(n),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown family '{other}'"
                )))
            }
        };
        let g = kind.build(a.seed)?;
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        b[n - 1] = -1.0;
        let cfg = SolverConfig::new(a.eps, a.kappa, a.seed);
        let rep = solver::drw_lsolve(&g, &b, &cfg)?;
        let sys = OneSinkSystem::new(b)?;
        let t_hit = oracle::worst_case_hitting_time(&g)?;
        let predicted = predicted_horizon(&g, &sys, &cfg)?;
        Ok(format!(
            "drw/bench/1,{n},{},{},{t_hit},{predicted}",
            rep.data_rounds, rep.model_time
        ))
    })?;
    let mut csv = String::from("schema,n,rounds,model_time,t_hit,predicted_horizon\n");
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    Ok(csv)
}

fn cmd_oracle(a: &OracleArgs) -> Result<String> {
    let g = load_graph(&a.common.graph, a.common.seed)?;
    let b = load_b(&a.b, &g)?;
    let sys = OneSinkSystem::new(b.clone())?;
    let exact = oracle::exact_solve(&g, &sys)?;
    let mut doc = json!({
        "schema": "drw/oracle/1",
        "graph": a.common.graph,
        "n": g.n(),
        "m": g.m(),
        "b": b,
        "x_exact": exact.x,
        "beta_star": oracle::exact_beta_star(&g, sys.sink(), sys.j())?,
        "lambda2": oracle::lambda2(&g),
        "t_hit": oracle::worst_case_hitting_time(&g)?,
        "d_max": g.d_max(),
        "diameter": g.diameter(),
    });
    if g.n() <= 8 && g.m() <= 16 {
        doc["tree_count"] = json!(oracle::spanning_tree_count(&g));
    }
    Ok(render(&doc))
}
