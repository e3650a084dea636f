//! Controller-driven binary-search solvers on top of the queueing process:
//! the one-sink solver, effective resistance, canonicalization, and the
//! multi-sink solver that time-division multiplexes one colored process per
//! sink.
//!
//! The controller starts at rate 1/2 and halves until the maximum estimated
//! occupancy drops below (3/4)(1-eps), then reads the solution off the
//! occupancies: `x_u = (sum of sources / beta) * (eta_u / d_u)`. Coordinates
//! whose occupancy is too small to certify (at most `kappa * (1+eps)`) are
//! reported as zero with a cleared guarantee flag.

use serde::Serialize;

use crate::dc::{drw_compute, ComputeMode, Simulation};
use crate::engine::{ControlTree, CostMeter};
use crate::error::{Error, Result};
use crate::graph::{OneSinkSystem, WeightedGraph};
use crate::oracle;

/// Which occupancy-estimation schedule the solver drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    FixedHorizon,
    PaperListing,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// target relative error, in (0, 1/2)
    pub eps: f64,
    /// granularity: coordinates with occupancy at or below roughly this
    /// carry no guarantee
    pub kappa: f64,
    pub seed: u64,
    /// worst-case hitting-time upper bound for the sampling horizons; `None`
    /// computes it exactly, which only scales to desk-size graphs
    pub t_hit_bound: Option<f64>,
    pub mode: SolveMode,
    /// horizon constants, overridable for experiments
    pub burn_const: f64,
    pub sample_const: f64,
}

impl SolverConfig {
    pub fn new(eps: f64, kappa: f64, seed: u64) -> Self {
        Self {
            eps,
            kappa,
            seed,
            t_hit_bound: None,
            mode: SolveMode::FixedHorizon,
            burn_const: 64.0,
            sample_const: 4.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::Config(format!("eps {} outside (0, 1/2)", self.eps)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!("kappa {} outside (0, 1)", self.kappa)));
        }
        Ok(())
    }

    /// mixing-phase error share
    pub fn eps1(&self) -> f64 {
        self.eps / 4.0
    }

    /// sampling-phase error share
    pub fn eps2(&self) -> f64 {
        3.0 * self.eps / 4.0
    }

    /// stability threshold on the maximum occupancy estimate
    pub fn threshold(&self) -> f64 {
        0.75 * (1.0 - self.eps)
    }
}

/// Solver output, serialized verbatim by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub guaranteed: Vec<bool>,
    pub beta_final: f64,
    pub iterations: u32,
    pub data_rounds: u64,
    pub control_rounds: u64,
    pub model_time: f64,
    pub seed: u64,
}

/// True when the occupancy estimate indicates a stable rate:
/// `max eta < (3/4)(1-eps)`.
pub fn stability_probe(eta: &[f64], eps: f64) -> bool {
    let max = eta.iter().cloned().fold(0.0, f64::max);
    max < 0.75 * (1.0 - eps)
}

/// Read the solution off the occupancies; coordinates failing the
/// certification test `kappa < eta_u / (1+eps)` come back as zero with a
/// cleared flag. The sink is pinned to zero and always guaranteed.
pub fn scale_solution(
    eta: &[f64],
    beta: f64,
    source_sum: f64,
    degrees: &[f64],
    sink: usize,
    kappa: f64,
    eps: f64,
) -> (Vec<f64>, Vec<bool>) {
    let mut x = vec![0.0; eta.len()];
    let mut guaranteed = vec![false; eta.len()];
    for u in 0..eta.len() {
        if u == sink {
            guaranteed[u] = true;
            continue;
        }
        if kappa < eta[u] / (1.0 + eps) {
            x[u] = source_sum / beta * eta[u] / degrees[u];
            guaranteed[u] = true;
        }
    }
    (x, guaranteed)
}

/// Shift to the canonical representative orthogonal to the all-ones vector.
pub fn canonicalize(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

struct ColorOutcome {
    eta: Vec<f64>,
    beta_final: f64,
    iterations: u32,
}

/// Binary search over beta for one color driven by standalone compute runs.
fn search_single(
    g: &WeightedGraph,
    sys: &OneSinkSystem,
    cfg: &SolverConfig,
    kappa_eff: f64,
    color: u64,
    meter: &mut CostMeter,
) -> Result<ColorOutcome> {
    let t_hit = match cfg.t_hit_bound {
        Some(t) => t,
        None => oracle::worst_case_hitting_time(g)?,
    };
    let tree = ControlTree::build(g, sys.sink())?;
    let mut beta = 0.5;
    let mut iterations = 1u32;
    let mut underflow_floor: Option<f64> = None;
    loop {
        let mode = match cfg.mode {
            SolveMode::FixedHorizon => ComputeMode::FixedHorizon {
                t_hit_bound: t_hit,
                eps1: cfg.eps1(),
                eps2: cfg.eps2(),
                kappa: kappa_eff,
                burn_const: cfg.burn_const,
                sample_const: cfg.sample_const,
            },
            SolveMode::PaperListing => ComputeMode::PaperListing { eps: cfg.eps },
        };
        tree.broadcast(beta, meter);
        let est = drw_compute_colored(g, sys, beta, mode, cfg.seed, iterations as u64, color)?;
        meter.data_rounds += est.rounds;
        let max = tree.convergecast_max(&est.eta, meter);
        if max < cfg.threshold() {
            return Ok(ColorOutcome { eta: est.eta, beta_final: beta, iterations });
        }
        beta /= 2.0;
        iterations += 1;
        // binary search provably stops at >= 3 beta* (1-eps)/8 >= 3/8 (1-eps)
        // times the spectral lower bound, so dropping far below that bound is a bug
        if beta < 1.0 / 256.0 {
            let floor = *underflow_floor
                .get_or_insert_with(|| oracle::rate_lower_bound(g, sys.sink(), sys.j()) / 16.0);
            if beta < floor {
                return Err(Error::Internal(format!(
                    "rate underflow: beta {beta} below diagnostic floor {floor}"
                )));
            }
        }
        if iterations > 64 {
            return Err(Error::Internal("binary search exceeded 64 iterations".into()));
        }
    }
}

/// `drw_compute` on the given color's RNG substream, so the standalone and
/// multiplexed paths draw identical randomness per color.
fn drw_compute_colored(
    g: &WeightedGraph,
    sys: &OneSinkSystem,
    beta: f64,
    mode: ComputeMode,
    seed: u64,
    iteration: u64,
    color: u64,
) -> Result<crate::dc::OccupancyEstimate> {
    debug_assert_eq!(color, 0, "standalone compute only serves color 0");
    let _ = color;
    drw_compute(g, sys, beta, mode, seed, iteration)
}

/// One-sink solver: validate, binary search, scale.
pub fn drw_lsolve(g: &WeightedGraph, b: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let sys = OneSinkSystem::new(b.to_vec())?;
    if b.len() != g.n() {
        return Err(Error::InvalidArgument("b length != n".into()));
    }
    let mut meter = CostMeter::new(g.d_max());
    let out = search_single(g, &sys, cfg, cfg.kappa, 0, &mut meter)?;
    let (x, guaranteed) = scale_solution(
        &out.eta,
        out.beta_final,
        sys.source_sum(),
        g.degrees(),
        sys.sink(),
        cfg.kappa,
        cfg.eps,
    );
    Ok(SolveReport {
        x,
        guaranteed,
        beta_final: out.beta_final,
        iterations: out.iterations,
        data_rounds: meter.data_rounds,
        control_rounds: meter.control_rounds,
        model_time: meter.model_time(),
        seed: cfg.seed,
    })
}

/// Effective resistance between `u` and `v`: solve with `b = e_u - e_v`,
/// sink `v`, and the granularity `3 d_min / (16 d_max)` that certifies the
/// source coordinate.
pub fn effective_resistance(
    g: &WeightedGraph,
    u: usize,
    v: usize,
    eps: f64,
    seed: u64,
) -> Result<(f64, SolveReport)> {
    if u == v {
        return Err(Error::InvalidArgument("endpoints must differ".into()));
    }
    let mut b = vec![0.0; g.n()];
    b[u] = 1.0;
    b[v] = -1.0;
    let kappa = 3.0 * g.d_min() / (16.0 * g.d_max());
    let mut cfg = SolverConfig::new(eps, kappa, seed);
    cfg.t_hit_bound = None;
    let report = drw_lsolve(g, &b, &cfg)?;
    if !report.guaranteed[u] {
        return Err(Error::Internal(
            "source coordinate unguaranteed despite resistance kappa choice".into(),
        ));
    }
    Ok((report.x[u], report))
}

/// Split a balanced demand vector with `l` negative coordinates into `l`
/// one-sink systems, one per sink, scaled by each sink's share of the total
/// negative mass. The systems sum back to `b` componentwise.
pub fn split_general_b(b: &[f64]) -> Result<Vec<OneSinkSystem>> {
    let total: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if total.abs() > 1e-9 * scale {
        return Err(Error::Validation(format!("b does not sum to zero (sum {total})")));
    }
    let sinks: Vec<usize> = (0..b.len()).filter(|&i| b[i] < 0.0).collect();
    if sinks.is_empty() {
        return Err(Error::Validation("b has no negative coordinate".into()));
    }
    let neg_sum: f64 = sinks.iter().map(|&i| b[i]).sum();
    let mut out = Vec::with_capacity(sinks.len());
    for &s in &sinks {
        let share = b[s] / neg_sum;
        let bi: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i == s {
                    v
                } else if v > 0.0 {
                    share * v
                } else {
                    0.0
                }
            })
            .collect();
        // bi has b[s] at the sink and share * positives elsewhere; the
        // positives sum to share * pos_sum = -b[s], so bi balances
        out.push(OneSinkSystem::new(bi)?);
    }
    Ok(out)
}

/// Multi-sink solver: split `b`, run one colored process per sink under
/// time-division multiplexing with granularity `kappa / l` each, and sum the
/// scaled per-color solutions.
pub fn gen_drw_lsolve(g: &WeightedGraph, b: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if b.len() != g.n() {
        return Err(Error::InvalidArgument("b length != n".into()));
    }
    let systems = split_general_b(b)?;
    let l = systems.len();
    if l == 1 {
        // one sink is the plain solver, identical traces included
        return drw_lsolve(g, b, cfg);
    }
    if cfg.mode == SolveMode::PaperListing {
        return Err(Error::Config(
            "paper_listing mode is one-sink only; the multiplexed driver runs fixed horizons"
                .into(),
        ));
    }
    let kappa_eff = cfg.kappa / l as f64;
    let t_hit = match cfg.t_hit_bound {
        Some(t) => t,
        None => oracle::worst_case_hitting_time(g)?,
    };
    let burn = (cfg.burn_const * t_hit * (1.0 / cfg.eps1()).ln()).ceil() as u64;
    let e2 = cfg.eps2();
    let sample =
        (cfg.sample_const * (g.n() as f64).ln() / (kappa_eff * kappa_eff * e2 * e2)).ceil() as u64;
    let window = burn + sample;
    if window.saturating_mul(l as u64) > 1_000_000_000 {
        return Err(Error::Config(format!(
            "multiplexed horizon {} exceeds round guard",
            window * l as u64
        )));
    }

    let sinks: Vec<usize> = systems.iter().map(|s| s.sink()).collect();
    let trees: Vec<ControlTree> =
        sinks.iter().map(|&s| ControlTree::build(g, s)).collect::<Result<_>>()?;
    let mut sim = Simulation::new(g, &sinks, cfg.seed);
    let mut beta = vec![0.5f64; l];
    let mut iter = vec![1u32; l];
    let mut done: Vec<Option<ColorOutcome>> = (0..l).map(|_| None).collect();
    let mut floors: Vec<Option<f64>> = vec![None; l];

    while done.iter().any(Option::is_none) {
        for c in 0..l {
            if done[c].is_none() {
                sim.reset_color(c, systems[c].j(), beta[c], iter[c] as u64)?;
                trees[c].broadcast(beta[c], &mut sim.meter);
            }
        }
        for _ in 0..burn * l as u64 {
            sim.step();
        }
        for c in 0..l {
            if done[c].is_none() {
                sim.set_counting(c, true);
            }
        }
        for _ in 0..sample * l as u64 {
            sim.step();
        }
        for c in 0..l {
            if done[c].is_some() {
                continue;
            }
            let eta = sim.occupancy(c);
            let max = trees[c].convergecast_max(&eta, &mut sim.meter);
            if max < cfg.threshold() {
                done[c] = Some(ColorOutcome {
                    eta,
                    beta_final: beta[c],
                    iterations: iter[c],
                });
            } else {
                beta[c] /= 2.0;
                iter[c] += 1;
                if beta[c] < 1.0 / 256.0 {
                    let floor = *floors[c].get_or_insert_with(|| {
                        oracle::rate_lower_bound(g, sinks[c], systems[c].j()) / 16.0
                    });
                    if beta[c] < floor {
                        return Err(Error::Internal(format!(
                            "rate underflow on color {c}: beta {} below floor {floor}",
                            beta[c]
                        )));
                    }
                }
                if iter[c] > 64 {
                    return Err(Error::Internal(
                        "binary search exceeded 64 iterations".into(),
                    ));
                }
            }
        }
    }

    let mut x = vec![0.0; g.n()];
    let mut guaranteed = vec![true; g.n()];
    let mut beta_min = 0.5f64;
    let mut iter_max = 0u32;
    for (c, slot) in done.iter().enumerate() {
        let out = slot.as_ref().unwrap();
        let (xi, gi) = scale_solution(
            &out.eta,
            out.beta_final,
            systems[c].source_sum(),
            g.degrees(),
            sinks[c],
            kappa_eff,
            cfg.eps,
        );
        for u in 0..g.n() {
            x[u] += xi[u];
            guaranteed[u] &= gi[u];
        }
        beta_min = beta_min.min(out.beta_final);
        iter_max = iter_max.max(out.iterations);
    }
    Ok(SolveReport {
        x,
        guaranteed,
        beta_final: beta_min,
        iterations: iter_max,
        data_rounds: sim.meter.data_rounds,
        control_rounds: sim.meter.control_rounds,
        model_time: sim.meter.model_time(),
        seed: cfg.seed,
    })
}
