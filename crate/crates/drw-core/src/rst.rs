//! Near-uniform random spanning trees via low-diameter decomposition.
//!
//! Pipeline: decompose the graph with exponentially shifted multi-source BFS,
//! compute per-partition exit distributions as one-sink potentials on a
//! boundary gadget, sample a spanning tree inside each partition by
//! Aldous-Broder, walk the reduced (partition) graph to pick the connecting
//! cut edges, and union everything into one validated tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::oracle;
use crate::par;
use crate::rng::SimRng;
use crate::solver::{drw_lsolve, SolverConfig};

// RNG substream labels for the pipeline phases
const LBL_SHIFT: u64 = 1;
const LBL_TREE: u64 = 2;
const LBL_WALK: u64 = 3;
const LBL_EXIT: u64 = 4;

/// Partition of the vertices into connected low-diameter clusters.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// partition id per vertex; ids are ranks of the sorted leader list
    pub partition: Vec<usize>,
    pub leaders: Vec<usize>,
    /// per partition, member vertices in ascending order
    pub members: Vec<Vec<usize>>,
    /// edges with endpoints in two partitions, in input edge order
    pub cut_edges: Vec<(usize, usize, f64)>,
    /// hop diameter of each induced cluster
    pub diameters: Vec<usize>,
    pub phi: f64,
}

impl Decomposition {
    pub fn k(&self) -> usize {
        self.leaders.len()
    }
}

struct Arrival {
    time: f64,
    leader: usize,
    vertex: usize,
}

impl PartialEq for Arrival {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Arrival {}
impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Arrival {
    // BinaryHeap is a max-heap; invert so earliest time pops first, with the
    // lower leader id winning simultaneous arrivals
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.leader.cmp(&self.leader))
            .then(other.vertex.cmp(&self.vertex))
    }
}

/// Shifted multi-source BFS decomposition with mean-`1/phi` exponential
/// delays.
pub fn decompose(g: &WeightedGraph, phi: f64, seed: u64) -> Result<Decomposition> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::InvalidArgument(format!("phi {phi} outside (0,1)")));
    }
    let mut rng = SimRng::from_parts(seed, &[LBL_SHIFT]);
    let shifts: Vec<f64> = (0..g.n()).map(|_| rng.next_exp(phi)).collect();
    decompose_with_shifts(g, phi, &shifts)
}

/// Decomposition with caller-supplied shifts; the all-zero vector is the
/// degenerate every-vertex-its-own-partition case used by equivalence tests.
pub fn decompose_with_shifts(g: &WeightedGraph, phi: f64, shifts: &[f64]) -> Result<Decomposition> {
    let n = g.n();
    if shifts.len() != n {
        return Err(Error::InvalidArgument("shift count != n".into()));
    }
    let d_max_shift = shifts.iter().cloned().fold(0.0, f64::max);
    let mut heap = BinaryHeap::new();
    for u in 0..n {
        // vertex u launches its own search at time d_max_shift - shift_u
        heap.push(Arrival { time: d_max_shift - shifts[u], leader: u, vertex: u });
    }
    let mut owner = vec![usize::MAX; n];
    while let Some(a) = heap.pop() {
        if owner[a.vertex] != usize::MAX {
            continue;
        }
        if a.leader != a.vertex && owner[a.leader] != a.leader {
            continue;
        }
        owner[a.vertex] = a.leader;
        for &(w, _) in g.neighbors(a.vertex) {
            if owner[w] == usize::MAX {
                heap.push(Arrival { time: a.time + 1.0, leader: a.leader, vertex: w });
            }
        }
    }

    let mut leaders: Vec<usize> = owner.clone();
    leaders.sort_unstable();
    leaders.dedup();
    let rank = |l: usize| leaders.binary_search(&l).unwrap();
    let partition: Vec<usize> = owner.iter().map(|&l| rank(l)).collect();

    let mut members = vec![Vec::new(); leaders.len()];
    for v in 0..n {
        members[partition[v]].push(v);
    }
    let cut_edges: Vec<(usize, usize, f64)> = g
        .edges()
        .iter()
        .filter(|&&(u, v, _)| partition[u] != partition[v])
        .cloned()
        .collect();
    let diameters: Vec<usize> = members.iter().map(|mem| cluster_diameter(g, &partition, mem)).collect();
    Ok(Decomposition { partition, leaders, members, cut_edges, diameters, phi })
}

fn cluster_diameter(g: &WeightedGraph, partition: &[usize], mem: &[usize]) -> usize {
    if mem.len() <= 1 {
        return 0;
    }
    let pid = partition[mem[0]];
    let mut diam = 0;
    for &src in mem {
        // BFS restricted to the cluster
        let mut dist = vec![usize::MAX; g.n()];
        dist[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in g.neighbors(v) {
                if partition[w] == pid && dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        for &v in mem {
            diam = diam.max(dist[v]);
        }
    }
    diam
}

/// How per-partition exit probabilities are computed.
#[derive(Clone, Copy, Debug)]
pub enum ExitMode {
    /// dense exact solve of the gadget; fast and noiseless
    Oracle,
    /// full-fidelity queueing solve of the gadget
    Solver { eps: f64, seed: u64 },
}

/// Exit probabilities for one partition.
#[derive(Clone, Debug)]
pub struct PartitionExits {
    /// member vertices, ascending (local index space for `p`)
    pub verts: Vec<usize>,
    /// boundary edges as (inside endpoint, outside endpoint, weight)
    pub boundary: Vec<(usize, usize, f64)>,
    /// `p[local v][edge idx]`, rows renormalized to sum 1
    pub p: Vec<Vec<f64>>,
    /// row sums before renormalization, for error budget logging
    pub raw_sums: Vec<f64>,
    /// simulation rounds consumed (zero in oracle mode)
    pub rounds: u64,
}

/// Exit tables for every partition, in partition order.
#[derive(Clone, Debug)]
pub struct ExitTable {
    pub parts: Vec<PartitionExits>,
}

pub fn build_exit_table(g: &WeightedGraph, dec: &Decomposition, mode: ExitMode) -> Result<ExitTable> {
    let parts = par::try_map(0..dec.k(), |i| exit_distributions(g, dec, i, mode))?;
    Ok(ExitTable { parts })
}

/// Exit distribution rows for partition `i`: for each boundary edge
/// `e = (u, u')`, solve a one-sink potential on the cluster plus `u'` and a
/// dummy sink absorbing every other boundary edge, and read
/// `P_v(e) = x_v / x_{u'}`.
pub fn exit_distributions(
    g: &WeightedGraph,
    dec: &Decomposition,
    i: usize,
    mode: ExitMode,
) -> Result<PartitionExits> {
    let verts = dec.members[i].clone();
    let boundary: Vec<(usize, usize, f64)> = dec
        .cut_edges
        .iter()
        .filter_map(|&(u, v, w)| {
            if dec.partition[u] == i {
                Some((u, v, w))
            } else if dec.partition[v] == i {
                Some((v, u, w))
            } else {
                None
            }
        })
        .collect();
    let nv = verts.len();
    if boundary.is_empty() {
        // only possible when the decomposition has a single partition
        return Ok(PartitionExits {
            verts,
            boundary,
            p: vec![Vec::new(); nv],
            raw_sums: vec![0.0; nv],
            rounds: 0,
        });
    }
    if boundary.len() == 1 {
        return Ok(PartitionExits {
            verts,
            boundary,
            p: vec![vec![1.0]; nv],
            raw_sums: vec![1.0; nv],
            rounds: 0,
        });
    }

    let local = |v: usize| verts.binary_search(&v).unwrap();
    let mut raw = vec![vec![0.0; boundary.len()]; nv];
    let mut rounds = 0;
    for (e, &(u, _, w_e)) in boundary.iter().enumerate() {
        // gadget: cluster vertices, then u' at nv, dummy sink u* at nv+1
        let mut edges: Vec<(usize, usize, f64)> = g
            .edges()
            .iter()
            .filter(|&&(a, b, _)| dec.partition[a] == i && dec.partition[b] == i)
            .map(|&(a, b, w)| (local(a), local(b), w))
            .collect();
        edges.push((local(u), nv, w_e));
        let mut to_dummy = vec![0.0; nv];
        for (f, &(w, _, w_wt)) in boundary.iter().enumerate() {
            if f != e {
                to_dummy[local(w)] += w_wt;
            }
        }
        for (v, &wt) in to_dummy.iter().enumerate() {
            if wt > 0.0 {
                edges.push((v, nv + 1, wt));
            }
        }
        let gadget = WeightedGraph::from_edges(nv + 2, edges)?;
        let mut b = vec![0.0; nv + 2];
        b[nv] = 1.0;
        b[nv + 1] = -1.0;
        let x = match mode {
            ExitMode::Oracle => oracle::exact_solve_pinned(&gadget, &b, nv + 1)?.x,
            ExitMode::Solver { eps, seed } => {
                let run_seed = SimRng::from_parts(seed, &[LBL_EXIT, i as u64, e as u64]).next_u64();
                let mut kappa = 3.0 * gadget.d_min() / (16.0 * gadget.d_max());
                let mut solved = None;
                // the gadget entry vertex must be certified; tighten on failure
                for _ in 0..6 {
                    let cfg = SolverConfig::new(eps, kappa, run_seed);
                    let report = drw_lsolve(&gadget, &b, &cfg)?;
                    rounds += report.data_rounds + report.control_rounds;
                    if report.guaranteed[nv] {
                        solved = Some(report.x);
                        break;
                    }
                    kappa /= 2.0;
                }
                solved.ok_or_else(|| {
                    Error::Internal("gadget entry vertex unguaranteed after kappa retries".into())
                })?
            }
        };
        let x_entry = x[nv];
        if x_entry <= 0.0 {
            return Err(Error::Internal("nonpositive gadget entry potential".into()));
        }
        for v in 0..nv {
            raw[v][e] = (x[v] / x_entry).max(0.0);
        }
    }

    let raw_sums: Vec<f64> = raw.iter().map(|row| row.iter().sum()).collect();
    let p = raw
        .into_iter()
        .zip(&raw_sums)
        .map(|(row, &s)| {
            if s > 0.0 {
                row.into_iter().map(|v| v / s).collect()
            } else {
                row
            }
        })
        .collect();
    Ok(PartitionExits { verts, boundary, p, raw_sums, rounds })
}

/// A validated spanning tree: `n-1` edges, acyclic, covering every vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTree {
    pub edges: Vec<(usize, usize)>,
}

impl SpanningTree {
    /// Normalize, then check the tree conditions.
    pub fn validate(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> =
            edges.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
        edges.sort_unstable();
        if edges.len() != n - 1 {
            return Err(Error::Validation(format!(
                "{} edges, a spanning tree of {n} vertices needs {}",
                edges.len(),
                n - 1
            )));
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!("edge ({u},{v}) out of range")));
            }
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru == rv {
                return Err(Error::Validation(format!("cycle through edge ({u},{v})")));
            }
            parent[ru] = rv;
        }
        Ok(Self { edges })
    }
}

fn pick_neighbor(rng: &mut SimRng, adj: &[(usize, f64)], total: f64) -> usize {
    let mut target = rng.next_f64() * total;
    let mut dest = adj[adj.len() - 1].0;
    for &(v, w) in adj {
        target -= w;
        if target < 0.0 {
            dest = v;
            break;
        }
    }
    dest
}

fn cover_cap(g: &WeightedGraph) -> u64 {
    100 * g.m() as u64 * g.diameter().max(1) as u64
}

/// Plain Aldous-Broder on the whole graph, drawing from the same walk
/// substream as [`sample_rst`]. With an all-singleton decomposition the full
/// pipeline reproduces this tree bit for bit.
pub fn plain_walk(g: &WeightedGraph, seed: u64) -> Result<SpanningTree> {
    let mut rng = SimRng::from_parts(seed, &[LBL_WALK]);
    aldous_broder(g, &mut rng)
}

/// Plain Aldous-Broder on the whole graph: walk from a uniform start until
/// every vertex is seen; the first-entry edges form a uniform spanning tree.
pub fn aldous_broder(g: &WeightedGraph, rng: &mut SimRng) -> Result<SpanningTree> {
    let n = g.n();
    let mut cur = rng.next_range(n);
    let mut seen = vec![false; n];
    seen[cur] = true;
    let mut remaining = n - 1;
    let mut edges = Vec::with_capacity(n - 1);
    let cap = cover_cap(g);
    for _ in 0..cap {
        if remaining == 0 {
            return SpanningTree::validate(n, edges);
        }
        let next = pick_neighbor(rng, g.neighbors(cur), g.degree(cur));
        if !seen[next] {
            seen[next] = true;
            remaining -= 1;
            edges.push((cur, next));
        }
        cur = next;
    }
    Err(Error::Internal(format!("walk exceeded cover-time cap {cap}")))
}

/// Aldous-Broder inside one partition; returns global edge ids and the
/// number of walk steps taken. Singletons need no walk and draw nothing.
pub fn partition_tree(
    g: &WeightedGraph,
    dec: &Decomposition,
    i: usize,
    rng: &mut SimRng,
) -> Result<(Vec<(usize, usize)>, u64)> {
    let mem = &dec.members[i];
    if mem.len() == 1 {
        return Ok((Vec::new(), 0));
    }
    // local adjacency restricted to the cluster
    let adj: Vec<Vec<(usize, f64)>> = mem
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .iter()
                .filter(|&&(w, _)| dec.partition[w] == i)
                .cloned()
                .collect()
        })
        .collect();
    let local = |v: usize| mem.binary_search(&v).unwrap();
    let degs: Vec<f64> = adj.iter().map(|a| a.iter().map(|&(_, w)| w).sum()).collect();
    let mut cur = rng.next_range(mem.len());
    let mut seen = vec![false; mem.len()];
    seen[cur] = true;
    let mut remaining = mem.len() - 1;
    let mut edges = Vec::new();
    let cap = cover_cap(g);
    let mut steps = 0;
    while remaining > 0 {
        if steps >= cap {
            return Err(Error::Internal(format!("cluster walk exceeded cover-time cap {cap}")));
        }
        let next_global = pick_neighbor(rng, &adj[cur], degs[cur]);
        let next = local(next_global);
        if !seen[next] {
            seen[next] = true;
            remaining -= 1;
            edges.push((mem[cur], next_global));
        }
        cur = next;
        steps += 1;
    }
    Ok((edges, steps))
}

/// How the reduced walk chooses exit edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WalkMode {
    /// transition mass aggregated over all entry vertices (the listed
    /// formula)
    #[default]
    Aggregated,
    /// exit sampled from the actual entry vertex's row; for comparison
    /// experiments
    EntryConditioned,
}

/// Result of the reduced-graph walk: the super-tree plus the concrete cut
/// edge fixed for each super-edge.
#[derive(Clone, Debug)]
pub struct ReducedWalkOutcome {
    pub super_edges: Vec<(usize, usize)>,
    pub physical: Vec<(usize, usize)>,
    pub steps: u64,
    /// model rounds: each reduced step traverses the cluster, costed at its
    /// diameter
    pub rounds: u64,
}

/// Walk on the partition graph until every partition is visited; first-entry
/// super-edges and their sampled cut edges form the connecting tree.
pub fn reduced_walk(
    g: &WeightedGraph,
    dec: &Decomposition,
    table: &ExitTable,
    mode: WalkMode,
    rng: &mut SimRng,
) -> Result<ReducedWalkOutcome> {
    let k = dec.k();
    if k == 1 {
        return Ok(ReducedWalkOutcome { super_edges: Vec::new(), physical: Vec::new(), steps: 0, rounds: 0 });
    }
    // aggregated mass per boundary edge: sum of the normalized rows
    let masses: Vec<Vec<f64>> = table
        .parts
        .iter()
        .map(|pe| {
            (0..pe.boundary.len())
                .map(|e| pe.p.iter().map(|row| row[e]).sum())
                .collect()
        })
        .collect();
    let totals: Vec<f64> = masses.iter().map(|m| m.iter().sum()).collect();

    let mut cur = rng.next_range(k);
    // entry vertex for the entry-conditioned mode; the start has no entry
    // edge, so the leader stands in
    let mut entry = dec.leaders[cur];
    let mut seen = vec![false; k];
    seen[cur] = true;
    let mut remaining = k - 1;
    let mut super_edges = Vec::with_capacity(k - 1);
    let mut physical = Vec::with_capacity(k - 1);
    let cap = cover_cap(g);
    let mut steps = 0;
    let mut rounds = 0;
    while remaining > 0 {
        if steps >= cap {
            return Err(Error::Internal(format!("reduced walk exceeded cover-time cap {cap}")));
        }
        let pe = &table.parts[cur];
        let (inside, outside, _) = if dec.members[cur].len() == 1 {
            // a singleton's aggregated formula collapses to a w-proportional
            // neighbor choice on its own edges
            let v = dec.members[cur][0];
            let w = pick_neighbor(rng, g.neighbors(v), g.degree(v));
            let wt = g.neighbors(v).iter().find(|&&(x, _)| x == w).unwrap().1;
            (v, w, wt)
        } else {
            let e = match mode {
                WalkMode::Aggregated => {
                    if pe.boundary.len() == 1 {
                        0
                    } else {
                        rng.pick_weighted(&masses[cur], totals[cur])
                    }
                }
                WalkMode::EntryConditioned => {
                    let row = &pe.p[pe.verts.binary_search(&entry).unwrap()];
                    if pe.boundary.len() == 1 {
                        0
                    } else {
                        rng.pick_weighted(row, row.iter().sum())
                    }
                }
            };
            pe.boundary[e]
        };
        let next = dec.partition[outside];
        if !seen[next] {
            seen[next] = true;
            remaining -= 1;
            super_edges.push((cur, next));
            physical.push((inside, outside));
        }
        rounds += dec.diameters[cur].max(1) as u64;
        cur = next;
        entry = outside;
        steps += 1;
    }
    Ok(ReducedWalkOutcome { super_edges, physical, steps, rounds })
}

/// Sampler configuration; `phi` defaults to `1/sqrt(n)`.
#[derive(Clone, Copy, Debug)]
pub struct RstConfig {
    pub eps: f64,
    pub phi: Option<f64>,
    pub seed: u64,
    pub exit_mode: ExitModeChoice,
    pub walk_mode: WalkMode,
}

/// `ExitMode` without the derived seed, for configuration surfaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitModeChoice {
    Oracle,
    Solver,
}

impl RstConfig {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self { eps, phi: None, seed, exit_mode: ExitModeChoice::Oracle, walk_mode: WalkMode::Aggregated }
    }
}

/// Sampler run summary for serialization.
#[derive(Clone, Debug, Serialize)]
pub struct RstReport {
    pub seed: u64,
    pub phi: f64,
    pub eps: f64,
    pub partitions: usize,
    pub cut_edges: usize,
    pub rounds: u64,
    pub model_time: f64,
}

/// Full pipeline: decompose, exit tables, per-partition trees, reduced walk,
/// union, validate.
pub fn sample_rst(g: &WeightedGraph, cfg: &RstConfig) -> Result<(SpanningTree, RstReport)> {
    let phi = cfg.phi.unwrap_or(1.0 / (g.n() as f64).sqrt());
    let dec = decompose(g, phi, cfg.seed)?;
    sample_rst_with_decomposition(g, &dec, cfg)
}

/// Pipeline after a fixed decomposition (test hooks use degenerate ones).
pub fn sample_rst_with_decomposition(
    g: &WeightedGraph,
    dec: &Decomposition,
    cfg: &RstConfig,
) -> Result<(SpanningTree, RstReport)> {
    let exit_mode = match cfg.exit_mode {
        ExitModeChoice::Oracle => ExitMode::Oracle,
        ExitModeChoice::Solver => ExitMode::Solver { eps: cfg.eps, seed: cfg.seed },
    };
    let table = build_exit_table(g, dec, exit_mode)?;
    let mut rounds: u64 = table.parts.iter().map(|p| p.rounds).sum();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(g.n() - 1);
    for i in 0..dec.k() {
        let mut rng = SimRng::from_parts(cfg.seed, &[LBL_TREE, i as u64]);
        let (tree_edges, steps) = partition_tree(g, dec, i, &mut rng)?;
        edges.extend(tree_edges);
        rounds += steps;
    }
    let mut walk_rng = SimRng::from_parts(cfg.seed, &[LBL_WALK]);
    let walk = reduced_walk(g, dec, &table, cfg.walk_mode, &mut walk_rng)?;
    edges.extend(walk.physical);
    rounds += walk.rounds;
    let tree = SpanningTree::validate(g.n(), edges)?;
    Ok((
        tree,
        RstReport {
            seed: cfg.seed,
            phi: dec.phi,
            eps: cfg.eps,
            partitions: dec.k(),
            cut_edges: dec.cut_edges.len(),
            rounds,
            model_time: rounds as f64 * g.d_max(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;

    fn degenerate(g: &WeightedGraph) -> Decomposition {
        decompose_with_shifts(g, 0.5, &vec![0.0; g.n()]).unwrap()
    }

    #[test]
    fn zero_shifts_give_singletons() {
        let g = GraphKind::Grid(3).build(0).unwrap();
        let dec = degenerate(&g);
        assert_eq!(dec.k(), 9);
        assert_eq!(dec.cut_edges.len(), g.m());
        for (i, mem) in dec.members.iter().enumerate() {
            assert_eq!(mem, &vec![i]);
        }
    }

    #[test]
    fn decomposition_covers_and_connects() {
        for seed in 0..20 {
            let g = GraphKind::Grid(4).build(0).unwrap();
            let dec = decompose(&g, 0.4, seed).unwrap();
            let total: usize = dec.members.iter().map(Vec::len).sum();
            assert_eq!(total, 16);
            for mem in &dec.members {
                // connectivity: BFS from the first member reaches all
                let pid = dec.partition[mem[0]];
                let mut seen = vec![false; 16];
                seen[mem[0]] = true;
                let mut stack = vec![mem[0]];
                while let Some(v) = stack.pop() {
                    for &(w, _) in g.neighbors(v) {
                        if dec.partition[w] == pid && !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
                assert!(mem.iter().all(|&v| seen[v]));
            }
            // cut edges are exactly the cross-partition edges
            for &(u, v, _) in &dec.cut_edges {
                assert_ne!(dec.partition[u], dec.partition[v]);
            }
            let cross = g
                .edges()
                .iter()
                .filter(|&&(u, v, _)| dec.partition[u] != dec.partition[v])
                .count();
            assert_eq!(cross, dec.cut_edges.len());
        }
    }

    #[test]
    fn cut_fraction_and_diameter_scale_with_phi() {
        let g = GraphKind::Grid(8).build(0).unwrap();
        let phi = 0.5;
        let mut cut_sum = 0.0;
        let mut max_diam = 0;
        for seed in 0..100 {
            let dec = decompose(&g, phi, seed).unwrap();
            cut_sum += dec.cut_edges.len() as f64;
            max_diam = max_diam.max(*dec.diameters.iter().max().unwrap());
        }
        let mean_cut = cut_sum / 100.0;
        let c = mean_cut / (phi * g.m() as f64);
        let c_diam = max_diam as f64 / ((g.n() as f64).ln() / phi);
        println!("mean |C| = {mean_cut:.1}, c = {c:.2}, max diam = {max_diam}, c' = {c_diam:.2}");
        assert!(c <= 4.0, "cut constant {c}");
        assert!(c_diam <= 4.0, "diameter constant {c_diam}");
    }

    #[test]
    fn singleton_exits_match_weights() {
        // vertex 1 of a weighted star: boundary weights 1 and 3
        let g = WeightedGraph::from_edges(3, vec![(0, 1, 1.0), (1, 2, 3.0)]).unwrap();
        let dec = degenerate(&g);
        let pid = dec.partition[1];
        let pe = exit_distributions(&g, &dec, pid, ExitMode::Oracle).unwrap();
        assert_eq!(pe.boundary.len(), 2);
        assert!((pe.p[0][0] - 0.25).abs() < 1e-9);
        assert!((pe.p[0][1] - 0.75).abs() < 1e-9);

        let g = GraphKind::Path(3).build(0).unwrap();
        let dec = degenerate(&g);
        let pe = exit_distributions(&g, &dec, 1, ExitMode::Oracle).unwrap();
        assert!((pe.p[0][0] - 0.5).abs() < 1e-9);
        assert!((pe.p[0][1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn path_cluster_exits_are_monotone() {
        // cluster {1,2} inside P4 has one boundary edge on each side; the
        // vertex adjacent to an exit leans toward it
        // larger shift = earlier launch; 1 claims 2, while 0 and 3 launch
        // before 1's wave arrives
        let g = GraphKind::Path(4).build(0).unwrap();
        let shifts = [9.5, 10.0, 0.0, 9.5];
        let dec = decompose_with_shifts(&g, 0.5, &shifts).unwrap();
        let pid = dec.partition[1];
        assert_eq!(dec.members[pid], vec![1, 2]);
        let pe = exit_distributions(&g, &dec, pid, ExitMode::Oracle).unwrap();
        let left = pe.boundary.iter().position(|&(_, o, _)| o == 0).unwrap();
        // row sums are 1, so compare the left-exit column across vertices
        assert!(pe.p[0][left] > pe.p[1][left]);
        for s in &pe.raw_sums {
            assert!((s - 1.0).abs() < 1e-9, "oracle raw sum {s}");
        }
    }

    #[test]
    fn solver_mode_matches_oracle_roughly() {
        let g = GraphKind::Path(4).build(0).unwrap();
        let shifts = [9.5, 10.0, 0.0, 9.5];
        let dec = decompose_with_shifts(&g, 0.5, &shifts).unwrap();
        let pid = dec.partition[1];
        let exact = exit_distributions(&g, &dec, pid, ExitMode::Oracle).unwrap();
        let est = exit_distributions(&g, &dec, pid, ExitMode::Solver { eps: 0.1, seed: 7 }).unwrap();
        assert!(est.rounds > 0);
        for (re, rr) in exact.p.iter().zip(&est.p) {
            for (a, b) in re.iter().zip(rr) {
                assert!((a - b).abs() < 0.15, "exit prob {a} vs {b}");
            }
        }
    }

    #[test]
    fn partition_tree_cases() {
        let g = GraphKind::Grid(3).build(0).unwrap();
        let dec = degenerate(&g);
        let mut rng = SimRng::new(1);
        let (edges, steps) = partition_tree(&g, &dec, 0, &mut rng).unwrap();
        assert!(edges.is_empty());
        assert_eq!(steps, 0);

        // a cluster that is a tree has exactly one spanning tree
        let g = GraphKind::BinaryTree(7).build(0).unwrap();
        let dec = decompose_with_shifts(&g, 0.5, &[100.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dec.k(), 1);
        for seed in 0..5 {
            let mut rng = SimRng::new(seed);
            let (edges, _) = partition_tree(&g, &dec, 0, &mut rng).unwrap();
            let tree = SpanningTree::validate(7, edges).unwrap();
            let want: Vec<(usize, usize)> = g.edges().iter().map(|&(u, v, _)| (u, v)).collect();
            assert_eq!(tree.edges, want);
        }
    }

    #[test]
    fn triangle_partition_trees_are_uniform() {
        let g = GraphKind::Complete(3).build(0).unwrap();
        let dec = decompose_with_shifts(&g, 0.5, &[100.0, 0.0, 0.0]).unwrap();
        assert_eq!(dec.k(), 1);
        let mut counts = std::collections::HashMap::new();
        let reps = 3000;
        for seed in 0..reps {
            let mut rng = SimRng::from_parts(seed, &[9]);
            let (edges, _) = partition_tree(&g, &dec, 0, &mut rng).unwrap();
            let tree = SpanningTree::validate(3, edges).unwrap();
            *counts.entry(tree.edges).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 3);
        for (_, c) in counts {
            let f = c as f64 / reps as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.03, "tree frequency {f}");
        }
    }

    #[test]
    fn reduced_walk_two_partitions() {
        let g = GraphKind::Path(4).build(0).unwrap();
        let shifts = [10.0, 0.0, 9.0, 0.0];
        let dec = decompose_with_shifts(&g, 0.5, &shifts).unwrap();
        assert_eq!(dec.k(), 2);
        let table = build_exit_table(&g, &dec, ExitMode::Oracle).unwrap();
        let mut rng = SimRng::new(3);
        let walk = reduced_walk(&g, &dec, &table, WalkMode::Aggregated, &mut rng).unwrap();
        assert_eq!(walk.super_edges.len(), 1);
        let (a, b) = walk.physical[0];
        assert_eq!((a.min(b), a.max(b)), (1, 2));
    }

    #[test]
    fn degenerate_pipeline_equals_plain_walk() {
        let g = GraphKind::Grid(3).build(0).unwrap();
        for seed in 0..20 {
            let dec = degenerate(&g);
            let cfg = RstConfig { eps: 0.1, phi: None, seed, exit_mode: ExitModeChoice::Oracle, walk_mode: WalkMode::Aggregated };
            let (tree, _) = sample_rst_with_decomposition(&g, &dec, &cfg).unwrap();
            let mut rng = SimRng::from_parts(seed, &[LBL_WALK]);
            let plain = aldous_broder(&g, &mut rng).unwrap();
            assert_eq!(tree, plain, "seed {seed}");
        }
    }

    #[test]
    fn sampled_trees_validate() {
        for kind in ["grid:4", "k5", "path:10", "er:12:0.4"] {
            let g = GraphKind::parse(kind).unwrap().build(5).unwrap();
            for seed in 0..10 {
                let cfg = RstConfig::new(0.1, seed);
                let (tree, report) = sample_rst(&g, &cfg).unwrap();
                assert_eq!(tree.edges.len(), g.n() - 1);
                assert!(report.partitions >= 1);
            }
        }
    }

    #[test]
    fn tree_input_always_returns_itself() {
        let g = GraphKind::BinaryTree(7).build(0).unwrap();
        let want: Vec<(usize, usize)> = g.edges().iter().map(|&(u, v, _)| (u, v)).collect();
        for seed in 0..10 {
            let cfg = RstConfig::new(0.1, seed);
            let (tree, _) = sample_rst(&g, &cfg).unwrap();
            assert_eq!(tree.edges, want);
        }
    }

    #[test]
    fn entry_conditioned_mode_runs() {
        let g = GraphKind::Grid(4).build(0).unwrap();
        let mut cfg = RstConfig::new(0.1, 12);
        cfg.walk_mode = WalkMode::EntryConditioned;
        cfg.phi = Some(0.3);
        let (tree, _) = sample_rst(&g, &cfg).unwrap();
        assert_eq!(tree.edges.len(), 15);
    }

    #[test]
    fn validator_rejects_bad_trees() {
        assert!(SpanningTree::validate(3, vec![(0, 1)]).is_err());
        assert!(SpanningTree::validate(3, vec![(0, 1), (0, 1)]).is_err());
        assert!(SpanningTree::validate(4, vec![(0, 1), (1, 2), (0, 2)]).is_err());
        assert!(SpanningTree::validate(3, vec![(0, 1), (1, 2)]).is_ok());
    }

    #[test]
    fn k3_sampling_is_near_uniform() {
        let g = GraphKind::Complete(3).build(0).unwrap();
        let mut counts = std::collections::HashMap::new();
        let reps = 3000u64;
        for seed in 0..reps {
            let cfg = RstConfig::new(0.1, seed);
            let (tree, _) = sample_rst(&g, &cfg).unwrap();
            *counts.entry(tree.edges).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 3);
        let se = (1.0 / 3.0 * 2.0 / 3.0 / reps as f64).sqrt();
        for (_, c) in counts {
            let f = c as f64 / reps as f64;
            assert!((f - 1.0 / 3.0).abs() < 3.0 * se + 0.1 / 3.0, "frequency {f}");
        }
    }
}
