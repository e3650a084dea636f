//! Undirected weighted graphs, standard generators, and derived matrices.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Connected undirected weighted graph over dense vertex ids `0..n`.
///
/// Immutable after construction; generalized degrees and their extremes are
/// cached at build time.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    adj: Vec<Vec<(usize, f64)>>,
    deg: Vec<f64>,
    d_max: f64,
    d_min: f64,
}

impl WeightedGraph {
    /// Build from an edge list. Rejects self-loops, duplicates, nonpositive
    /// weights, and disconnected graphs.
    pub fn from_edges(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "graph needs at least 2 vertices, got {n}"
            )));
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        for &(u, v, w) in &edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u},{v}) out of range for n={n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at {u}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u},{v}) has nonpositive weight {w}"
                )));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({u},{v})")));
            }
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        for nbrs in &mut adj {
            nbrs.sort_by_key(|&(v, _)| v);
        }
        let deg: Vec<f64> = adj
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(_, w)| w).sum())
            .collect();
        if deg.iter().any(|&d| d <= 0.0) {
            return Err(Error::InvalidArgument("isolated vertex".into()));
        }
        let g = Self {
            n,
            edges,
            adj,
            d_max: deg.iter().cloned().fold(f64::MIN, f64::max),
            d_min: deg.iter().cloned().fold(f64::MAX, f64::min),
            deg,
        };
        if !g.is_connected() {
            return Err(Error::InvalidArgument("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adj[u]
    }

    pub fn degree(&self, u: usize) -> f64 {
        self.deg[u]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.deg
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(|&d| d != usize::MAX)
    }

    /// Hop distances from `root` (`usize::MAX` = unreachable).
    pub fn bfs_distances(&self, root: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut q = VecDeque::new();
        dist[root] = 0;
        q.push_back(root);
        while let Some(u) = q.pop_front() {
            for &(v, _) in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        dist
    }

    /// Hop diameter.
    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|u| *self.bfs_distances(u).iter().max().unwrap())
            .max()
            .unwrap()
    }

    /// Dense Laplacian `L = D - A`.
    pub fn laplacian(&self) -> Vec<Vec<f64>> {
        let mut l = vec![vec![0.0; self.n]; self.n];
        for u in 0..self.n {
            l[u][u] = self.deg[u];
            for &(v, w) in &self.adj[u] {
                l[u][v] = -w;
            }
        }
        l
    }

    /// Row-stochastic natural random walk matrix `P = D^{-1} A`.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let mut p = vec![vec![0.0; self.n]; self.n];
        for u in 0..self.n {
            for &(v, w) in &self.adj[u] {
                p[u][v] = w / self.deg[u];
            }
        }
        p
    }

    /// Induced subgraph on `verts` plus the old-id -> new-id map.
    /// The subgraph keeps `verts` order for its new ids. Errors if the
    /// induced graph is disconnected or too small.
    pub fn induced(&self, verts: &[usize]) -> Result<(WeightedGraph, Vec<usize>)> {
        let mut map = vec![usize::MAX; self.n];
        for (i, &v) in verts.iter().enumerate() {
            map[v] = i;
        }
        let mut edges = Vec::new();
        for &(u, v, w) in &self.edges {
            if map[u] != usize::MAX && map[v] != usize::MAX {
                edges.push((map[u], map[v], w));
            }
        }
        let g = WeightedGraph::from_edges(verts.len(), edges)?;
        Ok((g, map))
    }

    /// Plain-text serialization: first line `n m`, then `u v w` per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for &(u, v, w) in &self.edges {
            let _ = writeln!(out, "{u} {v} {w}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let mut it = header.split_whitespace();
        let n: usize = parse_tok(it.next(), "n")?;
        let m: usize = parse_tok(it.next(), "m")?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let mut it = line.split_whitespace();
            let u: usize = parse_tok(it.next(), "u")?;
            let v: usize = parse_tok(it.next(), "v")?;
            let w: f64 = parse_tok(it.next(), "w")?;
            edges.push((u, v, w));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!(
                "header says {m} edges, file has {}",
                edges.len()
            )));
        }
        Self::from_edges(n, edges)
    }
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

/// Graph families used by the generators and the CLI.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphKind {
    Path(usize),
    Complete(usize),
    Star(usize),
    /// `side x side` grid.
    Grid(usize),
    BinaryTree(usize),
    ErdosRenyi(usize, f64),
}

impl GraphKind {
    /// Parse specs like `path:10`, `complete:5`, `k3`, `star:6`, `grid:4`,
    /// `tree:7`, `er:20:0.3`.
    pub fn parse(spec: &str) -> Result<Self> {
        let err = || Error::InvalidArgument(format!("bad graph spec '{spec}'"));
        if let Some(rest) = spec.strip_prefix('k') {
            if let Ok(n) = rest.parse() {
                return Ok(GraphKind::Complete(n));
            }
        }
        let mut parts = spec.split(':');
        let kind = parts.next().ok_or_else(err)?;
        let arg = |p: Option<&str>| -> Result<usize> { p.ok_or_else(err)?.parse().map_err(|_| err()) };
        match kind {
            "path" => Ok(GraphKind::Path(arg(parts.next())?)),
            "complete" => Ok(GraphKind::Complete(arg(parts.next())?)),
            "star" => Ok(GraphKind::Star(arg(parts.next())?)),
            "grid" => Ok(GraphKind::Grid(arg(parts.next())?)),
            "tree" => Ok(GraphKind::BinaryTree(arg(parts.next())?)),
            "er" => {
                let n = arg(parts.next())?;
                let p: f64 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
                Ok(GraphKind::ErdosRenyi(n, p))
            }
            _ => Err(err()),
        }
    }

    /// Build the graph with unit weights. `seed` only matters for
    /// Erdős–Rényi, which retries with fresh derived seeds until connected.
    pub fn build(&self, seed: u64) -> Result<WeightedGraph> {
        match *self {
            GraphKind::Path(n) => {
                let edges = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
                WeightedGraph::from_edges(n, edges)
            }
            GraphKind::Complete(n) => {
                let mut edges = Vec::new();
                for u in 0..n {
                    for v in u + 1..n {
                        edges.push((u, v, 1.0));
                    }
                }
                WeightedGraph::from_edges(n, edges)
            }
            GraphKind::Star(n) => {
                let edges = (1..n).map(|i| (0, i, 1.0)).collect();
                WeightedGraph::from_edges(n, edges)
            }
            GraphKind::Grid(side) => {
                if side < 2 {
                    return Err(Error::InvalidArgument("grid side must be >= 2".into()));
                }
                let idx = |r: usize, c: usize| r * side + c;
                let mut edges = Vec::new();
                for r in 0..side {
                    for c in 0..side {
                        if c + 1 < side {
                            edges.push((idx(r, c), idx(r, c + 1), 1.0));
                        }
                        if r + 1 < side {
                            edges.push((idx(r, c), idx(r + 1, c), 1.0));
                        }
                    }
                }
                WeightedGraph::from_edges(side * side, edges)
            }
            GraphKind::BinaryTree(n) => {
                let edges = (1..n).map(|i| ((i - 1) / 2, i, 1.0)).collect();
                WeightedGraph::from_edges(n, edges)
            }
            GraphKind::ErdosRenyi(n, p) => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::InvalidArgument(format!("p={p} not in (0,1]")));
                }
                const RETRIES: u64 = 64;
                for attempt in 0..RETRIES {
                    let mut rng = SimRng::from_parts(seed, &[0x6572, attempt]);
                    let mut edges = Vec::new();
                    for u in 0..n {
                        for v in u + 1..n {
                            if rng.next_f64() < p {
                                edges.push((u, v, 1.0));
                            }
                        }
                    }
                    if let Ok(g) = WeightedGraph::from_edges(n, edges) {
                        return Ok(g);
                    }
                }
                Err(Error::Generation(format!(
                    "er({n},{p}) disconnected after {RETRIES} attempts"
                )))
            }
        }
    }
}

/// A right-hand side with exactly one negative coordinate (the sink) and the
/// relative rate vector derived from it.
#[derive(Clone, Debug)]
pub struct OneSinkSystem {
    b: Vec<f64>,
    sink: usize,
    sources: Vec<usize>,
    j: Vec<f64>,
}

impl OneSinkSystem {
    /// Validate `b` and derive `J = b / sum_{v != sink} b_v` (so
    /// `J_sink = -1`).
    pub fn new(b: Vec<f64>) -> Result<Self> {
        let negatives: Vec<usize> = (0..b.len()).filter(|&i| b[i] < 0.0).collect();
        match negatives.len() {
            0 => {
                return Err(Error::Validation(
                    "one-sink vector needs exactly one negative coordinate, got none".into(),
                ))
            }
            1 => {}
            k => {
                return Err(Error::Validation(format!(
                    "one-sink vector needs exactly one negative coordinate, got {k}"
                )))
            }
        }
        let sink = negatives[0];
        let total: f64 = b.iter().sum();
        let scale: f64 = b.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        if total.abs() > 1e-9 * scale {
            return Err(Error::Validation(format!("b does not sum to zero ({total})")));
        }
        let pos_sum: f64 = b.iter().enumerate().filter(|&(i, _)| i != sink).map(|(_, &x)| x).sum();
        let j: Vec<f64> = b.iter().map(|&x| x / pos_sum).collect();
        let sources = (0..b.len()).filter(|&i| b[i] > 0.0).collect();
        Ok(Self { b, sink, sources, j })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Relative rates; nonnegative except `j[sink] = -1`.
    pub fn j(&self) -> &[f64] {
        &self.j
    }

    /// `sum_{v != sink} b_v`, the scale factor between `J` and `b`.
    pub fn source_sum(&self) -> f64 {
        self.b.iter().enumerate().filter(|&(i, _)| i != self.sink).map(|(_, &x)| x).sum()
    }
}
