//! Exact desk-scale references: direct linear solves, hitting times, the
//! critical rate, spectra, and spanning-tree counts.
//!
//! Everything here is dense and O(n^3)-ish; it is meant for graphs up to a
//! few hundred vertices, where it anchors the statistical tests of the
//! simulated solver.

use crate::error::{Error, Result};
use crate::graph::{OneSinkSystem, WeightedGraph};
use crate::par;

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
/// `a` is consumed as workspace.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::Internal("singular system in exact solve".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

/// Exact solution of `x^T L = b^T` with a tagged method.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub x: Vec<f64>,
    pub method: &'static str,
}

fn delete_row_col(mat: &[Vec<f64>], skip: usize) -> Vec<Vec<f64>> {
    let n = mat.len();
    let mut out = Vec::with_capacity(n - 1);
    for r in 0..n {
        if r == skip {
            continue;
        }
        let mut row = Vec::with_capacity(n - 1);
        for c in 0..n {
            if c != skip {
                row.push(mat[r][c]);
            }
        }
        out.push(row);
    }
    out
}

fn expand(reduced: &[f64], skip: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(reduced.len() + 1);
    let mut it = reduced.iter();
    for i in 0..=reduced.len() {
        if i == skip {
            out.push(0.0);
        } else {
            out.push(*it.next().unwrap());
        }
    }
    out
}

/// Solve `x^T L = b^T` with `x[pin] = 0` by deleting the pinned row/column
/// and eliminating the reduced nonsingular system.
pub fn exact_solve_pinned(g: &WeightedGraph, b: &[f64], pin: usize) -> Result<ExactSolution> {
    let l = delete_row_col(&g.laplacian(), pin);
    let b_red: Vec<f64> = b
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pin)
        .map(|(_, &x)| x)
        .collect();
    // L is symmetric so x^T L = b^T is L x = b
    let x = solve_dense(l, b_red)?;
    Ok(ExactSolution {
        x: expand(&x, pin),
        method: "reduced-elimination",
    })
}

/// One-sink exact solve; the sink coordinate is pinned to zero.
pub fn exact_solve(g: &WeightedGraph, sys: &OneSinkSystem) -> Result<ExactSolution> {
    exact_solve_pinned(g, sys.b(), sys.sink())
}

/// Steady-state queue occupancies at rate `beta`.
#[derive(Clone, Debug)]
pub struct Occupancy {
    pub eta: Vec<f64>,
    /// True when some occupancy reached 1, i.e. `beta >= beta*`.
    pub unstable: bool,
}

/// Solve `eta^T (I - P) = beta J^T` with `eta[sink] = 0`.
pub fn exact_occupancy(g: &WeightedGraph, sink: usize, j: &[f64], beta: f64) -> Result<Occupancy> {
    let n = g.n();
    let p = g.transition_matrix();
    // (I - P)^T restricted to non-sink rows/columns
    let mut a = vec![vec![0.0; n - 1]; n - 1];
    let keep: Vec<usize> = (0..n).filter(|&v| v != sink).collect();
    for (r, &v) in keep.iter().enumerate() {
        for (c, &u) in keep.iter().enumerate() {
            let iden = if u == v { 1.0 } else { 0.0 };
            a[r][c] = iden - p[u][v];
        }
    }
    let rhs: Vec<f64> = keep.iter().map(|&v| beta * j[v]).collect();
    let eta_red = solve_dense(a, rhs)?;
    let eta = expand(&eta_red, sink);
    let unstable = eta.iter().any(|&e| e >= 1.0);
    Ok(Occupancy { eta, unstable })
}

/// Lower bound on the critical rate: `lambda_2 / (2 d_max sum_{v!=sink} J_v)`.
pub fn rate_lower_bound(g: &WeightedGraph, sink: usize, j: &[f64]) -> f64 {
    let j_sum: f64 = j.iter().enumerate().filter(|&(v, _)| v != sink).map(|(_, &x)| x).sum();
    lambda2(g) / (2.0 * g.d_max() * j_sum)
}

/// Critical rate `beta*`. Occupancies are linear in `beta`, so one solve at a
/// provably stable probe rate determines the rate at which the maximum
/// occupancy reaches 1.
pub fn exact_beta_star(g: &WeightedGraph, sink: usize, j: &[f64]) -> Result<f64> {
    let probe = rate_lower_bound(g, sink, j).min(0.5) / 2.0;
    let occ = exact_occupancy(g, sink, j, probe)?;
    let max = occ.eta.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::Internal("zero occupancy at positive probe rate".into()));
    }
    Ok(probe / max)
}

/// Expected steps for the natural walk to first reach `target`, per start.
pub fn hitting_times(g: &WeightedGraph, target: usize) -> Result<Vec<f64>> {
    let n = g.n();
    let p = g.transition_matrix();
    let keep: Vec<usize> = (0..n).filter(|&v| v != target).collect();
    let mut a = vec![vec![0.0; n - 1]; n - 1];
    for (r, &u) in keep.iter().enumerate() {
        for (c, &v) in keep.iter().enumerate() {
            let iden = if u == v { 1.0 } else { 0.0 };
            a[r][c] = iden - p[u][v];
        }
    }
    let h = solve_dense(a, vec![1.0; n - 1])?;
    Ok(expand(&h, target))
}

/// `t_hit`: the worst expected hitting time over all (start, target) pairs.
pub fn worst_case_hitting_time(g: &WeightedGraph) -> Result<f64> {
    let per_target: Vec<f64> = par::try_map(0..g.n(), |t| {
        Ok(hitting_times(g, t)?.iter().cloned().fold(0.0, f64::max))
    })?;
    Ok(per_target.into_iter().fold(0.0, f64::max))
}

pub fn effective_resistance_exact(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    let mut b = vec![0.0; g.n()];
    b[u] = 1.0;
    b[v] = -1.0;
    let sol = exact_solve(g, &OneSinkSystem::new(b)?)?;
    Ok(sol.x[u] - sol.x[v])
}

/// Matrix-tree count: determinant of the Laplacian with one row/column
/// removed, rounded to the nearest integer (unit-weight use).
pub fn spanning_tree_count(g: &WeightedGraph) -> u64 {
    determinant(delete_row_col(&g.laplacian(), 0)).round() as u64
}

/// Explicit enumeration for tiny graphs (`n <= 8`, `m <= 16`): every
/// (n-1)-subset of edges that forms a spanning tree.
pub fn enumerate_spanning_trees(g: &WeightedGraph) -> Result<Vec<Vec<(usize, usize)>>> {
    let n = g.n();
    let m = g.m();
    if n > 8 || m > 16 {
        return Err(Error::InvalidArgument(format!(
            "enumeration capped at n<=8, m<=16 (got n={n}, m={m})"
        )));
    }
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(u, v, _)| (u, v)).collect();
    let mut trees = Vec::new();
    for mask in 0u32..1 << m {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let subset: Vec<(usize, usize)> = (0..m).filter(|&i| mask >> i & 1 == 1).map(|i| edges[i]).collect();
        if spans(n, &subset) {
            trees.push(subset);
        }
    }
    Ok(trees)
}

fn spans(n: usize, edges: &[(usize, usize)]) -> bool {
    // union-find over n vertices; n-1 edges span iff no cycle forms
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            return false;
        }
        parent[ru] = rv;
    }
    true
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    if n == 1 {
        return vec![a[0][0]];
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Second-smallest Laplacian eigenvalue (algebraic connectivity).
pub fn lambda2(g: &WeightedGraph) -> f64 {
    jacobi_eigenvalues(g.laplacian())[1]
}
