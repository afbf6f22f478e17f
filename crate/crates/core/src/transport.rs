//! Exact discrete transport by the transportation simplex method.
//!
//! The basis is kept as a spanning tree over the n + m marginal nodes and
//! started from the north-west corner rule. Entering cells use Dantzig pricing
//! on the reduced costs `c_ij − u_i − v_j`; degenerate pivots are allowed.
//! Intended for small instances (tens of atoms per side).

use crate::{Error, Result};

/// An optimal plan together with the dual potentials of the final basis.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub cost: f64,
    /// Basic cells `(i, j, mass)`, including zero-mass degenerate ones.
    pub plan: Vec<(usize, usize, f64)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Cost matrix stored row-major, `rows × cols`.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

#[derive(Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    flow: f64,
}

pub fn solve(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<TransportSolution> {
    let (n, m) = (supply.len(), demand.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyMeasure);
    }
    if cost.rows != n || cost.cols != m {
        return Err(Error::ShapeMismatch(format!(
            "cost is {}x{}, marginals are {n} and {m}",
            cost.rows, cost.cols
        )));
    }
    let scale = cost.data.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1.0);
    let tol = 1e-13 * scale;

    let mut basis = north_west_corner(supply, demand);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let max_iter = 50 * (n * m + n + m);

    for _ in 0..max_iter {
        potentials(&basis, cost, n, m, &mut u, &mut v);

        let mut best = (-tol, usize::MAX, usize::MAX);
        for (i, ui) in u.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                let d = cost.get(i, j) - ui - vj;
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        let (_, ei, ej) = best;
        if ei == usize::MAX {
            let total = basis.iter().map(|c| c.flow * cost.get(c.i, c.j)).sum();
            return Ok(TransportSolution {
                cost: total,
                plan: basis.iter().map(|c| (c.i, c.j, c.flow)).collect(),
                u,
                v,
            });
        }

        // Path in the basis tree from row ei to column ej; edges alternate −, +, −, …
        let path = tree_path(&basis, n, m, ei, ej);
        let mut leave = usize::MAX;
        let mut theta = f64::INFINITY;
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 && basis[cell].flow < theta {
                theta = basis[cell].flow;
                leave = cell;
            }
        }
        let theta = theta.max(0.0);
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[cell].flow = (basis[cell].flow - theta).max(0.0);
            } else {
                basis[cell].flow += theta;
            }
        }
        basis[leave] = Cell { i: ei, j: ej, flow: theta };
    }
    Err(Error::NoConvergence(format!("transport simplex exceeded {max_iter} pivots")))
}

fn north_west_corner(supply: &[f64], demand: &[f64]) -> Vec<Cell> {
    let (n, m) = (supply.len(), demand.len());
    let mut cells = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (supply[0], demand[0]);
    loop {
        let flow = ra.min(rb).max(0.0);
        cells.push(Cell { i, j, flow });
        ra -= flow;
        rb -= flow;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if j == m - 1 || (i < n - 1 && ra < rb) {
            i += 1;
            ra = supply[i];
        } else {
            j += 1;
            rb = demand[j];
        }
    }
    cells
}

/// Node ids: rows are `0..n`, columns are `n..n+m`.
fn adjacency(basis: &[Cell], n: usize, m: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n + m];
    for (k, c) in basis.iter().enumerate() {
        adj[c.i].push((n + c.j, k));
        adj[n + c.j].push((c.i, k));
    }
    adj
}

fn potentials(basis: &[Cell], cost: &CostMatrix, n: usize, m: usize, u: &mut [f64], v: &mut [f64]) {
    let adj = adjacency(basis, n, m);
    let mut seen = vec![false; n + m];
    let mut stack = vec![0usize];
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = stack.pop() {
        for &(next, k) in &adj[node] {
            if seen[next] {
                continue;
            }
            seen[next] = true;
            let c = cost.get(basis[k].i, basis[k].j);
            if next >= n {
                v[next - n] = c - u[node];
            } else {
                u[next] = c - v[node - n];
            }
            stack.push(next);
        }
    }
}

/// Basis cells on the tree path from row `from` to column `to`, in order.
fn tree_path(basis: &[Cell], n: usize, m: usize, from: usize, to: usize) -> Vec<usize> {
    let adj = adjacency(basis, n, m);
    let target = n + to;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n + m];
    let mut seen = vec![false; n + m];
    let mut queue = std::collections::VecDeque::from([from]);
    seen[from] = true;
    while let Some(node) = queue.pop_front() {
        if node == target {
            break;
        }
        for &(next, k) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, k));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = target;
    while let Some((prev, k)) = parent[node] {
        path.push(k);
        node = prev;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_permutations(cost: &CostMatrix) -> f64 {
        fn rec(cost: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let n = cost.rows();
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost.get(row, j), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.rows()], 0.0, &mut best);
        best / cost.rows() as f64
    }

    #[test]
    fn single_cell() {
        let c = CostMatrix::from_fn(1, 1, |_, _| 9.0);
        let s = solve(&[1.0], &[1.0], &c).unwrap();
        assert_eq!(s.cost, 9.0);
    }

    #[test]
    fn uniform_marginals_match_permutation_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = 5;
            let c = CostMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..10.0));
            let w = vec![1.0 / n as f64; n];
            let s = solve(&w, &w, &c).unwrap();
            assert!((s.cost - brute_force_permutations(&c)).abs() < 1e-10);
        }
    }

    #[test]
    fn plan_has_correct_marginals_and_duals_are_feasible() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..8);
            let m = rng.gen_range(1..8);
            let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let mut b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let c = CostMatrix::from_fn(n, m, |_, _| rng.gen_range(0.0..5.0));
            let s = solve(&a, &b, &c).unwrap();
            let mut ra = vec![0.0; n];
            let mut rb = vec![0.0; m];
            for &(i, j, f) in &s.plan {
                assert!(f >= 0.0);
                ra[i] += f;
                rb[j] += f;
            }
            for i in 0..n {
                assert!((ra[i] - a[i]).abs() < 1e-12);
            }
            for j in 0..m {
                assert!((rb[j] - b[j]).abs() < 1e-12);
            }
            let dual: f64 = a.iter().zip(&s.u).map(|(x, y)| x * y).sum::<f64>()
                + b.iter().zip(&s.v).map(|(x, y)| x * y).sum::<f64>();
            assert!((dual - s.cost).abs() < 1e-10);
            for i in 0..n {
                for j in 0..m {
                    assert!(s.u[i] + s.v[j] <= c.get(i, j) + 1e-10);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let c = CostMatrix::from_fn(2, 2, |_, _| 1.0);
        assert!(solve(&[1.0], &[0.5, 0.5], &c).is_err());
        assert!(solve(&[], &[1.0], &c).is_err());
    }
}
