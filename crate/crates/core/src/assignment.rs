//! Exact minimum-cost perfect matching (Hungarian method, shortest augmenting paths).
//!
//! O(n³) time, O(n²) memory for the cost matrix. Costs are `f64`.

use crate::transport::CostMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Assignment {
    /// `row_to_col[i]` is the column matched to row `i`.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

pub fn solve(cost: &CostMatrix) -> Result<Assignment> {
    let n = cost.rows();
    if n != cost.cols() {
        return Err(Error::ShapeMismatch(format!(
            "assignment needs a square matrix, got {}x{}",
            cost.rows(),
            cost.cols()
        )));
    }
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    // 1-based arrays with a virtual column 0, as in the classic formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - ui0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return Err(Error::NonFinite);
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    let total = row_to_col.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
    Ok(Assignment { row_to_col, cost: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for perm in permutations(n - 1) {
            for pos in 0..=perm.len() {
                let mut p = perm.clone();
                p.insert(pos, n - 1);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let perms = permutations(6);
        assert_eq!(perms.len(), 720);
        for _ in 0..40 {
            let c = CostMatrix::from_fn(6, 6, |_, _| rng.gen_range(-3.0..10.0));
            let best = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let a = solve(&c).unwrap();
            assert!((a.cost - best).abs() < 1e-10);
            let mut seen = a.row_to_col.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rejects_rectangular() {
        let c = CostMatrix::from_fn(2, 3, |_, _| 0.0);
        assert!(matches!(solve(&c), Err(Error::ShapeMismatch(_))));
    }
}
