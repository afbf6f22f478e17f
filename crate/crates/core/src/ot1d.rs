//! Exact one-dimensional optimal transport.
//!
//! On the line the monotone (quantile) coupling is optimal for every convex
//! cost |t − s|^p, so distances reduce to walking the two cumulative weight
//! sequences in step. For discrete measures both quantile functions are
//! piecewise constant and the integral ∫₀¹ |Q_μ − Q_ν|^p du is a finite sum.

use serde::{Deserialize, Serialize};

use crate::error::check_exponent;
use crate::measures::{Measure1D, MERGE_TOL};
use crate::numeric::{abs_pow, CompensatedSum};
use crate::transport::{self, CostMatrix};
use crate::{Error, Result};

/// Atoms per side accepted by [`brute_force_lp_1d`].
pub const LP_ORACLE_CAP: usize = 12;

/// Residual masses below this are treated as exhausted when walking cumulative sums.
const TIE_TOL: f64 = 1e-14;

/// One cell of the monotone coupling: `mass` moves from `mu.atoms[src]` to `nu.atoms[dst]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCell {
    pub src: usize,
    pub dst: usize,
    pub mass: f64,
}

/// The north-west-corner (quantile) coupling of two sorted measures.
///
/// Consecutive cells share a row or a column, so the cells form a spanning
/// tree of the bipartite atom graph. When both cumulative sums are exhausted
/// at the same level a zero-mass connector cell is inserted to keep it so.
pub fn monotone_coupling(mu: &Measure1D, nu: &Measure1D) -> Vec<CouplingCell> {
    let (a, b) = (mu.weights(), nu.weights());
    let (n, m) = (a.len(), b.len());
    let mut cells = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    loop {
        let mass = ra.min(rb).max(0.0);
        cells.push(CouplingCell { src: i, dst: j, mass });
        ra -= mass;
        rb -= mass;
        let row_done = i + 1 == n;
        let col_done = j + 1 == m;
        if row_done && col_done {
            break;
        }
        let a_out = ra <= TIE_TOL;
        let b_out = rb <= TIE_TOL;
        if a_out && b_out && !row_done && !col_done {
            j += 1;
            rb = b[j];
            cells.push(CouplingCell { src: i, dst: j, mass: 0.0 });
            i += 1;
            ra = a[i];
        } else if col_done || (!row_done && ra < rb) {
            i += 1;
            ra = a[i];
        } else {
            j += 1;
            rb = b[j];
        }
    }
    cells
}

/// MK_p(μ, ν)^p on the line.
pub fn wasserstein_1d_pow(mu: &Measure1D, nu: &Measure1D, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(wasserstein_pow_unchecked(mu, nu, p))
}

pub(crate) fn wasserstein_pow_unchecked(mu: &Measure1D, nu: &Measure1D, p: f64) -> f64 {
    let (x, y) = (mu.atoms(), nu.atoms());
    let mut acc = CompensatedSum::default();
    for c in monotone_coupling(mu, nu) {
        if c.mass > 0.0 {
            acc.add(c.mass * abs_pow(x[c.src] - y[c.dst], p));
        }
    }
    acc.value().max(0.0)
}

/// MK_p(μ, ν) on the line, computed exactly from the quantile coupling.
pub fn wasserstein_1d(mu: &Measure1D, nu: &Measure1D, p: f64) -> Result<f64> {
    Ok(wasserstein_1d_pow(mu, nu, p)?.powf(1.0 / p))
}

/// MK_p^p between two equal-weight empirical measures given as sorted samples.
///
/// Breakpoints k/M and l/N are compared in exact integer arithmetic, so no
/// merging tolerance is involved.
pub fn wasserstein_pow_sorted_uniform(a: &[f64], b: &[f64], p: f64) -> f64 {
    let (m, n) = (a.len() as u128, b.len() as u128);
    debug_assert!(m > 0 && n > 0);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut cur: u128 = 0;
    let total = m * n;
    let mut acc = CompensatedSum::default();
    while cur < total {
        let na = (ia as u128 + 1) * n;
        let nb = (ib as u128 + 1) * m;
        let next = na.min(nb);
        acc.add((next - cur) as f64 * abs_pow(a[ia] - b[ib], p));
        cur = next;
        if na == next {
            ia += 1;
        }
        if nb == next {
            ib += 1;
        }
    }
    acc.value() / total as f64
}

/// Independent oracle: solves the full coupling LP (≤ 12 atoms per side).
pub fn brute_force_lp_1d(mu: &Measure1D, nu: &Measure1D, p: f64) -> Result<f64> {
    check_exponent(p)?;
    for (len, what) in [(mu.len(), "first measure"), (nu.len(), "second measure")] {
        if len > LP_ORACLE_CAP {
            return Err(Error::TooLarge { what, size: len, cap: LP_ORACLE_CAP });
        }
    }
    let (x, y) = (mu.atoms(), nu.atoms());
    let cost = CostMatrix::from_fn(x.len(), y.len(), |i, j| abs_pow(x[i] - y[j], p));
    let sol = transport::solve(mu.weights(), nu.weights(), &cost)?;
    Ok(sol.cost.max(0.0).powf(1.0 / p))
}

/// Left-continuous generalized inverse of the CDF at level `u ∈ (0, 1)`.
pub fn quantile(mu: &Measure1D, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidQuantile(u));
    }
    let cum = mu.cumulative();
    let k = cum.partition_point(|&c| c < u);
    Ok(mu.atoms()[k.min(cum.len() - 1)])
}

/// Point on the MK_p geodesic from μ to ν: quantiles interpolated linearly,
/// Q_τ = (1 − τ) Q_μ + τ Q_ν.
pub fn displacement_interpolate_1d(mu: &Measure1D, nu: &Measure1D, tau: f64) -> Result<Measure1D> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParam(format!("tau = {tau} outside [0, 1]")));
    }
    if tau == 0.0 {
        return Ok(mu.clone());
    }
    if tau == 1.0 {
        return Ok(nu.clone());
    }
    let (x, y) = (mu.atoms(), nu.atoms());
    let pairs: Vec<(f64, f64)> = monotone_coupling(mu, nu)
        .into_iter()
        .filter(|c| c.mass > 0.0)
        .map(|c| ((1.0 - tau) * x[c.src] + tau * y[c.dst], c.mass))
        .collect();
    // Monotone coupling keeps interpolated atoms sorted.
    Ok(Measure1D::from_sorted_pairs(pairs))
}

/// A real function sampled on a strictly increasing finite grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if grid.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam("grid must be strictly increasing".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at the grid point nearest `x`, if one lies within `1e-9·max(1, |x|)`.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        let k = self.grid.partition_point(|&g| g < x);
        let tol = 1e-9 * x.abs().max(1.0);
        [k.checked_sub(1), Some(k)]
            .into_iter()
            .flatten()
            .filter(|&i| i < self.grid.len())
            .map(|i| ((self.grid[i] - x).abs(), i))
            .filter(|(d, _)| *d <= tol)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, i)| self.values[i])
    }

    /// ∫ f dμ over the atoms of μ, which must lie on the grid.
    pub fn integrate(&self, mu: &Measure1D) -> Result<f64> {
        let mut acc = CompensatedSum::default();
        for (x, w) in mu.atoms().iter().zip(mu.weights()) {
            let v = self
                .value_at(*x)
                .ok_or_else(|| Error::ShapeMismatch(format!("atom {x} is not a grid point")))?;
            acc.add(w * v);
        }
        Ok(acc.value())
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// The d^p-transform restricted to grids:
/// `φ^{d^p}(s) = max_{t ∈ grid(φ)} ( −|t − s|^p − φ(t) )` for every `s` in `domain`.
pub fn ctransform(phi: &GridFunction, p: f64, domain: &[f64]) -> Result<GridFunction> {
    if domain.is_empty() {
        return Err(Error::EmptyGrid);
    }
    check_exponent(p)?;
    let values = domain
        .iter()
        .map(|&s| {
            phi.grid
                .iter()
                .zip(&phi.values)
                .map(|(&t, &f)| -abs_pow(t - s, p) - f)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    GridFunction::new(domain.to_vec(), values)
}

/// Sorted union of both supports, merged within [`MERGE_TOL`].
pub fn joint_grid(mu: &Measure1D, nu: &Measure1D) -> Vec<f64> {
    let mut all: Vec<f64> = mu.atoms().iter().chain(nu.atoms()).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match grid.last() {
            Some(&last) if x - last <= MERGE_TOL => {}
            _ => grid.push(x),
        }
    }
    grid
}

/// Kantorovich potentials (φ, ψ) on the joint grid with
/// `−φ(t) − ψ(s) ≤ |t − s|^p` for all grid pairs and
/// `−∫φ dμ − ∫ψ dν = MK_p(μ, ν)^p` up to rounding.
///
/// Built by complementary slackness along the monotone coupling, then
/// regularized with a double d^p-transform; normalized so φ vanishes at the
/// smallest atom of μ.
pub fn optimal_potentials_1d(
    mu: &Measure1D,
    nu: &Measure1D,
    p: f64,
) -> Result<(GridFunction, GridFunction)> {
    check_exponent(p)?;
    let (x, y) = (mu.atoms(), nu.atoms());
    let cells = monotone_coupling(mu, nu);
    let mut u = vec![0.0; x.len()];
    let mut v = vec![0.0; y.len()];
    let first = cells[0];
    v[first.dst] = abs_pow(x[first.src] - y[first.dst], p);
    for w in cells.windows(2) {
        let (prev, c) = (w[0], w[1]);
        let cost = abs_pow(x[c.src] - y[c.dst], p);
        if c.src != prev.src {
            u[c.src] = cost - v[c.dst];
        } else {
            v[c.dst] = cost - u[c.src];
        }
    }
    let phi_support = GridFunction::new(x.to_vec(), u.iter().map(|a| -a).collect())?;
    let grid = joint_grid(mu, nu);
    let mut psi = ctransform(&phi_support, p, &grid)?;
    let mut phi = ctransform(&psi, p, &grid)?;
    let shift = phi.value_at(x[0]).unwrap_or(0.0);
    phi.values.iter_mut().for_each(|f| *f -= shift);
    psi.values.iter_mut().for_each(|f| *f += shift);
    Ok((phi, psi))
}

/// The Kantorovich dual objective `−∫φ dμ − ∫ψ dν`.
pub fn dual_value_1d(phi: &GridFunction, psi: &GridFunction, mu: &Measure1D, nu: &Measure1D) -> Result<f64> {
    Ok(-phi.integrate(mu)? - psi.integrate(nu)?)
}
