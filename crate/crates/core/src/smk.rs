//! Sliced (p, q)-distances and the classical MK_p they are compared against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::check_exponent;
use crate::measures::DiscreteMeasure;
use crate::numeric::{abs_pow, norm};
use crate::ot1d;
use crate::sphere::{lq_aggregate, m_constant_with_error, quadrature_error, DirectionKind, DirectionSet};
use crate::transport::CostMatrix;
use crate::{assignment, transport, Error, Exponent, Result};

/// Largest equal-weight instance sent to the assignment solver.
pub const ASSIGNMENT_CAP: usize = 1024;
/// Largest per-side atom count for the general transport LP.
pub const LP_CAP: usize = 64;

/// Per-direction distances and their L^q aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicedDistanceReport {
    pub p: f64,
    pub q: Exponent,
    pub aggregate: f64,
    /// MK_p between the projections, indexed like the direction set.
    pub per_direction: Vec<f64>,
    pub dirset_id: String,
    /// See [`crate::sphere::quadrature_error`].
    pub quadrature_error: f64,
}

fn check_dims(mu: &DiscreteMeasure, nu: &DiscreteMeasure, dirs: &DirectionSet) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimMismatch { expected: mu.dim(), found: nu.dim() });
    }
    if dirs.dim() != mu.dim() {
        return Err(Error::DimMismatch { expected: mu.dim(), found: dirs.dim() });
    }
    Ok(())
}

/// MK_p(R^ω μ, R^ω ν)^p for every direction ω, in direction order.
pub fn per_direction_pow(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    dirs: &DirectionSet,
) -> Result<Vec<f64>> {
    check_exponent(p)?;
    check_dims(mu, nu, dirs)?;
    Ok((0..dirs.len())
        .into_par_iter()
        .map(|k| {
            let w = dirs.direction(k);
            ot1d::wasserstein_pow_unchecked(&mu.project_unchecked(w), &nu.project_unchecked(w), p)
        })
        .collect())
}

/// MK_{p,q}(μ, ν) under the quadrature `dirs`.
pub fn sliced_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    q: Exponent,
    dirs: &DirectionSet,
) -> Result<SlicedDistanceReport> {
    let per_direction: Vec<f64> =
        per_direction_pow(mu, nu, p, dirs)?.into_iter().map(|v| v.powf(1.0 / p)).collect();
    let aggregate = lq_aggregate(&per_direction, dirs.weights(), q)?;
    let quadrature_error = quadrature_error(&per_direction, dirs, q)?;
    Ok(SlicedDistanceReport { p, q, aggregate, per_direction, dirset_id: dirs.id(), quadrature_error })
}

/// Max-sliced distance on S¹ refined beyond the grid: golden-section search on
/// the angle within one grid spacing of the best grid direction. Never below
/// the grid maximum.
pub fn max_sliced_refined(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, dirs: &DirectionSet) -> Result<f64> {
    if mu.dim() != 2 {
        return Err(Error::InvalidParam("angular refinement is only defined on S^1".into()));
    }
    let report = sliced_distance(mu, nu, p, Exponent::Infinite, dirs)?;
    let (best, grid_max) = report
        .per_direction
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    let d = dirs.direction(best);
    let center = d[1].atan2(d[0]);
    let half_width = std::f64::consts::TAU / dirs.len().max(8) as f64;
    let eval = |t: f64| {
        let w = [t.cos(), t.sin()];
        ot1d::wasserstein_pow_unchecked(&mu.project_unchecked(&w), &nu.project_unchecked(&w), p).powf(1.0 / p)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (center - half_width, center + half_width);
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (eval(c), eval(e));
    for _ in 0..80 {
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = eval(e);
        }
    }
    Ok(grid_max.max(fc).max(fe))
}

/// MK_p(μ, ν)^p in R^n, solved exactly.
///
/// Equal-size equal-weight inputs go to the assignment solver (≤ 1024 points);
/// everything else to the transport simplex (≤ 64 atoms per side).
pub fn wasserstein_nd_exact_pow(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let dist_pow = |x: &[f64], y: &[f64]| {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if p == 2.0 {
            d2
        } else {
            abs_pow(d2.sqrt(), p)
        }
    };
    if mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform() {
        let n = mu.len();
        if n > ASSIGNMENT_CAP {
            return Err(Error::TooLarge { what: "assignment instance", size: n, cap: ASSIGNMENT_CAP });
        }
        let cost = CostMatrix::from_fn(n, n, |i, j| dist_pow(mu.point(i), nu.point(j)));
        return Ok((assignment::solve(&cost)?.cost / n as f64).max(0.0));
    }
    for (len, what) in [(mu.len(), "first measure"), (nu.len(), "second measure")] {
        if len > LP_CAP {
            return Err(Error::TooLarge { what, size: len, cap: LP_CAP });
        }
    }
    let cost = CostMatrix::from_fn(mu.len(), nu.len(), |i, j| dist_pow(mu.point(i), nu.point(j)));
    Ok(transport::solve(mu.weights(), nu.weights(), &cost)?.cost.max(0.0))
}

/// MK_p(μ, ν) in R^n. See [`wasserstein_nd_exact_pow`] for the solver caps.
pub fn wasserstein_nd_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    Ok(wasserstein_nd_exact_pow(mu, nu, p)?.powf(1.0 / p))
}

/// Outcome of the comparison MK_{p,q} ≤ M_{max(p,q),n} · MK_p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub ok: bool,
}

/// Checks MK_{p,q}(μ, ν) ≤ M_{max(p,q),n} · MK_p(μ, ν) under `dirs`.
///
/// Tolerance: 3 standard errors (of both sides) for Monte Carlo sets, 1e-6 for
/// circle grids, 1e-12 for explicit sets.
pub fn check_comparison(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    q: Exponent,
    dirs: &DirectionSet,
) -> Result<ComparisonCheck> {
    let report = sliced_distance(mu, nu, p, q, dirs)?;
    let classical = wasserstein_nd_exact(mu, nu, p)?;
    let (m, m_err) = m_constant_with_error(Exponent::Finite(p).max(q), dirs);
    let lhs = report.aggregate;
    let rhs = m * classical;
    let tol = match dirs.kind() {
        DirectionKind::MonteCarlo { .. } => 3.0 * (report.quadrature_error + m_err * classical),
        DirectionKind::CircleGrid { .. } => 1e-6,
        DirectionKind::Explicit { .. } => 1e-12,
    };
    Ok(ComparisonCheck { lhs, rhs, tol, ok: lhs <= rhs + tol })
}

/// Largest atom norm of either measure: a Lipschitz constant of ω ↦ MK_p(R^ω μ, R^ω ν).
pub fn direction_lipschitz_bound(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    mu.points().chain(nu.points()).map(norm).fold(0.0, f64::max)
}
