//! Explicit constructions: a pair with no minimal MK_{p,q} geodesic candidate
//! in the displacement sense, linear MK_{1,q} geodesics, and two measures at
//! equal MK_p distance from a Dirac but unequal sliced distance.
//!
//! The four-point pair is μ0 = uniform on (±1, ±1) and μ1 = uniform on
//! (±b, 0), (0, ±b). Along ω(θ) = (cos θ, sin θ), θ ∈ [0, π/4], the projected
//! cost has the closed form
//!
//! ```text
//! w_p(θ) = ½ [ ((1−b) cos θ + sin θ)^p + |cos θ − (1+b) sin θ|^p ]
//! ```
//!
//! and with b = 2 − √2 it is maximal exactly at θ = 0 and θ = π/4.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8, SQRT_2};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::check_exponent;
use crate::measures::{mix, DiscreteMeasure, Measure1D};
use crate::numeric::abs_pow;
use crate::ot1d;
use crate::smk::{sliced_distance, wasserstein_nd_exact};
use crate::sphere::{m_constant_with_error, DirectionSet};
use crate::{rng, Error, Exponent, Result};

/// b = 2 − √2, the offset that balances w_p(0) and w_p(π/4) for every p.
pub const BALANCED_OFFSET: f64 = 2.0 - SQRT_2;

const SUPPORT_TOL: f64 = 1e-9;
const ENDPOINT_TOL: f64 = 1e-12;
const MIN_INTERIOR_DEFICIT: f64 = 1e-4;
const MAXIMIZER_TOL: f64 = 1e-9;
const CLOSED_FORM_TOL: f64 = 1e-10;
const GEODESIC_TOL: f64 = 1e-9;

fn check_offset(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("offset b must lie in (0, 1), got {b}")))
    }
}

fn embed(dim: usize, x: f64, y: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = x;
    v[1] = y;
    v
}

/// The two four-point measures, placed in the first two coordinates of R^n.
pub fn nongeodesic_pair(dim: usize, b: f64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    check_offset(b)?;
    if dim < 2 {
        return Err(Error::InvalidParam(format!("dimension must be at least 2, got {dim}")));
    }
    let corners = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
    let axes = [(b, 0.0), (0.0, b), (-b, 0.0), (0.0, -b)];
    let mu0 = DiscreteMeasure::uniform(dim, corners.iter().map(|&(x, y)| embed(dim, x, y)).collect())?;
    let mu1 = DiscreteMeasure::uniform(dim, axes.iter().map(|&(x, y)| embed(dim, x, y)).collect())?;
    Ok((mu0, mu1))
}

fn check_angle(theta: f64) -> Result<()> {
    if (0.0..=FRAC_PI_4).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("angle must lie in [0, π/4], got {theta}")))
    }
}

fn w_unchecked(p: f64, theta: f64, b: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    0.5 * (abs_pow((1.0 - b) * c + s, p) + abs_pow(c - (1.0 + b) * s, p))
}

/// Closed-form w_p(θ).
pub fn w_p_theta(p: f64, theta: f64, b: f64) -> Result<f64> {
    check_exponent(p)?;
    check_angle(theta)?;
    check_offset(b)?;
    Ok(w_unchecked(p, theta, b))
}

/// w_p(θ) through projection and the 1D quantile solver.
pub fn w_p_theta_solver(p: f64, theta: f64, b: f64) -> Result<f64> {
    check_exponent(p)?;
    check_angle(theta)?;
    let (mu0, mu1) = nongeodesic_pair(2, b)?;
    let w = [theta.cos(), theta.sin()];
    ot1d::wasserstein_1d_pow(&mu0.project(&w)?, &mu1.project(&w)?, p)
}

/// F_p(u) = u^p + u^{p−1} − 3u − 1; the sign of w_p′ on the first branch.
pub fn f_p(u: f64, p: f64) -> f64 {
    u.powf(p) + u.powf(p - 1.0) - 3.0 * u - 1.0
}

/// The unique root of F_p in (1, ∞), by bisection.
///
/// F_p(1) = −2; the upper end of the bracket starts at 10 and doubles until
/// F_p changes sign (for p close to 1 the root is far out).
pub fn f_p_root(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    let (mut lo, mut hi) = (1.0, 10.0);
    while f_p(hi, p) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoConvergence(format!("no sign change of F_p for p = {p}")));
        }
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_p(mid, p) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// θ* = arctan(1/(1+b)): where cos θ − (1+b) sin θ changes sign.
pub fn kink_angle(b: f64) -> f64 {
    (1.0 / (1.0 + b)).atan()
}

/// The unique critical point θ_p ∈ (0, θ*) of w_p, i.e. α(θ)/β(θ) = u_p.
pub fn critical_angle(p: f64, b: f64) -> Result<f64> {
    let u = f_p_root(p)?;
    check_offset(b)?;
    let ratio = |t: f64| {
        let (s, c) = t.sin_cos();
        ((1.0 - b) * c + s) / (c - (1.0 + b) * s)
    };
    let (mut lo, mut hi) = (0.0, kink_angle(b));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Parameters of the non-geodesic verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicProbe {
    pub p: f64,
    pub q: Exponent,
    #[serde(default = "default_offset")]
    pub b: f64,
    /// Times at which the projected displacement interpolants are reported.
    pub tau_grid: Vec<f64>,
    /// Angles in [0, π/4] for the maximizer search.
    pub theta_grid: Vec<f64>,
    /// Seed for the random angles of the closed-form consistency check.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_offset() -> f64 {
    BALANCED_OFFSET
}

fn default_seed() -> u64 {
    42
}

impl GeodesicProbe {
    /// The standard probe: b = 2 − √2, 10⁴ + 1 equispaced angles, τ ∈ {0, ¼, ½, ¾, 1}.
    pub fn new(p: f64, q: Exponent) -> Self {
        let m = 10_000;
        GeodesicProbe {
            p,
            q,
            b: BALANCED_OFFSET,
            tau_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            theta_grid: (0..=m).map(|k| FRAC_PI_4 * k as f64 / m as f64).collect(),
            seed: 42,
        }
    }

    fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        check_offset(self.b)?;
        let sorted = |g: &[f64]| g.windows(2).all(|w| w[0] <= w[1]);
        if !sorted(&self.tau_grid) || self.tau_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidParam("tau grid must be sorted within [0, 1]".into()));
        }
        if self.theta_grid.len() < 2 || !sorted(&self.theta_grid) {
            return Err(Error::InvalidParam("theta grid must be sorted with at least two points".into()));
        }
        self.theta_grid.iter().try_for_each(|t| check_angle(*t))
    }
}

/// A projected displacement midpoint (or interpolant) along one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedInterpolant {
    pub direction: [f64; 2],
    pub tau: f64,
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Support constraints implied by the three projected midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCheck {
    /// Points whose two coordinates both lie in {±(1+b)/2, ±1/2}.
    pub candidates: Vec<[f64; 2]>,
    /// Admissible values of x₁ + x₂: {±(2+b)/2, ±b/2}.
    pub diagonal_values: Vec<f64>,
    /// Per candidate: distance of x₁ + x₂ to the nearest admissible value.
    pub separations: Vec<f64>,
    pub min_separation: f64,
    /// Candidates meeting both constraints (within 1e-9).
    pub intersection: Vec<[f64; 2]>,
    pub disjoint: bool,
}

/// Evaluation of the uniform measure on the intersection as a midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointWitness {
    /// Its projections on e1, e2, (e1+e2)/√2 coincide with the displacement midpoints.
    pub matches_projected_midpoints: bool,
    pub dist_from_start: f64,
    pub dist_to_end: f64,
    pub dist_total: f64,
    /// dist_from_start + dist_to_end − dist_total (≥ 0; 0 for a metric midpoint).
    pub excess: f64,
    pub dirset_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NongeodesicReport {
    pub probe: GeodesicProbe,
    pub w_start: f64,
    pub w_end: f64,
    pub endpoints_equal: bool,
    pub w_interior: f64,
    pub interior_deficit: f64,
    pub deficit_ok: bool,
    pub grid_max: f64,
    /// Angles of the grid whose value is within 1e-9 of the grid maximum.
    pub grid_maximizers: Vec<f64>,
    pub maximizers_only_endpoints: bool,
    pub f_root: f64,
    pub critical_angle: f64,
    /// Where the finite differences of w_p change sign (midpoint of the grid cell).
    pub observed_sign_change: Option<f64>,
    pub sign_pattern_ok: bool,
    pub closed_form_max_error: f64,
    pub closed_form_ok: bool,
    pub midpoints: Vec<ProjectedInterpolant>,
    pub midpoints_match: bool,
    pub interpolants: Vec<ProjectedInterpolant>,
    pub support: SupportCheck,
    pub witness: Option<MidpointWitness>,
    pub note: String,
}

impl NongeodesicReport {
    /// Every check, including the support-disjointness one.
    pub fn pass(&self) -> bool {
        self.endpoints_equal
            && self.deficit_ok
            && self.maximizers_only_endpoints
            && self.sign_pattern_ok
            && self.closed_form_ok
            && self.midpoints_match
            && self.support.disjoint
    }

    /// (name, ok) for each check, in report order.
    pub fn checks(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("w_p(0) = w_p(pi/4)", self.endpoints_equal),
            ("interior deficit at pi/8", self.deficit_ok),
            ("maximum only at endpoints", self.maximizers_only_endpoints),
            ("w_p' sign pattern", self.sign_pattern_ok),
            ("closed form = 1D solver", self.closed_form_ok),
            ("projected midpoints", self.midpoints_match),
            ("E and E' disjoint", self.support.disjoint),
        ]
    }
}

const SAMPLE_DIRECTIONS: [[f64; 2]; 3] = [[1.0, 0.0], [0.0, 1.0], [FRAC_1_SQRT_2, FRAC_1_SQRT_2]];

/// The support-constraint enumeration: 16 candidates against 4 diagonal values.
pub fn support_check(b: f64) -> Result<SupportCheck> {
    check_offset(b)?;
    let coords = [-(1.0 + b) / 2.0, -0.5, 0.5, (1.0 + b) / 2.0];
    let diagonal_values = vec![-(2.0 + b) / 2.0, -b / 2.0, b / 2.0, (2.0 + b) / 2.0];
    let candidates: Vec<[f64; 2]> = coords.iter().flat_map(|&x| coords.iter().map(move |&y| [x, y])).collect();
    let separations: Vec<f64> = candidates
        .iter()
        .map(|c| diagonal_values.iter().map(|v| (c[0] + c[1] - v).abs()).fold(f64::INFINITY, f64::min))
        .collect();
    let min_separation = separations.iter().copied().fold(f64::INFINITY, f64::min);
    let intersection: Vec<[f64; 2]> =
        candidates.iter().zip(&separations).filter(|(_, s)| **s <= SUPPORT_TOL).map(|(c, _)| *c).collect();
    Ok(SupportCheck {
        disjoint: intersection.is_empty(),
        candidates,
        diagonal_values,
        separations,
        min_separation,
        intersection,
    })
}

fn expected_midpoint(direction: usize, b: f64) -> Measure1D {
    let atoms = if direction < 2 {
        vec![-(1.0 + b) / 2.0, -0.5, 0.5, (1.0 + b) / 2.0]
    } else {
        let s = 2.0 * SQRT_2;
        vec![-(2.0 + b) / s, -b / s, b / s, (2.0 + b) / s]
    };
    Measure1D::uniform(atoms).expect("four finite atoms")
}

/// Runs every check on the four-point pair. `dirs` (on S¹) is only used for
/// the midpoint witness when the support constraints intersect.
pub fn verify_nongeodesic(probe: &GeodesicProbe, dirs: &DirectionSet) -> Result<NongeodesicReport> {
    probe.validate()?;
    let (p, b) = (probe.p, probe.b);
    let (mu0, mu1) = nongeodesic_pair(2, b)?;

    let w_start = w_unchecked(p, 0.0, b);
    let w_end = w_unchecked(p, FRAC_PI_4, b);
    let endpoints_equal = (w_start - w_end).abs() <= ENDPOINT_TOL * w_start.max(1.0);
    let w_interior = w_unchecked(p, FRAC_PI_8, b);
    let interior_deficit = w_start.max(w_end) - w_interior;

    let values: Vec<f64> = probe.theta_grid.iter().map(|t| w_unchecked(p, *t, b)).collect();
    let grid_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid_maximizers: Vec<f64> = probe
        .theta_grid
        .iter()
        .zip(&values)
        .filter(|(_, v)| **v >= grid_max - MAXIMIZER_TOL)
        .map(|(t, _)| *t)
        .collect();
    let maximizers_only_endpoints = grid_maximizers.iter().all(|t| *t == 0.0 || *t == FRAC_PI_4);

    let f_root = if p > 1.0 { f_p_root(p)? } else { f64::INFINITY };
    let theta_p = if p > 1.0 { critical_angle(p, b)? } else { 0.0 };
    let (observed_sign_change, sign_pattern_ok) = sign_pattern(p, b, theta_p);

    let mut rng = rng::stream(probe.seed, 7);
    let thetas: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..=FRAC_PI_4)).collect();
    let closed_form_max_error = thetas
        .par_iter()
        .map(|t| Ok((w_p_theta_solver(p, *t, b)? - w_unchecked(p, *t, b)).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let mut midpoints = Vec::new();
    let mut interpolants = Vec::new();
    let mut midpoints_match = true;
    for (k, dir) in SAMPLE_DIRECTIONS.iter().enumerate() {
        let (a, c) = (mu0.project(dir)?, mu1.project(dir)?);
        let mid = ot1d::displacement_interpolate_1d(&a, &c, 0.5)?;
        midpoints_match &= mid.approx_eq(&expected_midpoint(k, b), 1e-12);
        midpoints.push(interpolant(*dir, 0.5, &mid));
        for &tau in &probe.tau_grid {
            interpolants.push(interpolant(*dir, tau, &ot1d::displacement_interpolate_1d(&a, &c, tau)?));
        }
    }

    let support = support_check(b)?;
    let witness = if support.intersection.is_empty() {
        None
    } else {
        Some(midpoint_witness(&support.intersection, &mu0, &mu1, probe, dirs)?)
    };

    Ok(NongeodesicReport {
        probe: probe.clone(),
        w_start,
        w_end,
        endpoints_equal,
        w_interior,
        interior_deficit,
        deficit_ok: interior_deficit >= MIN_INTERIOR_DEFICIT,
        grid_max,
        grid_maximizers,
        maximizers_only_endpoints,
        f_root,
        critical_angle: theta_p,
        observed_sign_change,
        sign_pattern_ok,
        closed_form_max_error,
        closed_form_ok: closed_form_max_error <= CLOSED_FORM_TOL,
        midpoints,
        midpoints_match,
        interpolants,
        support,
        witness,
        note: "support constraints use only the directions e1, e2 and (e1+e2)/sqrt(2); \
               a common midpoint must project onto all three displacement midpoints"
            .into(),
    })
}

fn interpolant(direction: [f64; 2], tau: f64, m: &Measure1D) -> ProjectedInterpolant {
    ProjectedInterpolant { direction, tau, atoms: m.atoms().to_vec(), weights: m.weights().to_vec() }
}

/// Finite differences of w_p on 1001 equispaced angles of [0, π/4]: expects
/// one switch from decreasing to increasing, within two cells of θ_p.
fn sign_pattern(p: f64, b: f64, theta_p: f64) -> (Option<f64>, bool) {
    let m = 1000;
    let h = FRAC_PI_4 / m as f64;
    let w: Vec<f64> = (0..=m).map(|k| w_unchecked(p, k as f64 * h, b)).collect();
    let signs: Vec<bool> = w.windows(2).map(|x| x[1] > x[0]).collect();
    let changes: Vec<usize> = (1..signs.len()).filter(|&k| signs[k] != signs[k - 1]).collect();
    match changes.as_slice() {
        [k] if !signs[0] && signs[*k] => {
            let at = *k as f64 * h;
            (Some(at), (at - theta_p).abs() <= 2.0 * h)
        }
        [k, ..] => (Some(*k as f64 * h), false),
        [] => (None, false),
    }
}

fn midpoint_witness(
    support: &[[f64; 2]],
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    probe: &GeodesicProbe,
    dirs: &DirectionSet,
) -> Result<MidpointWitness> {
    let nu = DiscreteMeasure::uniform(2, support.iter().map(|x| x.to_vec()).collect())?;
    let mut matches = true;
    for (k, dir) in SAMPLE_DIRECTIONS.iter().enumerate() {
        matches &= nu.project(dir)?.approx_eq(&expected_midpoint(k, probe.b), 1e-12);
    }
    let d = |a: &DiscreteMeasure, c: &DiscreteMeasure| {
        sliced_distance(a, c, probe.p, probe.q, dirs).map(|r| r.aggregate)
    };
    let (a, c, t) = (d(mu0, &nu)?, d(&nu, mu1)?, d(mu0, mu1)?);
    Ok(MidpointWitness {
        matches_projected_midpoints: matches,
        dist_from_start: a,
        dist_to_end: c,
        dist_total: t,
        excess: a + c - t,
        dirset_id: dirs.id(),
    })
}

/// w_p(0) − w_p(π/4) for the given offset.
pub fn endpoint_imbalance(p: f64, b: f64) -> Result<f64> {
    Ok(w_p_theta(p, 0.0, b)? - w_p_theta(p, FRAC_PI_4, b)?)
}

/// One (τ₁, τ₂) row of a mixture-geodesic check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureRow {
    pub tau1: f64,
    pub tau2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureGeodesicReport {
    pub p: f64,
    pub q: Exponent,
    pub total: f64,
    pub rows: Vec<MixtureRow>,
    pub max_deviation: f64,
    /// Set for p > 1: a failing row there is numerical evidence only.
    pub evidence_only: bool,
}

impl MixtureGeodesicReport {
    pub fn all_equal(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }
}

/// Compares MK_{p,q}(mix τ₁, mix τ₂) with |τ₁ − τ₂| · MK_{p,q}(μ0, μ1) for the
/// linear mixtures (1−τ)μ0 + τμ1.
pub fn check_mixture_geodesic(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    p: f64,
    q: Exponent,
    tau_pairs: &[(f64, f64)],
    dirs: &DirectionSet,
) -> Result<MixtureGeodesicReport> {
    let total = sliced_distance(mu0, mu1, p, q, dirs)?.aggregate;
    let rows = tau_pairs
        .iter()
        .map(|&(t1, t2)| {
            let lhs = sliced_distance(&mix(mu0, mu1, t1)?, &mix(mu0, mu1, t2)?, p, q, dirs)?.aggregate;
            let rhs = (t1 - t2).abs() * total;
            Ok(MixtureRow { tau1: t1, tau2: t2, lhs, rhs, ok: (lhs - rhs).abs() <= GEODESIC_TOL })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = rows.iter().map(|r| (r.lhs - r.rhs).abs()).fold(0.0, f64::max);
    Ok(MixtureGeodesicReport { p, q, total, rows, max_deviation, evidence_only: p > 1.0 })
}

/// The p = 1 case, where linear mixtures are minimal geodesics.
pub fn verify_linear_geodesic(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    q: Exponent,
    tau_pairs: &[(f64, f64)],
    dirs: &DirectionSet,
) -> Result<MixtureGeodesicReport> {
    check_mixture_geodesic(mu0, mu1, 1.0, q, tau_pairs, dirs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkReport {
    pub p: f64,
    pub q: Exponent,
    pub dim: usize,
    /// Classical MK_p from the origin to δ_{e1} and to ½(δ_{e1} + δ_{e2}).
    pub classical: (f64, f64),
    pub classical_equal: bool,
    /// Sliced MK_{p,q} from the origin to the same two measures.
    pub sliced: (f64, f64),
    pub m_constant: f64,
    /// sliced.1 − M_{q,n}.
    pub margin: f64,
    pub quadrature_error: f64,
    /// "less", "greater" or "equal": the required relation of sliced.1 to M_{q,n}.
    pub expected: String,
    pub ok: bool,
}

/// Two measures at classical distance 1 from the origin whose sliced distances
/// differ whenever p ≠ q: δ_{e1} and ½(δ_{e1} + δ_{e2}).
///
/// p < q requires MK_{p,q}(δ0, ν) < M_{q,n}, q < p requires it to be larger,
/// in both cases by more than three quadrature errors; p = q requires
/// agreement within that tolerance.
pub fn remark_discrepancy(p: f64, q: Exponent, dim: usize, dirs: &DirectionSet) -> Result<RemarkReport> {
    check_exponent(p)?;
    if dim < 2 || dirs.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, found: dirs.dim() });
    }
    let origin = DiscreteMeasure::dirac(vec![0.0; dim])?;
    let e = |i: usize| {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let mu = DiscreteMeasure::dirac(e(0))?;
    let nu = DiscreteMeasure::uniform(dim, vec![e(0), e(1)])?;
    let classical = (wasserstein_nd_exact(&origin, &mu, p)?, wasserstein_nd_exact(&origin, &nu, p)?);
    let s_mu = sliced_distance(&origin, &mu, p, q, dirs)?;
    let s_nu = sliced_distance(&origin, &nu, p, q, dirs)?;
    let (m, m_err) = m_constant_with_error(q, dirs);
    let quadrature_error = s_nu.quadrature_error.max(m_err).max(s_mu.quadrature_error);
    let margin = s_nu.aggregate - m;
    let band = 3.0 * quadrature_error;
    let pf = Exponent::Finite(p);
    let (expected, ok) = if pf == q {
        ("equal", margin.abs() <= band.max(1e-9))
    } else if p < q.as_f64() {
        ("less", margin < -band)
    } else {
        ("greater", margin > band)
    };
    Ok(RemarkReport {
        p,
        q,
        dim,
        classical,
        classical_equal: classical.0 == 1.0 && classical.1 == 1.0,
        sliced: (s_mu.aggregate, s_nu.aggregate),
        m_constant: m,
        margin,
        quadrature_error,
        expected: expected.into(),
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::circle_grid;
    use rand::SeedableRng;

    #[test]
    fn pair_geometry() {
        let (mu0, mu1) = nongeodesic_pair(2, BALANCED_OFFSET).unwrap();
        assert!((mu0.pth_moment(2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((mu1.pth_moment(2.0).unwrap() - (6.0 - 4.0 * SQRT_2)).abs() < 1e-15);
        let (a, _) = nongeodesic_pair(4, 0.5).unwrap();
        assert_eq!(a.point(0), &[1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(nongeodesic_pair(2, 1.0), Err(Error::InvalidParam(_))));
        assert!(matches!(nongeodesic_pair(2, 0.0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn closed_form_values() {
        let b = BALANCED_OFFSET;
        let w0 = w_p_theta(2.0, 0.0, b).unwrap();
        assert!((w0 - (2.0 - SQRT_2)).abs() < 1e-15);
        assert!((w0 - 0.5 * (1.0 - b).powi(2) - 0.5).abs() < 1e-15);
        assert!((w_p_theta(2.0, FRAC_PI_4, b).unwrap() - w0).abs() < 1e-15);
        // Reference: 0.2426406871192851 (30-digit evaluation of the closed form).
        assert!((w0 - w_p_theta(2.0, FRAC_PI_8, b).unwrap() - 0.242_640_687_119_285_1).abs() < 1e-14);
        assert!(matches!(w_p_theta(2.0, 1.0, b), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn closed_form_matches_solver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for p in [1.5, 2.0, 3.0] {
            for _ in 0..100 {
                let t = rng.gen_range(0.0..=FRAC_PI_4);
                let a = w_p_theta(p, t, BALANCED_OFFSET).unwrap();
                let s = w_p_theta_solver(p, t, BALANCED_OFFSET).unwrap();
                assert!((a - s).abs() < 1e-10, "p={p} θ={t}: {a} vs {s}");
            }
        }
    }

    #[test]
    fn roots_of_f_p() {
        // Independent references: quadratic formula for p = 2, 30-digit root
        // finding for the others.
        assert!((f_p_root(2.0).unwrap() - (1.0 + SQRT_2)).abs() < 1e-11);
        assert!((f_p_root(3.0).unwrap() - 1.481_194_304_092_015_6).abs() < 1e-11);
        assert!((f_p_root(1.5).unwrap() - 7.668_980_143_244_542).abs() < 1e-10);
        assert!((f_p_root(1.1).unwrap() - 59_042.333_032_224_52).abs() < 1e-6);
        for p in [1.2, 2.0, 4.0] {
            assert_eq!(f_p(1.0, p), -2.0);
            let u = f_p_root(p).unwrap();
            assert!(f_p(u * (1.0 - 1e-9), p) < 0.0 && f_p(u * (1.0 + 1e-9), p) > 0.0);
        }
        assert!(matches!(f_p_root(1.0), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn critical_angle_is_the_minimum_on_the_first_branch() {
        for p in [1.5, 2.0, 3.0] {
            let t = critical_angle(p, BALANCED_OFFSET).unwrap();
            assert!(t > 0.0 && t < kink_angle(BALANCED_OFFSET));
            let w = |x| w_unchecked(p, x, BALANCED_OFFSET);
            assert!(w(t) <= w(t - 1e-4) && w(t) <= w(t + 1e-4));
        }
    }

    #[test]
    fn offset_sensitivity() {
        for b in [0.5, 0.7] {
            for p in [1.5, 3.0] {
                assert!(endpoint_imbalance(p, b).unwrap().abs() > 1e-3);
            }
            assert!(endpoint_imbalance(2.0, b).unwrap().abs() < 1e-14);
        }
        for p in [1.5, 2.0, 3.0] {
            assert!(endpoint_imbalance(p, BALANCED_OFFSET).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn support_constraints_intersect() {
        let s = support_check(BALANCED_OFFSET).unwrap();
        assert_eq!(s.candidates.len(), 16);
        assert_eq!(s.intersection.len(), 8);
        assert_eq!(s.min_separation, 0.0);
        assert!(!s.disjoint);
        // Mixed points: one coordinate ±(1+b)/2, the other ±1/2.
        for x in &s.intersection {
            assert!((x[0].abs() - 0.5).abs() < 1e-15 || (x[1].abs() - 0.5).abs() < 1e-15);
            assert!((x[0].abs() - x[1].abs()).abs() > 0.1);
        }
    }

    #[test]
    fn report_checks() {
        let dirs = circle_grid(720).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let r = verify_nongeodesic(&GeodesicProbe::new(p, Exponent::Infinite), &dirs).unwrap();
            assert!(r.endpoints_equal && r.deficit_ok && r.maximizers_only_endpoints, "p={p}");
            assert!(r.sign_pattern_ok && r.closed_form_ok && r.midpoints_match, "p={p}");
            assert_eq!(r.grid_maximizers, vec![0.0, FRAC_PI_4]);
            assert!(!r.support.disjoint && !r.pass());
            let w = r.witness.unwrap();
            assert!(w.matches_projected_midpoints);
            assert!(w.excess >= -1e-12);
            assert_eq!(r.interpolants.len(), 15);
        }
        let r = verify_nongeodesic(&GeodesicProbe::new(2.0, Exponent::Infinite), &dirs).unwrap();
        assert!(r.witness.unwrap().excess.abs() < 1e-12);
        let r = verify_nongeodesic(&GeodesicProbe::new(2.0, Exponent::Finite(2.0)), &dirs).unwrap();
        assert!(r.witness.unwrap().excess > 1e-3);
    }

    fn random_measure(rng: &mut impl rand::Rng, k: usize) -> DiscreteMeasure {
        DiscreteMeasure::uniform(2, (0..k).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect())
            .unwrap()
    }

    #[test]
    fn linear_mixtures_are_mk1_geodesics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dirs = circle_grid(360).unwrap();
        let pairs = [(0.0, 1.0), (0.25, 0.75), (0.1, 0.9), (0.5, 0.2), (0.0, 0.5)];
        for q in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinite] {
            let mu0 = random_measure(&mut rng, 5);
            let mu1 = random_measure(&mut rng, 5);
            let r = verify_linear_geodesic(&mu0, &mu1, q, &pairs, &dirs).unwrap();
            assert!(r.all_equal() && !r.evidence_only, "max deviation {}", r.max_deviation);
        }
    }

    #[test]
    fn linear_mixtures_fail_for_p_two() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dirs = circle_grid(360).unwrap();
        let mu0 = random_measure(&mut rng, 5);
        let mu1 = random_measure(&mut rng, 5);
        let r = check_mixture_geodesic(&mu0, &mu1, 2.0, Exponent::Finite(2.0), &[(0.0, 0.5)], &dirs).unwrap();
        assert!(r.evidence_only);
        assert!(r.rows[0].lhs > r.rows[0].rhs + 1e-6);
    }

    #[test]
    fn remark_orderings() {
        let dirs = circle_grid(720).unwrap();
        let r = remark_discrepancy(1.0, Exponent::Finite(2.0), 2, &dirs).unwrap();
        assert!(r.classical_equal && r.ok && r.expected == "less");
        assert!((r.m_constant - FRAC_1_SQRT_2).abs() < 1e-9);
        let r = remark_discrepancy(2.0, Exponent::Finite(1.0), 2, &dirs).unwrap();
        assert!(r.classical_equal && r.ok && r.expected == "greater");
        assert!((r.m_constant - std::f64::consts::FRAC_2_PI).abs() < 1e-5);
        let r = remark_discrepancy(1.0, Exponent::Infinite, 2, &dirs).unwrap();
        assert!(r.ok && (r.sliced.1 - FRAC_1_SQRT_2).abs() < 1e-12);
        let r = remark_discrepancy(2.0, Exponent::Finite(2.0), 2, &dirs).unwrap();
        assert!(r.ok && r.expected == "equal" && (r.sliced.0 - r.sliced.1).abs() < 1e-9);
    }
}
