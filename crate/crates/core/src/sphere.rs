//! Finite quadratures of the uniform probability measure σ_{n−1} on the unit
//! sphere, and L^q norms with respect to them.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numeric::{abs_pow, compensated_sum, mean_and_std_error, norm};
use crate::{rng, Error, Exponent, Result};

pub const DEFAULT_MC_DIRECTIONS: usize = 2048;
pub const DEFAULT_CIRCLE_DIRECTIONS: usize = 720;

const UNIT_TOL: f64 = 1e-9;

/// How a direction set was generated. The display form doubles as the set's id
/// and as the `--dirs` syntax of the CLI: `circle:720`, `mc:2048:42`, `explicit:5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    MonteCarlo { count: usize, seed: u64 },
    CircleGrid { count: usize },
    Explicit { count: usize },
}

impl fmt::Display for DirectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectionKind::MonteCarlo { count, seed } => write!(f, "mc:{count}:{seed}"),
            DirectionKind::CircleGrid { count } => write!(f, "circle:{count}"),
            DirectionKind::Explicit { count } => write!(f, "explicit:{count}"),
        }
    }
}

impl FromStr for DirectionKind {
    type Err = Error;

    /// Accepts `circle:M`, `mc:M` (seed 42), `mc:M:SEED` and `explicit:M`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("cannot parse direction spec {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let count = |x: &str| x.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["circle", m] => Ok(DirectionKind::CircleGrid { count: count(m)? }),
            ["mc", m] => Ok(DirectionKind::MonteCarlo { count: count(m)?, seed: 42 }),
            ["mc", m, seed] => Ok(DirectionKind::MonteCarlo {
                count: count(m)?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            ["explicit", m] => Ok(DirectionKind::Explicit { count: count(m)? }),
            _ => Err(bad()),
        }
    }
}

impl DirectionKind {
    /// Regenerates the set this kind describes in dimension `dim`.
    pub fn build(self, dim: usize) -> Result<DirectionSet> {
        match self {
            DirectionKind::MonteCarlo { count, seed } => mc_directions(dim, count, seed),
            DirectionKind::CircleGrid { count } => {
                if dim != 2 {
                    return Err(Error::InvalidParam(format!(
                        "circle grids live in dimension 2, requested {dim}"
                    )));
                }
                circle_grid(count)
            }
            DirectionKind::Explicit { .. } => Err(Error::InvalidParam(
                "explicit direction sets cannot be regenerated from their id".into(),
            )),
        }
    }
}

impl Serialize for DirectionKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DirectionKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Unit vectors with positive quadrature weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DirectionSetRepr", into = "DirectionSetRepr")]
pub struct DirectionSet {
    dim: usize,
    kind: DirectionKind,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DirectionSetRepr {
    dim: usize,
    kind: DirectionKind,
    directions: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<DirectionSetRepr> for DirectionSet {
    type Error = Error;

    fn try_from(r: DirectionSetRepr) -> Result<Self> {
        let mut set = DirectionSet::explicit(r.dim, r.directions, r.weights)?;
        set.kind = r.kind;
        Ok(set)
    }
}

impl From<DirectionSet> for DirectionSetRepr {
    fn from(d: DirectionSet) -> Self {
        DirectionSetRepr {
            dim: d.dim,
            kind: d.kind,
            directions: d.iter().map(<[f64]>::to_vec).collect(),
            weights: d.weights,
        }
    }
}

impl DirectionSet {
    /// A user-supplied quadrature. Directions must be unit vectors; weights
    /// positive and summing to 1 within 1e-9 (renormalized).
    pub fn explicit(dim: usize, directions: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::EmptySet);
        }
        if directions.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} directions but {} weights",
                directions.len(),
                weights.len()
            )));
        }
        let mut coords = Vec::with_capacity(dim * directions.len());
        for d in &directions {
            if d.len() != dim {
                return Err(Error::DimMismatch { expected: dim, found: d.len() });
            }
            let n = norm(d);
            if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidDirection { norm: n });
            }
            coords.extend_from_slice(d);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidWeights("direction weights must be positive".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("direction weights sum to {total}")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        let count = directions.len();
        Ok(DirectionSet { dim, kind: DirectionKind::Explicit { count }, coords, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    pub fn id(&self) -> String {
        self.kind.to_string()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The sub-quadrature on `indices`, weights renormalized.
    pub fn subset(&self, indices: &[usize]) -> Result<DirectionSet> {
        if indices.is_empty() {
            return Err(Error::EmptySet);
        }
        let dirs = indices.iter().map(|&i| self.direction(i).to_vec()).collect();
        let total: f64 = indices.iter().map(|&i| self.weights[i]).sum();
        let weights = indices.iter().map(|&i| self.weights[i] / total).collect();
        DirectionSet::explicit(self.dim, dirs, weights)
    }
}

/// M i.i.d. uniform directions on S^{n−1} (normalized standard Gaussians), equal weights.
pub fn mc_directions(dim: usize, count: usize, seed: u64) -> Result<DirectionSet> {
    if dim < 2 {
        return Err(Error::InvalidParam(format!("sphere dimension must be >= 2, got {dim}")));
    }
    if count == 0 {
        return Err(Error::EmptySet);
    }
    let mut rng = rng::stream(seed, 1);
    let mut coords = Vec::with_capacity(dim * count);
    let mut v = vec![0.0; dim];
    for _ in 0..count {
        loop {
            for c in v.iter_mut() {
                *c = StandardNormal.sample(&mut rng);
            }
            let n = norm(&v);
            if n > 1e-12 {
                coords.extend(v.iter().map(|c| c / n));
                break;
            }
        }
    }
    Ok(DirectionSet {
        dim,
        kind: DirectionKind::MonteCarlo { count, seed },
        coords,
        weights: vec![1.0 / count as f64; count],
    })
}

/// Equally spaced directions (cos 2πk/M, sin 2πk/M) on S¹, equal weights.
///
/// M must be a multiple of 8. Points are generated in the first octant and
/// reflected, so ±e₁, ±e₂ and (±e₁ ± e₂)/√2 appear with exact coordinates and
/// the set is exactly invariant under the symmetries of the square.
pub fn circle_grid(count: usize) -> Result<DirectionSet> {
    if count == 0 || !count.is_multiple_of(8) {
        return Err(Error::InvalidGrid(count));
    }
    let octant = count / 8;
    let quarter = count / 4;
    let first_quadrant: Vec<(f64, f64)> = (0..quarter)
        .map(|k| {
            if k < octant {
                let t = TAU * k as f64 / count as f64;
                (t.cos(), t.sin())
            } else if k == octant {
                (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
            } else {
                let t = TAU * (quarter - k) as f64 / count as f64;
                (t.sin(), t.cos())
            }
        })
        .collect();
    let mut coords = Vec::with_capacity(2 * count);
    for quadrant in 0..4 {
        for &(c, s) in &first_quadrant {
            let (x, y) = match quadrant {
                0 => (c, s),
                1 => (-s, c),
                2 => (-c, -s),
                _ => (s, -c),
            };
            coords.push(x);
            coords.push(y);
        }
    }
    Ok(DirectionSet {
        dim: 2,
        kind: DirectionKind::CircleGrid { count },
        coords,
        weights: vec![1.0 / count as f64; count],
    })
}

/// `(Σ w_i v_i^q)^{1/q}` for finite q, `max_i v_i` for q = ∞.
///
/// Sums are compensated and run in index order, so the result is independent
/// of how the values were computed.
pub fn lq_aggregate(values: &[f64], weights: &[f64], q: Exponent) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidValue(*v));
    }
    let top = values.iter().copied().fold(0.0, f64::max);
    match q {
        Exponent::Infinite => Ok(top),
        Exponent::Finite(q) => {
            if top == 0.0 {
                return Ok(0.0);
            }
            let s = compensated_sum(values.iter().zip(weights).map(|(v, w)| w * abs_pow(v / top, q)));
            Ok(top * s.powf(1.0 / q))
        }
    }
}

/// M_{q,n} = ‖⟨e₁, ·⟩‖_{L^q(σ_{n−1})} under the given quadrature.
pub fn m_constant(q: Exponent, dirs: &DirectionSet) -> f64 {
    let values: Vec<f64> = dirs.iter().map(|w| w[0].abs()).collect();
    lq_aggregate(&values, dirs.weights(), q).expect("direction components are finite")
}

/// Error estimate for [`lq_aggregate`] of per-direction `values` under `dirs`:
///
/// * Monte Carlo: one standard error of the estimate (delta method on the mean of v^q);
///   for q = ∞ the gap between the full maximum and the maximum over the first half.
/// * Circle grid: the change when the grid is halved (even-index subgrid).
/// * Explicit: 0; an explicit set is taken as the exact quadrature.
pub fn quadrature_error(values: &[f64], dirs: &DirectionSet, q: Exponent) -> Result<f64> {
    let full = lq_aggregate(values, dirs.weights(), q)?;
    match (dirs.kind(), q) {
        (DirectionKind::MonteCarlo { .. }, Exponent::Finite(qf)) => {
            if full == 0.0 {
                return Ok(0.0);
            }
            let powered: Vec<f64> = values.iter().map(|v| abs_pow(*v, qf)).collect();
            let (mean, se) = mean_and_std_error(&powered);
            Ok(mean.powf(1.0 / qf - 1.0) * se / qf)
        }
        (DirectionKind::MonteCarlo { .. }, Exponent::Infinite) => {
            let half = values[..values.len().div_ceil(2)].iter().copied().fold(0.0, f64::max);
            Ok(full - half)
        }
        (DirectionKind::CircleGrid { count }, _) if count >= 16 => {
            let sub: Vec<f64> = values.iter().step_by(2).copied().collect();
            let w = vec![1.0 / sub.len() as f64; sub.len()];
            Ok((full - lq_aggregate(&sub, &w, q)?).abs())
        }
        _ => Ok(0.0),
    }
}

/// [`m_constant`] together with its [`quadrature_error`].
pub fn m_constant_with_error(q: Exponent, dirs: &DirectionSet) -> (f64, f64) {
    let values: Vec<f64> = dirs.iter().map(|w| w[0].abs()).collect();
    let value = m_constant(q, dirs);
    let err = quadrature_error(&values, dirs, q).expect("finite values");
    (value, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_2_PI, PI};

    #[test]
    fn mc_single_direction_is_unit() {
        let d = mc_directions(2, 1, 0).unwrap();
        assert_eq!(d.len(), 1);
        assert!((norm(d.direction(0)) - 1.0).abs() < 1e-12);
        assert!(matches!(mc_directions(3, 0, 0), Err(Error::EmptySet)));
    }

    #[test]
    fn mc_second_moment_of_coordinate() {
        let d = mc_directions(3, 10_000, 42).unwrap();
        let m2 = d.iter().map(|w| w[0] * w[0]).sum::<f64>() / 1e4;
        assert!((m2 - 1.0 / 3.0).abs() < 0.02, "{m2}");
        let d = mc_directions(2, 10_000, 42).unwrap();
        let m1 = d.iter().map(|w| w[0].abs()).sum::<f64>() / 1e4;
        assert!((m1 - FRAC_2_PI).abs() < 0.02, "{m1}");
    }

    #[test]
    fn circle_grid_contains_symmetry_axes_exactly() {
        let g = circle_grid(8).unwrap();
        let s = FRAC_1_SQRT_2;
        let expected = [
            [1.0, 0.0],
            [s, s],
            [0.0, 1.0],
            [-s, s],
            [-1.0, 0.0],
            [-s, -s],
            [0.0, -1.0],
            [s, -s],
        ];
        for (k, e) in expected.iter().enumerate() {
            let d = g.direction(k);
            assert!(d[0] == e[0] && d[1] == e[1], "k={k}: {d:?}");
        }
        assert!(matches!(circle_grid(12), Err(Error::InvalidGrid(12))));
        assert!(matches!(circle_grid(0), Err(Error::InvalidGrid(0))));
    }

    #[test]
    fn circle_grid_angles_and_weights() {
        let g = circle_grid(360).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (k, d) in g.iter().enumerate() {
            let t = TAU * k as f64 / 360.0;
            assert!((d[0] - t.cos()).abs() < 1e-14 && (d[1] - t.sin()).abs() < 1e-14);
        }
        let q1 = m_constant(Exponent::Finite(1.0), &g);
        assert!((q1 - FRAC_2_PI).abs() < 1e-3);
    }

    #[test]
    fn circle_grid_integrates_trig_polynomials() {
        let m = 64;
        let g = circle_grid(m).unwrap();
        for deg in 1..m {
            let integral: f64 = g
                .iter()
                .zip(g.weights())
                .map(|(d, w)| w * (deg as f64 * d[1].atan2(d[0])).cos())
                .sum();
            assert!(integral.abs() < 1e-12, "degree {deg}: {integral}");
        }
    }

    #[test]
    fn aggregation() {
        let w = [0.25; 4];
        for q in [1.0, 2.0, 7.5] {
            let v = lq_aggregate(&[3.0; 4], &w, Exponent::Finite(q)).unwrap();
            assert!((v - 3.0).abs() < 1e-14);
        }
        assert_eq!(lq_aggregate(&[3.0; 4], &w, Exponent::Infinite).unwrap(), 3.0);
        let v = lq_aggregate(&[0.0, 2.0], &[0.5, 0.5], Exponent::Finite(2.0)).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lq_aggregate(&[0.0, 2.0], &[0.5, 0.5], Exponent::Infinite).unwrap(), 2.0);
        assert!(matches!(
            lq_aggregate(&[-1.0, 2.0], &[0.5, 0.5], Exponent::Finite(2.0)),
            Err(Error::InvalidValue(_))
        ));
        assert!(lq_aggregate(&[1.0], &[0.5, 0.5], Exponent::Finite(2.0)).is_err());
    }

    #[test]
    fn m_constants() {
        let g = circle_grid(360).unwrap();
        assert!((m_constant(Exponent::Finite(2.0), &g) - FRAC_1_SQRT_2).abs() < 1e-6);
        for n in [2, 3, 5] {
            let d = mc_directions(n, 10_000, 1).unwrap();
            assert!((m_constant(Exponent::Infinite, &d) - 1.0).abs() < 0.01);
        }
        let d = mc_directions(3, 100_000, 2).unwrap();
        let m4 = m_constant(Exponent::Finite(4.0), &d);
        assert!((m4 - 0.2f64.powf(0.25)).abs() < 0.01, "{m4}");
        let _ = PI;
    }

    #[test]
    fn kind_strings_round_trip() {
        for s in ["circle:720", "mc:2048:7", "explicit:3"] {
            assert_eq!(s.parse::<DirectionKind>().unwrap().to_string(), s);
        }
        assert_eq!(
            "mc:16".parse::<DirectionKind>().unwrap(),
            DirectionKind::MonteCarlo { count: 16, seed: 42 }
        );
        assert!("sphere:3".parse::<DirectionKind>().is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = mc_directions(3, 5, 9).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: DirectionSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(s.contains("\"kind\":\"mc:5:9\""));
    }

    #[test]
    fn explicit_validation() {
        assert!(DirectionSet::explicit(2, vec![vec![1.0, 1.0]], vec![1.0]).is_err());
        assert!(DirectionSet::explicit(2, vec![vec![1.0, 0.0]], vec![0.0]).is_err());
        assert!(matches!(DirectionSet::explicit(2, vec![], vec![]), Err(Error::EmptySet)));
    }
}
