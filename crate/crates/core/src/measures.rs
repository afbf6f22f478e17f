//! Discrete probability measures on R^n and their one-dimensional images.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::check_exponent;
use crate::numeric::{abs_pow, compensated_sum, dot, norm};
use crate::rng;
use crate::{Error, Result};

/// Atoms closer than this are merged when a measure is projected.
pub const MERGE_TOL: f64 = 1e-12;

/// Weight sums within this distance of 1 are renormalized; anything else is rejected.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

const UNIT_TOL: f64 = 1e-9;

/// A finitely supported probability measure on R^n.
///
/// Points are stored row-major. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;

    fn try_from(r: MeasureRepr) -> Result<Self> {
        DiscreteMeasure::new(r.dim, r.points, r.weights)
    }
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            dim: m.dim,
            points: m.points().map(<[f64]>::to_vec).collect(),
            weights: m.weights,
        }
    }
}

fn normalize_weights(mut weights: Vec<f64>) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite);
    }
    if let Some(w) = weights.iter().find(|w| **w < 0.0) {
        return Err(Error::InvalidWeights(format!("negative weight {w}")));
    }
    let total = compensated_sum(weights.iter().copied());
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
    }
    if total != 1.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    Ok(weights)
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("dimension must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if points.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimMismatch { expected: dim, found: p.len() });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite);
            }
            coords.extend_from_slice(p);
        }
        Ok(DiscreteMeasure { dim, coords, weights: normalize_weights(weights)? })
    }

    /// Equal weights on the given points.
    pub fn uniform(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        DiscreteMeasure::new(dim, points, vec![1.0 / n as f64; n])
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        let dim = point.len();
        DiscreteMeasure::new(dim, vec![point], vec![1.0])
    }

    fn from_flat(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len(), dim * weights.len());
        DiscreteMeasure { dim, coords, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every atom carries the same weight (within 1e-12).
    pub fn is_uniform(&self) -> bool {
        let w0 = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-12)
    }

    /// The measure shifted by `v`.
    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, found: v.len() });
        }
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(v).map(|(a, b)| a + b))
            .collect();
        Ok(DiscreteMeasure::from_flat(self.dim, coords, self.weights.clone()))
    }

    /// Pushforward under x ↦ ⟨x, w⟩.
    pub fn project(&self, w: &[f64]) -> Result<Measure1D> {
        if w.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, found: w.len() });
        }
        let n = norm(w);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidDirection { norm: n });
        }
        Ok(self.project_unchecked(w))
    }

    /// Projection without the unit-norm check; used on hot paths with
    /// directions already validated by a [`crate::DirectionSet`].
    pub(crate) fn project_unchecked(&self, w: &[f64]) -> Measure1D {
        let mut pairs: Vec<(f64, f64)> = self
            .points()
            .zip(&self.weights)
            .map(|(x, &m)| (dot(x, w), m))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Measure1D::from_sorted_pairs(pairs)
    }

    /// Σ w_i |x_i|^p, the p-th moment about the origin.
    pub fn pth_moment(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(compensated_sum(
            self.points().zip(&self.weights).map(|(x, w)| w * abs_pow(norm(x), p)),
        ))
    }

    /// Sample N equal-weight points uniformly from [−1, 1]² × {0}^{n−2}.
    pub fn sample_square(n_points: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParam(format!("square sampler needs dim >= 2, got {dim}")));
        }
        Self::sample_with(n_points, dim, seed, |rng, out| {
            out[0] = rng.gen_range(-1.0..=1.0);
            out[1] = rng.gen_range(-1.0..=1.0);
        })
    }

    /// Sample N equal-weight points uniformly from [0, 1]^n.
    pub fn sample_cube(n_points: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("dimension must be positive".into()));
        }
        Self::sample_with(n_points, dim, seed, |rng, out| {
            for c in out.iter_mut() {
                *c = rng.gen_range(0.0..=1.0);
            }
        })
    }

    fn sample_with(
        n_points: usize,
        dim: usize,
        seed: u64,
        mut draw: impl FnMut(&mut rng::Rng, &mut [f64]),
    ) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::EmptyMeasure);
        }
        let mut rng = rng::stream(seed, 0);
        let mut coords = vec![0.0; n_points * dim];
        for chunk in coords.chunks_exact_mut(dim) {
            draw(&mut rng, chunk);
        }
        Ok(DiscreteMeasure::from_flat(dim, coords, vec![1.0 / n_points as f64; n_points]))
    }
}

/// (1 − τ)·m0 + τ·m1: the linear (mass) interpolation of two measures.
///
/// At τ = 0 or τ = 1 the corresponding endpoint is returned unchanged.
pub fn mix(m0: &DiscreteMeasure, m1: &DiscreteMeasure, tau: f64) -> Result<DiscreteMeasure> {
    if m0.dim != m1.dim {
        return Err(Error::DimMismatch { expected: m0.dim, found: m1.dim });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParam(format!("tau = {tau} outside [0, 1]")));
    }
    if tau == 0.0 {
        return Ok(m0.clone());
    }
    if tau == 1.0 {
        return Ok(m1.clone());
    }
    let mut coords = m0.coords.clone();
    coords.extend_from_slice(&m1.coords);
    let weights = m0
        .weights
        .iter()
        .map(|w| (1.0 - tau) * w)
        .chain(m1.weights.iter().map(|w| tau * w))
        .collect();
    Ok(DiscreteMeasure::from_flat(m0.dim, coords, weights))
}

/// A finitely supported probability measure on R with sorted, distinct atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure1D {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Measure1D {
    /// Builds a measure from unsorted atoms; ties within [`MERGE_TOL`] are merged
    /// and zero-weight atoms dropped.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite);
        }
        let weights = normalize_weights(weights)?;
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Measure1D::from_sorted_pairs(pairs))
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Measure1D::new(vec![x], vec![1.0])
    }

    /// Equal weights on the given atoms.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        Measure1D::new(atoms, vec![1.0 / n as f64; n])
    }

    pub(crate) fn from_sorted_pairs(pairs: Vec<(f64, f64)>) -> Self {
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            if w <= 0.0 {
                continue;
            }
            match atoms.last() {
                Some(&last) if x - last <= MERGE_TOL => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(x);
                    weights.push(w);
                }
            }
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = crate::numeric::CompensatedSum::default();
        for &w in &weights {
            acc.add(w);
            cumulative.push(acc.value());
        }
        Measure1D { atoms, weights, cumulative }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn pth_moment(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(compensated_sum(self.atoms.iter().zip(&self.weights).map(|(x, w)| w * abs_pow(*x, p))))
    }

    /// Atoms and weights agree within `tol`.
    pub fn approx_eq(&self, other: &Measure1D, tol: f64) -> bool {
        self.len() == other.len()
            && self.atoms.iter().zip(&other.atoms).all(|(a, b)| (a - b).abs() <= tol)
            && self.weights.iter().zip(&other.weights).all(|(a, b)| (a - b).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn four_corners() -> DiscreteMeasure {
        DiscreteMeasure::uniform(
            2,
            vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]],
        )
        .unwrap()
    }

    #[test]
    fn project_dirac_onto_its_axis() {
        let m = DiscreteMeasure::dirac(vec![1.0, 0.0]).unwrap();
        let p = m.project(&[1.0, 0.0]).unwrap();
        assert_eq!(p.atoms(), &[1.0]);
        assert_eq!(p.weights(), &[1.0]);
    }

    #[test]
    fn project_corners_onto_e1_merges_pairs() {
        let p = four_corners().project(&[1.0, 0.0]).unwrap();
        assert_eq!(p.atoms(), &[-1.0, 1.0]);
        assert_eq!(p.weights(), &[0.5, 0.5]);
        assert!((p.cumulative()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn project_corners_onto_diagonal() {
        let p = four_corners().project(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        assert_eq!(p.len(), 3);
        let expected = [-SQRT_2, 0.0, SQRT_2];
        for (a, e) in p.atoms().iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        assert_eq!(p.weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn project_rejects_bad_directions() {
        let m = four_corners();
        assert!(matches!(m.project(&[1.0, 1.0]), Err(Error::InvalidDirection { .. })));
        assert!(matches!(m.project(&[1.0, 0.0, 0.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn weights_validation() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(DiscreteMeasure::new(1, pts.clone(), vec![0.5, 0.5 + 1e-10]).is_ok());
        assert!(matches!(
            DiscreteMeasure::new(1, pts.clone(), vec![0.5, 0.6]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            DiscreteMeasure::new(1, pts.clone(), vec![1.5, -0.5]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            DiscreteMeasure::new(1, vec![vec![f64::NAN], vec![1.0]], vec![0.5, 0.5]),
            Err(Error::NonFinite)
        ));
        assert!(matches!(DiscreteMeasure::new(1, vec![], vec![]), Err(Error::EmptyMeasure)));
        let m = DiscreteMeasure::new(1, pts, vec![0.5, 0.5 + 1e-10]).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sample_square_single_point() {
        let m = DiscreteMeasure::sample_square(1, 3, 7).unwrap();
        assert_eq!(m.len(), 1);
        let x = m.point(0);
        assert!(x[0].abs() <= 1.0 && x[1].abs() <= 1.0 && x[2] == 0.0);
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn sample_square_moments() {
        let m = DiscreteMeasure::sample_square(10_000, 2, 42).unwrap();
        for c in 0..2 {
            let mean = m.points().map(|x| x[c]).sum::<f64>() / 1e4;
            assert!(mean.abs() < 0.05, "coordinate {c} mean {mean}");
        }
        let second = m.points().map(|x| x[0] * x[0]).sum::<f64>() / 1e4;
        assert!((second - 1.0 / 3.0).abs() < 0.02, "second moment {second}");
    }

    #[test]
    fn sample_cube_support_and_means() {
        let m = DiscreteMeasure::sample_cube(10_000, 3, 5).unwrap();
        assert!(m.points().all(|x| x.iter().all(|c| (0.0..=1.0).contains(c))));
        for c in 0..3 {
            let mean = m.points().map(|x| x[c]).sum::<f64>() / 1e4;
            assert!((mean - 0.5).abs() < 0.02);
        }
        let one = DiscreteMeasure::sample_cube(1, 4, 0).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn samplers_are_seed_deterministic() {
        let a = DiscreteMeasure::sample_square(50, 2, 9).unwrap();
        let b = DiscreteMeasure::sample_square(50, 2, 9).unwrap();
        let c = DiscreteMeasure::sample_square(50, 2, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(matches!(DiscreteMeasure::sample_square(0, 2, 0), Err(Error::EmptyMeasure)));
    }

    #[test]
    fn moments() {
        let origin = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        assert_eq!(origin.pth_moment(2.0).unwrap(), 0.0);
        let e1 = DiscreteMeasure::dirac(vec![1.0, 0.0]).unwrap();
        assert_eq!(e1.pth_moment(2.0).unwrap(), 1.0);
        let pair = DiscreteMeasure::uniform(2, vec![vec![2.0, 0.0], vec![-2.0, 0.0]]).unwrap();
        assert!((pair.pth_moment(3.0).unwrap() - 8.0).abs() < 1e-12);
        assert!(matches!(pair.pth_moment(0.5), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let m0 = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let m1 = DiscreteMeasure::dirac(vec![1.0, 0.0]).unwrap();
        assert_eq!(mix(&m0, &m1, 0.0).unwrap(), m0);
        assert_eq!(mix(&m0, &m1, 1.0).unwrap(), m1);
        let half = mix(&m0, &m1, 0.5).unwrap();
        assert_eq!(half.weights(), &[0.5, 0.5]);
        assert_eq!(half.point(1), &[1.0, 0.0]);
        let m3 = DiscreteMeasure::dirac(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(mix(&m0, &m3, 0.5), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn quantile_free_measure1d_invariants() {
        let m = Measure1D::new(vec![3.0, -1.0, 3.0 + 1e-14, 0.0], vec![0.25; 4]).unwrap();
        assert_eq!(m.atoms(), &[-1.0, 0.0, 3.0]);
        assert_eq!(m.weights(), &[0.25, 0.25, 0.5]);
        assert!((m.cumulative().last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_schema() {
        let m = four_corners();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with("{\"dim\":2,\"points\":[[1.0,1.0]"));
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"dim":2,"points":[[1.0]],"weights":[1.0]}"#;
        assert!(serde_json::from_str::<DiscreteMeasure>(bad).is_err());
    }
}
