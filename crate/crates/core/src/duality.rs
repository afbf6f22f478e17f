//! Dual certificates for MK_{p,q}^p when p ≤ q.
//!
//! With r = q/p the primal value is ‖ω ↦ MK_p(R^ω μ, R^ω ν)^p‖_{L^r}. A
//! certificate stores, for every quadrature direction, a pair of potentials
//! (φ_ω, ψ_ω) with −φ_ω(t) − ψ_ω(s) ≤ |t − s|^p, plus a weight ζ > 0 with
//! ‖ζ‖_{L^{r'}} ≤ 1. Then
//!
//! ```text
//! Σ_ω w_ω ζ_ω ( −∫φ_ω dR^ω μ − ∫ψ_ω dR^ω ν )  ≤  MK_{p,q}(μ, ν)^p
//! ```
//!
//! by admissibility and Hölder, and the constructed certificates make the two
//! sides agree up to rounding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::check_exponent;
use crate::measures::DiscreteMeasure;
use crate::numeric::{abs_pow, compensated_sum};
use crate::ot1d::{self, GridFunction};
use crate::sphere::{lq_aggregate, DirectionSet};
use crate::{Error, Exponent, Result};

/// Floor applied to ζ on directions where the distance vanishes.
pub const ZETA_FLOOR: f64 = 1e-12;

const ADMISSIBILITY_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub phi: GridFunction,
    pub psi: GridFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub p: f64,
    pub q: Exponent,
    pub r: Exponent,
    pub r_prime: Exponent,
    pub dirset_id: String,
    pub potentials: Vec<PotentialPair>,
    pub zeta: Vec<f64>,
    pub dual_value: f64,
    /// MK_{p,q}(μ, ν)^p under the same quadrature.
    pub primal: f64,
}

impl DualCertificate {
    /// primal − dual; non-negative up to rounding.
    pub fn gap(&self) -> f64 {
        self.primal - self.dual_value
    }
}

/// Result of re-checking a certificate from its stored data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub admissible: bool,
    pub norm_ok: bool,
    pub dual_value: f64,
    /// Largest value of −φ(t) − ψ(s) − |t − s|^p seen.
    pub max_violation: f64,
    pub zeta_norm: f64,
}

/// r = q / p.
pub fn ratio_exponent(p: f64, q: Exponent) -> Exponent {
    match q {
        Exponent::Finite(q) => Exponent::Finite(q / p),
        Exponent::Infinite => Exponent::Infinite,
    }
}

/// The maximizer of Σ w ζ v over ‖ζ‖_{r'} ≤ 1:
/// ζ_i = (v_i / ‖v‖_r)^{r−1} for finite r > 1, ζ ≡ 1 for r = 1, and a point
/// mass (density 1/w_i) on the largest value for r = ∞. Zero entries are
/// floored at [`ZETA_FLOOR`] and the result rescaled so ‖ζ‖_{r'} ≤ 1.
pub fn zeta_from_values(values: &[f64], weights: &[f64], r: Exponent) -> Result<Vec<f64>> {
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
    if r == Exponent::Finite(1.0) {
        return Ok(vec![1.0; values.len()]);
    }
    if values.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateInput);
    }
    let mut zeta: Vec<f64> = match r {
        Exponent::Finite(r) => {
            let norm = lq_aggregate(values, weights, Exponent::Finite(r))?;
            values.iter().map(|v| abs_pow(v / norm, r - 1.0)).collect()
        }
        Exponent::Infinite => {
            let (best, _) = values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
            let mut z = vec![0.0; values.len()];
            z[best] = 1.0 / weights[best];
            z
        }
    };
    for z in &mut zeta {
        if *z < ZETA_FLOOR {
            *z = ZETA_FLOOR;
        }
    }
    let norm = lq_aggregate(&zeta, weights, r.conjugate())?;
    if norm > 1.0 {
        zeta.iter_mut().for_each(|z| *z /= norm);
    }
    Ok(zeta)
}

/// Builds the certificate from per-direction optimal potentials and the
/// Hölder-extremal ζ of the per-direction p-th-power distances.
pub fn build_certificate(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    q: Exponent,
    dirs: &DirectionSet,
) -> Result<DualCertificate> {
    check_exponent(p)?;
    if q.as_f64() < p {
        return Err(Error::HypothesisViolated { p, q: q.to_string() });
    }
    if mu.dim() != nu.dim() || mu.dim() != dirs.dim() {
        return Err(Error::DimMismatch { expected: mu.dim(), found: nu.dim().max(dirs.dim()) });
    }
    let per_direction: Vec<(PotentialPair, f64, f64)> = (0..dirs.len())
        .into_par_iter()
        .map(|k| {
            let w = dirs.direction(k);
            let (a, b) = (mu.project_unchecked(w), nu.project_unchecked(w));
            let (phi, psi) = ot1d::optimal_potentials_1d(&a, &b, p)?;
            let dual = ot1d::dual_value_1d(&phi, &psi, &a, &b)?;
            let primal = ot1d::wasserstein_pow_unchecked(&a, &b, p);
            Ok((PotentialPair { phi, psi }, dual, primal))
        })
        .collect::<Result<_>>()?;

    let r = ratio_exponent(p, q);
    let primal_values: Vec<f64> = per_direction.iter().map(|x| x.2).collect();
    let zeta = match zeta_from_values(&primal_values, dirs.weights(), r) {
        Ok(z) => z,
        Err(Error::DegenerateInput) => vec![1.0; dirs.len()],
        Err(e) => return Err(e),
    };
    let dual_value = compensated_sum(
        per_direction.iter().zip(&zeta).zip(dirs.weights()).map(|(((_, d, _), z), w)| w * z * d),
    );
    let primal = lq_aggregate(&primal_values, dirs.weights(), r)?;
    Ok(DualCertificate {
        p,
        q,
        r,
        r_prime: r.conjugate(),
        dirset_id: dirs.id(),
        potentials: per_direction.into_iter().map(|x| x.0).collect(),
        zeta,
        dual_value,
        primal,
    })
}

/// Re-checks admissibility, the ζ constraint and the dual value using only the
/// stored certificate and the measures' projections (no re-solve).
pub fn verify_certificate(
    cert: &DualCertificate,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    dirs: &DirectionSet,
) -> Result<CertificateCheck> {
    if cert.potentials.len() != dirs.len() || cert.zeta.len() != dirs.len() {
        return Err(Error::ShapeMismatch(format!(
            "certificate has {} potential pairs and {} zeta values for {} directions",
            cert.potentials.len(),
            cert.zeta.len(),
            dirs.len()
        )));
    }
    if cert.dirset_id != dirs.id() {
        return Err(Error::ShapeMismatch(format!(
            "certificate built on {}, checked against {}",
            cert.dirset_id,
            dirs.id()
        )));
    }
    check_exponent(cert.p)?;
    let p = cert.p;
    let per_direction: Vec<(f64, f64)> = (0..dirs.len())
        .into_par_iter()
        .map(|k| {
            let pair = &cert.potentials[k];
            let mut worst = f64::NEG_INFINITY;
            for (t, f) in pair.phi.grid().iter().zip(pair.phi.values()) {
                for (s, g) in pair.psi.grid().iter().zip(pair.psi.values()) {
                    let c = abs_pow(t - s, p);
                    worst = worst.max((-f - g - c) / c.max(1.0));
                }
            }
            let w = dirs.direction(k);
            let dual = ot1d::dual_value_1d(&pair.phi, &pair.psi, &mu.project_unchecked(w), &nu.project_unchecked(w))?;
            Ok((worst, dual))
        })
        .collect::<Result<_>>()?;
    let max_violation = per_direction.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    let zeta_positive = cert.zeta.iter().all(|z| *z > 0.0 && z.is_finite());
    let zeta_norm = lq_aggregate(&cert.zeta, dirs.weights(), cert.r.conjugate()).unwrap_or(f64::INFINITY);
    let dual_value = compensated_sum(
        per_direction.iter().zip(&cert.zeta).zip(dirs.weights()).map(|(((_, d), z), w)| w * z * d),
    );
    Ok(CertificateCheck {
        admissible: max_violation <= ADMISSIBILITY_TOL,
        norm_ok: zeta_positive && zeta_norm <= 1.0 + NORM_TOL,
        dual_value,
        max_violation,
        zeta_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smk::sliced_distance;
    use crate::sphere::{circle_grid, mc_directions};
    use rand::{Rng, SeedableRng};

    fn random_uniform(rng: &mut impl Rng, k: usize) -> DiscreteMeasure {
        DiscreteMeasure::uniform(2, (0..k).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect())
            .unwrap()
    }

    #[test]
    fn zeta_r_one_is_constant() {
        let z = zeta_from_values(&[0.0, 3.0, 1.0], &[0.2, 0.3, 0.5], Exponent::Finite(1.0)).unwrap();
        assert_eq!(z, vec![1.0; 3]);
    }

    #[test]
    fn zeta_constant_values_holder_equality() {
        let v = [2.0; 4];
        let w = [0.25; 4];
        let z = zeta_from_values(&v, &w, Exponent::Finite(2.0)).unwrap();
        let pairing: f64 = v.iter().zip(&z).zip(&w).map(|((a, b), c)| a * b * c).sum();
        assert!((pairing - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_two_values() {
        let v = [0.0, 2.0];
        let w = [0.5, 0.5];
        let z = zeta_from_values(&v, &w, Exponent::Finite(2.0)).unwrap();
        assert!(z[0] > 0.0 && z[0] <= 2.0 * ZETA_FLOOR);
        assert!((z[1] - 2.0 / 2f64.sqrt()).abs() < 1e-9);
        let pairing = 0.5 * z[1] * 2.0;
        assert!((pairing - 2f64.sqrt()).abs() < 1e-9);
        let norm = lq_aggregate(&z, &w, Exponent::Finite(2.0)).unwrap();
        assert!(norm <= 1.0 + 1e-12);
    }

    #[test]
    fn zeta_point_mass_for_infinite_r() {
        let w = [0.25; 4];
        let z = zeta_from_values(&[1.0, 4.0, 2.0, 0.5], &w, Exponent::Infinite).unwrap();
        let l1: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!(l1 <= 1.0 + 1e-12);
        assert!((z[1] * 0.25 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zeta_degenerate_input() {
        assert!(matches!(
            zeta_from_values(&[0.0, 0.0], &[0.5, 0.5], Exponent::Finite(2.0)),
            Err(Error::DegenerateInput)
        ));
    }

    #[test]
    fn identical_measures_certificate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mu = random_uniform(&mut rng, 5);
        let c = build_certificate(&mu, &mu, 2.0, Exponent::Finite(4.0), &circle_grid(64).unwrap()).unwrap();
        assert!(c.dual_value.abs() < 1e-12 && c.primal == 0.0);
    }

    #[test]
    fn dirac_pair_certificate_matches_m_constant() {
        let o = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let e1 = DiscreteMeasure::dirac(vec![1.0, 0.0]).unwrap();
        let g = circle_grid(720).unwrap();
        let c = build_certificate(&o, &e1, 2.0, Exponent::Finite(2.0), &g).unwrap();
        assert!((c.dual_value - 0.5).abs() < 1e-6);
        let primal = sliced_distance(&o, &e1, 2.0, Exponent::Finite(2.0), &g).unwrap().aggregate;
        assert!((c.dual_value - primal * primal).abs() < 1e-9);
    }

    #[test]
    fn random_gap_is_small_and_nonnegative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let g = circle_grid(64).unwrap();
        for _ in 0..50 {
            let mu = random_uniform(&mut rng, 6);
            let nu = random_uniform(&mut rng, 6);
            let c = build_certificate(&mu, &nu, 2.0, Exponent::Finite(4.0), &g).unwrap();
            assert!(c.gap() >= -1e-9 && c.gap() <= 1e-5, "gap {}", c.gap());
        }
    }

    #[test]
    fn hypothesis_is_enforced() {
        let o = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            build_certificate(&o, &o, 2.0, Exponent::Finite(1.0), &circle_grid(8).unwrap()),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn verification_round_trip_and_perturbations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let g = circle_grid(32).unwrap();
        let mu = random_uniform(&mut rng, 4);
        let nu = random_uniform(&mut rng, 4);
        let cert = build_certificate(&mu, &nu, 2.0, Exponent::Finite(4.0), &g).unwrap();
        let check = verify_certificate(&cert, &mu, &nu, &g).unwrap();
        assert!(check.admissible && check.norm_ok);
        assert!((check.dual_value - cert.dual_value).abs() < 1e-12);

        // Raising φ at one μ atom lowers the dual by w·ζ·δ·mass and keeps admissibility.
        let delta = 1e-3;
        let k = 3;
        let atom = mu.project(g.direction(k)).unwrap();
        let t = atom.atoms()[0];
        let mass = atom.weights()[0];
        let mut perturbed = cert.clone();
        let phi = &mut perturbed.potentials[k].phi;
        let idx = phi.grid().iter().position(|x| (x - t).abs() < 1e-12).unwrap();
        phi.values_mut()[idx] += delta;
        let check2 = verify_certificate(&perturbed, &mu, &nu, &g).unwrap();
        assert!(check2.admissible);
        let expected = g.weights()[k] * cert.zeta[k] * delta * mass;
        assert!((check.dual_value - check2.dual_value - expected).abs() < 1e-12);

        let mut scaled = cert.clone();
        scaled.zeta.iter_mut().for_each(|z| *z *= 1.1);
        assert!(!verify_certificate(&scaled, &mu, &nu, &g).unwrap().norm_ok);

        let mut broken = cert.clone();
        broken.potentials[0].psi.values_mut()[0] -= 1.0;
        assert!(!verify_certificate(&broken, &mu, &nu, &g).unwrap().admissible);

        assert!(matches!(
            verify_certificate(&cert, &mu, &nu, &circle_grid(16).unwrap()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = circle_grid(16).unwrap();
        let mu = random_uniform(&mut rng, 5);
        let nu = random_uniform(&mut rng, 3);
        let cert = build_certificate(&mu, &nu, 1.5, Exponent::Infinite, &g).unwrap();
        let s = serde_json::to_string(&cert).unwrap();
        let back: DualCertificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cert);
        let check = verify_certificate(&back, &mu, &nu, &g).unwrap();
        assert!(check.admissible && check.norm_ok);
        assert_eq!(check.dual_value.to_bits(), verify_certificate(&cert, &mu, &nu, &g).unwrap().dual_value.to_bits());
    }

    #[test]
    fn monte_carlo_directions_give_valid_certificates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let d = mc_directions(2, 128, 5).unwrap();
        let mu = random_uniform(&mut rng, 6);
        let nu = random_uniform(&mut rng, 6);
        let cert = build_certificate(&mu, &nu, 1.0, Exponent::Finite(3.0), &d).unwrap();
        let check = verify_certificate(&cert, &mu, &nu, &d).unwrap();
        assert!(check.admissible && check.norm_ok);
        assert!(cert.gap() >= -1e-9 && cert.gap() < 1e-6);
    }
}
