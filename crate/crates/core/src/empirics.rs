//! Sampling experiments around the uniform square: the projected density
//! f_θ, Kolmogorov–Smirnov validation of it, empirical sampling rates of the
//! sliced distance, and the sliced-vs-classical rate comparison.
//!
//! Continuous references are replaced by dense empirical proxies so every
//! distance stays exact and discrete. All sampling goes through
//! [`crate::rng`]; trial `k` at sample size `N` has its own seed, so results
//! do not depend on scheduling.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::check_exponent;
use crate::measures::DiscreteMeasure;
use crate::numeric::{dot, mean_and_std_error, norm, ols_slope};
use crate::ot1d::wasserstein_pow_sorted_uniform;
use crate::smk::{wasserstein_nd_exact_pow, ASSIGNMENT_CAP};
use crate::sphere::{lq_aggregate, DirectionSet};
use crate::{rng, Error, Exponent, Result};

/// Smallest sample size for which a KS pass/fail verdict is given.
pub const KS_MIN_SAMPLES: usize = 1000;
/// Asymptotic 99% Kolmogorov critical value.
pub const KS_CRITICAL_99: f64 = 1.63;
/// Safety factor on the KS band.
pub const KS_SAFETY: f64 = 1.5;
/// Dense proxy size relative to the largest sample size.
pub const PROXY_FACTOR: usize = 64;

fn check_angle(theta: f64) -> Result<()> {
    if (0.0..=FRAC_PI_4).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("angle must lie in [0, π/4], got {theta}")))
    }
}

/// Density of ⟨X, (cos θ, sin θ)⟩ for X uniform on [−1, 1]², θ ∈ [0, π/4].
pub fn f_theta_density(theta: f64, t: f64) -> Result<f64> {
    check_angle(theta)?;
    let (s, c) = theta.sin_cos();
    let t = t.abs();
    Ok(if t <= c - s {
        1.0 / (2.0 * c)
    } else if t <= c + s {
        (c + s - t) / (4.0 * s * c)
    } else {
        0.0
    })
}

/// Distribution function matching [`f_theta_density`].
pub fn f_theta_cdf(theta: f64, t: f64) -> Result<f64> {
    check_angle(theta)?;
    Ok(cdf_unchecked(theta, t))
}

fn cdf_unchecked(theta: f64, t: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let upper = |t: f64| {
        if t <= c - s {
            0.5 + t / (2.0 * c)
        } else if t < c + s {
            1.0 - (c + s - t).powi(2) / (8.0 * c * s)
        } else {
            1.0
        }
    };
    if t >= 0.0 {
        upper(t)
    } else {
        1.0 - upper(-t)
    }
}

/// ∫ f_θ, evaluated piece by piece with Simpson's rule (exact on each linear piece).
pub fn density_mass(theta: f64) -> Result<f64> {
    check_angle(theta)?;
    let (s, c) = theta.sin_cos();
    let breaks = [0.0, c - s, c + s];
    let mut half = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a {
            let f = |x| f_theta_density(theta, x).expect("angle checked");
            // Evaluate just inside the piece so the branch matches the piece.
            let (fa, fb) = (f(a + (b - a) * 1e-15), f(b));
            half += (b - a) / 6.0 * (fa + 4.0 * f(0.5 * (a + b)) + fb);
        }
    }
    Ok(2.0 * half)
}

/// CDF of ⟨X, ω⟩ for X uniform on the square [−1, 1]² × {0}^{n−2} ⊂ R^n.
///
/// With a = |(ω₁, ω₂)| and θ the angle of (|ω₁|, |ω₂|) folded into [0, π/4],
/// this is t ↦ F_θ(t / a); for a = 0 it is the step at 0.
pub fn projected_square_cdf(direction: &[f64], t: f64) -> f64 {
    let (x, y) = (direction[0].abs(), direction.get(1).map_or(0.0, |v| v.abs()));
    let a = x.hypot(y);
    if a == 0.0 {
        return if t >= 0.0 { 1.0 } else { 0.0 };
    }
    let theta = y.atan2(x);
    let theta = if theta > FRAC_PI_4 { std::f64::consts::FRAC_PI_2 - theta } else { theta };
    cdf_unchecked(theta.clamp(0.0, FRAC_PI_4), t / a)
}

/// Outcome of one KS comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsCheck {
    pub samples: usize,
    pub statistic: f64,
    pub threshold: f64,
    /// `None` below [`KS_MIN_SAMPLES`].
    pub pass: Option<bool>,
}

/// Conservative band 1.5 · 1.63 / √N.
pub fn ks_threshold(samples: usize) -> f64 {
    KS_SAFETY * KS_CRITICAL_99 / (samples as f64).sqrt()
}

/// sup_t |F_N(t) − F(t)| for the sorted sample `xs`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// KS distance between projected uniform-square samples and the analytic law,
/// for any direction of R^n (n ≥ 2; the square sits in the first two coordinates).
pub fn validate_projected_law(direction: &[f64], samples: usize, seed: u64) -> Result<KsCheck> {
    if direction.len() < 2 {
        return Err(Error::DimMismatch { expected: 2, found: direction.len() });
    }
    if (norm(direction) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDirection { norm: norm(direction) });
    }
    if direction[0] == 0.0 && direction[1] == 0.0 {
        return Err(Error::InvalidParam("direction is orthogonal to the square; the projected law is a point mass".into()));
    }
    let square = DiscreteMeasure::sample_square(samples, direction.len(), seed)?;
    let mut xs: Vec<f64> = square.points().map(|x| dot(x, direction)).collect();
    xs.sort_unstable_by(f64::total_cmp);
    let statistic = ks_statistic(&xs, |t| projected_square_cdf(direction, t));
    let threshold = ks_threshold(samples);
    Ok(KsCheck {
        samples,
        statistic,
        threshold,
        pass: (samples >= KS_MIN_SAMPLES).then_some(statistic <= threshold),
    })
}

/// [`validate_projected_law`] along ω(θ) = (cos θ, sin θ).
pub fn validate_density(theta: f64, samples: usize, seed: u64) -> Result<KsCheck> {
    check_angle(theta)?;
    validate_projected_law(&[theta.cos(), theta.sin()], samples, seed)
}

/// Which quantity a [`RateRecord`] summarizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticId {
    SlicedPq { p: f64, q: Exponent },
    ClassicalP { p: f64 },
    PerDirection { p: f64, direction: Vec<f64> },
    /// Classical over sliced mean.
    Ratio { p: f64, q: Exponent },
}

impl fmt::Display for StatisticId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticId::SlicedPq { p, q } => write!(f, "sliced_pq({p},{q})"),
            StatisticId::ClassicalP { p } => write!(f, "classical_p({p})"),
            StatisticId::PerDirection { p, direction } => {
                let d: Vec<String> = direction.iter().map(|x| x.to_string()).collect();
                write!(f, "per_direction({p};{})", d.join(" "))
            }
            StatisticId::Ratio { p, q } => write!(f, "ratio({p},{q})"),
        }
    }
}

/// Mean (over trials) of a p-th-power distance at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub n: usize,
    pub trials: usize,
    pub statistic: StatisticId,
    pub mean: f64,
    /// Standard error of the mean; 0 for a single trial.
    pub std_error: f64,
    /// Theoretical upper bound, when one applies.
    pub bound: Option<f64>,
    pub pass: Option<bool>,
}

/// Least-squares line through (ln N, ln mean).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LogLogFit {
    /// exp(intercept): the fitted constant C in mean ≈ C · N^slope.
    pub fn constant(&self) -> f64 {
        self.intercept.exp()
    }
}

pub fn loglog_fit(ns: &[usize], means: &[f64]) -> LogLogFit {
    let x: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let y: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let slope = ols_slope(&x, &y);
    let k = x.len() as f64;
    let intercept = y.iter().sum::<f64>() / k - slope * x.iter().sum::<f64>() / k;
    LogLogFit { slope, intercept }
}

/// (5p)^p · 2^{p+1} · N^{−p/2}.
pub fn sampling_bound(p: f64, n: usize) -> f64 {
    (5.0 * p).powf(p) * 2f64.powf(p + 1.0) * (n as f64).powf(-p / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperiment {
    pub p: f64,
    pub q: Exponent,
    pub dim: usize,
    pub dirset_id: String,
    pub seed: u64,
    pub proxy_size: usize,
    pub records: Vec<RateRecord>,
    /// `None` with fewer than two sample sizes.
    pub fit: Option<LogLogFit>,
    /// −p/2.
    pub expected_slope: f64,
    /// Every record under the bound (only meaningful for p ≥ 2).
    pub bound_ok: Option<bool>,
}

/// Sorted projections of a uniform point cloud onto every direction.
fn sorted_projections(m: &DiscreteMeasure, dirs: &DirectionSet) -> Vec<Vec<f64>> {
    (0..dirs.len())
        .into_par_iter()
        .map(|k| {
            let w = dirs.direction(k);
            let mut v: Vec<f64> = m.points().map(|x| dot(x, w)).collect();
            v.sort_unstable_by(f64::total_cmp);
            v
        })
        .collect()
}

/// MK_{p,q}^p between uniform clouds given their sorted projections.
fn sliced_pow_sorted(a: &[Vec<f64>], b: &[Vec<f64>], p: f64, q: Exponent, weights: &[f64]) -> Result<f64> {
    let per: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| wasserstein_pow_sorted_uniform(x, y, p).powf(1.0 / p))
        .collect();
    Ok(lq_aggregate(&per, weights, q)?.powf(p))
}

fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    rng::derive(rng::derive(seed, n as u64), trial as u64)
}

fn check_sizes(ns: &[usize], trials: usize) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::InvalidParam("no sample sizes given".into()));
    }
    if ns.contains(&0) {
        return Err(Error::InvalidParam("sample sizes must be positive".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParam("at least one trial is required".into()));
    }
    Ok(())
}

/// E[MK_{p,q}(μ, μ_N)^p] for the uniform square μ, estimated against a fixed
/// proxy of 64 · max(N) points.
///
/// The bound flag compares each mean with (5p)^p 2^{p+1} N^{−p/2}; it is only
/// set for p ≥ 2, the range where that bound is stated.
pub fn sampling_rate_experiment(
    p: f64,
    q: Exponent,
    ns: &[usize],
    trials: usize,
    dirs: &DirectionSet,
    seed: u64,
) -> Result<RateExperiment> {
    check_exponent(p)?;
    check_sizes(ns, trials)?;
    let dim = dirs.dim();
    let proxy_size = PROXY_FACTOR * ns.iter().copied().max().expect("non-empty");
    let proxy = DiscreteMeasure::sample_square(proxy_size, dim, rng::derive(seed, u64::MAX))?;
    let reference = sorted_projections(&proxy, dirs);
    let statistic = if dirs.len() == 1 {
        StatisticId::PerDirection { p, direction: dirs.direction(0).to_vec() }
    } else {
        StatisticId::SlicedPq { p, q }
    };

    let mut records = Vec::with_capacity(ns.len());
    for &n in ns {
        let values: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let sample = DiscreteMeasure::sample_square(n, dim, trial_seed(seed, n, t))?;
                sliced_pow_sorted(&reference, &sorted_projections(&sample, dirs), p, q, dirs.weights())
            })
            .collect::<Result<_>>()?;
        let (mean, std_error) = mean_and_std_error(&values);
        let bound = (p >= 2.0).then(|| sampling_bound(p, n));
        records.push(RateRecord {
            n,
            trials,
            statistic: statistic.clone(),
            mean,
            std_error,
            bound,
            pass: bound.map(|b| mean <= b),
        });
    }
    let fit = (ns.len() >= 2).then(|| loglog_fit(ns, &records.iter().map(|r| r.mean).collect::<Vec<_>>()));
    let bound_ok = (p >= 2.0).then(|| records.iter().all(|r| r.pass == Some(true)));
    Ok(RateExperiment {
        p,
        q,
        dim,
        dirset_id: dirs.id(),
        seed,
        proxy_size,
        records,
        fit,
        expected_slope: -p / 2.0,
        bound_ok,
    })
}

/// Reference law for the separation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Uniform on [−1, 1]² × {0}^{n−2}.
    Square,
    /// Uniform on [0, 1]^n.
    Cube,
}

impl Reference {
    fn sample(self, n: usize, dim: usize, seed: u64) -> Result<DiscreteMeasure> {
        match self {
            Reference::Square => DiscreteMeasure::sample_square(n, dim, seed),
            Reference::Cube => DiscreteMeasure::sample_cube(n, dim, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub n: usize,
    pub trials: usize,
    pub classical_mean: f64,
    pub classical_std_error: f64,
    pub sliced_mean: f64,
    pub sliced_std_error: f64,
    /// classical_mean / sliced_mean.
    pub ratio: f64,
    pub ratio_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationTable {
    pub p: f64,
    pub q: Exponent,
    pub dim: usize,
    pub reference: Reference,
    pub dirset_id: String,
    pub seed: u64,
    pub rows: Vec<SeparationRow>,
    pub ratio_monotone: bool,
    pub classical_fit: Option<LogLogFit>,
    pub sliced_fit: Option<LogLogFit>,
    pub note: String,
}

impl SeparationTable {
    /// Long format for CSV output: classical, sliced and ratio per N.
    pub fn records(&self) -> Vec<RateRecord> {
        let (p, q) = (self.p, self.q);
        self.rows
            .iter()
            .flat_map(|r| {
                [
                    (StatisticId::ClassicalP { p }, r.classical_mean, r.classical_std_error),
                    (StatisticId::SlicedPq { p, q }, r.sliced_mean, r.sliced_std_error),
                    (StatisticId::Ratio { p, q }, r.ratio, r.ratio_std_error),
                ]
                .into_iter()
                .map(move |(statistic, mean, std_error)| RateRecord {
                    n: r.n,
                    trials: r.trials,
                    statistic,
                    mean,
                    std_error,
                    bound: None,
                    pass: None,
                })
            })
            .collect()
    }
}

/// Classical MK_p^p versus sliced MK_{p,q}^p between two independent N-samples
/// of the reference law, for each N.
///
/// A ratio that keeps growing with N is consistent with the two metrics not
/// being bi-Lipschitz equivalent; a finite simulation cannot prove it.
pub fn rate_separation_experiment(
    p: f64,
    q: Exponent,
    ns: &[usize],
    trials: usize,
    reference: Reference,
    dirs: &DirectionSet,
    seed: u64,
) -> Result<SeparationTable> {
    check_exponent(p)?;
    check_sizes(ns, trials)?;
    if let Some(&n) = ns.iter().find(|&&n| n > ASSIGNMENT_CAP) {
        return Err(Error::TooLarge { what: "sample size", size: n, cap: ASSIGNMENT_CAP });
    }
    let dim = dirs.dim();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let pairs: Vec<(f64, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = trial_seed(seed, n, t);
                let a = reference.sample(n, dim, rng::derive(s, 0))?;
                let b = reference.sample(n, dim, rng::derive(s, 1))?;
                let classical = wasserstein_nd_exact_pow(&a, &b, p)?;
                let sliced =
                    sliced_pow_sorted(&sorted_projections(&a, dirs), &sorted_projections(&b, dirs), p, q, dirs.weights())?;
                Ok((classical, sliced))
            })
            .collect::<Result<_>>()?;
        let (cm, cse) = mean_and_std_error(&pairs.iter().map(|x| x.0).collect::<Vec<_>>());
        let (sm, sse) = mean_and_std_error(&pairs.iter().map(|x| x.1).collect::<Vec<_>>());
        let ratio = cm / sm;
        let rel = |se: f64, m: f64| if m > 0.0 { se / m } else { 0.0 };
        rows.push(SeparationRow {
            n,
            trials,
            classical_mean: cm,
            classical_std_error: cse,
            sliced_mean: sm,
            sliced_std_error: sse,
            ratio,
            ratio_std_error: ratio * rel(cse, cm).hypot(rel(sse, sm)),
        });
    }
    let ratio_monotone = rows.windows(2).all(|w| w[1].ratio >= w[0].ratio);
    let fit = |f: fn(&SeparationRow) -> f64| {
        (ns.len() >= 2).then(|| loglog_fit(ns, &rows.iter().map(f).collect::<Vec<_>>()))
    };
    Ok(SeparationTable {
        p,
        q,
        dim,
        reference,
        dirset_id: dirs.id(),
        seed,
        classical_fit: fit(|r| r.classical_mean),
        sliced_fit: fit(|r| r.sliced_mean),
        rows,
        ratio_monotone,
        note: "simulation evidence only: a growing ratio does not prove the metrics are inequivalent".into(),
    })
}

#[derive(Serialize)]
struct CsvRow {
    #[serde(rename = "N")]
    n: usize,
    statistic_id: String,
    mean: f64,
    std_error: f64,
    bound: Option<f64>,
    pass: Option<bool>,
}

/// Writes records with columns N, statistic_id, mean, std_error, bound, pass.
pub fn write_records_csv<W: Write>(records: &[RateRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            n: r.n,
            statistic_id: r.statistic.to_string(),
            mean: r.mean,
            std_error: r.std_error,
            bound: r.bound,
            pass: r.pass,
        })?;
    }
    w.flush()?;
    Ok(())
}
