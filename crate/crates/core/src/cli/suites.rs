//! Verification suites behind `slicedmk verify <suite>`.
//!
//! Each suite returns a table of named checks; the suite passes when every
//! row does. Rows marked `evidence` report numerical evidence for a claim that
//! a finite computation cannot prove; they still count toward the verdict.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterexamples::{
    check_mixture_geodesic, remark_discrepancy, verify_linear_geodesic, verify_nongeodesic, GeodesicProbe,
};
use crate::duality::{build_certificate, verify_certificate};
use crate::empirics::validate_density;
use crate::smk::{check_comparison, per_direction_pow, sliced_distance, wasserstein_nd_exact};
use crate::sphere::{lq_aggregate, m_constant, DirectionKind, DirectionSet};
use crate::{rng, DiscreteMeasure, Error, Exponent, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Metric,
    Comparison,
    Nongeodesic,
    LinearGeodesic,
    Duality,
    Remark,
    Density,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Metric,
        Suite::Comparison,
        Suite::Nongeodesic,
        Suite::LinearGeodesic,
        Suite::Duality,
        Suite::Remark,
        Suite::Density,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Metric => "metric",
            Suite::Comparison => "comparison",
            Suite::Nongeodesic => "nongeodesic",
            Suite::LinearGeodesic => "linear-geodesic",
            Suite::Duality => "duality",
            Suite::Remark => "remark",
            Suite::Density => "density",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown suite {s:?}")))
    }
}

/// Knobs shared by all suites; `None` picks the suite's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub p: Option<f64>,
    pub q: Option<Exponent>,
    /// Number of random instances.
    pub instances: Option<usize>,
    pub seed: u64,
    pub dirs: Option<DirectionKind>,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams { p: None, q: None, instances: None, seed: 42, dirs: None }
    }
}

impl SuiteParams {
    fn direction_set(&self, default: DirectionKind) -> Result<DirectionSet> {
        self.dirs.unwrap_or(default).build(2)
    }

    fn pairs(&self, defaults: &[(f64, Exponent)]) -> Vec<(f64, Exponent)> {
        match (self.p, self.q) {
            (Some(p), Some(q)) => vec![(p, q)],
            (Some(p), None) => {
                let mut qs: Vec<Exponent> = defaults.iter().map(|x| x.1).collect();
                qs.dedup();
                qs.into_iter().map(|q| (p, q)).collect()
            }
            (None, Some(q)) => {
                let mut ps: Vec<f64> = defaults.iter().map(|x| x.0).collect();
                ps.dedup();
                ps.into_iter().map(|p| (p, q)).collect()
            }
            (None, None) => defaults.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub check: String,
    pub value: String,
    pub pass: bool,
    #[serde(default)]
    pub evidence: bool,
}

impl SuiteRow {
    fn new(check: impl Into<String>, value: impl ToString, pass: bool) -> Self {
        SuiteRow { check: check.into(), value: value.to_string(), pass, evidence: false }
    }

    fn evidence(mut self) -> Self {
        self.evidence = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub params: SuiteParams,
    pub rows: Vec<SuiteRow>,
    /// Full structured output of suites that have one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:<6}  value\n", "check", "status");
        for r in &self.rows {
            let status = if r.pass { "PASS" } else { "FAIL" };
            let tag = if r.evidence { "  (evidence)" } else { "" };
            out.push_str(&format!("{:<width$}  {:<6}  {}{}\n", r.check, status, r.value, tag));
        }
        out.push_str(&format!("suite {}: {}\n", self.suite, if self.pass() { "PASS" } else { "FAIL" }));
        out
    }
}

/// A measure on [−1, 1]² with 1..=max_atoms atoms and random positive weights.
pub fn random_measure(rng: &mut impl rand::Rng, max_atoms: usize) -> DiscreteMeasure {
    let k = rng.gen_range(1..=max_atoms);
    let points = (0..k).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    DiscreteMeasure::new(2, points, raw.iter().map(|w| w / total).collect()).expect("valid random measure")
}

/// A uniform measure on exactly `k` random points of [−1, 1]².
pub fn random_uniform(rng: &mut impl rand::Rng, k: usize) -> DiscreteMeasure {
    DiscreteMeasure::uniform(2, (0..k).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect())
        .expect("valid random measure")
}

pub fn run_suite(suite: Suite, params: &SuiteParams) -> Result<SuiteReport> {
    let (rows, details) = match suite {
        Suite::Metric => (metric(params)?, None),
        Suite::Comparison => (comparison(params)?, None),
        Suite::Nongeodesic => nongeodesic(params)?,
        Suite::LinearGeodesic => (linear_geodesic(params)?, None),
        Suite::Duality => (duality(params)?, None),
        Suite::Remark => (remark(params)?, None),
        Suite::Density => (density(params)?, None),
    };
    Ok(SuiteReport { suite, params: params.clone(), rows, details })
}

const METRIC_TOL: f64 = 1e-10;
const P_VALUES: [f64; 3] = [1.0, 2.0, 3.0];
const Q_VALUES: [Exponent; 3] = [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinite];

/// Triangle inequality, symmetry and identity over random triples of ≤ 10-atom measures.
fn metric(params: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let dirs = params.direction_set(DirectionKind::CircleGrid { count: 360 })?;
    let n = params.instances.unwrap_or(200);
    let ps: Vec<f64> = params.p.map_or(P_VALUES.to_vec(), |p| vec![p]);
    let qs: Vec<Exponent> = params.q.map_or(Q_VALUES.to_vec(), |q| vec![q]);
    let counts = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(params.seed, i as u64);
            let m: Vec<DiscreteMeasure> = (0..3).map(|_| random_measure(&mut rng, 10)).collect();
            let mut c = [0usize; 4];
            for &p in &ps {
                let root = |a: &DiscreteMeasure, b: &DiscreteMeasure| -> Result<Vec<f64>> {
                    Ok(per_direction_pow(a, b, p, &dirs)?.into_iter().map(|v| v.powf(1.0 / p)).collect())
                };
                let (ab, bc, ac, ba, aa) =
                    (root(&m[0], &m[1])?, root(&m[1], &m[2])?, root(&m[0], &m[2])?, root(&m[1], &m[0])?, root(&m[0], &m[0])?);
                for &q in &qs {
                    let agg = |v: &[f64]| lq_aggregate(v, dirs.weights(), q);
                    let (dab, dbc, dac) = (agg(&ab)?, agg(&bc)?, agg(&ac)?);
                    c[0] += 1;
                    c[1] += usize::from(dac > dab + dbc + METRIC_TOL);
                    c[2] += usize::from((dab - agg(&ba)?).abs() > 1e-12);
                    c[3] += usize::from(agg(&aa)? != 0.0);
                }
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold([0usize; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    Ok(vec![
        SuiteRow::new("triples x (p, q) checked", counts[0], counts[0] > 0),
        SuiteRow::new("triangle-inequality violations", counts[1], counts[1] == 0),
        SuiteRow::new("symmetry violations", counts[2], counts[2] == 0),
        SuiteRow::new("identity violations", counts[3], counts[3] == 0),
    ])
}

/// MK_{p,q} ≤ M_{max(p,q),n} MK_p on random pairs, and equality for a Dirac
/// against an arbitrary measure when p = q.
fn comparison(params: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let dirs = params.direction_set(DirectionKind::CircleGrid { count: 720 })?;
    // |<v, ω>| has kinks, so for p = 1 a 720-point grid integrates it only to
    // ~1e-5 relative accuracy, depending on the angle of v; a finer grid keeps
    // the quadrature error below the check tolerance.
    let fine = params.direction_set(DirectionKind::CircleGrid { count: 2880 })?;
    let n = params.instances.unwrap_or(50);
    let combos = params.pairs(&[
        (1.0, Exponent::Finite(1.0)),
        (1.0, Exponent::Finite(2.0)),
        (2.0, Exponent::Finite(1.0)),
        (2.0, Exponent::Finite(2.0)),
        (2.0, Exponent::Infinite),
        (3.0, Exponent::Finite(2.0)),
    ]);
    let mut rows = Vec::new();
    for &(p, q) in &combos {
        let failures = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(params.seed, i as u64);
                let (a, b) = (random_measure(&mut rng, 8), random_measure(&mut rng, 8));
                let dirs = if p == 1.0 { &fine } else { &dirs };
                Ok(usize::from(!check_comparison(&a, &b, p, q, dirs)?.ok))
            })
            .collect::<Result<Vec<usize>>>()?
            .into_iter()
            .sum::<usize>();
        rows.push(SuiteRow::new(format!("comparison p={p} q={q}: failures"), failures, failures == 0));
    }
    let ps: Vec<f64> = params.p.map_or(vec![1.5, 2.0, 3.0], |p| vec![p]);
    for p in ps {
        let worst = homothety_deviation(p, n, params.seed, &dirs)?;
        rows.push(SuiteRow::new(format!("Dirac equality p=q={p}: max deviation"), format!("{worst:.3e}"), worst <= 1e-6));
    }
    Ok(rows)
}

/// max over random (δ_x, μ) of |MK_{p,p}(δ_x, μ) − M_{p,n} · MK_p(δ_x, μ)|.
pub fn homothety_deviation(p: f64, instances: usize, seed: u64, dirs: &DirectionSet) -> Result<f64> {
    let m = m_constant(Exponent::Finite(p), dirs);
    Ok((0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, 1000 + i as u64);
            let x = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let mu = random_measure(&mut rng, 10);
            let dirac = DiscreteMeasure::dirac(x)?;
            let sliced = sliced_distance(&dirac, &mu, p, Exponent::Finite(p), dirs)?.aggregate;
            Ok((sliced - m * wasserstein_nd_exact(&dirac, &mu, p)?).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max))
}

fn nongeodesic(params: &SuiteParams) -> Result<(Vec<SuiteRow>, Option<serde_json::Value>)> {
    let dirs = params.direction_set(DirectionKind::CircleGrid { count: 720 })?;
    let p = params.p.unwrap_or(2.0);
    let q = params.q.unwrap_or(Exponent::Infinite);
    let mut probe = GeodesicProbe::new(p, q);
    probe.seed = params.seed;
    let report = verify_nongeodesic(&probe, &dirs)?;
    let mut rows: Vec<SuiteRow> = report
        .checks()
        .into_iter()
        .map(|(name, ok)| {
            let value = match name {
                "w_p(0) = w_p(pi/4)" => format!("{:.3e}", (report.w_start - report.w_end).abs()),
                "interior deficit at pi/8" => format!("{:.6}", report.interior_deficit),
                "maximum only at endpoints" => format!("{:?}", report.grid_maximizers),
                "w_p' sign pattern" => format!("{:?} vs {:.6}", report.observed_sign_change, report.critical_angle),
                "closed form = 1D solver" => format!("{:.3e}", report.closed_form_max_error),
                "E and E' disjoint" => format!(
                    "min separation {:.3e}, {} common points",
                    report.support.min_separation,
                    report.support.intersection.len()
                ),
                _ => String::new(),
            };
            SuiteRow::new(name, value, ok)
        })
        .collect();
    if let Some(w) = &report.witness {
        rows.push(
            SuiteRow::new(
                "uniform measure on E and E' as a midpoint: excess",
                format!("{:.3e} (projections match: {})", w.excess, w.matches_projected_midpoints),
                true,
            )
            .evidence(),
        );
    }
    Ok((rows, Some(serde_json::to_value(&report)?)))
}

pub const TAU_PAIRS: [(f64, f64); 5] = [(0.0, 1.0), (0.25, 0.75), (0.1, 0.6), (0.3, 0.9), (0.5, 0.2)];

fn linear_geodesic(params: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let dirs = params.direction_set(DirectionKind::CircleGrid { count: 720 })?;
    let n = params.instances.unwrap_or(20);
    let q = params.q.unwrap_or(Exponent::Finite(2.0));
    let instances: Vec<(DiscreteMeasure, DiscreteMeasure)> = (0..n)
        .map(|i| {
            let mut rng = rng::stream(params.seed, i as u64);
            (random_uniform(&mut rng, 5), random_uniform(&mut rng, 5))
        })
        .collect();
    let worst = instances
        .par_iter()
        .map(|(a, b)| Ok(verify_linear_geodesic(a, b, q, &TAU_PAIRS, &dirs)?.max_deviation))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let (a, b) = &instances[0];
    let p = params.p.filter(|p| *p > 1.0).unwrap_or(2.0);
    let failing = check_mixture_geodesic(a, b, p, q, &[(0.0, 0.5)], &dirs)?;
    let row = failing.rows[0];
    Ok(vec![
        SuiteRow::new(format!("p=1 q={q}: max |lhs - rhs| over {n} x {} pairs", TAU_PAIRS.len()), format!("{worst:.3e}"), worst <= 1e-9),
        SuiteRow::new(
            format!("p={p} mixture at tau=(0, 1/2) is not a geodesic"),
            format!("lhs {:.6} > rhs {:.6}", row.lhs, row.rhs),
            row.lhs > row.rhs + 1e-9,
        )
        .evidence(),
    ])
}

pub const DUALITY_PAIRS: [(f64, Exponent); 4] = [
    (2.0, Exponent::Finite(2.0)),
    (1.0, Exponent::Finite(2.0)),
    (2.0, Exponent::Finite(4.0)),
    (2.0, Exponent::Infinite),
];

/// Gap statistics of constructed certificates for one (p, q).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub min_gap: f64,
    pub max_gap: f64,
    pub invalid: usize,
    /// For p = q: every ζ equals 1 exactly.
    pub zeta_constant: bool,
}

pub fn duality_gaps(p: f64, q: Exponent, instances: usize, seed: u64, dirs: &DirectionSet) -> Result<GapSummary> {
    let results = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let (a, b) = (random_measure(&mut rng, 8), random_measure(&mut rng, 8));
            let cert = build_certificate(&a, &b, p, q, dirs)?;
            let check = verify_certificate(&cert, &a, &b, dirs)?;
            let gap = cert.primal - check.dual_value;
            Ok((gap, check.admissible && check.norm_ok, cert.zeta.iter().all(|z| *z == 1.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapSummary {
        min_gap: results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        max_gap: results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max),
        invalid: results.iter().filter(|r| !r.1).count(),
        zeta_constant: results.iter().all(|r| r.2),
    })
}

fn duality(params: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let dirs = params.direction_set(DirectionKind::CircleGrid { count: 360 })?;
    let n = params.instances.unwrap_or(50);
    let mut rows = Vec::new();
    for (p, q) in params.pairs(&DUALITY_PAIRS) {
        let s = duality_gaps(p, q, n, params.seed, &dirs)?;
        rows.push(SuiteRow::new(
            format!("p={p} q={q}: gap range"),
            format!("[{:.3e}, {:.3e}]", s.min_gap, s.max_gap),
            s.min_gap >= -1e-9 && s.max_gap <= 1e-5,
        ));
        rows.push(SuiteRow::new(format!("p={p} q={q}: invalid certificates"), s.invalid, s.invalid == 0));
        if Exponent::Finite(p) == q {
            rows.push(SuiteRow::new(format!("p=q={p}: zeta identically 1"), s.zeta_constant, s.zeta_constant));
        }
    }
    Ok(rows)
}

pub const REMARK_PAIRS: [(f64, Exponent); 4] = [
    (1.0, Exponent::Finite(2.0)),
    (2.0, Exponent::Finite(1.0)),
    (1.0, Exponent::Infinite),
    (2.0, Exponent::Finite(2.0)),
];

fn remark(params: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let dirs = params.direction_set(DirectionKind::CircleGrid { count: 720 })?;
    let mut rows = Vec::new();
    for (p, q) in params.pairs(&REMARK_PAIRS) {
        let r = remark_discrepancy(p, q, 2, &dirs)?;
        rows.push(SuiteRow::new(format!("p={p} q={q}: classical distances both 1"), format!("{:?}", r.classical), r.classical_equal));
        rows.push(SuiteRow::new(
            format!("p={p} q={q}: sliced value {} M", r.expected),
            format!("{:.6} vs {:.6} (margin {:.3e}, quadrature {:.1e})", r.sliced.1, r.m_constant, r.margin, r.quadrature_error),
            r.ok,
        ));
    }
    Ok(rows)
}

fn density(params: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let n = params.instances.unwrap_or(100_000);
    [0.0, FRAC_PI_8, FRAC_PI_4]
        .into_iter()
        .map(|theta| {
            let r = validate_density(theta, n, params.seed)?;
            Ok(SuiteRow::new(
                format!("KS theta={theta:.4}"),
                format!("{:.5} (band {:.5})", r.statistic, r.threshold),
                r.pass.unwrap_or(true),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass() {
        let params = SuiteParams { instances: Some(5), ..Default::default() };
        for s in [Suite::Metric, Suite::Comparison, Suite::LinearGeodesic, Suite::Duality, Suite::Remark] {
            let r = run_suite(s, &params).unwrap();
            assert!(r.pass(), "{}", r.table());
        }
    }

    #[test]
    fn nongeodesic_suite_reports_the_intersection() {
        let r = run_suite(Suite::Nongeodesic, &SuiteParams::default()).unwrap();
        let support = r.rows.iter().find(|x| x.check == "E and E' disjoint").unwrap();
        assert!(!support.pass);
        assert!(r.rows.iter().filter(|x| x.check != "E and E' disjoint").all(|x| x.pass));
        assert!(r.details.is_some());
    }
}
