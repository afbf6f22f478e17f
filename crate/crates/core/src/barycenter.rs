//! Free-support barycenters of the sliced functional
//!
//! ```text
//! B(ν) = Σ_k λ_k MK_{p,q}(μ_k, ν)^κ
//! ```
//!
//! over equal-weight measures ν with a fixed number of atoms. The solver is a
//! (stochastic) subgradient method: each iteration takes a batch of directions,
//! matches the projected atoms of ν monotonically against every projected
//! μ_k, and moves each atom along the batch directions. Directions are
//! reweighted by the same Hölder-extremal ζ used for dual certificates, so
//! the step follows the L^{q/p} norm rather than a plain average.
//!
//! For κ < 1 the functional is not a convex power of a norm and the solver
//! switches to a derivative-free coordinate search.

use std::io::Write;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duality::{ratio_exponent, zeta_from_values};
use crate::measures::DiscreteMeasure;
use crate::numeric::{abs_pow, dot};
use crate::smk::sliced_distance;
use crate::sphere::{lq_aggregate, DirectionKind, DirectionSet};
use crate::{rng, Error, Exponent, Result};

const LAMBDA_SUM_TOL: f64 = 1e-12;
/// Consecutive objective increases that abort the run.
pub const DIVERGENCE_CHECKS: usize = 10;

/// One input measure with its weight λ_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedInput {
    pub measure: DiscreteMeasure,
    pub weight: f64,
}

/// Directions given either as a generator id (`"circle:720"`) or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionSpec {
    Kind(DirectionKind),
    Set(DirectionSet),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterProblem {
    pub inputs: Vec<WeightedInput>,
    pub p: f64,
    pub q: Exponent,
    pub kappa: f64,
    pub support_size: usize,
    pub dirs: DirectionSpec,
}

impl BarycenterProblem {
    pub fn new(
        inputs: Vec<(DiscreteMeasure, f64)>,
        p: f64,
        q: Exponent,
        kappa: f64,
        support_size: usize,
        dirs: DirectionSet,
    ) -> Result<Self> {
        let problem = BarycenterProblem {
            inputs: inputs.into_iter().map(|(measure, weight)| WeightedInput { measure, weight }).collect(),
            p,
            q,
            kappa,
            support_size,
            dirs: DirectionSpec::Set(dirs),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, |i| i.measure.dim())
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::check_exponent(self.p)?;
        if self.inputs.is_empty() {
            return Err(Error::EmptySet);
        }
        let dim = self.dim();
        if let Some(bad) = self.inputs.iter().find(|i| i.measure.dim() != dim) {
            return Err(Error::DimMismatch { expected: dim, found: bad.measure.dim() });
        }
        if self.inputs.iter().any(|i| !(i.weight > 0.0) || !i.weight.is_finite()) {
            return Err(Error::InvalidWeights("barycenter weights must be positive".into()));
        }
        let total: f64 = self.inputs.iter().map(|i| i.weight).sum();
        if (total - 1.0).abs() > LAMBDA_SUM_TOL {
            return Err(Error::InvalidWeights(format!("barycenter weights sum to {total}, not 1")));
        }
        if self.q.as_f64() < self.p {
            return Err(Error::HypothesisViolated { p: self.p, q: self.q.to_string() });
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidParam(format!("kappa must be a finite non-negative number, got {}", self.kappa)));
        }
        if self.support_size == 0 {
            return Err(Error::InvalidParam("support size must be at least 1".into()));
        }
        let dirs = self.direction_set()?;
        if dirs.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, found: dirs.dim() });
        }
        Ok(())
    }

    pub fn direction_set(&self) -> Result<DirectionSet> {
        match &self.dirs {
            DirectionSpec::Kind(kind) => kind.build(self.dim()),
            DirectionSpec::Set(set) => Ok(set.clone()),
        }
    }

    /// Largest coordinate range of the inputs' supports (at least 1e-12).
    fn diameter(&self) -> f64 {
        let dim = self.dim();
        (0..dim)
            .map(|d| {
                let xs = self.inputs.iter().flat_map(|i| i.measure.points().map(move |x| x[d]));
                let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                hi - lo
            })
            .fold(1e-12, f64::max)
    }
}

/// B(ν). κ = 0 gives the constant 1.
pub fn objective(problem: &BarycenterProblem, nu: &DiscreteMeasure) -> Result<f64> {
    let dirs = problem.direction_set()?;
    objective_with(problem, nu, &dirs)
}

fn objective_with(problem: &BarycenterProblem, nu: &DiscreteMeasure, dirs: &DirectionSet) -> Result<f64> {
    if nu.dim() != problem.dim() {
        return Err(Error::DimMismatch { expected: problem.dim(), found: nu.dim() });
    }
    if problem.kappa == 0.0 {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for input in &problem.inputs {
        let s = sliced_distance(&input.measure, nu, problem.p, problem.q, dirs)?.aggregate;
        total += input.weight * s.powf(problem.kappa);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// η_t = s0 / √(1 + t).
    InverseSqrt { s0: f64 },
    Constant { s0: f64 },
}

impl StepSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::InverseSqrt { s0 } => s0 / (1.0 + t as f64).sqrt(),
            StepSchedule::Constant { s0 } => s0,
        }
    }
}

impl Default for StepSchedule {
    /// The update is already expressed as a displacement, so s0 = 1 moves
    /// each atom by the full aggregated displacement on the first step.
    fn default() -> Self {
        StepSchedule::InverseSqrt { s0: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub iters: usize,
    pub step: StepSchedule,
    /// Directions sampled per iteration; `None` (the default) uses the whole
    /// set every time. Sampled batches are cheaper per step but leave a noise
    /// floor in the objective near the optimum.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Objective evaluations (trace rows) every this many iterations.
    pub eval_every: usize,
    /// Stop when the objective changed by less than `plateau_tol` (relative)
    /// over the last `plateau_window` iterations.
    pub plateau_window: usize,
    pub plateau_tol: f64,
    /// Starting support; by default atoms drawn from the mixture Σ λ_k μ_k plus a small jitter.
    pub init: Option<DiscreteMeasure>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            iters: 2000,
            step: StepSchedule::default(),
            batch_size: None,
            seed: 42,
            eval_every: 1,
            plateau_window: 200,
            plateau_tol: 1e-4,
            init: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterSolution {
    /// The best iterate seen.
    pub support: DiscreteMeasure,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// "subgradient" or "coordinate_search".
    pub method: String,
    pub trace: Vec<TraceRow>,
}

/// Writes the trace with columns iteration, objective, step.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn initial_support(problem: &BarycenterProblem, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng::stream(seed, 3);
    let atoms: Vec<(&[f64], f64)> = problem
        .inputs
        .iter()
        .flat_map(|i| i.measure.points().zip(i.measure.weights()).map(move |(x, w)| (x, w * i.weight)))
        .collect();
    let jitter = 1e-3 * problem.diameter();
    let dist = rand::distributions::WeightedIndex::new(atoms.iter().map(|a| a.1))
        .map_err(|e| Error::InvalidWeights(e.to_string()))?;
    Ok((0..problem.support_size)
        .map(|_| {
            let x = atoms[dist.sample(&mut rng)].0;
            x.iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + jitter * z
                })
                .collect()
        })
        .collect())
}

/// Per direction: the p-th-power cost V between a projected input and the
/// projected atoms `t` (mass 1/m each), and for each atom the displacement
/// h_j = Σ mass · |t_j − s|^{p−1} sign(t_j − s) under the monotone matching.
fn matched_displacements(src: &[(f64, f64)], t: &[f64], p: f64) -> (f64, Vec<f64>) {
    let m = t.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by(|&a, &b| t[a].total_cmp(&t[b]));
    let mut h = vec![0.0; m];
    let mut cost = 0.0;
    let (mut i, mut left_src) = (0usize, src[0].1);
    let unit = 1.0 / m as f64;
    for &j in &order {
        let mut left = unit;
        while left > 0.0 && i < src.len() {
            let mass = left.min(left_src);
            let d = t[j] - src[i].0;
            cost += mass * abs_pow(d, p);
            h[j] += mass * abs_pow(d, p - 1.0) * d.signum();
            left -= mass;
            left_src -= mass;
            if left_src <= 1e-15 {
                i += 1;
                left_src = src.get(i).map_or(0.0, |s| s.1);
            }
            if left <= 1e-15 {
                break;
            }
        }
    }
    (cost, h)
}

fn sorted_projection(m: &DiscreteMeasure, w: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = m.points().zip(m.weights()).map(|(x, &mass)| (dot(x, w), mass)).collect();
    v.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Minimizes B over equal-weight measures with `support_size` atoms.
pub fn solve_fixed_support(problem: &BarycenterProblem, options: &SolverOptions) -> Result<BarycenterSolution> {
    problem.validate()?;
    let dirs = problem.direction_set()?;
    let dim = problem.dim();
    let mut support = match &options.init {
        Some(init) => {
            if init.dim() != dim || init.len() != problem.support_size {
                return Err(Error::ShapeMismatch(format!(
                    "initial support has {} atoms in dimension {}, expected {} in {}",
                    init.len(),
                    init.dim(),
                    problem.support_size,
                    dim
                )));
            }
            init.points().map(<[f64]>::to_vec).collect()
        }
        None => initial_support(problem, options.seed)?,
    };
    let to_measure = |s: &Vec<Vec<f64>>| DiscreteMeasure::uniform(dim, s.clone());
    let initial_objective = objective_with(problem, &to_measure(&support)?, &dirs)?;
    if problem.kappa == 0.0 {
        // Constant functional: every candidate is a minimizer.
        return Ok(BarycenterSolution {
            support: to_measure(&support)?,
            objective: 1.0,
            initial_objective,
            iterations: 0,
            converged: true,
            method: "constant".into(),
            trace: vec![TraceRow { iteration: 0, objective: 1.0, step: 0.0 }],
        });
    }
    if problem.kappa < 1.0 {
        return coordinate_search(problem, options, &dirs, support, initial_objective);
    }

    let r = ratio_exponent(problem.p, problem.q);
    let p = problem.p;
    let m = problem.support_size;
    let batch = options.batch_size.unwrap_or(dirs.len()).clamp(1, dirs.len());
    let mut rng = rng::stream(options.seed, 4);
    let mut trace = vec![TraceRow { iteration: 0, objective: initial_objective, step: 0.0 }];
    let mut best = (initial_objective, support.clone());
    let mut last = initial_objective;
    let mut increases = 0;
    let mut converged = false;
    let mut iterations = 0;

    for t in 0..options.iters {
        let chosen: Vec<usize> = if batch == dirs.len() {
            (0..dirs.len()).collect()
        } else {
            let mut v = index::sample(&mut rng, dirs.len(), batch).into_vec();
            v.sort_unstable();
            v
        };
        let weight_sum: f64 = chosen.iter().map(|&k| dirs.weights()[k]).sum();
        let bw: Vec<f64> = chosen.iter().map(|&k| dirs.weights()[k] / weight_sum).collect();

        // per_dir[b][k] = (V, h) for batch direction b and input k.
        let per_dir: Vec<Vec<(f64, Vec<f64>)>> = chosen
            .par_iter()
            .map(|&k| {
                let w = dirs.direction(k);
                let proj: Vec<f64> = support.iter().map(|y| dot(y, w)).collect();
                problem
                    .inputs
                    .iter()
                    .map(|input| matched_displacements(&sorted_projection(&input.measure, w), &proj, p))
                    .collect()
            })
            .collect();

        let mut alpha = Vec::with_capacity(problem.inputs.len());
        let mut zetas = Vec::with_capacity(problem.inputs.len());
        for (k, input) in problem.inputs.iter().enumerate() {
            let v: Vec<f64> = per_dir.iter().map(|d| d[k].0).collect();
            let s = lq_aggregate(&v, &bw, r)?.powf(1.0 / p);
            alpha.push(input.weight * s.max(1e-12).powf(problem.kappa - p));
            zetas.push(match zeta_from_values(&v, &bw, r) {
                Ok(z) => Some(z),
                Err(Error::DegenerateInput) => None,
                Err(e) => return Err(e),
            });
        }
        let alpha_sum: f64 = alpha.iter().sum();
        let eta = options.step.at(t);
        let mut moves = vec![vec![0.0; dim]; m];
        for (k, zeta) in zetas.iter().enumerate() {
            let Some(zeta) = zeta else { continue };
            let a = alpha[k] / alpha_sum;
            for (b, &dir_idx) in chosen.iter().enumerate() {
                let w = dirs.direction(dir_idx);
                let scale = a * bw[b] * zeta[b];
                for (j, hj) in per_dir[b][k].1.iter().enumerate() {
                    let c = scale * hj * m as f64;
                    moves[j].iter_mut().zip(w).for_each(|(mv, wi)| *mv += c * wi);
                }
            }
        }
        for (y, mv) in support.iter_mut().zip(&moves) {
            y.iter_mut().zip(mv).for_each(|(yi, d)| *yi -= eta * d);
        }
        iterations = t + 1;

        if iterations % options.eval_every.max(1) == 0 || iterations == options.iters {
            let value = objective_with(problem, &to_measure(&support)?, &dirs)?;
            trace.push(TraceRow { iteration: iterations, objective: value, step: eta });
            if value < best.0 {
                best = (value, support.clone());
            }
            increases = if value > last { increases + 1 } else { 0 };
            last = value;
            if increases >= DIVERGENCE_CHECKS {
                return Err(Error::StepTooLarge { iteration: iterations, checks: DIVERGENCE_CHECKS });
            }
            if plateaued(&trace, options) {
                converged = true;
                break;
            }
        }
    }
    Ok(BarycenterSolution {
        support: to_measure(&best.1)?,
        objective: best.0,
        initial_objective,
        iterations,
        converged,
        method: "subgradient".into(),
        trace,
    })
}

fn plateaued(trace: &[TraceRow], options: &SolverOptions) -> bool {
    let last = trace.last().expect("non-empty trace");
    if last.objective == 0.0 {
        return true;
    }
    if last.iteration < options.plateau_window {
        return false;
    }
    let target = last.iteration - options.plateau_window;
    let Some(old) = trace.iter().rev().find(|r| r.iteration <= target) else { return false };
    (old.objective - last.objective).abs() <= options.plateau_tol * old.objective.abs()
}

fn coordinate_search(
    problem: &BarycenterProblem,
    options: &SolverOptions,
    dirs: &DirectionSet,
    mut support: Vec<Vec<f64>>,
    initial_objective: f64,
) -> Result<BarycenterSolution> {
    let dim = problem.dim();
    let eval = |s: &Vec<Vec<f64>>| objective_with(problem, &DiscreteMeasure::uniform(dim, s.clone())?, dirs);
    let mut h = 0.25 * problem.diameter() * options.step.at(0);
    let mut current = initial_objective;
    let mut trace = vec![TraceRow { iteration: 0, objective: current, step: h }];
    let mut iterations = 0;
    let mut converged = false;
    for t in 0..options.iters {
        let mut improved = false;
        for j in 0..support.len() {
            for d in 0..dim {
                for sign in [1.0, -1.0] {
                    support[j][d] += sign * h;
                    let value = eval(&support)?;
                    if value < current {
                        current = value;
                        improved = true;
                        break;
                    }
                    support[j][d] -= sign * h;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
        iterations = t + 1;
        trace.push(TraceRow { iteration: iterations, objective: current, step: h });
        if h < 1e-9 * problem.diameter().max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(BarycenterSolution {
        support: DiscreteMeasure::uniform(dim, support)?,
        objective: current,
        initial_objective,
        iterations,
        converged,
        method: "coordinate_search".into(),
        trace,
    })
}

/// Exhaustive search over a regular grid for single-atom problems (dim ≤ 3).
///
/// `bounds[d] = (lo, hi)`; grid points are lo + i · resolution ≤ hi.
pub fn grid_oracle(problem: &BarycenterProblem, bounds: &[(f64, f64)], resolution: f64) -> Result<DiscreteMeasure> {
    problem.validate()?;
    if problem.support_size != 1 {
        return Err(Error::UnsupportedOracle(format!("support size {} (only 1 is supported)", problem.support_size)));
    }
    let dim = problem.dim();
    if dim > 3 {
        return Err(Error::UnsupportedOracle(format!("dimension {dim} (at most 3 is supported)")));
    }
    if bounds.len() != dim {
        return Err(Error::DimMismatch { expected: dim, found: bounds.len() });
    }
    if !(resolution > 0.0) || bounds.iter().any(|(lo, hi)| !(hi >= lo)) {
        return Err(Error::InvalidParam("grid needs a positive resolution and lo ≤ hi".into()));
    }
    let counts: Vec<usize> = bounds.iter().map(|(lo, hi)| ((hi - lo) / resolution + 1e-9).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let dirs = problem.direction_set()?;
    let r = ratio_exponent(problem.p, problem.q);
    // Projections of every input atom on every direction.
    let projections: Vec<Vec<Vec<(f64, f64)>>> = problem
        .inputs
        .iter()
        .map(|i| dirs.iter().map(|w| i.measure.points().zip(i.measure.weights()).map(|(x, &m)| (dot(x, w), m)).collect()).collect())
        .collect();
    let point = |mut idx: usize| -> Vec<f64> {
        let mut y = vec![0.0; dim];
        for d in 0..dim {
            y[d] = bounds[d].0 + (idx % counts[d]) as f64 * resolution;
            idx /= counts[d];
        }
        y
    };
    let value_at = |y: &[f64], buf: &mut Vec<f64>| -> f64 {
        if problem.kappa == 0.0 {
            return 1.0;
        }
        let mut total = 0.0;
        for (input, proj) in problem.inputs.iter().zip(&projections) {
            buf.clear();
            for (w, atoms) in dirs.iter().zip(proj) {
                let t = dot(y, w);
                buf.push(atoms.iter().map(|(s, m)| m * abs_pow(t - s, problem.p)).sum());
            }
            let s = lq_aggregate(buf, dirs.weights(), r).expect("non-negative costs").powf(1.0 / problem.p);
            total += input.weight * s.powf(problem.kappa);
        }
        total
    };
    let (best, _) = (0..total)
        .into_par_iter()
        .map_init(Vec::new, |buf, idx| (idx, value_at(&point(idx), buf)))
        .reduce(|| (usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    DiscreteMeasure::dirac(point(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexamples::{nongeodesic_pair, BALANCED_OFFSET};
    use crate::ot1d::{displacement_interpolate_1d, wasserstein_1d};
    use crate::sphere::circle_grid;

    fn dirac(x: f64, y: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(vec![x, y]).unwrap()
    }

    fn two_deltas(l0: f64, grid: usize) -> BarycenterProblem {
        BarycenterProblem::new(
            vec![(dirac(0.0, 0.0), l0), (dirac(2.0, 0.0), 1.0 - l0)],
            2.0,
            Exponent::Finite(2.0),
            2.0,
            1,
            circle_grid(grid).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn objective_examples() {
        let prob = two_deltas(0.5, 720);
        assert!((objective(&prob, &dirac(1.0, 0.0)).unwrap() - 0.5).abs() < 1e-6);
        let mut constant = prob.clone();
        constant.kappa = 0.0;
        assert_eq!(objective(&constant, &dirac(5.0, -3.0)).unwrap(), 1.0);
        let single = BarycenterProblem::new(
            vec![(dirac(0.3, 0.1), 1.0)],
            2.0,
            Exponent::Finite(3.0),
            1.5,
            1,
            circle_grid(64).unwrap(),
        )
        .unwrap();
        assert_eq!(objective(&single, &dirac(0.3, 0.1)).unwrap(), 0.0);
        let nu3 = DiscreteMeasure::dirac(vec![0.0; 3]).unwrap();
        assert!(matches!(objective(&prob, &nu3), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn objective_is_permutation_invariant() {
        let prob = two_deltas(0.5, 64);
        let a = DiscreteMeasure::uniform(2, vec![vec![0.1, 0.2], vec![1.0, -0.4], vec![0.5, 0.5]]).unwrap();
        let b = DiscreteMeasure::uniform(2, vec![vec![0.5, 0.5], vec![0.1, 0.2], vec![1.0, -0.4]]).unwrap();
        assert_eq!(objective(&prob, &a).unwrap(), objective(&prob, &b).unwrap());
    }

    #[test]
    fn validation() {
        let d = circle_grid(8).unwrap();
        let bad_weights = BarycenterProblem::new(vec![(dirac(0.0, 0.0), 0.6)], 2.0, Exponent::Finite(2.0), 2.0, 1, d.clone());
        assert!(matches!(bad_weights, Err(Error::InvalidWeights(_))));
        let bad_pq = BarycenterProblem::new(vec![(dirac(0.0, 0.0), 1.0)], 2.0, Exponent::Finite(1.0), 2.0, 1, d);
        assert!(matches!(bad_pq, Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn two_delta_solver_and_oracle() {
        let prob = two_deltas(0.5, 184);
        let sol = solve_fixed_support(&prob, &SolverOptions::default()).unwrap();
        let y = sol.support.point(0);
        assert!((y[0] - 1.0).abs() < 1e-2 && y[1].abs() < 1e-2, "{y:?}");
        assert!(sol.objective <= sol.initial_objective);
        let oracle = grid_oracle(&prob, &[(0.0, 2.0), (-1.0, 1.0)], 1e-2).unwrap();
        assert!((oracle.point(0)[0] - 1.0).abs() < 1e-9 && oracle.point(0)[1].abs() < 1e-9);
    }

    #[test]
    fn asymmetric_weights_oracle() {
        let prob = two_deltas(0.75, 184);
        let oracle = grid_oracle(&prob, &[(0.0, 2.0), (-0.5, 0.5)], 1e-2).unwrap();
        assert!((oracle.point(0)[0] - 0.5).abs() < 1e-9);
        let sol = solve_fixed_support(&prob, &SolverOptions::default()).unwrap();
        assert!((sol.support.point(0)[0] - 0.5).abs() < 1e-2);
    }

    #[test]
    fn oracle_single_input_picks_nearest_grid_point() {
        let prob = BarycenterProblem::new(
            vec![(DiscreteMeasure::dirac(vec![0.33, -0.21]).unwrap(), 1.0)],
            1.0,
            Exponent::Finite(2.0),
            1.0,
            1,
            circle_grid(32).unwrap(),
        )
        .unwrap();
        let o = grid_oracle(&prob, &[(-1.0, 1.0), (-1.0, 1.0)], 0.1).unwrap();
        assert!((o.point(0)[0] - 0.3).abs() < 1e-9 && (o.point(0)[1] + 0.2).abs() < 1e-9);
        let mut two = prob.clone();
        two.support_size = 2;
        assert!(matches!(grid_oracle(&two, &[(-1.0, 1.0), (-1.0, 1.0)], 0.1), Err(Error::UnsupportedOracle(_))));
    }

    #[test]
    fn self_barycenter() {
        let mu = DiscreteMeasure::uniform(2, vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.5, 1.0]]).unwrap();
        let prob =
            BarycenterProblem::new(vec![(mu, 1.0)], 2.0, Exponent::Finite(2.0), 2.0, 3, circle_grid(64).unwrap())
                .unwrap();
        let sol = solve_fixed_support(&prob, &SolverOptions { iters: 3000, ..Default::default() }).unwrap();
        assert!(sol.objective < 1e-3, "objective {}", sol.objective);
    }

    #[test]
    fn translation_equivariance() {
        let v = [0.7, -1.3];
        let prob = two_deltas(0.5, 64);
        let mut shifted = prob.clone();
        for input in &mut shifted.inputs {
            input.measure = input.measure.translate(&v).unwrap();
        }
        let opts = SolverOptions { iters: 300, ..Default::default() };
        let a = solve_fixed_support(&prob, &opts).unwrap();
        let b = solve_fixed_support(&shifted, &opts).unwrap();
        for ((x, shift), y) in a.support.point(0).iter().zip(v).zip(b.support.point(0)) {
            assert!((x + shift - y).abs() < 1e-6);
        }
    }

    #[test]
    fn trace_is_monotone_in_windows() {
        let prob = BarycenterProblem::new(
            vec![
                (dirac(0.0, 0.0), 0.3),
                (dirac(2.0, 0.0), 0.3),
                (dirac(1.0, 1.5), 0.4),
            ],
            2.0,
            Exponent::Finite(2.0),
            1.0,
            1,
            circle_grid(96).unwrap(),
        )
        .unwrap();
        let sol = solve_fixed_support(&prob, &SolverOptions::default()).unwrap();
        assert!(sol.converged && sol.trace.len() > 100);
        let means: Vec<f64> =
            sol.trace.chunks(50).map(|c| c.iter().map(|r| r.objective).sum::<f64>() / c.len() as f64).collect();
        assert!(means.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{means:?}");
        let mut buf = Vec::new();
        write_trace_csv(&sol.trace, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("iteration,objective,step\n0,"));
    }

    #[test]
    fn coordinate_search_for_small_kappa() {
        let mut prob = two_deltas(0.5, 64);
        prob.kappa = 0.5;
        let sol = solve_fixed_support(&prob, &SolverOptions { iters: 200, ..Default::default() }).unwrap();
        assert_eq!(sol.method, "coordinate_search");
        assert!(sol.objective <= sol.initial_objective);
    }

    #[test]
    fn sliced_barycenter_projections_are_not_1d_barycenters() {
        let (mu0, mu1) = nongeodesic_pair(2, BALANCED_OFFSET).unwrap();
        let prob = BarycenterProblem::new(
            vec![(mu0.clone(), 0.5), (mu1.clone(), 0.5)],
            2.0,
            Exponent::Finite(2.0),
            2.0,
            8,
            circle_grid(96).unwrap(),
        )
        .unwrap();
        let sol = solve_fixed_support(&prob, &SolverOptions { iters: 4000, ..Default::default() }).unwrap();
        let e1 = [1.0, 0.0];
        let midpoint = displacement_interpolate_1d(&mu0.project(&e1).unwrap(), &mu1.project(&e1).unwrap(), 0.5).unwrap();
        let gap = wasserstein_1d(&sol.support.project(&e1).unwrap(), &midpoint, 2.0).unwrap();
        assert!(gap > 1e-3, "projection gap {gap}");
    }

    #[test]
    fn sampled_batches_converge_and_reproduce() {
        let prob = two_deltas(0.5, 184);
        let opts = SolverOptions { batch_size: Some(16), ..Default::default() };
        let a = solve_fixed_support(&prob, &opts).unwrap();
        let b = solve_fixed_support(&prob, &opts).unwrap();
        assert_eq!(a, b);
        let y = a.support.point(0);
        assert!((y[0] - 1.0).abs() < 1e-2 && y[1].abs() < 1e-2, "{y:?}");
        let other = solve_fixed_support(&prob, &SolverOptions { seed: 7, ..opts }).unwrap();
        assert_ne!(a.trace, other.trace);
    }
}
