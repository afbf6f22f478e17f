//! The `slicedmk` command line.
//!
//! Every command writes its outputs (JSON, CSV) into `--out-dir` together with
//! a `manifest.json` listing the command, its parameters, the seeds and a
//! SHA-256 of every artifact. Exit codes: 0 success, 1 a verification failed,
//! 2 usage or input error, 3 a size cap was exceeded.

pub mod suites;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::barycenter::{self, BarycenterProblem, SolverOptions, StepSchedule};
use crate::duality::{self, DualCertificate};
use crate::empirics::{self, Reference};
use crate::smk::sliced_distance;
use crate::sphere::{m_constant_with_error, DirectionKind, DirectionSet, DEFAULT_CIRCLE_DIRECTIONS, DEFAULT_MC_DIRECTIONS};
use crate::{DiscreteMeasure, Error, Exponent, Result};
use suites::{run_suite, Suite, SuiteParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "slicedmk", version, about = "Sliced (p,q) Monge-Kantorovich distances, certificates and experiments")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for reports, CSV files and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sliced distance between two measure files.
    Distance(DistanceArgs),
    /// The constant M_{q,n} under a direction set.
    Constant(ConstantArgs),
    /// Build a dual certificate (requires p <= q).
    Certificate(DistanceArgs),
    /// Re-check a stored certificate against the two measures.
    CheckCertificate(CheckArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Empirical sampling rate of the sliced distance on the uniform square.
    Rates(RatesArgs),
    /// Classical vs sliced distances between independent samples.
    Separation(SeparationArgs),
    /// Free-support barycenter of a problem file.
    Barycenter(BarycenterArgs),
}

fn parse_p(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(p) if p.is_finite() && p >= 1.0 => Ok(p),
        _ => Err(format!("--p must be a real number >= 1, got {s:?}")),
    }
}

fn parse_q(s: &str) -> std::result::Result<Exponent, String> {
    s.parse().map_err(|_| format!("--q must be `inf` or a real number >= 1, got {s:?}"))
}

fn parse_dirs(s: &str) -> std::result::Result<DirectionKind, String> {
    s.parse().map_err(|e: Error| format!("--dirs: {e}"))
}

#[derive(Debug, Args, Serialize)]
pub struct DistanceArgs {
    pub mu: PathBuf,
    pub nu: PathBuf,
    #[arg(long, value_parser = parse_p)]
    pub p: f64,
    #[arg(long, value_parser = parse_q)]
    pub q: Exponent,
    /// `circle:M`, `mc:M[:SEED]`; default circle:720 in R², mc:2048 otherwise.
    #[arg(long, value_parser = parse_dirs)]
    pub dirs: Option<DirectionKind>,
}

#[derive(Debug, Args, Serialize)]
pub struct ConstantArgs {
    #[arg(long, value_parser = parse_q)]
    pub q: Exponent,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_parser = parse_dirs)]
    pub dirs: Option<DirectionKind>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    pub certificate: PathBuf,
    pub mu: PathBuf,
    pub nu: PathBuf,
    /// Defaults to the set recorded in the certificate.
    #[arg(long, value_parser = parse_dirs)]
    pub dirs: Option<DirectionKind>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// metric, comparison, nongeodesic, linear-geodesic, duality, remark or density.
    pub suite: String,
    #[arg(long, value_parser = parse_p)]
    pub p: Option<f64>,
    #[arg(long, value_parser = parse_q)]
    pub q: Option<Exponent>,
    /// Number of random instances (samples for the density suite).
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, value_parser = parse_dirs)]
    pub dirs: Option<DirectionKind>,
}

#[derive(Debug, Args, Serialize)]
pub struct RatesArgs {
    #[arg(long, value_parser = parse_p)]
    pub p: f64,
    #[arg(long, value_parser = parse_q)]
    pub q: Exponent,
    /// Comma-separated sample sizes.
    #[arg(long = "Ns", alias = "ns", value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_parser = parse_dirs)]
    pub dirs: Option<DirectionKind>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceArg {
    Square,
    Cube,
}

#[derive(Debug, Args, Serialize)]
pub struct SeparationArgs {
    #[arg(long, value_parser = parse_p)]
    pub p: f64,
    #[arg(long, value_parser = parse_q)]
    pub q: Exponent,
    #[arg(long = "Ns", alias = "ns", value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, value_enum, default_value = "square")]
    pub reference: ReferenceArg,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_parser = parse_dirs)]
    pub dirs: Option<DirectionKind>,
}

#[derive(Debug, Args, Serialize)]
pub struct BarycenterArgs {
    pub problem: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    /// Directions sampled per iteration (0, the default, uses the whole set).
    #[arg(long, default_value_t = 0)]
    pub batch: usize,
    /// Initial step s0 of the schedule s0 / sqrt(1 + t).
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seeds: Vec<u64>,
    /// Output file name → SHA-256 (hex) of its contents.
    pub artifact_hashes: BTreeMap<String, String>,
    pub version: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct Outputs {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), hashes: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.hashes.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn finish<P: Serialize>(self, command: &str, params: &P, seeds: Vec<u64>) -> Result<()> {
        self.finish_with(command, params, seeds, None)
    }

    /// Like `finish`, recording the direction set actually used.
    fn finish_with<P: Serialize>(
        self,
        command: &str,
        params: &P,
        seeds: Vec<u64>,
        dirs: Option<&DirectionSet>,
    ) -> Result<()> {
        let mut parameters: BTreeMap<String, serde_json::Value> = match serde_json::to_value(params)? {
            serde_json::Value::Object(map) => map.into_iter().collect(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        if let Some(d) = dirs {
            parameters.insert("dirs".into(), d.id().into());
        }
        let manifest = RunManifest {
            command: command.to_string(),
            parameters,
            seeds,
            artifact_hashes: self.hashes,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.dir.join(MANIFEST_FILE), bytes)?;
        Ok(())
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidParam(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidParam(format!("{}: {e}", path.display())))
}

fn directions(kind: Option<DirectionKind>, dim: usize, seed: u64) -> Result<DirectionSet> {
    let kind = kind.unwrap_or(if dim == 2 {
        DirectionKind::CircleGrid { count: DEFAULT_CIRCLE_DIRECTIONS }
    } else {
        DirectionKind::MonteCarlo { count: DEFAULT_MC_DIRECTIONS, seed }
    });
    kind.build(dim)
}

fn seeds_of(kind: Option<DirectionKind>, seed: u64) -> Vec<u64> {
    match kind {
        Some(DirectionKind::MonteCarlo { seed: s, .. }) if s != seed => vec![seed, s],
        _ => vec![seed],
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // Fails only if a pool already exists (e.g. repeated in-process runs).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::TooLarge { .. } => EXIT_CAP,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let mut out = Outputs::new(&cli.out_dir)?;
    let seed = cli.seed;
    match &cli.command {
        Command::Distance(a) => {
            let (mu, nu): (DiscreteMeasure, DiscreteMeasure) = (load_json(&a.mu)?, load_json(&a.nu)?);
            let dirs = directions(a.dirs, mu.dim(), seed)?;
            let report = sliced_distance(&mu, &nu, a.p, a.q, &dirs)?;
            println!("MK_{{{},{}}} = {:.12} (quadrature error {:.2e}, {})", a.p, a.q, report.aggregate, report.quadrature_error, report.dirset_id);
            out.write_json("distance.json", &report)?;
            out.finish_with("distance", a, seeds_of(a.dirs, seed), Some(&dirs))?;
            Ok(EXIT_OK)
        }
        Command::Constant(a) => {
            let dirs = directions(a.dirs, a.dim, seed)?;
            let (value, err) = m_constant_with_error(a.q, &dirs);
            println!("M_{{{},{}}} = {:.12} (quadrature error {:.2e}, {})", a.q, a.dim, value, err, dirs.id());
            out.write_json(
                "constant.json",
                &serde_json::json!({ "q": a.q, "dim": a.dim, "value": value, "quadrature_error": err, "dirset_id": dirs.id() }),
            )?;
            out.finish_with("constant", a, seeds_of(a.dirs, seed), Some(&dirs))?;
            Ok(EXIT_OK)
        }
        Command::Certificate(a) => {
            let (mu, nu): (DiscreteMeasure, DiscreteMeasure) = (load_json(&a.mu)?, load_json(&a.nu)?);
            let dirs = directions(a.dirs, mu.dim(), seed)?;
            let cert = duality::build_certificate(&mu, &nu, a.p, a.q, &dirs)?;
            println!("primal {:.12}  dual {:.12}  gap {:.3e}", cert.primal, cert.dual_value, cert.gap());
            out.write_json("certificate.json", &cert)?;
            out.finish_with("certificate", a, seeds_of(a.dirs, seed), Some(&dirs))?;
            Ok(EXIT_OK)
        }
        Command::CheckCertificate(a) => {
            let cert: DualCertificate = load_json(&a.certificate)?;
            let (mu, nu): (DiscreteMeasure, DiscreteMeasure) = (load_json(&a.mu)?, load_json(&a.nu)?);
            let kind = match a.dirs {
                Some(k) => k,
                None => cert.dirset_id.parse()?,
            };
            let dirs = kind.build(mu.dim())?;
            let check = duality::verify_certificate(&cert, &mu, &nu, &dirs)?;
            println!(
                "admissible {}  zeta norm ok {}  dual value {:.12}  (max violation {:.2e}, zeta norm {:.12})",
                check.admissible, check.norm_ok, check.dual_value, check.max_violation, check.zeta_norm
            );
            out.write_json("check.json", &check)?;
            out.finish_with("check-certificate", a, vec![seed], Some(&dirs))?;
            Ok(if check.admissible && check.norm_ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Verify(a) => {
            let suite: Suite = a.suite.parse()?;
            let params = SuiteParams { p: a.p, q: a.q, instances: a.seeds, seed, dirs: a.dirs };
            let report = run_suite(suite, &params)?;
            print!("{}", report.table());
            out.write_json(&format!("verify-{suite}.json"), &report)?;
            out.finish("verify", a, vec![seed])?;
            Ok(if report.pass() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Rates(a) => {
            let dirs = directions(a.dirs, a.dim, seed)?;
            let e = empirics::sampling_rate_experiment(a.p, a.q, &a.ns, a.trials, &dirs, seed)?;
            println!("{:>8}  {:>14}  {:>12}  {:>12}", "N", "mean", "std_error", "bound");
            for r in &e.records {
                let bound = r.bound.map_or("-".to_string(), |b| format!("{b:.6}"));
                println!("{:>8}  {:>14.6e}  {:>12.3e}  {:>12}", r.n, r.mean, r.std_error, bound);
            }
            if let Some(fit) = e.fit {
                println!("log-log slope {:.4} (reference {:.4}), constant {:.4}", fit.slope, e.expected_slope, fit.constant());
            }
            let mut csv = Vec::new();
            empirics::write_records_csv(&e.records, &mut csv)?;
            out.write("rates.csv", &csv)?;
            out.write_json("rates.json", &e)?;
            out.finish_with("rates", a, seeds_of(a.dirs, seed), Some(&dirs))?;
            Ok(if e.bound_ok == Some(false) { EXIT_FAILED } else { EXIT_OK })
        }
        Command::Separation(a) => {
            let dirs = directions(a.dirs, a.dim, seed)?;
            let reference = match a.reference {
                ReferenceArg::Square => Reference::Square,
                ReferenceArg::Cube => Reference::Cube,
            };
            let t = empirics::rate_separation_experiment(a.p, a.q, &a.ns, a.trials, reference, &dirs, seed)?;
            println!("{:>8}  {:>14}  {:>14}  {:>10}", "N", "classical", "sliced", "ratio");
            for r in &t.rows {
                println!("{:>8}  {:>14.6e}  {:>14.6e}  {:>10.4}", r.n, r.classical_mean, r.sliced_mean, r.ratio);
            }
            if let (Some(c), Some(s)) = (t.classical_fit, t.sliced_fit) {
                println!("slopes: classical {:.4}, sliced {:.4}", c.slope, s.slope);
            }
            println!("ratio non-decreasing: {} ({})", t.ratio_monotone, t.note);
            let mut csv = Vec::new();
            empirics::write_records_csv(&t.records(), &mut csv)?;
            out.write("separation.csv", &csv)?;
            out.write_json("separation.json", &t)?;
            out.finish_with("separation", a, seeds_of(a.dirs, seed), Some(&dirs))?;
            Ok(EXIT_OK)
        }
        Command::Barycenter(a) => {
            let problem: BarycenterProblem = load_json(&a.problem)?;
            problem.validate()?;
            let options = SolverOptions {
                iters: a.iters,
                batch_size: (a.batch > 0).then_some(a.batch),
                step: StepSchedule::InverseSqrt { s0: a.step },
                seed,
                ..Default::default()
            };
            let sol = barycenter::solve_fixed_support(&problem, &options)?;
            println!(
                "objective {:.12} (initial {:.12}) after {} iterations, converged {}",
                sol.objective, sol.initial_objective, sol.iterations, sol.converged
            );
            let mut csv = Vec::new();
            barycenter::write_trace_csv(&sol.trace, &mut csv)?;
            out.write("trace.csv", &csv)?;
            out.write_json("barycenter.json", &sol)?;
            out.finish("barycenter", a, vec![seed])?;
            Ok(EXIT_OK)
        }
    }
}
