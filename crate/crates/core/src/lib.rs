//! Sliced (p, q)-Monge–Kantorovich metrics on discrete probability measures.
//!
//! For measures μ, ν on R^n the sliced distance is the L^q(σ_{n−1}) norm of
//! the direction-wise one-dimensional p-Wasserstein distances
//!
//! ```text
//! MK_{p,q}(μ, ν) = ‖ ω ↦ MK_p(R^ω_♯ μ, R^ω_♯ ν) ‖_{L^q(σ_{n−1})},   R^ω(x) = ⟨x, ω⟩
//! ```
//!
//! The sphere measure σ_{n−1} is replaced by a finite [`sphere::DirectionSet`]
//! (Monte Carlo or a deterministic circle grid). Every per-direction quantity
//! is computed exactly for discrete inputs.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`measures`] | weighted point clouds, projections, reference samplers |
//! | [`ot1d`] | exact 1D transport: distances, quantiles, interpolation, d^p-transforms, potentials |
//! | [`sphere`] | direction sets, L^q aggregation, the constants M_{q,n} |
//! | [`smk`] | sliced distances, exact R^n transport, comparison checks |
//! | [`duality`] | dual certificates (per-direction potentials plus a direction weight ζ) |
//! | [`counterexamples`] | the non-geodesic pair, linear MK_{1,q} geodesics, the equal-MK_p discrepancy |
//! | [`empirics`] | projected densities of the square, sampling-rate experiments |
//! | [`barycenter`] | free-support barycenters of the sliced functional |
//! | [`cli`] | the `slicedmk` command line |
//!
//! [`assignment`] and [`transport`] hold the exact discrete solvers used as
//! the classical (unsliced) reference.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod barycenter;
pub mod cli;
pub mod counterexamples;
pub mod duality;
pub mod empirics;
mod error;
pub mod measures;
pub mod ot1d;
pub mod rng;
pub mod smk;
pub mod sphere;
pub mod transport;

mod exponent;
mod numeric;

pub use error::{Error, Result};
pub use exponent::Exponent;
pub use measures::{DiscreteMeasure, Measure1D};
pub use smk::{sliced_distance, wasserstein_nd_exact, SlicedDistanceReport};
pub use sphere::DirectionSet;
