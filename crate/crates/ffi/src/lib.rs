//! C ABI for `slicedmk`.
//!
//! Measures and direction sets cross the boundary as opaque handles created by
//! the `smk_measure_*` / `smk_directions_*` constructors and released with the
//! matching `smk_*_free`. Every
//! fallible call returns an [`SmkStatus`] and writes its result through an out
//! pointer; on failure a message is available from [`smk_last_error`] on the
//! same thread. Panics never unwind into C: they are reported as
//! `SMK_STATUS_PANIC`.
//!
//! Exponents are passed as `double`; `q = INFINITY` selects the max-sliced case.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use slicedmk::duality;
use slicedmk::ot1d::wasserstein_1d;
use slicedmk::sphere::{circle_grid, m_constant, mc_directions};
use slicedmk::{sliced_distance, wasserstein_nd_exact, DirectionSet, DiscreteMeasure, Error, Exponent, Measure1D};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmkStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Malformed input: weights, exponents, grid sizes, non-finite values, JSON.
    InvalidArgument = 2,
    /// Dimensions of the arguments do not agree.
    DimMismatch = 3,
    /// An exact solver's size cap was exceeded.
    TooLarge = 4,
    /// The operation requires p <= q.
    HypothesisViolated = 5,
    /// Any other library error.
    Failed = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

impl From<&Error> for SmkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimMismatch { .. } | Error::ShapeMismatch(_) => SmkStatus::DimMismatch,
            Error::TooLarge { .. } => SmkStatus::TooLarge,
            Error::HypothesisViolated { .. } => SmkStatus::HypothesisViolated,
            Error::InvalidDirection { .. }
            | Error::EmptyMeasure
            | Error::InvalidWeights(_)
            | Error::NonFinite
            | Error::InvalidExponent(_)
            | Error::InvalidQuantile(_)
            | Error::InvalidParam(_)
            | Error::EmptyGrid
            | Error::EmptySet
            | Error::InvalidGrid(_)
            | Error::InvalidValue(_)
            | Error::Json(_) => SmkStatus::InvalidArgument,
            _ => SmkStatus::Failed,
        }
    }
}

/// Opaque weighted point cloud.
pub struct SmkMeasure(DiscreteMeasure);

/// Opaque set of weighted unit directions.
pub struct SmkDirections(DirectionSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SmkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SmkStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SmkStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, converting errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SmkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmkStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SmkStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn array<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn smk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn smk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a measure from `n` points of dimension `dim`, stored row-major in
/// `points` (`n * dim` values). `weights` holds `n` values summing to 1, or
/// is NULL for equal weights.
///
/// # Safety
/// `points` must point to `n * dim` readable doubles, `weights` (if not NULL)
/// to `n`, and `out_measure` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smk_measure_new(
    dim: usize,
    n: usize,
    points: *const f64,
    weights: *const f64,
    out_measure: *mut *mut SmkMeasure,
) -> SmkStatus {
    guard(|| {
        let slot = out(out_measure, "out_measure")?;
        let total = n.checked_mul(dim).ok_or_else(|| Failure(SmkStatus::InvalidArgument, "n * dim overflows".into()))?;
        let coords = array(points, total, "points")?;
        let pts: Vec<Vec<f64>> = if dim == 0 { vec![] } else { coords.chunks(dim).map(<[f64]>::to_vec).collect() };
        let m = if weights.is_null() {
            DiscreteMeasure::uniform(dim, pts)?
        } else {
            DiscreteMeasure::new(dim, pts, array(weights, n, "weights")?.to_vec())?
        };
        *slot = Box::into_raw(Box::new(SmkMeasure(m)));
        Ok(())
    })
}

/// Parses a measure from JSON: `{"dim": 2, "points": [[..], ..], "weights": [..]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_measure` writable.
#[no_mangle]
pub unsafe extern "C" fn smk_measure_from_json(json: *const c_char, out_measure: *mut *mut SmkMeasure) -> SmkStatus {
    guard(|| {
        let slot = out(out_measure, "out_measure")?;
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(SmkStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let m: DiscreteMeasure = serde_json::from_str(text).map_err(Error::from)?;
        *slot = Box::into_raw(Box::new(SmkMeasure(m)));
        Ok(())
    })
}

/// # Safety
/// `measure` must be NULL or a handle from `smk_measure_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn smk_measure_free(measure: *mut SmkMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}

/// Number of atoms, or 0 for NULL.
///
/// # Safety
/// `measure` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smk_measure_len(measure: *const SmkMeasure) -> usize {
    measure.as_ref().map_or(0, |m| m.0.len())
}

/// Ambient dimension, or 0 for NULL.
///
/// # Safety
/// `measure` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smk_measure_dim(measure: *const SmkMeasure) -> usize {
    measure.as_ref().map_or(0, |m| m.0.dim())
}

/// `count` equally spaced directions on the unit circle (a positive multiple of 8).
///
/// # Safety
/// `out_dirs` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smk_directions_circle(count: usize, out_dirs: *mut *mut SmkDirections) -> SmkStatus {
    guard(|| {
        let slot = out(out_dirs, "out_dirs")?;
        *slot = Box::into_raw(Box::new(SmkDirections(circle_grid(count)?)));
        Ok(())
    })
}

/// `count` seeded uniform random directions on the sphere in R^dim.
///
/// # Safety
/// `out_dirs` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smk_directions_random(
    dim: usize,
    count: usize,
    seed: u64,
    out_dirs: *mut *mut SmkDirections,
) -> SmkStatus {
    guard(|| {
        let slot = out(out_dirs, "out_dirs")?;
        *slot = Box::into_raw(Box::new(SmkDirections(mc_directions(dim, count, seed)?)));
        Ok(())
    })
}

/// # Safety
/// `dirs` must be NULL or a handle from `smk_directions_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn smk_directions_free(dirs: *mut SmkDirections) {
    if !dirs.is_null() {
        drop(Box::from_raw(dirs));
    }
}

/// Number of directions, or 0 for NULL.
///
/// # Safety
/// `dirs` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smk_directions_len(dirs: *const SmkDirections) -> usize {
    dirs.as_ref().map_or(0, |d| d.0.len())
}

fn exponent(q: f64) -> Result<Exponent, Failure> {
    Ok(Exponent::new(q)?)
}

/// Sliced distance MK_{p,q}(mu, nu) under `dirs`.
///
/// # Safety
/// Handles must be live; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn smk_sliced_distance(
    mu: *const SmkMeasure,
    nu: *const SmkMeasure,
    p: f64,
    q: f64,
    dirs: *const SmkDirections,
    out_value: *mut f64,
) -> SmkStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        let (mu, nu, dirs) = (handle(mu, "mu")?, handle(nu, "nu")?, handle(dirs, "dirs")?);
        *slot = sliced_distance(&mu.0, &nu.0, p, exponent(q)?, &dirs.0)?.aggregate;
        Ok(())
    })
}

/// Exact (unsliced) MK_p between two measures in R^n.
///
/// Equal-size uniform measures are solved as an assignment (up to 1024
/// atoms); anything else by a transportation LP (up to 64 atoms per side).
///
/// # Safety
/// Handles must be live; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn smk_wasserstein_exact(
    mu: *const SmkMeasure,
    nu: *const SmkMeasure,
    p: f64,
    out_value: *mut f64,
) -> SmkStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = wasserstein_nd_exact(&handle(mu, "mu")?.0, &handle(nu, "nu")?.0, p)?;
        Ok(())
    })
}

/// MK_p between two measures on the line, given as atoms and weights.
///
/// # Safety
/// Each array must hold as many doubles as its length argument; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn smk_wasserstein_1d(
    atoms_a: *const f64,
    weights_a: *const f64,
    len_a: usize,
    atoms_b: *const f64,
    weights_b: *const f64,
    len_b: usize,
    p: f64,
    out_value: *mut f64,
) -> SmkStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        let a = Measure1D::new(array(atoms_a, len_a, "atoms_a")?.to_vec(), array(weights_a, len_a, "weights_a")?.to_vec())?;
        let b = Measure1D::new(array(atoms_b, len_b, "atoms_b")?.to_vec(), array(weights_b, len_b, "weights_b")?.to_vec())?;
        *slot = wasserstein_1d(&a, &b, p)?;
        Ok(())
    })
}

/// M_{q,n} = ‖ω ↦ |ω_1|‖_{L^q} under `dirs`.
///
/// # Safety
/// `dirs` must be live; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn smk_m_constant(q: f64, dirs: *const SmkDirections, out_value: *mut f64) -> SmkStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = m_constant(exponent(q)?, &handle(dirs, "dirs")?.0);
        Ok(())
    })
}

/// Builds a dual certificate (p <= q) and returns it as a JSON string, to be
/// released with [`smk_string_free`]. `out_gap`, if not NULL, receives
/// primal − dual value.
///
/// # Safety
/// Handles must be live; `out_json` writable; `out_gap` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn smk_certificate_json(
    mu: *const SmkMeasure,
    nu: *const SmkMeasure,
    p: f64,
    q: f64,
    dirs: *const SmkDirections,
    out_json: *mut *mut c_char,
    out_gap: *mut f64,
) -> SmkStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let (mu, nu, dirs) = (handle(mu, "mu")?, handle(nu, "nu")?, handle(dirs, "dirs")?);
        let cert = duality::build_certificate(&mu.0, &nu.0, p, exponent(q)?, &dirs.0)?;
        let text = serde_json::to_string(&cert).map_err(Error::from)?;
        if let Some(g) = out_gap.as_mut() {
            *g = cert.gap();
        }
        *slot = CString::new(text).map_err(|e| Failure(SmkStatus::Failed, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn smk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
