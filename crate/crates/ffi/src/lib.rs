//! C ABI for `persot`.
//!
//! Measures cross the boundary as opaque `PersotMeasure` handles created by
//! `persot_measure_new` (or returned by the barycenter functions) and released
//! with `persot_measure_free`. Every fallible function returns a status code
//! (`PERSOT_OK` on success) and writes results through out-pointers; the
//! message for the last failure on the calling thread is available from
//! `persot_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use persot::barycenter::{exact_barycenter_lp, frechet_mean_multistart, BarycenterProblem, DEFAULT_MAX_ITER};
use persot::{bottleneck_distance, ot_distance, pers_p, Error, Exponent, PersistenceMeasure, PlanarPoint};

pub const PERSOT_OK: i32 = 0;
/// A required pointer argument was null.
pub const PERSOT_NULL_POINTER: i32 = 1;
/// Invalid point, mass, exponent, weights or other argument.
pub const PERSOT_INVALID_ARGUMENT: i32 = 2;
/// An operation needing integer multiplicities got a fractional mass.
pub const PERSOT_NON_INTEGER_MASS: i32 = 3;
/// The exact barycenter program would be too large.
pub const PERSOT_TOO_LARGE: i32 = 4;
/// A solver failed.
pub const PERSOT_NUMERICAL: i32 = 5;
/// The output buffer is too small; the required length was written.
pub const PERSOT_BUFFER_TOO_SMALL: i32 = 6;
/// Internal error (a caught panic).
pub const PERSOT_INTERNAL: i32 = 7;

/// Opaque persistence measure.
pub struct PersotMeasure {
    inner: PersistenceMeasure,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> i32 {
    match e {
        Error::NonIntegerMass(_) => PERSOT_NON_INTEGER_MASS,
        Error::TooLarge { .. } => PERSOT_TOO_LARGE,
        Error::Numerical(_) => PERSOT_NUMERICAL,
        _ => PERSOT_INVALID_ARGUMENT,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
    Code(i32, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PERSOT_OK,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            PERSOT_NULL_POINTER
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Code(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal error".into());
            PERSOT_INTERNAL
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(Fail::Null(name))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn write<T>(p: *mut T, value: T, name: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    p.write(value);
    Ok(())
}

fn into_handle(mu: PersistenceMeasure) -> *mut PersotMeasure {
    Box::into_raw(Box::new(PersotMeasure { inner: mu }))
}

/// Message of the last failure on this thread, or null. The string stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn persot_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a measure from `len` atoms. `masses` may be null for unit masses.
///
/// # Safety
/// Non-null arrays must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn persot_measure_new(
    births: *const f64,
    deaths: *const f64,
    masses: *const f64,
    len: usize,
    out: *mut *mut PersotMeasure,
) -> i32 {
    guard(|| {
        let b = slice(births, len, "births")?;
        let d = slice(deaths, len, "deaths")?;
        let m = if masses.is_null() { None } else { Some(slice(masses, len, "masses")?) };
        let atoms = (0..len)
            .map(|k| Ok((PlanarPoint::new(b[k], d[k])?, m.map_or(1.0, |m| m[k]))))
            .collect::<Result<Vec<_>, Error>>()?;
        let mu = PersistenceMeasure::new(atoms)?;
        write(out, into_handle(mu), "out")
    })
}

/// Releases a measure. Null is ignored.
///
/// # Safety
/// `mu` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn persot_measure_free(mu: *mut PersotMeasure) {
    if !mu.is_null() {
        drop(Box::from_raw(mu));
    }
}

/// Number of distinct atoms (0 for null).
///
/// # Safety
/// `mu` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn persot_measure_len(mu: *const PersotMeasure) -> usize {
    mu.as_ref().map_or(0, |m| m.inner.len())
}

/// Total mass (0 for null).
///
/// # Safety
/// `mu` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn persot_measure_total_mass(mu: *const PersotMeasure) -> f64 {
    mu.as_ref().map_or(0.0, |m| m.inner.total_mass())
}

/// Copies the atoms into caller arrays of length `capacity`. With too small a
/// capacity, writes the required length to `len_out` and returns
/// `PERSOT_BUFFER_TOO_SMALL`.
///
/// # Safety
/// Arrays must hold `capacity` elements; `len_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn persot_measure_atoms(
    mu: *const PersotMeasure,
    births: *mut f64,
    deaths: *mut f64,
    masses: *mut f64,
    capacity: usize,
    len_out: *mut usize,
) -> i32 {
    guard(|| {
        let mu = &deref(mu, "mu")?.inner;
        write(len_out, mu.len(), "len_out")?;
        if capacity < mu.len() {
            return Err(Fail::Code(
                PERSOT_BUFFER_TOO_SMALL,
                format!("need {} atoms, capacity {capacity}", mu.len()),
            ));
        }
        for (k, a) in mu.atoms().iter().enumerate() {
            write(births.add(k), a.point.birth(), "births")?;
            write(deaths.add(k), a.point.death(), "deaths")?;
            write(masses.add(k), a.mass, "masses")?;
        }
        Ok(())
    })
}

fn exponent(p: f64) -> Result<Exponent, Fail> {
    if p == f64::INFINITY {
        Ok(Exponent::Infinity)
    } else {
        Ok(Exponent::finite(p)?)
    }
}

/// Total persistence `Pers_p`; `p = INFINITY` gives the largest diagonal
/// distance.
///
/// # Safety
/// `mu` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn persot_pers(mu: *const PersotMeasure, p: f64, out: *mut f64) -> i32 {
    guard(|| {
        let mu = &deref(mu, "mu")?.inner;
        write(out, pers_p(mu, exponent(p)?), "out")
    })
}

/// `OT_p` distance; `p = INFINITY` gives the bottleneck distance.
///
/// # Safety
/// `a`, `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn persot_ot_distance(
    a: *const PersotMeasure,
    b: *const PersotMeasure,
    p: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let (a, b) = (&deref(a, "a")?.inner, &deref(b, "b")?.inner);
        let d = match exponent(p)? {
            Exponent::Infinity => bottleneck_distance(a, b)?,
            Exponent::Finite(p) => ot_distance(a, b, p)?,
        };
        write(out, d, "out")
    })
}

/// Bottleneck distance between diagrams with integer masses.
///
/// # Safety
/// `a`, `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn persot_bottleneck_distance(
    a: *const PersotMeasure,
    b: *const PersotMeasure,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let d = bottleneck_distance(&deref(a, "a")?.inner, &deref(b, "b")?.inner)?;
        write(out, d, "out")
    })
}

unsafe fn problem(
    inputs: *const *const PersotMeasure,
    weights: *const f64,
    count: usize,
    p: f64,
) -> Result<BarycenterProblem, Fail> {
    let handles = slice(inputs, count, "inputs")?;
    let measures = handles
        .iter()
        .map(|&h| Ok(deref(h, "inputs[i]")?.inner.clone()))
        .collect::<Result<Vec<_>, Fail>>()?;
    Ok(if weights.is_null() {
        BarycenterProblem::uniform(measures, p)?
    } else {
        BarycenterProblem::new(measures, slice(weights, count, "weights")?.to_vec(), p)?
    })
}

/// Fréchet mean by multi-start alternating minimization. `weights` may be
/// null for uniform weights. On success `*out` owns a new measure and
/// `*energy` (if non-null) receives its energy.
///
/// # Safety
/// `inputs` must hold `count` live handles, `weights` null or `count` values.
#[no_mangle]
pub unsafe extern "C" fn persot_barycenter(
    inputs: *const *const PersotMeasure,
    weights: *const f64,
    count: usize,
    p: f64,
    random_starts: usize,
    seed: u64,
    out: *mut *mut PersotMeasure,
    energy: *mut f64,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let problem = problem(inputs, weights, count, p)?;
        let state = frechet_mean_multistart(&problem, random_starts, seed, DEFAULT_MAX_ITER)?;
        if !energy.is_null() {
            energy.write(state.energy);
        }
        out.write(into_handle(state.candidate));
        Ok(())
    })
}

/// Exact Fréchet mean by linear programming (small integer diagrams).
/// `*integral` (if non-null) is set to 1 when the optimum has integer masses.
///
/// # Safety
/// As for `persot_barycenter`.
#[no_mangle]
pub unsafe extern "C" fn persot_barycenter_exact(
    inputs: *const *const PersotMeasure,
    weights: *const f64,
    count: usize,
    p: f64,
    out: *mut *mut PersotMeasure,
    energy: *mut f64,
    integral: *mut i32,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let problem = problem(inputs, weights, count, p)?;
        let sol = exact_barycenter_lp(&problem)?;
        if !energy.is_null() {
            energy.write(sol.energy);
        }
        if !integral.is_null() {
            integral.write(i32::from(sol.integral));
        }
        out.write(into_handle(sol.measure));
        Ok(())
    })
}
