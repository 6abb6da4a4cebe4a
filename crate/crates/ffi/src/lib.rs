//! C ABI over the bifscope core: opaque handles, integer status codes,
//! and a thread-local last-error message. All functions are panic-safe;
//! a caught panic reports `BIF_STATUS_NUMERIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use bifscope::error::BifError;
use bifscope::expr::parse;
use bifscope::exponents::lyapunov;
use bifscope::family::{build_family, MarkedPoint, RationalFamily};
use bifscope::green::green_lift;
use bifscope::grid::Rect;
use bifscope::measure::{bif_measure, GridMeasure};
use bifscope::periodic::solve_misiurewicz;
use bifscope::Complex64;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifStatus {
    /// Success.
    Ok = 0,
    /// Expression could not be parsed.
    Syntax = 1,
    /// Invalid configuration (bad window, degree < 2, ...).
    Config = 2,
    /// The family degenerates at the requested parameter.
    Degenerate = 3,
    /// A numeric routine failed to converge.
    Numeric = 4,
    /// A required pointer argument was null.
    NullArgument = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &BifError) -> BifStatus {
    match err {
        BifError::Syntax { .. }
        | BifError::NonIntegerExponent { .. }
        | BifError::UnknownIdentifier { .. }
        | BifError::NotRationalInZ(_) => BifStatus::Syntax,
        BifError::Config(_) | BifError::Io(_) => BifStatus::Config,
        BifError::DegenerateParameter(_) | BifError::DegenerateEverywhere => BifStatus::Degenerate,
        _ => BifStatus::Numeric,
    }
}

fn fail(err: &BifError) -> BifStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guarded(f: impl FnOnce() -> BifStatus) -> BifStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            BifStatus::Numeric
        }
    }
}

/// Opaque handle: a validated family `f_lambda` plus its marked point.
pub struct BifFamily {
    fam: RationalFamily,
    marked: MarkedPoint,
}

/// Opaque handle: a grid measure on a parameter window.
pub struct BifGridMeasure {
    inner: GridMeasure,
}

unsafe fn cstr<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        return None;
    }
    CStr::from_ptr(p).to_str().ok()
}

/// Last error message for this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn bif_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a family from map and marked-point expressions over the window
/// `[re_min, re_max] x [im_min, im_max]`. On success `*out` owns the
/// handle; release it with `bif_family_free`.
///
/// # Safety
/// `map` and `marked` must be valid NUL-terminated UTF-8 strings; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bif_family_new(
    map: *const c_char,
    marked: *const c_char,
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    out: *mut *mut BifFamily,
) -> BifStatus {
    guarded(|| {
        let (Some(map), Some(marked)) = (cstr(map), cstr(marked)) else {
            set_error("map/marked must be non-null UTF-8");
            return BifStatus::NullArgument;
        };
        if out.is_null() {
            set_error("out must be non-null");
            return BifStatus::NullArgument;
        }
        if !(re_min < re_max && im_min < im_max) {
            set_error("empty window");
            return BifStatus::Config;
        }
        let build = || -> Result<BifFamily, BifError> {
            let map = parse(map)?;
            let marked = parse(marked)?;
            let (fam, marked) = build_family(&map, &marked, Rect::new(re_min, re_max, im_min, im_max))?;
            Ok(BifFamily { fam, marked })
        };
        match build() {
            Ok(h) => {
                *out = Box::into_raw(Box::new(h));
                BifStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a family handle (null is a no-op).
///
/// # Safety
/// `h` must be a pointer previously returned by `bif_family_new`.
#[no_mangle]
pub unsafe extern "C" fn bif_family_free(h: *mut BifFamily) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Algebraic degree of the family (0 on null input).
///
/// # Safety
/// `h` must be a live family handle or null.
#[no_mangle]
pub unsafe extern "C" fn bif_family_degree(h: *const BifFamily) -> usize {
    h.as_ref().map(|f| f.fam.degree).unwrap_or(0)
}

/// Bifurcation potential `g(lambda) = G_lambda(a(lambda))` at one
/// parameter, to truncation tolerance `tol`.
///
/// # Safety
/// `h` must be a live family handle; `out_value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bif_potential(
    h: *const BifFamily,
    lambda_re: f64,
    lambda_im: f64,
    tol: f64,
    out_value: *mut f64,
) -> BifStatus {
    guarded(|| {
        let Some(f) = h.as_ref() else {
            set_error("null family");
            return BifStatus::NullArgument;
        };
        if out_value.is_null() {
            set_error("out_value must be non-null");
            return BifStatus::NullArgument;
        }
        let lam = Complex64::new(lambda_re, lambda_im);
        let a = f.marked.a.eval(lam);
        let b = f.marked.b.eval(lam);
        match green_lift(&f.fam, lam, (a, b), tol) {
            Ok(g) => {
                *out_value = g.value;
                BifStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Compute the bifurcation measure of the pair on the family window at
/// `res x res` nodes. On success `*out` owns the handle.
///
/// # Safety
/// `h` must be a live family handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bif_measure_compute(
    h: *const BifFamily,
    res: usize,
    tol: f64,
    out: *mut *mut BifGridMeasure,
) -> BifStatus {
    guarded(|| {
        let Some(f) = h.as_ref() else {
            set_error("null family");
            return BifStatus::NullArgument;
        };
        if out.is_null() {
            set_error("out must be non-null");
            return BifStatus::NullArgument;
        }
        if res < 8 {
            set_error("res must be at least 8");
            return BifStatus::Config;
        }
        let m = bif_measure(&f.fam, &f.marked, f.fam.domain, res, tol);
        *out = Box::into_raw(Box::new(BifGridMeasure { inner: m }));
        BifStatus::Ok
    })
}

/// Release a grid-measure handle (null is a no-op).
///
/// # Safety
/// `h` must be a pointer previously returned by `bif_measure_compute`.
#[no_mangle]
pub unsafe extern "C" fn bif_measure_free(h: *mut BifGridMeasure) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Grid width in nodes (0 on null input).
///
/// # Safety
/// `h` must be a live grid-measure handle or null.
#[no_mangle]
pub unsafe extern "C" fn bif_measure_width(h: *const BifGridMeasure) -> usize {
    h.as_ref().map(|m| m.inner.mass.width).unwrap_or(0)
}

/// Grid height in nodes (0 on null input).
///
/// # Safety
/// `h` must be a live grid-measure handle or null.
#[no_mangle]
pub unsafe extern "C" fn bif_measure_height(h: *const BifGridMeasure) -> usize {
    h.as_ref().map(|m| m.inner.mass.height).unwrap_or(0)
}

/// Total mass (NaN on null input).
///
/// # Safety
/// `h` must be a live grid-measure handle or null.
#[no_mangle]
pub unsafe extern "C" fn bif_measure_total_mass(h: *const BifGridMeasure) -> f64 {
    h.as_ref().map(|m| m.inner.total_mass()).unwrap_or(f64::NAN)
}

/// Cell mass at column `i`, row `j` (NaN when out of range).
///
/// # Safety
/// `h` must be a live grid-measure handle or null.
#[no_mangle]
pub unsafe extern "C" fn bif_measure_cell(h: *const BifGridMeasure, i: usize, j: usize) -> f64 {
    match h.as_ref() {
        Some(m) if i < m.inner.mass.width && j < m.inner.mass.height => m.inner.mass.get(i, j),
        _ => f64::NAN,
    }
}

/// Write the measure in the BIFM binary grid format.
///
/// # Safety
/// `h` must be a live grid-measure handle; `path` a NUL-terminated
/// UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn bif_measure_write(
    h: *const BifGridMeasure,
    path: *const c_char,
) -> BifStatus {
    guarded(|| {
        let (Some(m), Some(path)) = (h.as_ref(), cstr(path)) else {
            set_error("null handle or path");
            return BifStatus::NullArgument;
        };
        match m.inner.write_binary(Path::new(path)) {
            Ok(()) => BifStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Monte Carlo Lyapunov exponent of `mu_{f_lambda}`.
///
/// # Safety
/// `h` must be a live family handle; `out_l` and `out_std_err` valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn bif_lyapunov(
    h: *const BifFamily,
    lambda_re: f64,
    lambda_im: f64,
    samples: usize,
    seed: u64,
    out_l: *mut f64,
    out_std_err: *mut f64,
) -> BifStatus {
    guarded(|| {
        let Some(f) = h.as_ref() else {
            set_error("null family");
            return BifStatus::NullArgument;
        };
        if out_l.is_null() || out_std_err.is_null() {
            set_error("output pointers must be non-null");
            return BifStatus::NullArgument;
        }
        if samples == 0 {
            set_error("samples must be positive");
            return BifStatus::Config;
        }
        match lyapunov(&f.fam, Complex64::new(lambda_re, lambda_im), samples, seed) {
            Ok(est) => {
                *out_l = est.l;
                *out_std_err = est.std_err;
                BifStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Newton solve for a Misiurewicz parameter from a seed; on success the
/// certified parameter, cycle multiplier, transversality and residual
/// are written to the output pointers (any may be null to skip).
///
/// # Safety
/// `h` must be a live family handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn bif_misiurewicz_solve(
    h: *const BifFamily,
    seed_re: f64,
    seed_im: f64,
    n: usize,
    p: usize,
    out_lambda_re: *mut f64,
    out_lambda_im: *mut f64,
    out_rho_re: *mut f64,
    out_rho_im: *mut f64,
    out_trans_re: *mut f64,
    out_trans_im: *mut f64,
    out_residual: *mut f64,
) -> BifStatus {
    guarded(|| {
        let Some(f) = h.as_ref() else {
            set_error("null family");
            return BifStatus::NullArgument;
        };
        if p == 0 {
            set_error("p must be positive");
            return BifStatus::Config;
        }
        match solve_misiurewicz(&f.fam, &f.marked, Complex64::new(seed_re, seed_im), n, p, 1e-12) {
            Ok(mp) => {
                let write = |ptr: *mut f64, v: f64| {
                    if !ptr.is_null() {
                        *ptr = v;
                    }
                };
                write(out_lambda_re, mp.lambda0.re);
                write(out_lambda_im, mp.lambda0.im);
                write(out_rho_re, mp.orbit.multiplier.re);
                write(out_rho_im, mp.orbit.multiplier.im);
                write(out_trans_re, mp.transversality.re);
                write(out_trans_im, mp.transversality.im);
                write(out_residual, mp.residual);
                BifStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
