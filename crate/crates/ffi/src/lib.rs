//! C ABI over `reclqr-core`.
//!
//! Every function returns a [`ReclqrStatus`]; on failure a message is kept
//! per thread and can be read with [`reclqr_last_error`]. Handles are opaque
//! and must be released with the matching `_free` function. Matrices are
//! exchanged row-major.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use reclqr_core::config::{Scenario, ScenarioConfig};
use reclqr_core::counterexamples::reproduce_example;
use reclqr_core::linalg::{Matrix, Vector};
use reclqr_core::performance::{classify_weights_with, Regime, DEFAULT_CLASSIFY_TOL};
use reclqr_core::synthesis::{synthesize_problem, Controller, SynthesisOptions};
use reclqr_core::riccati::TransformedProblem;
use reclqr_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReclqrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Dimension = 4,
    InvalidModel = 5,
    InvalidGraph = 6,
    Singular = 7,
    Numerical = 8,
    Unsupported = 9,
    OutOfRange = 10,
    NoController = 11,
    BufferTooSmall = 12,
    Io = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReclqrRegime {
    StrictlyConvex = 0,
    SemidefiniteDetectable = 1,
    SemidefiniteUndetectable = 2,
    Indefinite = 3,
}

impl From<Regime> for ReclqrRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::StrictlyConvex => ReclqrRegime::StrictlyConvex,
            Regime::SemidefiniteDetectable => ReclqrRegime::SemidefiniteDetectable,
            Regime::SemidefiniteUndetectable => ReclqrRegime::SemidefiniteUndetectable,
            Regime::Indefinite => ReclqrRegime::Indefinite,
        }
    }
}

/// Assembled model, weights and simulation settings.
pub struct ReclqrScenario {
    inner: Scenario,
}

/// Synthesized controller.
pub struct ReclqrController {
    inner: Controller,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ReclqrStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) | Error::Config(_) => ReclqrStatus::Parse,
        Error::Dimension(_) => ReclqrStatus::Dimension,
        Error::InvalidModel(_) | Error::InvalidWeights(_) => ReclqrStatus::InvalidModel,
        Error::InvalidGraph(_) | Error::NotStronglyConnected | Error::NonpositiveBalancing(_) => {
            ReclqrStatus::InvalidGraph
        }
        Error::Singular(_) => ReclqrStatus::Singular,
        Error::Unsupported(_) | Error::EnumerationCap { .. } | Error::NotExhaustive => ReclqrStatus::Unsupported,
        Error::OutOfRange(_) => ReclqrStatus::OutOfRange,
        Error::AntistabilizingAbsent => ReclqrStatus::NoController,
        Error::Io(_) => ReclqrStatus::Io,
        _ => ReclqrStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> ReclqrStatus
where
    F: FnOnce() -> Result<(), (ReclqrStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ReclqrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ReclqrStatus::Panic
        }
    }
}

fn fail(e: Error) -> (ReclqrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ReclqrStatus, String) {
    (ReclqrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ReclqrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (ReclqrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], (ReclqrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err((ReclqrStatus::BufferTooSmall, format!("{what} holds {len} entries, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

fn copy_row_major(m: &Matrix, out: &mut [f64]) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
}

/// Message for the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn reclqr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn reclqr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a scenario from a JSON document. Relative paths resolve against
/// `base_dir`, which may be null for the current directory.
///
/// # Safety
/// `json` and `base_dir` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reclqr_scenario_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut ReclqrScenario,
) -> ReclqrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let base = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| fail(e.into()))?;
        let inner = Scenario::build(&cfg, Path::new(base)).map_err(fail)?;
        *out = Box::into_raw(Box::new(ReclqrScenario { inner }));
        Ok(())
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reclqr_scenario_from_file(path: *const c_char, out: *mut *mut ReclqrScenario) -> ReclqrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Scenario::load(Path::new(str_arg(path, "path")?)).map_err(fail)?;
        *out = Box::into_raw(Box::new(ReclqrScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from a `reclqr_scenario_from_*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn reclqr_scenario_free(s: *mut ReclqrScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// State dimension `n·m`.
///
/// # Safety
/// `s` must be a live scenario handle and `dim` writable.
#[no_mangle]
pub unsafe extern "C" fn reclqr_scenario_dim(s: *const ReclqrScenario, dim: *mut usize) -> ReclqrStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        let dim = dim.as_mut().ok_or_else(|| null("dim"))?;
        *dim = s.inner.sys.dim();
        Ok(())
    })
}

/// Classifies the weights. A nonpositive `tol` selects the default.
///
/// # Safety
/// `s` must be a live scenario handle; `regime` writable; `margin` may be null.
#[no_mangle]
pub unsafe extern "C" fn reclqr_scenario_classify(
    s: *const ReclqrScenario,
    tol: f64,
    regime: *mut ReclqrRegime,
    margin: *mut f64,
) -> ReclqrStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        let regime = regime.as_mut().ok_or_else(|| null("regime"))?;
        let tol = if tol > 0.0 { tol } else { DEFAULT_CLASSIFY_TOL };
        let verdict = classify_weights_with(&s.inner.mats, tol).map_err(fail)?;
        *regime = verdict.regime.into();
        if let Some(m) = margin.as_mut() {
            *m = verdict.lemma1_margin.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Classifies and synthesizes. A controller handle is returned even when no
/// optimal gain exists; query it with `reclqr_controller_has_gain`.
///
/// # Safety
/// `s` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reclqr_synthesize(s: *const ReclqrScenario, out: *mut *mut ReclqrController) -> ReclqrStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let verdict = classify_weights_with(&s.inner.mats, DEFAULT_CLASSIFY_TOL).map_err(fail)?;
        let tp = TransformedProblem::from_stage_cost(&s.inner.mats, &s.inner.sys);
        let inner = synthesize_problem(&tp, &s.inner.mats.n_cross, verdict.regime, SynthesisOptions::default())
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(ReclqrController { inner }));
        Ok(())
    })
}

/// # Safety
/// `c` must come from `reclqr_synthesize` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_free(c: *mut ReclqrController) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Writes 1 if the controller carries a feedback gain, else 0.
///
/// # Safety
/// `c` must be a live controller handle and `has_gain` writable.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_has_gain(c: *const ReclqrController, has_gain: *mut c_int) -> ReclqrStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("controller"))?;
        *has_gain.as_mut().ok_or_else(|| null("has_gain"))? = c.inner.k.is_some() as c_int;
        Ok(())
    })
}

/// Regime the controller was synthesized for.
///
/// # Safety
/// `c` must be a live controller handle and `regime` writable.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_regime(c: *const ReclqrController, regime: *mut ReclqrRegime) -> ReclqrStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("controller"))?;
        *regime.as_mut().ok_or_else(|| null("regime"))? = c.inner.regime.into();
        Ok(())
    })
}

fn gain_dim(c: &ReclqrController) -> Result<(&Matrix, &Vector), (ReclqrStatus, String)> {
    let diag = c.inner.notes.join("; ");
    match (&c.inner.k, &c.inner.b) {
        (Some(k), Some(b)) => Ok((k, b)),
        _ => Err((ReclqrStatus::NoController, format!("no optimal gain: {diag}"))),
    }
}

/// Copies the gain `K` (row-major, `dim × dim`) of `u = −Kx + b`.
///
/// # Safety
/// `c` must be a live controller handle; `k` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_gain(c: *const ReclqrController, k: *mut f64, len: usize) -> ReclqrStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("controller"))?;
        let (gain, _) = gain_dim(c)?;
        copy_row_major(gain, out_slice(k, len, gain.len(), "k")?);
        Ok(())
    })
}

/// Copies the offset `b` of `u = −Kx + b`.
///
/// # Safety
/// `c` must be a live controller handle; `b` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_offset(c: *const ReclqrController, b: *mut f64, len: usize) -> ReclqrStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("controller"))?;
        let (_, offset) = gain_dim(c)?;
        out_slice(b, len, offset.len(), "b")?.copy_from_slice(offset.as_slice());
        Ok(())
    })
}

/// Copies the Riccati-type matrix behind the gain (row-major).
///
/// # Safety
/// `c` must be a live controller handle; `p` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_riccati(c: *const ReclqrController, p: *mut f64, len: usize) -> ReclqrStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("controller"))?;
        let m = c.inner.p_used.as_ref().ok_or((ReclqrStatus::NoController, "no Riccati matrix".to_string()))?;
        copy_row_major(m, out_slice(p, len, m.len(), "p")?);
        Ok(())
    })
}

/// Evaluates `u = −Kx + b`.
///
/// # Safety
/// `c` must be a live controller handle; `x` and `u` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_input(
    c: *const ReclqrController,
    x: *const f64,
    u: *mut f64,
    len: usize,
) -> ReclqrStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("controller"))?;
        let (k, _) = gain_dim(c)?;
        if x.is_null() {
            return Err(null("x"));
        }
        let n = k.nrows();
        if len != n {
            return Err((ReclqrStatus::Dimension, format!("state has {len} entries, controller expects {n}")));
        }
        let x = Vector::from_column_slice(std::slice::from_raw_parts(x, n));
        let value = c.inner.input(&x).ok_or((ReclqrStatus::NoController, "no optimal gain".to_string()))?;
        out_slice(u, len, n, "u")?.copy_from_slice(value.as_slice());
        Ok(())
    })
}

/// Closed-loop eigenvalues; `count` receives how many were written.
///
/// # Safety
/// `c` must be a live controller handle; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_spectrum(
    c: *const ReclqrController,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    count: *mut usize,
) -> ReclqrStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("controller"))?;
        let spec = &c.inner.spectrum;
        let re = out_slice(re, len, spec.len(), "re")?;
        let im = out_slice(im, len, spec.len(), "im")?;
        for (i, z) in spec.iter().enumerate() {
            re[i] = z.re;
            im[i] = z.im;
        }
        *count.as_mut().ok_or_else(|| null("count"))? = spec.len();
        Ok(())
    })
}

/// Controller as a JSON document. Release with `reclqr_string_free`.
///
/// # Safety
/// `c` must be a live controller handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reclqr_controller_to_json(c: *const ReclqrController, out: *mut *mut c_char) -> ReclqrStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("controller"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&c.inner).map_err(|e| fail(e.into()))?;
        *out = CString::new(json).map_err(|e| (ReclqrStatus::Numerical, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn reclqr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reproduces built-in example `which` (1, 2 or 3). `params_json` is null or
/// an object such as `{"eta": 1.0}`. Writes 1 to `passed` iff every check passed.
///
/// # Safety
/// `params_json` must be null or NUL-terminated; `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn reclqr_example_run(which: c_int, params_json: *const c_char, passed: *mut c_int) -> ReclqrStatus {
    guard(|| {
        let passed = passed.as_mut().ok_or_else(|| null("passed"))?;
        let params = if params_json.is_null() {
            Default::default()
        } else {
            serde_json::from_str(str_arg(params_json, "params_json")?).map_err(|e| fail(e.into()))?
        };
        let which = u8::try_from(which).map_err(|_| fail(Error::OutOfRange(format!("unknown example {which}"))))?;
        let report = reproduce_example(which, &params).map_err(fail)?;
        *passed = report.passed as c_int;
        Ok(())
    })
}
