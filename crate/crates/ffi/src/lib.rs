//! C ABI over `hemskit`.
//!
//! Models live behind opaque handles created by `*_fit` or `*_from_json`
//! functions and released with the matching `*_free`. Every function
//! returns a [`HemskitStatus`]; on failure the message is available from
//! [`hemskit_last_error`] on the same thread until the next call.
//!
//! Matrices are passed row-major as `*const f64` plus their dimensions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hemskit::data::{crps_rows, mae, rmse};
use hemskit::flex::{
    svdd_classify, svdd_fit_points, svdd_radius2, vbattery_classify, vbattery_fit_rows, vbattery_size, Label,
    SigmoidKernel, Surrogate, SvddModel, SvddParams, VirtualBattery,
};
use hemskit::var::{fit_centralized, forecast_matrix, AdmmParams, VarDesign, VarModel};
use hemskit::Error;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HemskitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    NotConverged = 4,
    Schema = 5,
    Infeasible = 6,
    Io = 7,
    /// A panic was caught at the boundary.
    Internal = 99,
}

/// Fitted VAR-LASSO model.
pub struct HemskitVarModel(VarModel);

/// Virtual-battery flexibility surrogate.
pub struct HemskitVirtualBattery(VirtualBattery);

/// SVDD flexibility surrogate.
pub struct HemskitSvdd(SvddModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> HemskitStatus {
    match err {
        Error::LengthMismatch { .. } | Error::Shape(_) => HemskitStatus::LengthMismatch,
        Error::NotConverged { .. } => HemskitStatus::NotConverged,
        Error::Schema(_) | Error::Json(_) | Error::Csv(_) => HemskitStatus::Schema,
        Error::Infeasible(_) => HemskitStatus::Infeasible,
        Error::Io(_) => HemskitStatus::Io,
        _ => HemskitStatus::InvalidArgument,
    }
}

struct Null;

enum Fail {
    Null,
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

impl From<Null> for Fail {
    fn from(_: Null) -> Self {
        Fail::Null
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HemskitStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HemskitStatus::Ok,
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument".into());
            HemskitStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            HemskitStatus::Internal
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], Null> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Null);
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize) -> Result<&'a mut [f64], Null> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Null);
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn rows(ptr: *const f64, n_rows: usize, n_cols: usize) -> Result<Vec<Vec<f64>>, Null> {
    let flat = slice(ptr, n_rows * n_cols)?;
    Ok(flat.chunks(n_cols.max(1)).map(<[f64]>::to_vec).collect())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Null> {
    if out.is_null() {
        return Err(Null);
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn handle<'a, T>(ptr: *const T) -> Result<&'a T, Null> {
    ptr.as_ref().ok_or(Null)
}

fn mul_overflow(a: usize, b: usize) -> Result<usize, Fail> {
    a.checked_mul(b).ok_or_else(|| Fail::Lib(Error::InvalidArgument("dimensions overflow".into())))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn hemskit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Fits a VAR(`p`) by centralized ADMM. `data` is `n_series × length`
/// row-major, one row per series.
///
/// # Safety
/// `data` must point to `n_series * length` doubles and `out` to writable
/// storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn hemskit_var_fit(
    data: *const f64,
    n_series: usize,
    length: usize,
    p: usize,
    lambda: f64,
    rho: f64,
    max_iter: usize,
    tol: f64,
    out: *mut *mut HemskitVarModel,
) -> HemskitStatus {
    guard(|| {
        let total = mul_overflow(n_series, length)?;
        let flat = slice(data, total)?;
        if n_series == 0 || length == 0 {
            return Err(Error::Empty("panel").into());
        }
        let m = DMatrix::from_row_slice(n_series, length, flat);
        let means = DVector::from_fn(n_series, |i, _| m.row(i).mean());
        let centered = DMatrix::from_fn(n_series, length, |i, j| m[(i, j)] - means[i]);
        let design = VarDesign::from_centered(&centered, p, means)?;
        let model = fit_centralized(&design, &AdmmParams { lambda, rho, tol, max_iter })?;
        if !model.converged {
            return Err(Error::NotConverged { iterations: model.iterations, detail: "VAR ADMM".into() }.into());
        }
        put(out, HemskitVarModel(model))?;
        Ok(())
    })
}

/// Number of series and lag order.
///
/// # Safety
/// `model` must be a live handle; `n_series` and `p` writable.
#[no_mangle]
pub unsafe extern "C" fn hemskit_var_dims(
    model: *const HemskitVarModel,
    n_series: *mut usize,
    p: *mut usize,
) -> HemskitStatus {
    guard(|| {
        let m = &handle(model)?.0;
        if n_series.is_null() || p.is_null() {
            return Err(Fail::Null);
        }
        *n_series = m.n();
        *p = m.p;
        Ok(())
    })
}

/// Copies the `n × n·p` coefficient matrix row-major into `out`.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hemskit_var_coefficients(
    model: *const HemskitVarModel,
    out: *mut f64,
    out_len: usize,
) -> HemskitStatus {
    guard(|| {
        let b = &handle(model)?.0.b;
        if out_len != b.len() {
            return Err(Error::LengthMismatch { expected: b.len(), got: out_len }.into());
        }
        let dst = slice_mut(out, out_len)?;
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                dst[i * b.ncols() + j] = b[(i, j)];
            }
        }
        Ok(())
    })
}

/// Iterated forecasts from the last `n_recent ≥ p` observations
/// (`n_series × n_recent`, row-major, oldest first). Writes
/// `n_series × steps` row-major into `out`.
///
/// # Safety
/// Pointers must cover the stated dimensions.
#[no_mangle]
pub unsafe extern "C" fn hemskit_var_forecast(
    model: *const HemskitVarModel,
    recent: *const f64,
    n_recent: usize,
    steps: usize,
    out: *mut f64,
) -> HemskitStatus {
    guard(|| {
        let m = &handle(model)?.0;
        let n = m.n();
        let window = DMatrix::from_row_slice(n, n_recent, slice(recent, mul_overflow(n, n_recent)?)?);
        let fc = forecast_matrix(m, &window, steps)?;
        let dst = slice_mut(out, mul_overflow(n, steps)?)?;
        for i in 0..n {
            for s in 0..steps {
                dst[i * steps + s] = fc[(i, s)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must come from `hemskit_var_fit` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hemskit_var_free(model: *mut HemskitVarModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fits the virtual battery to `k` trajectories of `horizon` deviations
/// (row-major).
///
/// # Safety
/// `trajectories` must hold `k * horizon` doubles.
#[no_mangle]
pub unsafe extern "C" fn hemskit_vbattery_fit(
    trajectories: *const f64,
    k: usize,
    horizon: usize,
    soc_ini: f64,
    dt_h: f64,
    out: *mut *mut HemskitVirtualBattery,
) -> HemskitStatus {
    guard(|| {
        mul_overflow(k, horizon)?;
        let rows = rows(trajectories, k, horizon)?;
        let vb = vbattery_fit_rows(&rows, soc_ini, dt_h)?;
        put(out, HemskitVirtualBattery(vb))?;
        Ok(())
    })
}

/// Sets `*feasible` to whether the trajectory lies inside the battery.
///
/// # Safety
/// `trajectory` must hold `horizon` doubles.
#[no_mangle]
pub unsafe extern "C" fn hemskit_vbattery_classify(
    vb: *const HemskitVirtualBattery,
    trajectory: *const f64,
    horizon: usize,
    feasible: *mut bool,
) -> HemskitStatus {
    guard(|| {
        let vb = &handle(vb)?.0;
        let label = vbattery_classify(vb, slice(trajectory, horizon)?)?;
        if feasible.is_null() {
            return Err(Fail::Null);
        }
        *feasible = label == Label::Feasible;
        Ok(())
    })
}

/// Sum of the SOC and power ranges over the horizon.
///
/// # Safety
/// `size` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hemskit_vbattery_size(vb: *const HemskitVirtualBattery, size: *mut f64) -> HemskitStatus {
    guard(|| {
        let vb = &handle(vb)?.0;
        if size.is_null() {
            return Err(Fail::Null);
        }
        *size = vbattery_size(vb);
        Ok(())
    })
}

/// # Safety
/// `vb` must come from `hemskit_vbattery_fit` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hemskit_vbattery_free(vb: *mut HemskitVirtualBattery) {
    if !vb.is_null() {
        drop(Box::from_raw(vb));
    }
}

/// Fits an SVDD with a sigmoid kernel to `k` points of dimension `dim`.
///
/// # Safety
/// `points` must hold `k * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hemskit_svdd_fit(
    points: *const f64,
    k: usize,
    dim: usize,
    nu: f64,
    gamma: f64,
    coef0: f64,
    out: *mut *mut HemskitSvdd,
) -> HemskitStatus {
    guard(|| {
        mul_overflow(k, dim)?;
        let pts = rows(points, k, dim)?;
        let model = svdd_fit_points(&pts, &SvddParams::new(nu, SigmoidKernel { gamma, coef0 }))?;
        put(out, HemskitSvdd(model))?;
        Ok(())
    })
}

/// Loads an SVDD surrogate from its JSON exchange form.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hemskit_svdd_from_json(json: *const c_char, out: *mut *mut HemskitSvdd) -> HemskitStatus {
    guard(|| {
        if json.is_null() {
            return Err(Fail::Null);
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Error::Schema("surrogate JSON is not UTF-8".into()))?;
        match Surrogate::from_json(text)? {
            Surrogate::Svdd(m) => put(out, HemskitSvdd(m))?,
            Surrogate::VirtualBattery(_) => return Err(Error::Schema("expected an SVDD surrogate".into()).into()),
        }
        Ok(())
    })
}

/// Squared kernel distance of `x` to the sphere centre.
///
/// # Safety
/// `x` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hemskit_svdd_radius2(
    model: *const HemskitSvdd,
    x: *const f64,
    dim: usize,
    radius2: *mut f64,
) -> HemskitStatus {
    guard(|| {
        let m = &handle(model)?.0;
        let r = svdd_radius2(m, slice(x, dim)?)?;
        if radius2.is_null() {
            return Err(Fail::Null);
        }
        *radius2 = r;
        Ok(())
    })
}

/// # Safety
/// `x` must hold `dim` doubles and `feasible` be writable.
#[no_mangle]
pub unsafe extern "C" fn hemskit_svdd_classify(
    model: *const HemskitSvdd,
    x: *const f64,
    dim: usize,
    feasible: *mut bool,
) -> HemskitStatus {
    guard(|| {
        let m = &handle(model)?.0;
        let label = svdd_classify(m, slice(x, dim)?)?;
        if feasible.is_null() {
            return Err(Fail::Null);
        }
        *feasible = label == Label::Feasible;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hemskit_svdd_free(model: *mut HemskitSvdd) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `pred` and `obs` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hemskit_mae(pred: *const f64, obs: *const f64, n: usize, out: *mut f64) -> HemskitStatus {
    guard(|| {
        let v = mae(slice(pred, n)?, slice(obs, n)?)?;
        *slice_mut(out, 1)?.first_mut().ok_or(Null)? = v;
        Ok(())
    })
}

/// # Safety
/// As for [`hemskit_mae`].
#[no_mangle]
pub unsafe extern "C" fn hemskit_rmse(pred: *const f64, obs: *const f64, n: usize, out: *mut f64) -> HemskitStatus {
    guard(|| {
        let v = rmse(slice(pred, n)?, slice(obs, n)?)?;
        *slice_mut(out, 1)?.first_mut().ok_or(Null)? = v;
        Ok(())
    })
}

/// Quantile-based CRPS. `quantiles` is `n × n_levels` row-major; `levels`
/// must be the uniform grid `1/(Q+1), …, Q/(Q+1)`.
///
/// # Safety
/// Pointers must cover the stated dimensions.
#[no_mangle]
pub unsafe extern "C" fn hemskit_crps(
    levels: *const f64,
    n_levels: usize,
    quantiles: *const f64,
    obs: *const f64,
    n: usize,
    out: *mut f64,
) -> HemskitStatus {
    guard(|| {
        mul_overflow(n, n_levels)?;
        let v = crps_rows(slice(levels, n_levels)?, &rows(quantiles, n, n_levels)?, slice(obs, n)?)?;
        *slice_mut(out, 1)?.first_mut().ok_or(Null)? = v;
        Ok(())
    })
}
