//! C ABI over `icx-core`.
//!
//! Every fallible function returns an [`IcxStatus`] and writes its result
//! through an out-pointer. On failure [`icx_last_error`] describes the
//! problem until the next failing call on the same thread. Specs (models,
//! errors, initial conditions, criteria) are NUL-terminated strings in the
//! grammar accepted by the `icx` command line, e.g. `"ltue:c=1"`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use icx_core::estimate::{fit_values, h_inverse, Binding, BindingTable, Estimator, FitResult, InverseRegion};
use icx_core::experiment::{emit_report, run_experiment, ExperimentConfig, ExperimentReport, ReportFormat};
use icx_core::limits::{chi2_cdf, limit_probability, penalty_ratio, Branch, LimitCase, TauCase, Theorem};
use icx_core::model::{ErrorSpec, InitSpec, ModelSpec, PenaltySpec};
use icx_core::{criteria, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcxStatus {
    Ok = 0,
    NullPointer = 1,
    /// Unparsable spec, invalid UTF-8 or a wrongly sized buffer.
    InvalidArgument = 2,
    Domain = 3,
    /// Degenerate data: zero variance, all-zero path, overflow.
    Degenerate = 4,
    /// Quadrature or root finding failed to reach its tolerance.
    Numeric = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcxEstimator {
    Ols = 0,
    IndirectInference = 1,
}

impl From<IcxEstimator> for Estimator {
    fn from(e: IcxEstimator) -> Self {
        match e {
            IcxEstimator::Ols => Estimator::Ols,
            IcxEstimator::IndirectInference => Estimator::IndirectInference,
        }
    }
}

/// Opaque binding-function table.
pub struct IcxBindingTable {
    inner: BindingTable,
}

/// Opaque Monte Carlo report.
pub struct IcxReport {
    inner: ExperimentReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IcxFit {
    pub rho_hat: f64,
    pub sigma2_k0: f64,
    pub sigma2_k1: f64,
    pub n: usize,
    /// Non-zero when `h^-1` was clamped at the bottom of the table.
    pub saturated: c_int,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IcxSelection {
    pub ic0: f64,
    pub ic1: f64,
    pub k_hat: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IcxLimitEstimate {
    pub probability: f64,
    /// Monte Carlo standard error; 0 for closed forms.
    pub se: f64,
    pub draws: usize,
    pub saturated: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IcxCellResult {
    pub n: usize,
    /// 0 for OLS, 1 for indirect inference.
    pub estimator: c_int,
    pub freq: f64,
    pub reps: usize,
    pub correct: usize,
    pub excluded: usize,
    pub saturated: usize,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(IcxStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) => IcxStatus::Domain,
            Error::Degenerate(_) | Error::ZeroVariance { .. } | Error::MagnitudeOverflow { .. } => IcxStatus::Degenerate,
            Error::NumericRange(_) | Error::Quadrature { .. } | Error::NonMonotone { .. } => IcxStatus::Numeric,
            Error::Parse(_) => IcxStatus::InvalidArgument,
            Error::Io { .. } => IcxStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> IcxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IcxStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IcxStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(IcxStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(IcxStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn parse_arg<T: std::str::FromStr<Err = Error>>(p: *const c_char, what: &str) -> FfiResult<T> {
    Ok(str_arg(p, what)?.parse::<T>()?)
}

unsafe fn slice_arg<'a>(values: *const f64, len: usize) -> FfiResult<&'a [f64]> {
    if values.is_null() {
        return Err(null("values"));
    }
    Ok(std::slice::from_raw_parts(values, len))
}

fn fit_out(fit: FitResult) -> IcxFit {
    IcxFit {
        rho_hat: fit.rho_hat,
        sigma2_k0: fit.sigma2_k0,
        sigma2_k1: fit.sigma2_k1,
        n: fit.n,
        saturated: fit.saturated as c_int,
    }
}

/// Message for the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn icx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn icx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icx_h_of(c: f64, out: *mut f64) -> IcxStatus {
    guard(|| {
        *out_ref(out, "out")? = icx_core::h_of(c)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icx_g_of(c: f64, out: *mut f64) -> IcxStatus {
    guard(|| {
        *out_ref(out, "out")? = icx_core::g_of(c)?;
        Ok(())
    })
}

/// Builds the default table by quadrature. Free with [`icx_binding_free`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icx_binding_build(out: *mut *mut IcxBindingTable) -> IcxStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let inner = BindingTable::build_default()?;
        *slot = Box::into_raw(Box::new(IcxBindingTable { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icx_binding_load(path: *const c_char, out: *mut *mut IcxBindingTable) -> IcxStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let slot = out_ref(out, "out")?;
        let inner = BindingTable::load(Path::new(path))?;
        *slot = Box::into_raw(Box::new(IcxBindingTable { inner }));
        Ok(())
    })
}

/// # Safety
/// `table` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn icx_binding_save(table: *const IcxBindingTable, path: *const c_char) -> IcxStatus {
    guard(|| {
        let table = table.as_ref().ok_or_else(|| null("table"))?;
        table.inner.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `table` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn icx_binding_free(table: *mut IcxBindingTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Solves `h(c) = x`. `saturated` (may be NULL) is set to 1 when `x` lies
/// below the table and `c` was clamped.
///
/// # Safety
/// `table` must come from this library; `c_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icx_h_inverse(
    table: *const IcxBindingTable,
    x: f64,
    c_out: *mut f64,
    saturated: *mut c_int,
) -> IcxStatus {
    guard(|| {
        let table = table.as_ref().ok_or_else(|| null("table"))?;
        let slot = out_ref(c_out, "c_out")?;
        let inv = h_inverse(x, &table.inner)?;
        *slot = inv.c;
        if let Some(s) = saturated.as_mut() {
            *s = (inv.region == InverseRegion::Saturated) as c_int;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icx_rho_n(model: *const c_char, n: usize, out: *mut f64) -> IcxStatus {
    guard(|| {
        let model: ModelSpec = parse_arg(model, "model")?;
        *out_ref(out, "out")? = icx_core::rho_n_of(&model, n)?;
        Ok(())
    })
}

/// Simulates `X_0..X_n` into `buf`, which must hold exactly `n + 1` values.
/// `error` and `init` may be NULL for N(0,1) errors and `X_0 = 0`.
///
/// # Safety
/// String arguments must be NUL-terminated; `buf` must hold `buf_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn icx_gen_path(
    model: *const c_char,
    error: *const c_char,
    init: *const c_char,
    n: usize,
    seed: u64,
    buf: *mut f64,
    buf_len: usize,
) -> IcxStatus {
    guard(|| {
        let model: ModelSpec = parse_arg(model, "model")?;
        let error: ErrorSpec = if error.is_null() { ErrorSpec::default() } else { parse_arg(error, "error")? };
        let init: InitSpec = if init.is_null() { InitSpec::default() } else { parse_arg(init, "init")? };
        if buf.is_null() {
            return Err(null("buf"));
        }
        if buf_len != n + 1 {
            return Err(Failure(IcxStatus::InvalidArgument, format!("buffer holds {buf_len} values, need {}", n + 1)));
        }
        let path = icx_core::gen_path(&model, &error, &init, n, seed)?;
        std::slice::from_raw_parts_mut(buf, buf_len).copy_from_slice(&path.values);
        Ok(())
    })
}

/// OLS on a raw path of `len >= 2` values.
///
/// # Safety
/// `values` must hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icx_ols_fit(values: *const f64, len: usize, out: *mut IcxFit) -> IcxStatus {
    guard(|| {
        let values = slice_arg(values, len)?;
        *out_ref(out, "out")? = fit_out(fit_values(values, Estimator::Ols, None)?);
        Ok(())
    })
}

/// # Safety
/// `values` must hold `len` doubles; `table` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn icx_indirect_fit(
    values: *const f64,
    len: usize,
    table: *const IcxBindingTable,
    out: *mut IcxFit,
) -> IcxStatus {
    guard(|| {
        let values = slice_arg(values, len)?;
        let table = table.as_ref().ok_or_else(|| null("table"))?;
        let binding: &dyn Binding = &table.inner;
        *out_ref(out, "out")? = fit_out(fit_values(values, Estimator::IndirectInference, Some(binding))?);
        Ok(())
    })
}

/// IC_0, IC_1 and the selected order. `table` is required for indirect
/// inference and ignored for OLS.
///
/// # Safety
/// `values` must hold `len` doubles; `criterion` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn icx_select(
    values: *const f64,
    len: usize,
    estimator: IcxEstimator,
    criterion: *const c_char,
    table: *const IcxBindingTable,
    out: *mut IcxSelection,
) -> IcxStatus {
    guard(|| {
        let values = slice_arg(values, len)?;
        let criterion: PenaltySpec = parse_arg(criterion, "criterion")?;
        let binding = table.as_ref().map(|t| &t.inner as &dyn Binding);
        let s = criteria::select_values(values, estimator.into(), criterion, binding)?;
        *out_ref(out, "out")? = IcxSelection { ic0: s.ic0, ic1: s.ic1, k_hat: s.k_hat };
        Ok(())
    })
}

/// # Safety
/// `criterion` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icx_penalty(criterion: *const c_char, n: usize, out: *mut f64) -> IcxStatus {
    guard(|| {
        let criterion: PenaltySpec = parse_arg(criterion, "criterion")?;
        *out_ref(out, "out")? = criteria::penalty(&criterion, n)?;
        Ok(())
    })
}

/// `p_n / rho_n^{2n}` for an explosive-side model.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icx_penalty_ratio(
    model: *const c_char,
    criterion: *const c_char,
    n: usize,
    out: *mut f64,
) -> IcxStatus {
    guard(|| {
        let model: ModelSpec = parse_arg(model, "model")?;
        let criterion: PenaltySpec = parse_arg(criterion, "criterion")?;
        *out_ref(out, "out")? = penalty_ratio(&model, &criterion, n)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icx_chi2_cdf(x: f64, out: *mut f64) -> IcxStatus {
    guard(|| {
        *out_ref(out, "out")? = chi2_cdf(x)?;
        Ok(())
    })
}

/// Asymptotic probability of correct selection. `theorem` is one of
/// `t1 t2a t2b t2c t3 t4a t4b t4c p5`; `branch` is `aic` or `divergent`
/// (NULL means `aic`); `tau` is `0`, a positive number or `inf` (NULL means
/// `0`). `table` is needed for `t3` and `t4a`; NULL builds one.
///
/// # Safety
/// String arguments must be NUL-terminated or NULL where allowed.
#[no_mangle]
pub unsafe extern "C" fn icx_limit_probability(
    theorem: *const c_char,
    branch: *const c_char,
    pi: f64,
    omega2: f64,
    c: f64,
    rho: f64,
    tau: *const c_char,
    draws: usize,
    steps: usize,
    seed: u64,
    table: *const IcxBindingTable,
    out: *mut IcxLimitEstimate,
) -> IcxStatus {
    guard(|| {
        let theorem: Theorem = parse_arg(theorem, "theorem")?;
        let mut case = LimitCase::new(theorem);
        if !branch.is_null() {
            case.branch = parse_arg::<Branch>(branch, "branch")?;
        }
        if !tau.is_null() {
            case.tau = parse_arg::<TauCase>(tau, "tau")?;
        }
        case.pi = pi;
        case.omega2 = omega2;
        case.c = c;
        case.rho = rho;
        let slot = out_ref(out, "out")?;
        let est = limit_probability(&case, draws, steps, seed, table.as_ref().map(|t| &t.inner))?;
        *slot = IcxLimitEstimate {
            probability: est.probability,
            se: est.se,
            draws: est.draws,
            saturated: est.saturated,
        };
        Ok(())
    })
}

/// Runs an experiment described by TOML text. `reps` and `workers` override
/// the config when non-zero. Free the report with [`icx_report_free`].
///
/// # Safety
/// `config_toml` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icx_experiment_run(
    config_toml: *const c_char,
    reps: usize,
    workers: usize,
    table: *const IcxBindingTable,
    out: *mut *mut IcxReport,
) -> IcxStatus {
    guard(|| {
        let mut cfg = ExperimentConfig::from_toml(str_arg(config_toml, "config_toml")?)?;
        if reps > 0 {
            cfg.reps = reps;
        }
        if workers > 0 {
            cfg.workers = workers;
        }
        let slot = out_ref(out, "out")?;
        let inner = run_experiment(&cfg, table.as_ref().map(|t| &t.inner))?;
        *slot = Box::into_raw(Box::new(IcxReport { inner }));
        Ok(())
    })
}

/// Number of cells in a report (0 for NULL).
///
/// # Safety
/// `report` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn icx_report_len(report: *const IcxReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.cells.len())
}

/// # Safety
/// `report` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icx_report_cell(report: *const IcxReport, index: usize, out: *mut IcxCellResult) -> IcxStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        let cell = report.inner.cells.get(index).ok_or_else(|| {
            Failure(IcxStatus::InvalidArgument, format!("cell {index} out of range ({} cells)", report.inner.cells.len()))
        })?;
        *out_ref(out, "out")? = IcxCellResult {
            n: cell.n,
            estimator: (cell.estimator == Estimator::IndirectInference) as c_int,
            freq: cell.freq,
            reps: cell.reps,
            correct: cell.correct,
            excluded: cell.excluded,
            saturated: cell.saturated,
            seed: cell.seed,
        };
        Ok(())
    })
}

/// Writes the report atomically as CSV, or JSON when `json` is non-zero.
///
/// # Safety
/// `report` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn icx_report_write(report: *const IcxReport, path: *const c_char, json: c_int) -> IcxStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        let format = if json != 0 { ReportFormat::Json } else { ReportFormat::Csv };
        emit_report(&report.inner, format, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn icx_report_free(report: *mut IcxReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
