//! C ABI over the `backdoor` crate.
//!
//! Every fallible function returns a [`BdStatus`]; on failure the message is
//! available from [`bd_last_error`] on the same thread. Handles are opaque and
//! must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use backdoor::baselines::{allz_ate, marginal_ate};
use backdoor::discovery::{optimize, DiscoveryConfig, DiscoveryProblem, DiscoveryResult};
use backdoor::estimation::backdoor_ate;
use backdoor::graph::Role;
use backdoor::scm::{Column, Dataset, RoleMap};
use backdoor::Error;
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    InvalidConfig = 4,
    Singular = 5,
    Degenerate = 6,
    Io = 7,
    Parse = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Column role.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BdRole {
    W = 0,
    X = 1,
    Y = 2,
    Z = 3,
    U = 4,
}

impl From<BdRole> for Role {
    fn from(r: BdRole) -> Role {
        match r {
            BdRole::W => Role::W,
            BdRole::X => Role::X,
            BdRole::Y => Role::Y,
            BdRole::Z => Role::Z,
            BdRole::U => Role::U,
        }
    }
}

/// Opaque dataset handle.
pub struct BdDataset(Dataset);

/// Opaque discovery result handle.
pub struct BdDiscoveryResult {
    result: DiscoveryResult,
    /// Dataset column index of each selected covariate.
    columns: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(BdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Input(_) | Error::UnknownNode(_) | Error::Cyclic(_) | Error::ZeroGamma | Error::PopulationView => {
                BdStatus::InvalidInput
            }
            Error::Singular { .. } => BdStatus::Singular,
            Error::DegenerateColumn(_) | Error::DegenerateDirection(_) => BdStatus::Degenerate,
            Error::Config(_) => BdStatus::InvalidConfig,
            Error::Io(_) => BdStatus::Io,
            Error::Json(_) | Error::Csv(_) => BdStatus::Parse,
        };
        Failure(code, e.to_string())
    }
}

fn fail(code: BdStatus, msg: impl Into<String>) -> Failure {
    Failure(code, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BdStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            BdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(BdStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(BdStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(BdStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(BdStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(BdStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a dataset from a column-major `n_rows * n_cols` array.
///
/// # Safety
/// `values` must point to `n_rows * n_cols` doubles, `ids` to `n_cols`
/// NUL-terminated strings and `roles` to `n_cols` roles.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_from_columns(
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    ids: *const *const c_char,
    roles: *const BdRole,
    out: *mut *mut BdDataset,
) -> BdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let len = n_rows.checked_mul(n_cols).ok_or_else(|| fail(BdStatus::InvalidInput, "shape overflows"))?;
        let values = slice_arg(values, len, "values")?;
        let ids = slice_arg(ids, n_cols, "ids")?;
        let roles = slice_arg(roles, n_cols, "roles")?;
        let columns = ids
            .iter()
            .zip(roles)
            .map(|(&id, &role)| Ok(Column { id: str_arg(id, "ids[i]")?.to_owned(), role: role.into(), block: None }))
            .collect::<Result<Vec<_>, Failure>>()?;
        let data = Dataset::new(DMatrix::from_column_slice(n_rows, n_cols, values), columns)?;
        *out = Box::into_raw(Box::new(BdDataset(data)));
        Ok(())
    })
}

/// Read a CSV file whose header must match the keys of `roles_json`, a JSON
/// object mapping column id to "W", "X", "Y", "Z" or "U".
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_from_csv(path: *const c_char, roles_json: *const c_char, out: *mut *mut BdDataset) -> BdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let roles: RoleMap = serde_json::from_str(str_arg(roles_json, "roles_json")?).map_err(Error::from)?;
        let file = std::fs::File::open(path).map_err(Error::from)?;
        let data = Dataset::read_csv(std::io::BufReader::new(file), &roles)?;
        *out = Box::into_raw(Box::new(BdDataset(data)));
        Ok(())
    })
}

/// Rescale every column to unit variance in place. Estimates stay in the
/// original units.
///
/// # Safety
/// `data` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_standardize(data: *mut BdDataset) -> BdStatus {
    guard(|| {
        let d = out_arg(data, "data")?;
        d.0 = d.0.clone().standardize()?;
        Ok(())
    })
}

/// # Safety
/// `data` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_n_rows(data: *const BdDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_rows())
}

/// # Safety
/// `data` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_n_cols(data: *const BdDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_cols())
}

/// # Safety
/// `data` must come from a `bd_dataset_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_free(data: *mut BdDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Learn an adjustment set. `config_json` may be null for defaults; given
/// fields override the defaults.
///
/// # Safety
/// `data` must be a live handle, `config_json` null or NUL-terminated, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bd_discover(
    data: *const BdDataset,
    config_json: *const c_char,
    out: *mut *mut BdDiscoveryResult,
) -> BdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let data = &ref_arg(data, "data")?.0;
        let cfg: DiscoveryConfig = if config_json.is_null() {
            DiscoveryConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(|e| Error::Config(e.to_string()))?
        };
        let result = optimize(&DiscoveryProblem::from_dataset(data)?, &cfg)?;
        let z = data.z_columns();
        let columns = result.selected.iter().map(|&i| z[i]).collect();
        *out = Box::into_raw(Box::new(BdDiscoveryResult { result, columns }));
        Ok(())
    })
}

/// Number of Z covariates, which is the length of β.
///
/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bd_result_dim(r: *const BdDiscoveryResult) -> usize {
    r.as_ref().map_or(0, |r| r.result.beta.len())
}

/// Copy the unit-norm β into `buf`, which needs `bd_result_dim` slots.
///
/// # Safety
/// `r` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bd_result_beta(r: *const BdDiscoveryResult, buf: *mut f64, len: usize) -> BdStatus {
    guard(|| {
        let beta = &ref_arg(r, "result")?.result.beta;
        copy_out(beta, buf, len)
    })
}

/// Number of selected covariates.
///
/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bd_result_n_selected(r: *const BdDiscoveryResult) -> usize {
    r.as_ref().map_or(0, |r| r.columns.len())
}

/// Copy the dataset column indices of the selected covariates into `buf`.
/// They can be passed directly to [`bd_backdoor_ate`].
///
/// # Safety
/// `r` must be a live handle and `buf` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn bd_result_selected(r: *const BdDiscoveryResult, buf: *mut usize, len: usize) -> BdStatus {
    guard(|| {
        let cols = &ref_arg(r, "result")?.columns;
        copy_out(cols, buf, len)
    })
}

/// Final objective value, or NaN for a null handle.
///
/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bd_result_objective(r: *const BdDiscoveryResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.result.objective)
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bd_result_converged(r: *const BdDiscoveryResult) -> bool {
    r.as_ref().is_some_and(|r| r.result.converged)
}

/// Full result as JSON. Release with [`bd_string_free`].
///
/// # Safety
/// `r` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bd_result_to_json(r: *const BdDiscoveryResult, out: *mut *mut c_char) -> BdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = serde_json::to_string(&ref_arg(r, "result")?.result).map_err(Error::from)?;
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`bd_discover`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn bd_result_free(r: *mut BdDiscoveryResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn bd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Backdoor ATE adjusting for the Z columns listed in `zstar`.
///
/// # Safety
/// `data` must be a live handle, `zstar` must hold `len` indices, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bd_backdoor_ate(data: *const BdDataset, zstar: *const usize, len: usize, out: *mut f64) -> BdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let data = &ref_arg(data, "data")?.0;
        *out = backdoor_ate(data, slice_arg(zstar, len, "zstar")?)?;
        Ok(())
    })
}

/// Unadjusted regression of Y on X.
///
/// # Safety
/// `data` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bd_marginal_ate(data: *const BdDataset, out: *mut f64) -> BdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = marginal_ate(&ref_arg(data, "data")?.0)?;
        Ok(())
    })
}

/// ATE adjusting for every Z column.
///
/// # Safety
/// `data` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bd_allz_ate(data: *const BdDataset, out: *mut f64) -> BdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = allz_ate(&ref_arg(data, "data")?.0)?;
        Ok(())
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, len: usize) -> Result<(), Failure> {
    if len < src.len() {
        return Err(fail(BdStatus::BufferTooSmall, format!("need {} slots, got {len}", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(fail(BdStatus::NullPointer, "`buf` is null"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}
