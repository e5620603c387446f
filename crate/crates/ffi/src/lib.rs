//! C ABI over the `mka` crate. Factorizations live behind an opaque
//! `MkaFactorization` handle; every fallible call returns an `MkaStatus` and
//! leaves a message retrievable with `mka_last_error_message` on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mka::linalg::{Matrix, SymMatrix};
use mka::{Error, SpectralFn};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MkaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    /// Not positive definite, singular, or no progress/convergence.
    Numeric = 4,
    Io = 5,
    Parse = 6,
    Panic = 7,
}

/// Opaque factorization handle.
pub struct MkaFactorization(mka::MkaFactorization);

/// Factorization parameters; see `mka_config_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MkaConfig {
    pub gamma: f64,
    pub d_core_target: usize,
    pub m_max: usize,
    pub rng_seed: u64,
    pub stage_cap: usize,
}

/// Stored-value counts of a factorization.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MkaStorage {
    pub stages: usize,
    pub n: usize,
    pub d_core: usize,
    pub rotations: usize,
    pub rotation_values: usize,
    pub d_values: usize,
    pub core_values: usize,
    pub total: usize,
    pub bound: usize,
}

impl From<MkaConfig> for mka::MkaConfig {
    fn from(c: MkaConfig) -> Self {
        mka::MkaConfig {
            gamma: c.gamma,
            d_core_target: c.d_core_target,
            m_max: c.m_max,
            rng_seed: c.rng_seed,
            stage_cap: c.stage_cap,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MkaStatus {
    match e {
        Error::Dimension(_) | Error::IndexOutOfRange { .. } => MkaStatus::Dimension,
        Error::InvalidArgument(_) => MkaStatus::InvalidArgument,
        Error::NotPositiveDefinite { .. }
        | Error::NoConvergence { .. }
        | Error::Singular { .. }
        | Error::NoProgress { .. } => MkaStatus::Numeric,
        Error::Io { .. } => MkaStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => MkaStatus::Parse,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MkaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MkaStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed as {what}"));
            MkaStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MkaStatus::Panic
        }
    }
}

unsafe fn handle<'a>(f: *const MkaFactorization) -> Result<&'a mka::MkaFactorization, Fail> {
    f.as_ref().map(|h| &h.0).ok_or(Fail::Null("factorization"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit(out: *mut *mut MkaFactorization, f: mka::MkaFactorization) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(MkaFactorization(f)));
    Ok(())
}

/// Message describing the last failed call on this thread, or NULL. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn mka_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fills `out` with the library defaults.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_config_default(out: *mut MkaConfig) -> MkaStatus {
    guard(|| {
        let d = mka::MkaConfig::default();
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        *out = MkaConfig {
            gamma: d.gamma,
            d_core_target: d.d_core_target,
            m_max: d.m_max,
            rng_seed: d.rng_seed,
            stage_cap: d.stage_cap,
        };
        Ok(())
    })
}

/// Factorizes the symmetric `n`×`n` row-major matrix `data`. On success
/// `*out` receives a handle to release with `mka_factorization_free`.
///
/// # Safety
/// `data` must point to `n*n` readable doubles, `cfg` to a config and `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_factorize(
    data: *const f64,
    n: usize,
    cfg: *const MkaConfig,
    out: *mut *mut MkaFactorization,
) -> MkaStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or(Fail::Null("cfg"))?;
        let len = n.checked_mul(n).ok_or_else(|| Error::InvalidArgument(format!("order {n} overflows")))?;
        let values = slice(data, len, "data")?;
        let a = Matrix::from_row_major(n, n, values.to_vec())?;
        let k = SymMatrix::from_dense(&a, 1e-10)?;
        emit(out, mka::mka_factorize(&k, &(*cfg).into())?)
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `f` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mka_factorization_free(f: *mut MkaFactorization) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Order `n` of the factored matrix.
///
/// # Safety
/// `f` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_factorization_order(f: *const MkaFactorization, out: *mut usize) -> MkaStatus {
    guard(|| {
        let n = handle(f)?.n();
        *out.as_mut().ok_or(Fail::Null("out"))? = n;
        Ok(())
    })
}

/// Computes `out = K̃ z` for vectors of length `len`.
///
/// # Safety
/// `z` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mka_apply(f: *const MkaFactorization, z: *const f64, out: *mut f64, len: usize) -> MkaStatus {
    guard(|| {
        let r = handle(f)?.apply(slice(z, len, "z")?)?;
        write_vec(out, &r)
    })
}

/// Solves `K̃ x = b` for vectors of length `len`.
///
/// # Safety
/// `b` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mka_solve(f: *const MkaFactorization, b: *const f64, out: *mut f64, len: usize) -> MkaStatus {
    guard(|| {
        let r = handle(f)?.solve(slice(b, len, "b")?)?;
        write_vec(out, &r)
    })
}

unsafe fn write_vec(out: *mut f64, v: &[f64]) -> Result<(), Fail> {
    if v.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
    Ok(())
}

/// Log-determinant of `K̃`.
///
/// # Safety
/// `f` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_logdet(f: *const MkaFactorization, out: *mut f64) -> MkaStatus {
    guard(|| {
        let v = handle(f)?.logdet()?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

/// New handle for `K̃^alpha`.
///
/// # Safety
/// `f` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_spectral_power(
    f: *const MkaFactorization,
    alpha: f64,
    out: *mut *mut MkaFactorization,
) -> MkaStatus {
    guard(|| emit(out, handle(f)?.spectral(SpectralFn::Power(alpha))?))
}

/// New handle for `exp(t K̃)`.
///
/// # Safety
/// `f` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_spectral_exp(f: *const MkaFactorization, t: f64, out: *mut *mut MkaFactorization) -> MkaStatus {
    guard(|| emit(out, handle(f)?.spectral(SpectralFn::Exp(t))?))
}

/// # Safety
/// `f` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_storage(f: *const MkaFactorization, out: *mut MkaStorage) -> MkaStatus {
    guard(|| {
        let r = handle(f)?.storage();
        *out.as_mut().ok_or(Fail::Null("out"))? = MkaStorage {
            stages: r.stages,
            n: r.n,
            d_core: r.d_core,
            rotations: r.rotations,
            rotation_values: r.rotation_values,
            d_values: r.d_values,
            core_values: r.core_values,
            total: r.total,
            bound: r.bound,
        };
        Ok(())
    })
}

/// Serializes to a NUL-terminated JSON string, released with
/// `mka_string_free`.
///
/// # Safety
/// `f` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_to_json(f: *const MkaFactorization, out: *mut *mut c_char) -> MkaStatus {
    guard(|| {
        let s = handle(f)?.to_json()?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        *out = CString::new(s).expect("JSON has no NUL bytes").into_raw();
        Ok(())
    })
}

/// Parses a factorization written by `mka_to_json`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mka_from_json(json: *const c_char, out: *mut *mut MkaFactorization) -> MkaStatus {
    guard(|| {
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::InvalidArgument(format!("JSON is not UTF-8: {e}")))?;
        emit(out, mka::MkaFactorization::from_json(s)?)
    })
}

/// Releases a string from `mka_to_json`. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mka_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
