//! C ABI over `oue-core`.
//!
//! Fields cross the boundary as interleaved `(re, im)` doubles in basis
//! order, so a field on a basis of `len` modes is `2 * len` doubles. Every
//! fallible call returns an [`OueStatus`]; on failure the message is kept per
//! thread and read back with [`oue_last_error`].
//!
//! Pointer arguments may be null, which is reported as
//! [`OueStatus::NullPointer`]. Non-null pointers must be valid for the access
//! described on each function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use oue_core::coeffs::interaction;
use oue_core::field::{divergence, vector_field, FieldContext};
use oue_core::flow::{density_kt, integrate};
use oue_core::hermite::{hermite_1d, GaussianParams, MultiIndex, SpectralField};
use oue_core::measure::{sample_field, MeasureParams};
use oue_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OueStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IntegrationFailure = 3,
    Resolution = 4,
    Resource = 5,
    Io = 6,
    Panic = 7,
}

/// A Galerkin box with its interaction table, Gaussian scale and temperature.
pub struct OueContext {
    ctx: FieldContext,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> OueStatus {
    match e {
        Error::InvalidArgument(_) => OueStatus::InvalidArgument,
        Error::IntegrationFailure { .. } => OueStatus::IntegrationFailure,
        Error::Resolution(_) => OueStatus::Resolution,
        Error::Resource(_) => OueStatus::Resource,
        Error::Cache { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_) => OueStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OueStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OueStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            OueStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_else(|| "unknown".into())));
            OueStatus::Panic
        }
    }
}

/// `p` must be null or valid for reads.
unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

/// `p` must be null or valid for writes.
unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

/// `phi` must be null or valid for `2 * len` reads.
unsafe fn read_field(ctx: &FieldContext, phi: *const f64, len: usize) -> Result<SpectralField, Failure> {
    if phi.is_null() {
        return Err(Failure::Null("phi"));
    }
    let n = ctx.basis().len();
    if len != n {
        return Err(Error::InvalidArgument(format!("field has {len} modes, basis has {n}")).into());
    }
    let raw = unsafe { std::slice::from_raw_parts(phi, 2 * len) };
    let coeffs = raw.chunks_exact(2).map(|z| Complex64::new(z[0], z[1])).collect();
    Ok(SpectralField::new(ctx.basis().clone(), coeffs, ctx.c())?)
}

/// `out` must be null or valid for `2 * field.coeffs().len()` writes.
unsafe fn write_field(field: &SpectralField, out: *mut f64) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    let dst = unsafe { std::slice::from_raw_parts_mut(out, 2 * field.coeffs().len()) };
    for (d, z) in dst.chunks_exact_mut(2).zip(field.coeffs()) {
        d[0] = z.re;
        d[1] = z.im;
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn oue_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oue_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// `H_n^c(x)`, the orthonormal Hermite polynomial.
///
/// # Safety
///
/// `out` is null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn oue_hermite(n: usize, c: f64, x: f64, out: *mut f64) -> OueStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        GaussianParams::normalized(c)?;
        *out = hermite_1d(n, c, x);
        Ok(())
    })
}

/// `Θ(n, m, r)`; zero outside `0 ≤ r ≤ min(n, m)`.
#[no_mangle]
pub extern "C" fn oue_theta(n: i64, m: i64, r: i64) -> f64 {
    oue_core::coeffs::theta(n, m, r)
}

/// The c-free interaction coefficient `A(p, q, k)`.
#[no_mangle]
pub extern "C" fn oue_interaction(p1: u32, p2: u32, q1: u32, q2: u32, k1: u32, k2: u32) -> f64 {
    interaction(MultiIndex::new(p1, p2), MultiIndex::new(q1, q2), MultiIndex::new(k1, k2))
}

/// Builds the context for the box `0 ≤ k1, k2 ≤ max_index`. Free it with
/// [`oue_context_free`].
///
/// # Safety
///
/// `out` is null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn oue_context_new(max_index: u32, c: f64, gamma: f64, out: *mut *mut OueContext) -> OueStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if max_index == 0 {
            return Err(Error::InvalidArgument("max_index must be at least 1".into()).into());
        }
        let ctx = FieldContext::with_box(max_index, GaussianParams::normalized(c)?, gamma)?;
        *out = Box::into_raw(Box::new(OueContext { ctx }));
        Ok(())
    })
}

/// Releases a context. Null is ignored.
///
/// # Safety
///
/// `ctx` is null or came from [`oue_context_new`] and has not been freed.
#[no_mangle]
pub unsafe extern "C" fn oue_context_free(ctx: *mut OueContext) {
    if !ctx.is_null() {
        // SAFETY: per the contract above.
        drop(unsafe { Box::from_raw(ctx) });
    }
}

/// Number of modes in the basis, or 0 for a null context.
///
/// # Safety
///
/// `ctx` is null or a live context.
#[no_mangle]
pub unsafe extern "C" fn oue_context_len(ctx: *const OueContext) -> usize {
    // SAFETY: per the contract above.
    unsafe { ctx.as_ref() }.map_or(0, |c| c.ctx.basis().len())
}

/// The multi-index at position `i` of the basis order.
///
/// # Safety
///
/// `ctx` is null or a live context; `k1` and `k2` are null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn oue_context_mode(ctx: *const OueContext, i: usize, k1: *mut u32, k2: *mut u32) -> OueStatus {
    guard(|| {
        let ctx = non_null(ctx, "ctx")?;
        let (k1, k2) = (out_ref(k1, "k1")?, out_ref(k2, "k2")?);
        let k = ctx.ctx.basis().indices().get(i).ok_or_else(|| Error::InvalidArgument(format!("mode {i} out of range")))?;
        (*k1, *k2) = (k.k1, k.k2);
        Ok(())
    })
}

/// `B(φ)` into `out` (`2 * len` doubles).
///
/// # Safety
///
/// `ctx` is null or a live context; `phi` and `out` are null or valid for `2 * len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oue_vector_field(ctx: *const OueContext, phi: *const f64, len: usize, out: *mut f64) -> OueStatus {
    guard(|| {
        let ctx = &non_null(ctx, "ctx")?.ctx;
        let b = vector_field(ctx, &read_field(ctx, phi, len)?)?;
        write_field(&b, out)
    })
}

/// `div_μ B(φ)` in real coordinates.
///
/// # Safety
///
/// `ctx` is null or a live context; `phi` is null or valid for `2 * len` doubles; `out` is null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn oue_divergence(ctx: *const OueContext, phi: *const f64, len: usize, out: *mut f64) -> OueStatus {
    guard(|| {
        let ctx = &non_null(ctx, "ctx")?.ctx;
        let out = out_ref(out, "out")?;
        *out = divergence(ctx, &read_field(ctx, phi, len)?)?;
        Ok(())
    })
}

/// Draw number `index` of the stream `seed` from the Gaussian measure.
/// Nonzero `real_mode` draws real coefficients only.
///
/// # Safety
///
/// `ctx` is null or a live context; `out` is null or valid for `2 * oue_context_len(ctx)` doubles.
#[no_mangle]
pub unsafe extern "C" fn oue_sample(ctx: *const OueContext, seed: u64, index: u64, real_mode: i32, out: *mut f64) -> OueStatus {
    guard(|| {
        let ctx = &non_null(ctx, "ctx")?.ctx;
        let mp = MeasureParams::new(ctx.gamma(), ctx.params(), ctx.basis().clone(), seed)?.with_real_mode(real_mode != 0);
        write_field(&sample_field(&mp, index), out)
    })
}

/// The Galerkin flow `U_t φ` at tolerance `tol`.
///
/// # Safety
///
/// `ctx` is null or a live context; `phi` and `out` are null or valid for `2 * len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oue_flow(ctx: *const OueContext, phi: *const f64, len: usize, t: f64, tol: f64, out: *mut f64) -> OueStatus {
    guard(|| {
        let ctx = &non_null(ctx, "ctx")?.ctx;
        let traj = integrate(ctx, &read_field(ctx, phi, len)?, t, tol)?;
        write_field(traj.final_state(), out)
    })
}

/// The Radon-Nikodym density `k_t(φ)`.
///
/// # Safety
///
/// `ctx` is null or a live context; `phi` is null or valid for `2 * len` doubles; `out` is null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn oue_density(ctx: *const OueContext, phi: *const f64, len: usize, t: f64, tol: f64, out: *mut f64) -> OueStatus {
    guard(|| {
        let ctx = &non_null(ctx, "ctx")?.ctx;
        let out = out_ref(out, "out")?;
        *out = density_kt(ctx, &read_field(ctx, phi, len)?, t, tol)?;
        Ok(())
    })
}
