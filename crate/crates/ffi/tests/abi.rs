use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use num_complex::Complex64;
use oue::*;
use oue_core::field::{vector_field, FieldContext};
use oue_core::hermite::{GaussianParams, SpectralField};

struct Ctx(*mut OueContext);

impl Ctx {
    fn new(n: u32, c: f64, gamma: f64) -> Self {
        let mut p = ptr::null_mut();
        assert_eq!(unsafe { oue_context_new(n, c, gamma, &mut p) }, OueStatus::Ok);
        Ctx(p)
    }
}

impl Drop for Ctx {
    fn drop(&mut self) {
        unsafe { oue_context_free(self.0) };
    }
}

fn last_error() -> String {
    let p = oue_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_functions() {
    unsafe {
        let mut h = 0.0;
        // H_2^c(x) = (c x² - 1)/√2
        assert_eq!(oue_hermite(2, 0.5, 1.3, &mut h), OueStatus::Ok);
        assert!((h - (0.5 * 1.69 - 1.0) / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(oue_hermite(2, 1.5, 1.3, &mut h), OueStatus::InvalidArgument);
        assert!(last_error().contains("c must"));
        assert_eq!(oue_hermite(2, 0.5, 1.3, ptr::null_mut()), OueStatus::NullPointer);
        assert_eq!(oue_theta(2, 3, 1), oue_core::coeffs::theta(2, 3, 1));
        assert_eq!(oue_interaction(1, 2, 2, 1, 1, 1), -oue_interaction(2, 1, 1, 2, 1, 1));
        let v = CStr::from_ptr(oue_version());
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn context_round_trip_matches_core() {
    unsafe {
        let ctx = Ctx::new(2, 0.5, 1.0);
        let len = oue_context_len(ctx.0);
        assert_eq!(len, 9);
        let (mut k1, mut k2) = (0, 0);
        assert_eq!(oue_context_mode(ctx.0, len - 1, &mut k1, &mut k2), OueStatus::Ok);
        assert!(k1 <= 2 && k2 <= 2);
        assert_eq!(oue_context_mode(ctx.0, len, &mut k1, &mut k2), OueStatus::InvalidArgument);

        let mut phi = vec![0.0; 2 * len];
        assert_eq!(oue_sample(ctx.0, 3, 0, 0, phi.as_mut_ptr()), OueStatus::Ok);
        let mut b = vec![0.0; 2 * len];
        assert_eq!(oue_vector_field(ctx.0, phi.as_ptr(), len, b.as_mut_ptr()), OueStatus::Ok);

        let core = FieldContext::with_box(2, GaussianParams::normalized(0.5).unwrap(), 1.0).unwrap();
        let field = SpectralField::new(core.basis().clone(), phi.chunks(2).map(|z| Complex64::new(z[0], z[1])).collect(), 0.5).unwrap();
        let expect = vector_field(&core, &field).unwrap();
        for (got, want) in b.chunks(2).zip(expect.coeffs()) {
            assert_eq!((got[0], got[1]), (want.re, want.im));
        }

        let mut div = f64::NAN;
        assert_eq!(oue_divergence(ctx.0, phi.as_ptr(), len, &mut div), OueStatus::Ok);
        assert!(div.is_finite());
        let mut k = f64::NAN;
        assert_eq!(oue_density(ctx.0, phi.as_ptr(), len, 0.0, 1e-8, &mut k), OueStatus::Ok);
        assert_eq!(k, 1.0);

        // forward then backward returns the start
        let (mut fwd, mut back) = (vec![0.0; 2 * len], vec![0.0; 2 * len]);
        assert_eq!(oue_flow(ctx.0, phi.as_ptr(), len, 0.1, 1e-10, fwd.as_mut_ptr()), OueStatus::Ok);
        assert_eq!(oue_flow(ctx.0, fwd.as_ptr(), len, -0.1, 1e-10, back.as_mut_ptr()), OueStatus::Ok);
        let err = phi.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(oue_context_new(2, 0.5, -1.0, &mut p), OueStatus::InvalidArgument);
        assert!(p.is_null());
        assert!(last_error().contains("gamma"));
        assert_eq!(oue_context_new(0, 0.5, 1.0, &mut p), OueStatus::InvalidArgument);

        let ctx = Ctx::new(1, 0.5, 1.0);
        let phi = [0.0; 8];
        let mut out = [0.0; 8];
        assert_eq!(oue_vector_field(ctx.0, phi.as_ptr(), 3, out.as_mut_ptr()), OueStatus::InvalidArgument);
        assert_eq!(oue_vector_field(ctx.0, ptr::null(), 4, out.as_mut_ptr()), OueStatus::NullPointer);
        assert_eq!(oue_vector_field(ptr::null(), phi.as_ptr(), 4, out.as_mut_ptr()), OueStatus::NullPointer);
        assert_eq!(oue_context_len(ptr::null()), 0);
        oue_context_free(ptr::null_mut());

        // a success clears the message
        assert_eq!(oue_vector_field(ctx.0, phi.as_ptr(), 4, out.as_mut_ptr()), OueStatus::Ok);
        assert!(oue_last_error().is_null());
    }
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("liboue.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("smoke.c");
    let exe = tmp.join("smoke");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "oue.h"
int main(void) {
    OueContext *ctx = NULL;
    if (oue_context_new(2, 0.5, 1.0, &ctx) != OUE_STATUS_OK) return 1;
    size_t len = oue_context_len(ctx);
    double phi[18], b[18], div;
    if (oue_sample(ctx, 1, 0, 0, phi) != OUE_STATUS_OK) return 2;
    if (oue_vector_field(ctx, phi, len, b) != OUE_STATUS_OK) return 3;
    if (oue_divergence(ctx, phi, len, &div) != OUE_STATUS_OK) return 4;
    if (oue_vector_field(ctx, phi, len - 1, b) != OUE_STATUS_INVALID_ARGUMENT) return 5;
    if (oue_last_error() == NULL) return 6;
    printf("%zu %.3f\n", len, oue_theta(2, 2, 1));
    oue_context_free(ctx);
    return 0;
}
"#,
    )
    .unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("cc runs");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "9 2.828\n");
}
