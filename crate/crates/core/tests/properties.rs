use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use oue_core::coeffs::{admissible, interaction, theta, GalerkinBasis};
use oue_core::field::{divergence, vector_field, FieldContext};
use oue_core::hermite::{apply_ou, hermite_1d, sobolev_norm, GaussianParams, MultiIndex, SpectralField};
use oue_core::kernel::{modulus, osgood_integral, term_bound};

fn mode() -> impl Strategy<Value = MultiIndex> {
    (0u32..7, 0u32..7).prop_map(|(a, b)| MultiIndex::new(a, b))
}

fn field(basis: Arc<GalerkinBasis>, c: f64) -> impl Strategy<Value = SpectralField> {
    let n = basis.len();
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(move |v| SpectralField::new(basis.clone(), v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(), c).unwrap())
}

proptest! {
    #[test]
    fn theta_is_symmetric(n in 0i64..30, m in 0i64..30, r in -2i64..32) {
        prop_assert_eq!(theta(n, m, r), theta(m, n, r));
        if r < 0 || r > n.min(m) {
            prop_assert_eq!(theta(n, m, r), 0.0);
        } else {
            prop_assert!(theta(n, m, r) >= 1.0);
        }
    }

    #[test]
    fn product_formula(n in 0usize..9, m in 0usize..9, c in 0.05f64..0.95, x in -4.0f64..4.0) {
        let lhs = hermite_1d(n, c, x) * hermite_1d(m, c, x);
        let mut rhs = 0.0;
        let mut scale = 0.0;
        for r in 0..=n.min(m) {
            let term = theta(n as i64, m as i64, r as i64) * hermite_1d(n + m - 2 * r, c, x);
            rhs += term;
            scale += term.abs();
        }
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn derivative_lowers_degree(n in 1usize..12, c in 0.05f64..0.95, x in -3.0f64..3.0) {
        let h = 1e-5;
        let fd = (hermite_1d(n, c, x + h) - hermite_1d(n, c, x - h)) / (2.0 * h);
        let exact = -(c * n as f64).sqrt() * hermite_1d(n - 1, c, x);
        prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()));
    }

    #[test]
    fn interaction_is_antisymmetric(p in mode(), q in mode(), k in mode()) {
        prop_assert_eq!(interaction(p, q, k), -interaction(q, p, k));
        prop_assert_eq!(interaction(p, p, k), 0.0);
        if !admissible(p, q, k) {
            prop_assert_eq!(interaction(p, q, k), 0.0);
        }
    }

    #[test]
    fn ou_generator_is_linear(a in field(GalerkinBasis::shared(3), 0.4), b in field(GalerkinBasis::shared(3), 0.4), s in -2.0f64..2.0) {
        let lhs = apply_ou(&a.add_scaled(Complex64::new(s, 0.0), &b).unwrap());
        let rhs = apply_ou(&a).add_scaled(Complex64::new(s, 0.0), &apply_ou(&b)).unwrap();
        for (x, y) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
        prop_assert_eq!(apply_ou(&a).coeff(MultiIndex::ZERO), Some(Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn sobolev_norm_is_homogeneous(a in field(GalerkinBasis::shared(3), 0.4), s in -3.0f64..3.0, beta in -2.0f64..2.0) {
        let lhs = sobolev_norm(&a.scaled(Complex64::new(s, 0.0)), beta);
        prop_assert!((lhs - s.abs() * sobolev_norm(&a, beta)).abs() <= 1e-12 * (1.0 + lhs));
    }

    #[test]
    fn vector_field_is_quadratic(a in field(GalerkinBasis::shared(2), 0.5), s in -2.0f64..2.0) {
        let ctx = FieldContext::with_box(2, GaussianParams::normalized(0.5).unwrap(), 1.0).unwrap();
        let scaled = vector_field(&ctx, &a.scaled(Complex64::new(s, 0.0))).unwrap();
        let base = vector_field(&ctx, &a).unwrap();
        for (x, y) in scaled.coeffs().iter().zip(base.coeffs()) {
            prop_assert!((x - s * s * y).norm() <= 1e-10 * (1.0 + x.norm()));
        }
        prop_assert!(divergence(&ctx, &a).unwrap().is_finite());
    }

    #[test]
    fn modulus_is_increasing_and_concave(r in 1e-12f64..0.99, f in 1.001f64..1.5) {
        let s = (r * f).min(0.999);
        prop_assert!(modulus(s) >= modulus(r));
        // λ(r)/r is nonincreasing
        prop_assert!(modulus(s) / s <= modulus(r) / r);
        prop_assert!(modulus(r) >= r);
    }

    #[test]
    fn osgood_integral_matches_log_log(e in 0.5f64..300.0) {
        let delta = 10f64.powf(-e);
        let exact = (1.0 - delta.ln()).ln();
        prop_assert!((osgood_integral(delta).unwrap() - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn term_bounds_decay_geometrically(n in 1u32..10, c in 0.01f64..0.99) {
        let ratio = term_bound(n + 1, c).unwrap() / term_bound(n, c).unwrap();
        prop_assert!((ratio - c / (2.0 * std::f64::consts::PI)).abs() <= 1e-14);
    }
}
