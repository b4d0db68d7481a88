//! The Galerkin vector field `B` of the spectral vorticity equation, its
//! gradients and its divergence with respect to the Gaussian measure.
//!
//! Projecting `∂ₜ L^cφ = -(∇⊥φ·∇) L^cφ` on `H_k` gives
//!
//! ```text
//! B_k(φ) = (c / |k|) Σ_{|q|<|p|} (|p| - |q|) A(p, q, k) φ_p φ_q,   k ≠ 0,
//! ```
//!
//! with `p, q` ranging over the basis. The weight `w_k(p,q) = (|p|-|q|) A(p,q,k)`
//! is symmetric in `(p, q)`, so `B_k = (c / 2|k|) φᵀ W_k φ` and `B` is a
//! holomorphic quadratic map.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coeffs::{build_table, GalerkinBasis, InteractionTable};
use crate::error::{Error, Result};
use crate::hermite::{
    apply_ou, grad_field, grad_perp_field, hermite_2d, order_for_degree, quadrature_rule, GaussianParams, MultiIndex,
    SpectralField,
};

/// The constant in front of the interaction sum. With the Rodrigues-derived
/// derivative `d/dx H_n = -√(cn) H_{n-1}` it is `+c`.
pub fn prefactor(c: f64) -> f64 {
    c
}

#[derive(Clone, Copy, Debug)]
struct Term {
    p: u32,
    q: u32,
    w: f64,
}

/// Everything needed to evaluate `B` and its divergence on one basis.
#[derive(Debug)]
pub struct FieldContext {
    basis: Arc<GalerkinBasis>,
    table: Arc<InteractionTable>,
    params: GaussianParams,
    gamma: f64,
    /// Per output mode: the canonical `(p, q, w)` triples.
    terms: Vec<Vec<Term>>,
    /// Per output mode `k`: `(p, w_k(p, k))`, the diagonal of the Jacobian.
    diagonal: Vec<Vec<(u32, f64)>>,
}

impl FieldContext {
    pub fn new(table: Arc<InteractionTable>, params: GaussianParams, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        let basis = table.basis().clone();
        let pos = |m: MultiIndex| basis.position(m).expect("table entry outside its basis") as u32;
        let mut terms = vec![Vec::new(); basis.len()];
        let mut diagonal = vec![Vec::new(); basis.len()];
        for (i, &k) in basis.indices().iter().enumerate() {
            for e in table.for_mode(k) {
                let w = (e.p.order() as f64 - e.q.order() as f64) * e.value;
                terms[i].push(Term { p: pos(e.p), q: pos(e.q), w });
                if e.p == k {
                    diagonal[i].push((pos(e.q), w));
                } else if e.q == k {
                    diagonal[i].push((pos(e.p), w));
                }
            }
            diagonal[i].sort_by_key(|&(p, _)| p);
        }
        Ok(FieldContext { basis, table, params, gamma, terms, diagonal })
    }

    /// Builds the interaction table for an `N` box and wraps it.
    pub fn with_box(max_index: u32, params: GaussianParams, gamma: f64) -> Result<Self> {
        let table = build_table(GalerkinBasis::shared(max_index))?;
        Self::new(Arc::new(table), params, gamma)
    }

    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn table(&self) -> &Arc<InteractionTable> {
        &self.table
    }

    pub fn params(&self) -> GaussianParams {
        self.params
    }

    pub fn c(&self) -> f64 {
        self.params.c()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn check(&self, phi: &SpectralField) -> Result<()> {
        if phi.basis().as_ref() != self.basis.as_ref() {
            return Err(Error::invalid("field basis does not match the context basis"));
        }
        Ok(())
    }

    fn nonzero_mode(&self, k: MultiIndex) -> Result<usize> {
        if k.is_zero() {
            return Err(Error::invalid("B has no (0,0) component"));
        }
        self.basis
            .position(k)
            .ok_or_else(|| Error::invalid(format!("mode {k} outside the basis")))
    }

    fn mode_scale(&self, i: usize) -> f64 {
        prefactor(self.c()) / self.basis.indices()[i].order() as f64
    }

    fn component(&self, i: usize, phi: &[Complex64]) -> Complex64 {
        if i == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut acc = KahanSum::default();
        for t in &self.terms[i] {
            acc.add(t.w * phi[t.p as usize] * phi[t.q as usize]);
        }
        self.mode_scale(i) * acc.total()
    }

    /// `B(φ)` as a raw coefficient vector; the hot path of the integrator.
    pub(crate) fn vector_field_raw(&self, phi: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.component(i, phi);
        }
    }
}

/// Compensated complex summation, fixed order.
#[derive(Default)]
struct KahanSum {
    sum: Complex64,
    comp: Complex64,
}

impl KahanSum {
    fn add(&mut self, x: Complex64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn total(&self) -> Complex64 {
        self.sum
    }
}

/// `B(φ)`, with a zero `(0,0)` component.
pub fn vector_field(ctx: &FieldContext, phi: &SpectralField) -> Result<SpectralField> {
    ctx.check(phi)?;
    let coeffs: Vec<Complex64> = (0..ctx.basis.len())
        .into_par_iter()
        .map(|i| ctx.component(i, phi.coeffs()))
        .collect();
    SpectralField::new(ctx.basis.clone(), coeffs, phi.c())
}

/// `D_{H_j} B_k(φ) = (c/|k|) Σ_q (|j| - |q|) A(j, q, k) φ_q`.
pub fn gradient_entry(ctx: &FieldContext, j: MultiIndex, k: MultiIndex, phi: &SpectralField) -> Result<Complex64> {
    ctx.check(phi)?;
    let i = ctx.nonzero_mode(k)?;
    let jp = ctx
        .basis
        .position(j)
        .ok_or_else(|| Error::invalid(format!("mode {j} outside the basis")))? as u32;
    let mut acc = KahanSum::default();
    for t in &ctx.terms[i] {
        if t.p == jp {
            acc.add(t.w * phi.coeffs()[t.q as usize]);
        } else if t.q == jp {
            acc.add(t.w * phi.coeffs()[t.p as usize]);
        }
    }
    Ok(ctx.mode_scale(i) * acc.total())
}

/// `D_{H_i} D_{H_j} B_k = (c/|k|) (|j| - |i|) A(j, i, k)`, independent of φ.
pub fn second_gradient_entry(ctx: &FieldContext, i: MultiIndex, j: MultiIndex, k: MultiIndex) -> Result<f64> {
    let kpos = ctx.nonzero_mode(k)?;
    for m in [i, j] {
        if !ctx.basis.contains(m) {
            return Err(Error::invalid(format!("mode {m} outside the basis")));
        }
    }
    let a = ctx.table.get(j, i, k);
    Ok(ctx.mode_scale(kpos) * (j.order() as f64 - i.order() as f64) * a)
}

/// The full Jacobian `J[k][j] = D_{H_j} B_k(φ)`, row-major over the basis.
pub fn jacobian(ctx: &FieldContext, phi: &SpectralField) -> Result<Vec<Complex64>> {
    ctx.check(phi)?;
    let d = ctx.basis.len();
    let mut jac = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 1..d {
        let s = ctx.mode_scale(i);
        for t in &ctx.terms[i] {
            jac[i * d + t.p as usize] += s * t.w * phi.coeffs()[t.q as usize];
            jac[i * d + t.q as usize] += s * t.w * phi.coeffs()[t.p as usize];
        }
    }
    Ok(jac)
}

/// Hilbert-Schmidt norm of `∇B(φ)` as an operator on `H^β`:
/// `(Σ_{k,j} |J_kj|² (1+c|k|)^β / (1+c|j|)^β)^{1/2}`.
pub fn gradient_hs_norm(ctx: &FieldContext, phi: &SpectralField, beta: f64) -> Result<f64> {
    let jac = jacobian(ctx, phi)?;
    let d = ctx.basis.len();
    let c = ctx.c();
    let weight = |m: MultiIndex| (1.0 + c * m.order() as f64).powf(beta);
    let idx = ctx.basis.indices();
    let mut total = 0.0;
    for (kk, &k) in idx.iter().enumerate() {
        for (jj, &j) in idx.iter().enumerate() {
            total += jac[kk * d + jj].norm_sqr() * weight(k) / weight(j);
        }
    }
    Ok(total.sqrt())
}

/// The two pieces of the measure divergence written on complex coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceParts {
    /// `Σ_k D_{H_k} B_k(φ)`.
    pub linear: Complex64,
    /// `-γ Σ_k (1+c|k|)² B_k(φ) conj(φ_k)`.
    pub cubic: Complex64,
}

impl DivergenceParts {
    /// The sum of the two complex pieces, as the complex-coordinate formula
    /// reads.
    pub fn complex_form(&self) -> Complex64 {
        self.linear + self.cubic
    }

    /// The divergence in real coordinates. Each complex coordinate carries two
    /// real ones and `B` is holomorphic, so the Lebesgue part is `2 Re(linear)`.
    pub fn real_form(&self) -> f64 {
        2.0 * self.linear.re + self.cubic.re
    }
}

pub fn divergence_parts(ctx: &FieldContext, phi: &SpectralField) -> Result<DivergenceParts> {
    ctx.check(phi)?;
    Ok(divergence_parts_raw(ctx, phi.coeffs()))
}

pub(crate) fn divergence_parts_raw(ctx: &FieldContext, phi: &[Complex64]) -> DivergenceParts {
    let c = ctx.c();
    let mut linear = KahanSum::default();
    let mut cubic = KahanSum::default();
    for (i, &k) in ctx.basis.indices().iter().enumerate().skip(1) {
        let s = ctx.mode_scale(i);
        let mut diag = KahanSum::default();
        for &(p, w) in &ctx.diagonal[i] {
            diag.add(w * phi[p as usize]);
        }
        linear.add(s * diag.total());
        let weight = (1.0 + c * k.order() as f64).powi(2);
        cubic.add(-ctx.gamma * weight * ctx.component(i, phi) * phi[i].conj());
    }
    DivergenceParts { linear: linear.total(), cubic: cubic.total() }
}

/// `div_μ B(φ)` in real coordinates: the Lebesgue divergence plus `⟨B, ∇ log η⟩`.
pub fn divergence(ctx: &FieldContext, phi: &SpectralField) -> Result<f64> {
    Ok(divergence_parts(ctx, phi)?.real_form())
}

pub(crate) fn divergence_raw(ctx: &FieldContext, phi: &[Complex64]) -> f64 {
    divergence_parts_raw(ctx, phi).real_form()
}

/// Quadrature oracle for `B_k`: projects `-(∇⊥φ·∇) L^cφ` on `H_k` under the
/// normalized weight and divides by `-c|k|`. Uses no interaction coefficients.
pub fn oracle_vector_field(phi: &SpectralField, k: MultiIndex) -> Result<Complex64> {
    if k.is_zero() {
        return Err(Error::invalid("B has no (0,0) component"));
    }
    let c = phi.c();
    let n = phi.basis().max_index() as usize;
    let params = GaussianParams::normalized(c)?;
    let degree = 2 * n + k.k1.max(k.k2) as usize;
    let rule = quadrature_rule(order_for_degree(degree), params)?;
    let lphi = apply_ou(phi);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in rule.tensor_points() {
        let u = grad_perp_field(phi, x);
        let g = grad_field(&lphi, x);
        let advect = -(u[0] * g[0] + u[1] * g[1]);
        acc += w * advect * hermite_2d(k, c, x);
    }
    Ok(acc / (-c * k.order() as f64))
}
