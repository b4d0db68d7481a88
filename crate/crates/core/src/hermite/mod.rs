//! Hermite polynomials `H_k^c` orthonormal under the Gaussian weight
//! `e^{-c|x|²/2}`, the Hermite functions `h_k` of the harmonic oscillator,
//! and spectral fields expanded on the polynomial basis.
//!
//! All constants are taken from the Rodrigues-type definition
//!
//! ```text
//! H_n^c(x) = (c^n n!)^{-1/2} e^{c x²/2} dⁿ/dxⁿ e^{-c x²/2} = (-1)ⁿ He_n(√c x) / √(n!)
//! ```
//!
//! which gives `d/dx H_n^c = -√(c n) H_{n-1}^c` and the three-term recurrence
//! `√(n+1) H_{n+1}^c + √c x H_n^c + √n H_{n-1}^c = 0`. Both differ from the
//! textbook constants quoted for `c = 1` physicists' conventions; the
//! quadrature tests in this module pin them down.

mod quadrature;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::GalerkinBasis;
use crate::error::{Error, Result};

pub use quadrature::{order_for_degree, quadrature_rule, QuadratureRule};

/// A 2D Hermite mode `k = (k1, k2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub k1: u32,
    pub k2: u32,
}

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex { k1: 0, k2: 0 };

    pub const fn new(k1: u32, k2: u32) -> Self {
        MultiIndex { k1, k2 }
    }

    /// `|k| = k1 + k2`, the weight in the eigenvalue `-c|k|`.
    pub const fn order(self) -> u32 {
        self.k1 + self.k2
    }

    pub const fn is_zero(self) -> bool {
        self.k1 == 0 && self.k2 == 0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k1, self.k2)
    }
}

impl From<(u32, u32)> for MultiIndex {
    fn from((k1, k2): (u32, u32)) -> Self {
        MultiIndex { k1, k2 }
    }
}

/// Which constant multiplies the Gaussian weight.
///
/// `Normalized` uses the probability density `(c/2π) e^{-c|x|²/2}`, under which
/// `{H_k^c}` is orthonormal. `Unnormalized` keeps `(1/2π) e^{-c|x|²/2}`, whose total
/// mass is `1/c`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Unnormalized,
    #[default]
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    c: f64,
    normalization: Normalization,
}

impl GaussianParams {
    pub fn new(c: f64, normalization: Normalization) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 || c >= 1.0 {
            return Err(Error::invalid(format!("c must lie in (0, 1), got {c}")));
        }
        Ok(GaussianParams { c, normalization })
    }

    pub fn normalized(c: f64) -> Result<Self> {
        Self::new(c, Normalization::Normalized)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Mass of the 1D weight, `∫ w(x) dx`.
    pub fn mass_1d(&self) -> f64 {
        match self.normalization {
            Normalization::Normalized => 1.0,
            Normalization::Unnormalized => 1.0 / self.c.sqrt(),
        }
    }
}

/// `H_n^c(x)` by forward recurrence.
pub fn hermite_1d(n: usize, c: f64, x: f64) -> f64 {
    let sc = c.sqrt();
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..n {
        let jf = j as f64;
        let next = -(sc * x * cur + jf.sqrt() * prev) / (jf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `[H_0^c(x), ..., H_nmax^c(x)]`.
pub fn hermite_1d_all(nmax: usize, c: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    fill_hermite_1d(c, x, nmax + 1, &mut out);
    out
}

fn fill_hermite_1d(c: f64, x: f64, len: usize, out: &mut Vec<f64>) {
    out.clear();
    if len == 0 {
        return;
    }
    let sc = c.sqrt();
    out.push(1.0);
    if len > 1 {
        out.push(-sc * x);
    }
    for j in 1..len.saturating_sub(1) {
        let jf = j as f64;
        let next = -(sc * x * out[j] + jf.sqrt() * out[j - 1]) / (jf + 1.0).sqrt();
        out.push(next);
    }
}

/// `dᵐ/dxᵐ H_n^c(x) = (-√c)ᵐ √(n!/(n-m)!) H_{n-m}^c(x)`, zero for `m > n`.
pub fn hermite_1d_derivative(n: usize, m: usize, c: f64, x: f64) -> f64 {
    if m > n {
        return 0.0;
    }
    derivative_factor(n, m, c) * hermite_1d(n - m, c, x)
}

fn derivative_factor(n: usize, m: usize, c: f64) -> f64 {
    let falling: f64 = (n - m + 1..=n).map(|j| j as f64).product();
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * c.powf(m as f64 / 2.0) * falling.sqrt()
}

pub fn hermite_2d(k: MultiIndex, c: f64, x: [f64; 2]) -> f64 {
    hermite_1d(k.k1 as usize, c, x[0]) * hermite_1d(k.k2 as usize, c, x[1])
}

/// The L²(ℝ)-normalized Hermite function `h_n(x)`, positive leading coefficient.
pub fn hermite_function_1d(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for j in 0..n {
        let jf = j as f64;
        let next = ((2.0 / (jf + 1.0)).sqrt() * x * cur) - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `h_k(x) = h_{k1}(x1) h_{k2}(x2)`, eigenfunction of `-Δ + |x|²` with
/// eigenvalue `2(|k| + 1)`.
pub fn hermite_function(k: MultiIndex, x: [f64; 2]) -> f64 {
    hermite_function_1d(k.k1 as usize, x[0]) * hermite_function_1d(k.k2 as usize, x[1])
}

/// `λ_k = √(2(|k|+1))`, square root of the harmonic oscillator eigenvalue.
pub fn oscillator_frequency(k: MultiIndex) -> f64 {
    (2.0 * (k.order() as f64 + 1.0)).sqrt()
}

/// A stream function `φ = Σ φ_k H_k^c` on a Galerkin basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    basis: Arc<GalerkinBasis>,
    coeffs: Vec<Complex64>,
    c: f64,
}

impl SpectralField {
    pub fn new(basis: Arc<GalerkinBasis>, coeffs: Vec<Complex64>, c: f64) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::invalid(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                basis.len()
            )));
        }
        GaussianParams::normalized(c)?;
        Ok(SpectralField { basis, coeffs, c })
    }

    pub fn zeros(basis: Arc<GalerkinBasis>, c: f64) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); basis.len()];
        SpectralField { basis, coeffs, c }
    }

    /// A field with a single nonzero coefficient. Panics if `k` is not in the basis.
    pub fn single_mode(basis: Arc<GalerkinBasis>, k: MultiIndex, value: Complex64, c: f64) -> Self {
        let mut f = Self::zeros(basis, c);
        *f.coeff_mut(k).expect("mode outside the basis") = value;
        f
    }

    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn coeff(&self, k: MultiIndex) -> Option<Complex64> {
        self.basis.position(k).map(|i| self.coeffs[i])
    }

    pub fn coeff_mut(&mut self, k: MultiIndex) -> Option<&mut Complex64> {
        let i = self.basis.position(k)?;
        Some(&mut self.coeffs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, Complex64)> + '_ {
        self.basis.indices().iter().copied().zip(self.coeffs.iter().copied())
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|z| *z *= a);
        out
    }

    /// `self + a·other`. Both fields must share a basis.
    pub fn add_scaled(&self, a: Complex64, other: &SpectralField) -> Result<Self> {
        self.check_same_basis(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + a * y).collect();
        Ok(SpectralField { basis: self.basis.clone(), coeffs, c: self.c })
    }

    pub fn check_same_basis(&self, other: &SpectralField) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::invalid("fields live on different bases"));
        }
        Ok(())
    }

    /// Whether every coefficient is real, i.e. the field is a real function.
    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|z| z.im == 0.0)
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Per-axis Hermite tables `H_0..H_N` at a point.
    fn axis_tables(&self, x: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
        let n = self.basis.max_index() as usize;
        (hermite_1d_all(n, self.c, x[0]), hermite_1d_all(n, self.c, x[1]))
    }

    /// `Σ φ_k term(k)`.
    fn contract(&self, mut term: impl FnMut(MultiIndex) -> f64) -> Complex64 {
        self.iter().map(|(k, z)| z * term(k)).sum()
    }
}

/// `L^c` in coefficient space: multiplies each `φ_k` by `-c|k|`.
pub fn apply_ou(field: &SpectralField) -> SpectralField {
    let c = field.c;
    let mut out = field.clone();
    for (k, z) in field.basis.indices().iter().zip(out.coeffs.iter_mut()) {
        *z *= -c * k.order() as f64;
    }
    out
}

/// `‖φ‖_β = (Σ (1 + c|k|)^β |φ_k|²)^{1/2}`.
pub fn sobolev_norm(field: &SpectralField, beta: f64) -> f64 {
    let c = field.c;
    field
        .iter()
        .map(|(k, z)| (1.0 + c * k.order() as f64).powf(beta) * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Pointwise value `φ(x)`.
pub fn eval_field(field: &SpectralField, x: [f64; 2]) -> Complex64 {
    let (h1, h2) = field.axis_tables(x);
    field.contract(|k| h1[k.k1 as usize] * h2[k.k2 as usize])
}

/// `∇φ(x)` using the derived differentiation rule.
pub fn grad_field(field: &SpectralField, x: [f64; 2]) -> [Complex64; 2] {
    let (h1, h2) = field.axis_tables(x);
    let sc = field.c.sqrt();
    let d = |h: &[f64], n: u32| -> f64 {
        if n == 0 {
            0.0
        } else {
            -(sc * (n as f64).sqrt()) * h[n as usize - 1]
        }
    };
    let dx1 = field.contract(|k| d(&h1, k.k1) * h2[k.k2 as usize]);
    let dx2 = field.contract(|k| h1[k.k1 as usize] * d(&h2, k.k2));
    [dx1, dx2]
}

/// The velocity `∇⊥φ = (-∂₂φ, ∂₁φ)`.
pub fn grad_perp_field(field: &SpectralField, x: [f64; 2]) -> [Complex64; 2] {
    let [d1, d2] = grad_field(field, x);
    [-d2, d1]
}

/// Real velocity of a real stream function, skipping the complex bookkeeping.
pub(crate) fn grad_perp_real(field: &SpectralField, x: [f64; 2]) -> [f64; 2] {
    let v = grad_perp_field(field, x);
    [v[0].re, v[1].re]
}

/// `Δφ(x)`, composing the differentiation rule twice.
pub fn laplacian_field(field: &SpectralField, x: [f64; 2]) -> Complex64 {
    let (h1, h2) = field.axis_tables(x);
    let c = field.c;
    let dd = |h: &[f64], n: u32| -> f64 {
        if n < 2 {
            0.0
        } else {
            let nf = n as f64;
            c * (nf * (nf - 1.0)).sqrt() * h[n as usize - 2]
        }
    };
    field.contract(|k| dd(&h1, k.k1) * h2[k.k2 as usize] + h1[k.k1 as usize] * dd(&h2, k.k2))
}
