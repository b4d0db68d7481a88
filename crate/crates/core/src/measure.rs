//! The finite-dimensional Gaussian measure `μⁿ` on spectral coefficients and
//! the Monte Carlo diagnostics built on it.
//!
//! Under `μⁿ` the coefficients are independent with
//! `φ_k = (ξ_k + i η_k) / (1 + c|k|)` and `ξ_k, η_k ~ N(0, 1/γ)`, so
//! `E|φ_k|² = 2 / (γ (1 + c|k|)²)`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::GalerkinBasis;
use crate::error::{Error, Result};
use crate::field::{divergence, gradient_hs_norm, vector_field, FieldContext};
use crate::hermite::{eval_field, hermite_function_1d, oscillator_frequency, sobolev_norm, GaussianParams, MultiIndex, SpectralField};
use crate::stats::{linear_fit, LinearFit, McEstimate};

#[derive(Clone, Debug)]
pub struct MeasureParams {
    gamma: f64,
    params: GaussianParams,
    basis: Arc<GalerkinBasis>,
    seed: u64,
    real_mode: bool,
}

impl MeasureParams {
    pub fn new(gamma: f64, params: GaussianParams, basis: Arc<GalerkinBasis>, seed: u64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(MeasureParams { gamma, params, basis, seed, real_mode: false })
    }

    /// Draw only the real parts `ξ_k`, giving real-valued stream functions.
    /// Moments then follow `E|φ_k|² = 1/(γ(1+c|k|)²)` instead.
    pub fn with_real_mode(mut self, real: bool) -> Self {
        self.real_mode = real;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn params(&self) -> GaussianParams {
        self.params
    }

    pub fn c(&self) -> f64 {
        self.params.c()
    }

    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn real_mode(&self) -> bool {
        self.real_mode
    }
}

/// The stream for `(seed, sample, k)`: the ChaCha key is the concatenation of
/// the three, so any coefficient can be regenerated in isolation.
fn mode_rng(seed: u64, sample: u64, k: MultiIndex) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sample.to_le_bytes());
    key[16..20].copy_from_slice(&k.k1.to_le_bytes());
    key[20..24].copy_from_slice(&k.k2.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Coefficient `φ_k` of sample number `sample`.
pub fn sample_mode(mp: &MeasureParams, k: MultiIndex, sample: u64) -> Complex64 {
    let mut rng = mode_rng(mp.seed, sample, k);
    let sd = 1.0 / mp.gamma.sqrt();
    let xi: f64 = StandardNormal.sample(&mut rng);
    let eta: f64 = StandardNormal.sample(&mut rng);
    let eta = if mp.real_mode { 0.0 } else { eta };
    Complex64::new(sd * xi, sd * eta) / (1.0 + mp.c() * k.order() as f64)
}

pub fn sample_field(mp: &MeasureParams, sample: u64) -> SpectralField {
    let coeffs = mp.basis.indices().iter().map(|&k| sample_mode(mp, k, sample)).collect();
    SpectralField::new(mp.basis.clone(), coeffs, mp.c()).expect("sampler produces one coefficient per mode")
}

/// A reproducible set of samples: sample `i` of the batch is
/// `sample_field(mp, first_index + i)`.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub fields: Vec<SpectralField>,
    pub seed: u64,
    pub first_index: u64,
}

pub fn sample(mp: &MeasureParams, count: usize) -> Result<SampleBatch> {
    sample_range(mp, 0, count)
}

pub fn sample_range(mp: &MeasureParams, first_index: u64, count: usize) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let fields = (0..count as u64)
        .into_par_iter()
        .map(|i| sample_field(mp, first_index + i))
        .collect();
    Ok(SampleBatch { fields, seed: mp.seed, first_index })
}

/// One row per sample, columns `re_k1_k2, im_k1_k2` per mode.
pub fn write_samples_csv(batch: &SampleBatch, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let Some(first) = batch.fields.first() else {
        w.flush()?;
        return Ok(());
    };
    let header: Vec<String> = first
        .basis()
        .indices()
        .iter()
        .flat_map(|k| [format!("re_{}_{}", k.k1, k.k2), format!("im_{}_{}", k.k1, k.k2)])
        .collect();
    w.write_record(&header)?;
    for f in &batch.fields {
        w.write_record(f.coeffs().iter().flat_map(|z| [z.re.to_string(), z.im.to_string()]))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub estimate: f64,
    pub exact: f64,
    pub standard_error: f64,
}

impl MomentReport {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.exact).abs() / self.standard_error
    }
}

/// `E|φ_k|^{2r} = 2^r r! / (γ^r (1+c|k|)^{2r})`.
pub fn exact_moment(gamma: f64, c: f64, k: MultiIndex, r: u32) -> f64 {
    let fact: f64 = (1..=r).map(f64::from).product();
    2f64.powi(r as i32) * fact / (gamma.powi(r as i32) * (1.0 + c * k.order() as f64).powi(2 * r as i32))
}

pub fn moment_check(mp: &MeasureParams, k: MultiIndex, r: u32, m: usize) -> Result<MomentReport> {
    if r < 1 {
        return Err(Error::invalid("moment order r must be at least 1"));
    }
    if m < 100 {
        return Err(Error::invalid(format!("need at least 100 samples, got {m}")));
    }
    let values: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|i| sample_mode(mp, k, i).norm_sqr().powi(r as i32))
        .collect();
    let est = McEstimate::from_samples(values);
    Ok(MomentReport { estimate: est.mean, exact: exact_moment(mp.gamma, mp.c(), k, r), standard_error: est.se })
}

/// `E‖φ‖²_{-ε}` against `(2/γ) Σ_k (1+c|k|)^{-2-ε}`.
pub fn sobolev_moment_check(mp: &MeasureParams, epsilon: f64, m: usize) -> Result<MomentReport> {
    let batch = sample(mp, m)?;
    let est = McEstimate::from_samples(batch.fields.iter().map(|f| sobolev_norm(f, -epsilon).powi(2)));
    let c = mp.c();
    let exact = (2.0 / mp.gamma)
        * mp.basis.indices().iter().map(|k| (1.0 + c * k.order() as f64).powf(-2.0 - epsilon)).sum::<f64>();
    Ok(MomentReport { estimate: est.mean, exact, standard_error: est.se })
}

/// `(∫_{|x|<R} |φ|^p dx)^{1/p}` on a polar grid, with the value on the doubled
/// grid kept for a convergence check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpLocNorm {
    pub value: f64,
    pub refined: f64,
    /// Set when `p` lies outside the open interval `(2, 10/3)`.
    pub warning: Option<String>,
}

pub const LP_GRID: usize = 256;

pub fn lp_loc_norm(field: &SpectralField, p: f64, radius: f64) -> Result<LpLocNorm> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::invalid(format!("p must be at least 1, got {p}")));
    }
    let warning = (p <= 2.0 || p >= 10.0 / 3.0).then(|| format!("p = {p} lies outside (2, 10/3)"));
    let value = polar_lp(field, p, radius, LP_GRID);
    let refined = polar_lp(field, p, radius, 2 * LP_GRID);
    Ok(LpLocNorm { value, refined, warning })
}

fn polar_lp(field: &SpectralField, p: f64, radius: f64, n: usize) -> f64 {
    let radial = GaussLegendre::new(NonZeroUsize::new(n).expect("grid size is positive"));
    let dtheta = 2.0 * PI / n as f64;
    let integral: f64 = radial
        .as_node_weight_pairs()
        .par_iter()
        .map(|&(t, w)| {
            let r = 0.5 * radius * (t + 1.0);
            let ring: f64 = (0..n)
                .map(|j| {
                    let th = j as f64 * dtheta;
                    eval_field(field, [r * th.cos(), r * th.sin()]).norm().powf(p)
                })
                .sum();
            0.5 * radius * w * r * ring * dtheta
        })
        .sum();
    integral.powf(1.0 / p)
}

/// `∫_ℝ |h_m(x)|^p dx` by composite Gauss-Legendre. The grid is doubled once
/// and a relative disagreement above `1e-4` is an error.
pub fn hermite_function_lp_integral(m: usize, p: f64) -> Result<f64> {
    let rule = GaussLegendre::new(NonZeroUsize::new(20).expect("nonzero"));
    // Past the turning point √(2m+1) the function decays like a Gaussian.
    let half_width = (2.0 * m as f64 + 1.0).sqrt() + 12.0;
    let composite = |panels: usize| -> f64 {
        let h = 2.0 * half_width / panels as f64;
        (0..panels)
            .map(|i| {
                let a = -half_width + i as f64 * h;
                rule.integrate(a, a + h, |x| hermite_function_1d(m, x).abs().powf(p))
            })
            .sum()
    };
    let panels = 8 * (m + 4);
    let coarse = composite(panels);
    let fine = composite(2 * panels);
    let rel = (coarse - fine).abs() / fine.abs();
    if rel > 1e-4 {
        return Err(Error::Resolution(format!(
            "L^{p} integral of h_{m}: grid doubling changed the value by {rel:.3e}"
        )));
    }
    Ok(fine)
}

/// Fitted decay of Hermite function norms on the diagonal `n = (m, m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveReport {
    pub p: f64,
    pub indices: Vec<MultiIndex>,
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: LinearFit,
    /// `(θ - 1)/6` with `1/p = θ/2 + (1-θ)·3/10`.
    pub theoretical_slope: f64,
}

pub fn interpolation_theta(p: f64) -> f64 {
    (1.0 / p - 0.3) / 0.2
}

fn diagonal_ladder(max_index: u32) -> Result<Vec<usize>> {
    if max_index < 10 {
        return Err(Error::invalid(format!("max_index must be at least 10, got {max_index}")));
    }
    Ok((1..=(max_index / 2) as usize).collect())
}

fn fit_report(p: f64, ms: &[usize], norms: Vec<f64>, theoretical_slope: f64) -> Result<DispersiveReport> {
    let indices: Vec<MultiIndex> = ms.iter().map(|&m| MultiIndex::new(m as u32, m as u32)).collect();
    let lambdas: Vec<f64> = indices.iter().map(|&n| oscillator_frequency(n)).collect();
    let lx: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&lx, &ly).ok_or_else(|| Error::invalid("too few indices to fit a slope"))?;
    Ok(DispersiveReport { p, indices, lambdas, norms, fit, theoretical_slope })
}

/// Slope of `log ‖h_n‖_{L^p(ℝ²)}` against `log λ_n` for diagonal `n` with
/// `|n| ≤ max_index`. On the diagonal `‖h_n‖_{L^p(ℝ²)} = ‖h_m‖²_{L^p(ℝ)}`.
pub fn dispersive_exponent(p: f64, max_index: u32) -> Result<DispersiveReport> {
    if !(2.0..=10.0 / 3.0 + 1e-12).contains(&p) {
        return Err(Error::invalid(format!("p must lie in [2, 10/3], got {p}")));
    }
    let ms = diagonal_ladder(max_index)?;
    let norms = ms
        .par_iter()
        .map(|&m| hermite_function_lp_integral(m, p).map(|v| v.powf(2.0 / p)))
        .collect::<Result<Vec<_>>>()?;
    fit_report(p, &ms, norms, (interpolation_theta(p) - 1.0) / 6.0)
}

/// Slope of `log ‖h_n h_n‖_{L^{5/3}(ℝ²)}` against `log λ_n`; the bound is `-1/3`.
pub fn dispersive_product_exponent(max_index: u32) -> Result<DispersiveReport> {
    let ms = diagonal_ladder(max_index)?;
    let norms = ms
        .par_iter()
        .map(|&m| hermite_function_lp_integral(m, 10.0 / 3.0).map(|v| v.powf(6.0 / 5.0)))
        .collect::<Result<Vec<_>>>()?;
    fit_report(5.0 / 3.0, &ms, norms, -1.0 / 3.0)
}

/// Estimates of `E exp(λ|div B|)` and `E exp(λ‖∇B‖_HS)`, with running values
/// on growing prefixes of the sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentReport {
    pub lambda: f64,
    pub divergence: Option<McEstimate>,
    pub gradient: Option<McEstimate>,
    /// `(sample size, div estimate, gradient estimate)` on prefixes M/4, M/2, M.
    pub prefixes: Vec<(usize, f64, f64)>,
    /// Set when some `exp` overflowed.
    pub diverged: Option<String>,
}

/// The Sobolev exponent used for the Hilbert-Schmidt norm of `∇B`.
pub const HS_BETA: f64 = 2.0;

pub fn exponential_moment_check(ctx: &FieldContext, mp: &MeasureParams, lambda: f64, m: usize) -> Result<ExpMomentReport> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    if m == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if mp.basis().as_ref() != ctx.basis().as_ref() {
        return Err(Error::invalid("measure and field context use different bases"));
    }
    let raw = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let phi = sample_field(mp, i);
            Ok((divergence(ctx, &phi)?.abs(), gradient_hs_norm(ctx, &phi, HS_BETA)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let ed: Vec<f64> = raw.iter().map(|(d, _)| (lambda * d).exp()).collect();
    let eg: Vec<f64> = raw.iter().map(|(_, g)| (lambda * g).exp()).collect();
    if ed.iter().chain(&eg).any(|v| !v.is_finite()) {
        return Ok(ExpMomentReport {
            lambda,
            divergence: None,
            gradient: None,
            prefixes: Vec::new(),
            diverged: Some(format!("estimate diverged at λ = {lambda}")),
        });
    }
    let prefixes = [m / 4, m / 2, m]
        .into_iter()
        .filter(|&n| n > 0)
        .map(|n| {
            let d = McEstimate::from_samples(ed[..n].iter().copied()).mean;
            let g = McEstimate::from_samples(eg[..n].iter().copied()).mean;
            (n, d, g)
        })
        .collect();
    Ok(ExpMomentReport {
        lambda,
        divergence: Some(McEstimate::from_samples(ed)),
        gradient: Some(McEstimate::from_samples(eg)),
        prefixes,
        diverged: None,
    })
}

/// Monte Carlo `E‖B(φ)‖²_β` under `μⁿ`.
pub fn vector_field_moment(ctx: &FieldContext, mp: &MeasureParams, beta: f64, m: usize) -> Result<McEstimate> {
    let values = (0..m as u64)
        .into_par_iter()
        .map(|i| Ok(sobolev_norm(&vector_field(ctx, &sample_field(mp, i))?, beta).powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(values))
}

/// Monte Carlo mean of `lp_loc_norm` over `m` samples.
pub fn lp_support_diagnostic(mp: &MeasureParams, p: f64, radius: f64, m: usize) -> Result<McEstimate> {
    let batch = sample(mp, m)?;
    let values = batch
        .fields
        .iter()
        .map(|f| lp_loc_norm(f, p, radius).map(|n| n.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldContext;

    fn mp(n: u32, gamma: f64, c: f64, seed: u64) -> MeasureParams {
        MeasureParams::new(gamma, GaussianParams::normalized(c).unwrap(), GalerkinBasis::shared(n), seed).unwrap()
    }

    #[test]
    fn exact_moment_values() {
        let k = MultiIndex::new(1, 1);
        assert!((exact_moment(1.0, 0.5, k, 1) - 0.5).abs() < 1e-15);
        assert!((exact_moment(1.0, 0.5, k, 2) - 0.5).abs() < 1e-15);
        assert!((exact_moment(2.0, 0.5, MultiIndex::ZERO, 3) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let m = mp(3, 1.0, 0.5, 42);
        let a = sample(&m, 50).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| sample(&m, 50).unwrap());
        assert_eq!(a.fields, b.fields);
        let tail = sample_range(&m, 20, 5).unwrap();
        assert_eq!(tail.fields[..], a.fields[20..25]);
        assert!(sample(&m, 0).is_err());
    }

    #[test]
    fn seeds_differ() {
        let a = sample_field(&mp(2, 1.0, 0.5, 1), 0);
        let b = sample_field(&mp(2, 1.0, 0.5, 2), 0);
        assert_ne!(a, b);
    }

    #[test]
    fn second_moment_and_mean() {
        let m = mp(2, 1.0, 0.5, 7);
        let k = MultiIndex::new(1, 1);
        let r = moment_check(&m, k, 1, 20_000).unwrap();
        assert!(r.z_score() < 4.0, "{r:?}");
        let mean = McEstimate::from_samples((0..20_000).map(|i| sample_mode(&m, k, i).re));
        assert!(mean.z_score(0.0) < 4.0);
        assert!(moment_check(&m, k, 0, 1000).is_err());
        assert!(moment_check(&m, k, 1, 10).is_err());
    }

    #[test]
    fn real_mode_halves_second_moment() {
        let m = mp(2, 1.0, 0.5, 7).with_real_mode(true);
        let f = sample_field(&m, 3);
        assert!(f.is_real());
        let est = McEstimate::from_samples((0..20_000).map(|i| sample_mode(&m, MultiIndex::ZERO, i).norm_sqr()));
        assert!(est.z_score(1.0) < 4.0);
    }

    #[test]
    fn lp_norm_of_constant() {
        let basis = GalerkinBasis::shared(2);
        let one = SpectralField::single_mode(basis.clone(), MultiIndex::ZERO, Complex64::new(1.0, 0.0), 0.5);
        let n = lp_loc_norm(&one, 3.0, 1.0).unwrap();
        assert!((n.value - PI.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!(n.warning.is_none());
        let zero = SpectralField::zeros(basis, 0.5);
        assert_eq!(lp_loc_norm(&zero, 3.0, 1.0).unwrap().value, 0.0);
        assert!(lp_loc_norm(&one, 3.0, 0.0).is_err());
        assert!(lp_loc_norm(&one, 4.0, 1.0).unwrap().warning.is_some());
    }

    #[test]
    fn hermite_function_l2_is_one() {
        for m in [0, 3, 10] {
            assert!((hermite_function_lp_integral(m, 2.0).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn theta_endpoints() {
        assert!((interpolation_theta(2.0) - 1.0).abs() < 1e-15);
        assert!(interpolation_theta(10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn l2_slope_is_flat() {
        let r = dispersive_exponent(2.0, 12).unwrap();
        assert!(r.fit.slope.abs() < 1e-8);
        assert!(dispersive_exponent(4.0, 12).is_err());
        assert!(dispersive_exponent(3.0, 4).is_err());
    }

    #[test]
    fn exponential_moments_small_lambda() {
        let ctx = FieldContext::with_box(2, GaussianParams::normalized(0.5).unwrap(), 1.0).unwrap();
        let m = mp(2, 1.0, 0.5, 3);
        let tiny = exponential_moment_check(&ctx, &m, 1e-9, 200).unwrap();
        assert!((tiny.divergence.unwrap().mean - 1.0).abs() < 1e-6);
        assert!((tiny.gradient.unwrap().mean - 1.0).abs() < 1e-6);
        let a = exponential_moment_check(&ctx, &m, 0.1, 500).unwrap();
        let b = exponential_moment_check(&ctx, &m, 0.2, 500).unwrap();
        assert!(b.divergence.unwrap().mean >= a.divergence.unwrap().mean);
        assert!(b.gradient.unwrap().mean >= a.gradient.unwrap().mean);
        let huge = exponential_moment_check(&ctx, &m, 1e6, 50).unwrap();
        assert!(huge.diverged.is_some());
    }

    #[test]
    fn samples_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_samples_csv(&sample(&mp(1, 1.0, 0.5, 0), 3).unwrap(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "re_0_0,im_0_0,re_0_1,im_0_1,re_1_0,im_1_0,re_1_1,im_1_1");
        assert_eq!(text.lines().count(), 4);
    }
}
