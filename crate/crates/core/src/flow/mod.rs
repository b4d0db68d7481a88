//! Time integration of the Galerkin system `φ' = B(φ)`, the Radon-Nikodym
//! density of the transported measure, quasi-invariance experiments and
//! fluid characteristics.
//!
//! The pushforward of `μⁿ` under the flow `U_t` has density
//!
//! ```text
//! k_t(φ) = d(U_t)_*μ / dμ (φ) = exp(-∫₀ᵗ div_μ B(U_{-s} φ) ds)
//! ```
//!
//! which follows from the Liouville equation for the density along
//! characteristics. The sign is pinned down by `E[k_t] = 1`.

pub mod dopri;

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::GalerkinBasis;
use crate::error::{Error, Result};
use crate::field::{divergence_raw, vector_field, FieldContext};
use crate::hermite::{apply_ou, eval_field, grad_perp_real, sobolev_norm, MultiIndex, SpectralField};
use crate::measure::{sample_field, MeasureParams};
use crate::stats::McEstimate;
use dopri::{solve, DenseSolution, DopriOptions, IntegratorStats};

pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-3;

fn check_tol(tol: f64) -> Result<()> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::invalid(format!("tolerance must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {tol:e}")));
    }
    Ok(())
}

/// `[Re φ, Im φ, ∫div]` as one real vector.
fn pack(phi: &[Complex64], div_integral: f64) -> Vec<f64> {
    let mut y: Vec<f64> = phi.iter().map(|z| z.re).collect();
    y.extend(phi.iter().map(|z| z.im));
    y.push(div_integral);
    y
}

fn unpack(y: &[f64], d: usize) -> Vec<Complex64> {
    (0..d).map(|i| Complex64::new(y[i], y[d + i])).collect()
}

/// Evolves a state: a flow trajectory with its accumulated divergence.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    /// `∫₀ᵗ div_μ B(φ(s)) ds` at each recorded time.
    pub div_integral: Vec<f64>,
    pub stats: IntegratorStats,
    pub tol: f64,
    basis: Arc<GalerkinBasis>,
    c: f64,
    dense: DenseSolution,
}

impl Trajectory {
    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn t_start(&self) -> f64 {
        self.dense.t0()
    }

    pub fn t_end(&self) -> f64 {
        self.dense.t_end()
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("a trajectory has at least one state")
    }

    pub fn final_div_integral(&self) -> f64 {
        *self.div_integral.last().expect("a trajectory has at least one state")
    }

    /// Interpolated state and divergence integral at any time in range.
    pub fn state_at(&self, t: f64) -> Option<(SpectralField, f64)> {
        let y = self.dense.eval(t)?;
        let d = self.basis.len();
        let field = SpectralField::new(self.basis.clone(), unpack(&y, d), self.c).ok()?;
        Some((field, y[2 * d]))
    }
}

fn rhs(ctx: &FieldContext) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    let d = ctx.basis().len();
    let mut phi = vec![Complex64::new(0.0, 0.0); d];
    let mut b = vec![Complex64::new(0.0, 0.0); d];
    move |_, y, dy| {
        for i in 0..d {
            phi[i] = Complex64::new(y[i], y[d + i]);
        }
        ctx.vector_field_raw(&phi, &mut b);
        for i in 0..d {
            dy[i] = b[i].re;
            dy[d + i] = b[i].im;
        }
        dy[2 * d] = divergence_raw(ctx, &phi);
    }
}

/// Integrates from `t = 0` to `t_final` (which may be negative), recording every
/// accepted step.
pub fn integrate(ctx: &FieldContext, phi0: &SpectralField, t_final: f64, tol: f64) -> Result<Trajectory> {
    let traj = integrate_dense(ctx, phi0, t_final, tol)?;
    Ok(traj)
}

/// Like [`integrate`], but records the state only at `outputs` (each must lie
/// between 0 and `t_final`).
pub fn integrate_at(ctx: &FieldContext, phi0: &SpectralField, t_final: f64, tol: f64, outputs: &[f64]) -> Result<Trajectory> {
    let mut traj = integrate_dense(ctx, phi0, t_final, tol)?;
    let mut times = Vec::with_capacity(outputs.len());
    let mut states = Vec::with_capacity(outputs.len());
    let mut divs = Vec::with_capacity(outputs.len());
    for &t in outputs {
        let (s, d) = traj
            .state_at(t)
            .ok_or_else(|| Error::invalid(format!("output time {t} outside [0, {t_final}]")))?;
        times.push(t);
        states.push(s);
        divs.push(d);
    }
    if times.windows(2).any(|w| (w[1] - w[0]) * t_final.signum() <= 0.0) {
        return Err(Error::invalid("output times must be strictly monotone in the direction of integration"));
    }
    if times.is_empty() {
        return Err(Error::invalid("at least one output time is required"));
    }
    traj.times = times;
    traj.states = states;
    traj.div_integral = divs;
    Ok(traj)
}

fn integrate_dense(ctx: &FieldContext, phi0: &SpectralField, t_final: f64, tol: f64) -> Result<Trajectory> {
    check_tol(tol)?;
    if !t_final.is_finite() {
        return Err(Error::invalid("t_final must be finite"));
    }
    if phi0.basis().as_ref() != ctx.basis().as_ref() {
        return Err(Error::invalid("initial field basis does not match the context basis"));
    }
    let d = ctx.basis().len();
    let y0 = pack(phi0.coeffs(), 0.0);
    let dense = solve(rhs(ctx), 0.0, &y0, t_final, &DopriOptions::with_tol(tol)).map_err(|f| {
        let last = SpectralField::new(ctx.basis().clone(), unpack(&f.y, d), phi0.c())
            .unwrap_or_else(|_| phi0.clone());
        Error::IntegrationFailure { t: f.t, reason: f.reason, last_state: Box::new(last) }
    })?;
    let times = dense.step_times();
    let mut states = Vec::with_capacity(times.len());
    let mut divs = Vec::with_capacity(times.len());
    for &t in &times {
        let y = dense.eval(t).expect("step times lie in range");
        states.push(SpectralField::new(ctx.basis().clone(), unpack(&y, d), phi0.c())?);
        divs.push(y[2 * d]);
    }
    Ok(Trajectory {
        times,
        states,
        div_integral: divs,
        stats: dense.stats,
        tol,
        basis: ctx.basis().clone(),
        c: phi0.c(),
        dense,
    })
}

/// `k_t(φ)`, from the divergence integral along the backward orbit.
pub fn density_kt(ctx: &FieldContext, phi: &SpectralField, t: f64, tol: f64) -> Result<f64> {
    Ok(log_density_kt(ctx, phi, t, tol)?.exp())
}

/// `log k_t(φ) = ∫₀^{-t} div_μ B(U_τ φ) dτ`.
pub fn log_density_kt(ctx: &FieldContext, phi: &SpectralField, t: f64, tol: f64) -> Result<f64> {
    if t == 0.0 {
        check_tol(tol)?;
        return Ok(0.0);
    }
    Ok(integrate(ctx, phi, -t, tol)?.final_div_integral())
}

/// Relative residual of `k_{t+s}(φ) = k_t(φ) k_s(U_{-t} φ)`.
pub fn cocycle_residual(ctx: &FieldContext, phi: &SpectralField, t: f64, s: f64, tol: f64) -> Result<f64> {
    let back_t = integrate(ctx, phi, -t, tol)?;
    let log_kt = back_t.final_div_integral();
    let log_ks = log_density_kt(ctx, back_t.final_state(), s, tol)?;
    let log_kts = log_density_kt(ctx, phi, t + s, tol)?;
    let lhs = log_kts.exp();
    Ok((lhs - (log_kt + log_ks).exp()).abs() / lhs)
}

/// Bounded test functionals for the quasi-invariance identity.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// `min(|φ_k|², cap)`.
    ClippedMode { k: MultiIndex, cap: f64 },
    /// `Re exp(i Re⟨φ, h⟩) = cos(Re Σ φ_k conj(h_k))`.
    CosPairing { h: Vec<Complex64> },
    /// `1 / (1 + ‖φ‖²₀)`.
    InverseNorm,
    /// `F ≡ 1`.
    One,
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::ClippedMode { .. } => "clipped-mode",
            Observable::CosPairing { .. } => "cos-pairing",
            Observable::InverseNorm => "inverse-norm",
            Observable::One => "one",
        }
    }

    pub fn eval(&self, phi: &SpectralField) -> f64 {
        match self {
            Observable::ClippedMode { k, cap } => phi.coeff(*k).map_or(0.0, |z| z.norm_sqr().min(*cap)),
            Observable::CosPairing { h } => {
                let pairing: Complex64 = phi.coeffs().iter().zip(h).map(|(a, b)| a * b.conj()).sum();
                pairing.re.cos()
            }
            Observable::InverseNorm => 1.0 / (1.0 + sobolev_norm(phi, 0.0).powi(2)),
            Observable::One => 1.0,
        }
    }

    /// The three observables of the quasi-invariance suite. The pairing field
    /// is `h_k = (1 + i)/(1 + |k|)²`.
    pub fn standard_set(basis: &GalerkinBasis) -> Vec<Observable> {
        let h = basis
            .indices()
            .iter()
            .map(|k| Complex64::new(1.0, 1.0) / (1.0 + k.order() as f64).powi(2))
            .collect();
        vec![
            Observable::ClippedMode { k: MultiIndex::new(1, 1), cap: 4.0 },
            Observable::CosPairing { h },
            Observable::InverseNorm,
        ]
    }
}

/// Both sides of `E[F(U_t φ)] = E[F(φ) k_t(φ)]` on one sample batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiInvarianceReport {
    pub observable: String,
    pub estimate_lhs: f64,
    pub estimate_rhs: f64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    pub n_samples: usize,
    pub n_failed: usize,
    /// `E[k_t]` on the same batch.
    pub mean_kt: McEstimate,
}

impl QuasiInvarianceReport {
    pub fn difference(&self) -> f64 {
        self.estimate_lhs - self.estimate_rhs
    }

    pub fn combined_se(&self) -> f64 {
        (self.se_lhs.powi(2) + self.se_rhs.powi(2)).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-sample ingredients of the identity.
#[derive(Clone, Debug)]
pub struct FlowSample {
    pub phi: SpectralField,
    pub forward: SpectralField,
    pub kt: f64,
}

/// Flows `M` samples forward to `t` and computes `k_t` on each. Failed
/// integrations are dropped and counted.
pub fn flow_samples(ctx: &FieldContext, mp: &MeasureParams, t: f64, m: usize, tol: f64) -> Result<(Vec<FlowSample>, usize)> {
    if m == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    check_tol(tol)?;
    if mp.basis().as_ref() != ctx.basis().as_ref() {
        return Err(Error::invalid("measure and field context use different bases"));
    }
    let results: Vec<Result<FlowSample>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let phi = sample_field(mp, i);
            let forward = if t == 0.0 { phi.clone() } else { integrate(ctx, &phi, t, tol)?.final_state().clone() };
            let kt = density_kt(ctx, &phi, t, tol)?;
            Ok(FlowSample { phi, forward, kt })
        })
        .collect();
    let mut samples = Vec::with_capacity(m);
    let mut failed = 0;
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(Error::IntegrationFailure { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((samples, failed))
}

pub fn quasi_invariance_report(observable: &Observable, samples: &[FlowSample], n_failed: usize) -> QuasiInvarianceReport {
    let lhs = McEstimate::from_samples(samples.iter().map(|s| observable.eval(&s.forward)));
    let rhs = McEstimate::from_samples(samples.iter().map(|s| observable.eval(&s.phi) * s.kt));
    QuasiInvarianceReport {
        observable: observable.name().to_string(),
        estimate_lhs: lhs.mean,
        estimate_rhs: rhs.mean,
        se_lhs: lhs.se,
        se_rhs: rhs.se,
        n_samples: samples.len(),
        n_failed,
        mean_kt: McEstimate::from_samples(samples.iter().map(|s| s.kt)),
    }
}

pub fn quasi_invariance_experiment(
    ctx: &FieldContext,
    mp: &MeasureParams,
    observable: &Observable,
    t: f64,
    m: usize,
    tol: f64,
) -> Result<QuasiInvarianceReport> {
    let (samples, failed) = flow_samples(ctx, mp, t, m, tol)?;
    Ok(quasi_invariance_report(observable, &samples, failed))
}

/// Largest `|φ(t) - φ(0)|` over the recorded states.
pub fn stationarity_drift(traj: &Trajectory) -> f64 {
    let first = &traj.states[0];
    traj.states
        .iter()
        .flat_map(|s| s.coeffs().iter().zip(first.coeffs()).map(|(a, b)| (a - b).norm()))
        .fold(0.0, f64::max)
}

/// Largest coefficient error after integrating to `t` and back.
pub fn reversibility_error(ctx: &FieldContext, phi0: &SpectralField, t: f64, tol: f64) -> Result<f64> {
    let fwd = integrate(ctx, phi0, t, tol)?;
    let back = integrate(ctx, fwd.final_state(), -t, tol)?;
    Ok(back
        .final_state()
        .coeffs()
        .iter()
        .zip(phi0.coeffs())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

/// Compares a central difference of the dense output with `B` at mid-step
/// times; returns the largest `|Δ| / (1 + |B|)`.
pub fn rhs_residual(ctx: &FieldContext, traj: &Trajectory, points: usize) -> Result<f64> {
    let times = &traj.times;
    if times.len() < 2 {
        return Ok(0.0);
    }
    let steps = times.len() - 1;
    let mut worst: f64 = 0.0;
    for j in 0..points.min(steps) {
        let i = j * steps / points.min(steps);
        let (a, b) = (times[i], times[i + 1]);
        let t = 0.5 * (a + b);
        let delta = 1e-4 * (b - a);
        let (plus, _) = traj.state_at(t + delta).expect("in range");
        let (minus, _) = traj.state_at(t - delta).expect("in range");
        let (mid, _) = traj.state_at(t).expect("in range");
        let bfield = vector_field(ctx, &mid)?;
        for ((p, m), bk) in plus.coeffs().iter().zip(minus.coeffs()).zip(bfield.coeffs()) {
            let fd = (p - m) / (2.0 * delta);
            worst = worst.max((fd - bk).norm() / (1.0 + bk.norm()));
        }
    }
    Ok(worst)
}

/// A fluid particle path `Φ_t(x₀)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharPath {
    pub initial_point: [f64; 2],
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

impl CharPath {
    pub fn final_point(&self) -> [f64; 2] {
        *self.points.last().expect("a path has at least one point")
    }
}

/// Integrates `ẋ = ∇⊥φ(t, x)` along the trajectory's dense output. The stream
/// function must be real.
pub fn characteristics(traj: &Trajectory, x0: [f64; 2], tol: f64) -> Result<CharPath> {
    check_tol(tol)?;
    if !(x0[0].is_finite() && x0[1].is_finite()) {
        return Err(Error::invalid("starting point must be finite"));
    }
    if !traj.states[0].is_real() {
        return Err(Error::invalid("characteristics need a real stream function"));
    }
    let f = |t: f64, x: &[f64], dx: &mut [f64]| {
        let t = t.clamp(traj.t_start().min(traj.t_end()), traj.t_start().max(traj.t_end()));
        let (phi, _) = traj.state_at(t).expect("time clamped into range");
        let v = grad_perp_real(&phi, [x[0], x[1]]);
        dx[0] = v[0];
        dx[1] = v[1];
    };
    let sol = solve(f, traj.t_start(), &x0, traj.t_end(), &DopriOptions::with_tol(tol)).map_err(|e| {
        Error::IntegrationFailure {
            t: e.t,
            reason: format!("characteristic from {x0:?}: {}", e.reason),
            last_state: Box::new(traj.final_state().clone()),
        }
    })?;
    let times = sol.step_times();
    let points = times
        .iter()
        .map(|&t| {
            let y = sol.eval(t).expect("step time in range");
            [y[0], y[1]]
        })
        .collect();
    Ok(CharPath { initial_point: x0, times, points })
}

/// `|L^cφ(t, Φ_t(x₀)) - L^cφ(0, x₀)|` at the end of the path.
pub fn transport_error(traj: &Trajectory, path: &CharPath) -> f64 {
    let start = eval_field(&apply_ou(&traj.states[0]), path.initial_point);
    let end = eval_field(&apply_ou(traj.final_state()), path.final_point());
    (end - start).norm()
}

/// Copies a field into a larger box, zero-filling the new modes.
pub fn embed(field: &SpectralField, basis: Arc<GalerkinBasis>) -> Result<SpectralField> {
    if basis.max_index() < field.basis().max_index() {
        return Err(Error::invalid("can only embed into a larger basis"));
    }
    let mut out = SpectralField::zeros(basis, field.c());
    for (k, z) in field.iter() {
        *out.coeff_mut(k).expect("smaller box is contained") = z;
    }
    Ok(out)
}

/// CSV with columns `time, re_k1_k2, im_k1_k2, ..., div_integral`.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string()];
    for k in traj.basis.indices() {
        header.push(format!("re_{}_{}", k.k1, k.k2));
        header.push(format!("im_{}_{}", k.k1, k.k2));
    }
    header.push("div_integral".into());
    w.write_record(&header)?;
    for ((t, s), d) in traj.times.iter().zip(&traj.states).zip(&traj.div_integral) {
        let mut row = vec![t.to_string()];
        for z in s.coeffs() {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        row.push(d.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_path_csv(path_data: &CharPath, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "x1", "x2"])?;
    for (t, p) in path_data.times.iter().zip(&path_data.points) {
        w.write_record([t.to_string(), p[0].to_string(), p[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::GaussianParams;

    fn ctx(n: u32) -> FieldContext {
        FieldContext::with_box(n, GaussianParams::normalized(0.5).unwrap(), 1.0).unwrap()
    }

    fn mp(ctx: &FieldContext, seed: u64) -> MeasureParams {
        MeasureParams::new(1.0, ctx.params(), ctx.basis().clone(), seed).unwrap()
    }

    #[test]
    fn zero_time_and_bad_tol() {
        let ctx = ctx(2);
        let phi = sample_field(&mp(&ctx, 1), 0);
        let tr = integrate(&ctx, &phi, 0.0, 1e-8).unwrap();
        assert_eq!(tr.states.len(), 1);
        assert_eq!(tr.states[0], phi);
        assert_eq!(tr.div_integral, vec![0.0]);
        assert!(integrate(&ctx, &phi, 1.0, 1e-2).is_err());
        assert_eq!(density_kt(&ctx, &phi, 0.0, 1e-8).unwrap(), 1.0);
    }

    #[test]
    fn single_mode_is_stationary() {
        let ctx = ctx(3);
        let phi = SpectralField::single_mode(ctx.basis().clone(), MultiIndex::new(2, 1), Complex64::new(0.4, 0.3), 0.5);
        let tr = integrate(&ctx, &phi, 1.0, 1e-9).unwrap();
        assert!(stationarity_drift(&tr) <= 1e-10);
    }

    #[test]
    fn reversible() {
        let ctx = ctx(3);
        let phi = sample_field(&mp(&ctx, 4), 2);
        assert!(reversibility_error(&ctx, &phi, 0.5, 1e-9).unwrap() < 1e-6);
    }

    #[test]
    fn times_monotone_and_rhs_consistent() {
        let ctx = ctx(3);
        let phi = sample_field(&mp(&ctx, 5), 0);
        let tr = integrate(&ctx, &phi, -0.3, 1e-9).unwrap();
        assert!(tr.times.windows(2).all(|w| w[1] < w[0]));
        assert!(rhs_residual(&ctx, &tr, 10).unwrap() < 1e-6);
    }

    #[test]
    fn integrate_at_outputs() {
        let ctx = ctx(2);
        let phi = sample_field(&mp(&ctx, 5), 0);
        let tr = integrate_at(&ctx, &phi, 0.2, 1e-9, &[0.0, 0.1, 0.2]).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.1, 0.2]);
        assert!(integrate_at(&ctx, &phi, 0.2, 1e-9, &[0.3]).is_err());
    }

    #[test]
    fn cocycle_small_times() {
        let ctx = ctx(3);
        let phi = sample_field(&mp(&ctx, 9), 1);
        assert!(cocycle_residual(&ctx, &phi, 0.05, 0.05, 1e-10).unwrap() < 1e-5);
    }

    #[test]
    fn t_zero_experiment_matches_sample_by_sample() {
        let ctx = ctx(2);
        let (samples, failed) = flow_samples(&ctx, &mp(&ctx, 2), 0.0, 50, 1e-8).unwrap();
        assert_eq!(failed, 0);
        for obs in Observable::standard_set(ctx.basis()) {
            let r = quasi_invariance_report(&obs, &samples, failed);
            assert_eq!(r.estimate_lhs, r.estimate_rhs);
        }
        let one = quasi_invariance_report(&Observable::One, &samples, 0);
        assert_eq!(one.estimate_lhs, 1.0);
        assert_eq!(one.estimate_rhs, 1.0);
    }

    #[test]
    fn constant_stream_function_does_not_move() {
        let ctx = ctx(2);
        let phi = SpectralField::single_mode(ctx.basis().clone(), MultiIndex::ZERO, Complex64::new(1.3, 0.0), 0.5);
        let tr = integrate(&ctx, &phi, 0.5, 1e-9).unwrap();
        let path = characteristics(&tr, [0.4, -0.2], 1e-9).unwrap();
        assert_eq!(path.final_point(), [0.4, -0.2]);
    }

    #[test]
    fn rotation_preserves_radius() {
        let ctx = ctx(2);
        let mut phi = SpectralField::zeros(ctx.basis().clone(), 0.5);
        *phi.coeff_mut(MultiIndex::new(2, 0)).unwrap() = Complex64::new(0.7, 0.0);
        *phi.coeff_mut(MultiIndex::new(0, 2)).unwrap() = Complex64::new(0.7, 0.0);
        let tr = integrate(&ctx, &phi, 1.0, 1e-10).unwrap();
        assert!(stationarity_drift(&tr) < 1e-12);
        let x0 = [0.8, 0.3];
        let path = characteristics(&tr, x0, 1e-10).unwrap();
        let r0 = (x0[0] * x0[0] + x0[1] * x0[1]).sqrt();
        for p in &path.points {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - r0).abs() < 1e-6);
        }
        // angular speed a·√2·c
        let end = path.final_point();
        let angle = end[1].atan2(end[0]) - x0[1].atan2(x0[0]);
        assert!((angle - 0.7 * 2f64.sqrt() * 0.5).abs() < 1e-6, "{angle}");
    }

    #[test]
    fn complex_field_rejected_for_characteristics() {
        let ctx = ctx(2);
        let tr = integrate(&ctx, &sample_field(&mp(&ctx, 1), 0), 0.1, 1e-8).unwrap();
        assert!(characteristics(&tr, [0.0, 0.0], 1e-8).is_err());
    }

    #[test]
    fn csv_and_json_exports() {
        let ctx = ctx(1);
        let dir = tempfile::tempdir().unwrap();
        let tr = integrate(&ctx, &sample_field(&mp(&ctx, 1), 0), 0.1, 1e-8).unwrap();
        let p = dir.path().join("traj.csv");
        write_trajectory_csv(&tr, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("time,re_0_0,im_0_0,"));
        assert!(text.lines().next().unwrap().ends_with(",div_integral"));
        let (s, f) = flow_samples(&ctx, &mp(&ctx, 1), 0.0, 5, 1e-8).unwrap();
        let json = quasi_invariance_report(&Observable::InverseNorm, &s, f).to_json().unwrap();
        for key in ["estimate_lhs", "estimate_rhs", "se_lhs", "se_rhs", "n_samples", "n_failed"] {
            assert!(json.contains(key));
        }
    }

    #[test]
    fn embedding() {
        let small = sample_field(&mp(&ctx(1), 3), 0);
        let big = embed(&small, GalerkinBasis::shared(3)).unwrap();
        assert_eq!(big.coeff(MultiIndex::new(1, 1)), small.coeff(MultiIndex::new(1, 1)));
        assert_eq!(big.coeff(MultiIndex::new(3, 3)), Some(Complex64::new(0.0, 0.0)));
        assert!(embed(&big, GalerkinBasis::shared(1)).is_err());
    }
}
