//! Velocity from bounded vorticity through the perturbative Green's function
//! of `L^c`, the quasi-Lipschitz modulus, and Lagrangian particle flows.
//!
//! Writing `f = ρ^c ω`, `K(z) = z^⊥/|z|²` and `dσ(y) = (1/2π) e^{-c|y|²/2} dy`,
//! the `n`-th term of the series for `ρ^c u(x)` is
//!
//! ```text
//! T_n(x) = c^{n-1} (2π)^{-n} ∫ K(x - x₁) Π_{i<n} [x_i·(x_i - x_{i+1}) / |x_i - x_{i+1}|²] f(x_n) dσ(x₁)…dσ(x_n)
//! ```
//!
//! Monte Carlo draws each `x_{i+1}` in polar coordinates around `x_i`, so the
//! `1/|x_i - x_{i+1}|` singularities cancel against the Jacobian and every
//! estimator has finite variance.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::CharPath;
use crate::stats::McEstimate;

/// Built-in vorticity profiles `f = ρ^c ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VorticityData {
    /// `A e^{-|y - center|²/w²}`.
    Gaussian { amplitude: f64, width: f64, center: [f64; 2] },
    /// `A e^{-(|y| - R)²/w²}`.
    Ring { amplitude: f64, radius: f64, width: f64 },
    /// Two Gaussians of opposite sign at `(±d/2, 0)`.
    Dipole { amplitude: f64, separation: f64, width: f64 },
}

impl VorticityData {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        VorticityData::Gaussian { amplitude, width, center: [0.0, 0.0] }
    }

    /// Looks up a catalog entry. `extra` is the ring radius or dipole separation.
    pub fn from_name(name: &str, amplitude: f64, width: f64, extra: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) || !amplitude.is_finite() {
            return Err(Error::invalid("vorticity width must be positive and amplitude finite"));
        }
        match name {
            "gaussian" => Ok(Self::gaussian(amplitude, width)),
            "ring" => Ok(VorticityData::Ring { amplitude, radius: extra, width }),
            "dipole" => Ok(VorticityData::Dipole { amplitude, separation: extra, width }),
            other => Err(Error::invalid(format!("unknown vorticity profile {other:?} (gaussian, ring, dipole)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VorticityData::Gaussian { .. } => "gaussian",
            VorticityData::Ring { .. } => "ring",
            VorticityData::Dipole { .. } => "dipole",
        }
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        let bump = |a: [f64; 2], w: f64| (-((y[0] - a[0]).powi(2) + (y[1] - a[1]).powi(2)) / (w * w)).exp();
        match *self {
            VorticityData::Gaussian { amplitude, width, center } => amplitude * bump(center, width),
            VorticityData::Ring { amplitude, radius, width } => {
                let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
                amplitude * (-((r - radius) / width).powi(2)).exp()
            }
            VorticityData::Dipole { amplitude, separation, width } => {
                let h = 0.5 * separation;
                amplitude * (bump([h, 0.0], width) - bump([-h, 0.0], width))
            }
        }
    }

    /// An upper bound for `‖f‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            VorticityData::Gaussian { amplitude, .. }
            | VorticityData::Ring { amplitude, .. }
            | VorticityData::Dipole { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Whether `f` depends on `|y|` only.
    pub fn is_radial(&self) -> bool {
        match *self {
            VorticityData::Gaussian { center, .. } => center == [0.0, 0.0],
            VorticityData::Ring { .. } => true,
            VorticityData::Dipole { .. } => false,
        }
    }

    /// Radius outside of which `|f|` is below `e^{-25}` of its peak.
    fn support_radius(&self) -> f64 {
        match *self {
            VorticityData::Gaussian { width, center, .. } => center[0].hypot(center[1]) + 5.0 * width,
            VorticityData::Ring { radius, width, .. } => radius.abs() + 5.0 * width,
            VorticityData::Dipole { separation, width, .. } => 0.5 * separation.abs() + 5.0 * width,
        }
    }
}

/// `σ(y) = (1/2π) e^{-c|y|²/2}`, of total mass `1/c`.
pub fn sigma(c: f64, y: [f64; 2]) -> f64 {
    (-0.5 * c * (y[0] * y[0] + y[1] * y[1])).exp() / (2.0 * PI)
}

fn check_c(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0 && c < 1.0) {
        return Err(Error::invalid(format!("c must lie in (0, 1), got {c}")));
    }
    Ok(())
}

/// `(√(2π)/2) (2π)^{-n} c^{n-1}`.
pub fn term_bound(n: u32, c: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("series terms start at n = 1"));
    }
    Ok((2.0 * PI).sqrt() / 2.0 * (2.0 * PI).powi(-(n as i32)) * c.powi(n as i32 - 1))
}

/// `Σ_{n > order} term_bound(n)`, a geometric tail.
pub fn tail_bound(order: u32, c: f64) -> Result<f64> {
    Ok(term_bound(order + 1, c)? / (1.0 - c / (2.0 * PI)))
}

/// `λ(r) = r(1 - ln r)` for `r < 1`, `r` otherwise.
pub fn modulus(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r < 1.0 {
        r * (1.0 - r.ln())
    } else {
        r
    }
}

/// `∫_δ^1 dr / λ(r)` by Gauss-Legendre in `u = ln(1/r)`.
pub fn osgood_integral(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    // dr / (r(1 - ln r)) = du / (1 + u)
    let upper = -delta.ln();
    let rule = GaussLegendre::new(NonZeroUsize::new(32).expect("nonzero"));
    let panels = 64;
    // Geometric panels in u resolve the 1/(1+u) decay.
    let edges: Vec<f64> = (0..=panels)
        .map(|i| (1.0 + upper).powf(i as f64 / panels as f64) - 1.0)
        .collect();
    Ok(edges.windows(2).map(|w| rule.integrate(w[0], w[1], |u| 1.0 / (1.0 + u))).sum())
}

fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Half-normal density of the polar radius proposal, scale `1/√c`.
fn radius_density(c: f64, r: f64) -> f64 {
    (2.0 * c / PI).sqrt() * (-0.5 * c * r * r).exp()
}

/// Random polar step `(r, e)` around the current point.
fn polar_step(rng: &mut ChaCha8Rng, normal: &Normal<f64>) -> (f64, [f64; 2]) {
    let r: f64 = normal.sample(rng).abs();
    let th = rng.random_range(0.0..2.0 * PI);
    (r, [th.cos(), th.sin()])
}

/// Proposals closer than this to a kernel singularity are rejected.
pub const SINGULARITY_CUTOFF: f64 = 1e-8;

fn stream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&a.to_le_bytes());
    key[16..24].copy_from_slice(&b.to_le_bytes());
    key[24..].copy_from_slice(b"kernelmc");
    ChaCha8Rng::from_seed(key)
}

/// One Monte Carlo draw of `T_n(x)` without the `c^{n-1} (2π)^{-n}` prefactor;
/// `None` when a proposal fell inside the cutoff.
fn chain_sample(data: &VorticityData, x: [f64; 2], n: u32, c: f64, rng: &mut ChaCha8Rng, normal: &Normal<f64>) -> Option<[f64; 2]> {
    let (r1, e1) = polar_step(rng, normal);
    if r1 < SINGULARITY_CUTOFF {
        return None;
    }
    let mut xi = [x[0] + r1 * e1[0], x[1] + r1 * e1[1]];
    // K(x - x₁) dσ(x₁) / q(x₁) with q = p(r)/(2π r): the 1/r cancels.
    let mut scalar = sigma(c, xi) * 2.0 * PI / radius_density(c, r1);
    let dir = perp(e1).map(|v| -v);
    for _ in 1..n {
        let (r, e) = polar_step(rng, normal);
        if r < SINGULARITY_CUTOFF {
            return None;
        }
        let next = [xi[0] + r * e[0], xi[1] + r * e[1]];
        // x_i·(x_i - x_{i+1}) / |x_i - x_{i+1}|² · r = -x_i·e
        scalar *= -(xi[0] * e[0] + xi[1] * e[1]) * sigma(c, next) * 2.0 * PI / radius_density(c, r);
        xi = next;
    }
    scalar *= data.eval(xi);
    Some([dir[0] * scalar, dir[1] * scalar])
}

/// A Monte Carlo estimate of one series term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub n: u32,
    pub value: [f64; 2],
    pub se: [f64; 2],
    pub samples: usize,
    /// Proposals rejected by [`SINGULARITY_CUTOFF`].
    pub rejected: usize,
}

impl TermEstimate {
    pub fn magnitude(&self) -> f64 {
        self.value[0].hypot(self.value[1])
    }

    /// Standard error of the magnitude, to first order.
    pub fn magnitude_se(&self) -> f64 {
        self.se[0].hypot(self.se[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub samples: usize,
    pub seed: u64,
    /// Standard errors above this produce a warning.
    pub se_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { samples: 200_000, seed: 0, se_tol: 1e-3 }
    }
}

pub fn series_term(data: &VorticityData, x: [f64; 2], n: u32, c: f64, opts: &SeriesOptions) -> Result<TermEstimate> {
    check_c(c)?;
    if n == 0 {
        return Err(Error::invalid("series terms start at n = 1"));
    }
    if opts.samples < 2 {
        return Err(Error::invalid("need at least two Monte Carlo samples"));
    }
    let normal = Normal::new(0.0, 1.0 / c.sqrt()).expect("finite scale");
    let scale = c.powi(n as i32 - 1) * (2.0 * PI).powi(-(n as i32));
    let chunk = 4096;
    let chunks = opts.samples.div_ceil(chunk);
    let draws: Vec<Option<[f64; 2]>> = (0..chunks as u64)
        .into_par_iter()
        .flat_map_iter(|ci| {
            let mut rng = stream(opts.seed, (x[0].to_bits() ^ x[1].to_bits().rotate_left(17)) ^ n as u64, ci);
            let len = chunk.min(opts.samples - ci as usize * chunk);
            (0..len).map(move |_| chain_sample(data, x, n, c, &mut rng, &normal)).collect::<Vec<_>>()
        })
        .collect();
    let rejected = draws.iter().filter(|d| d.is_none()).count();
    let comp = |i: usize| McEstimate::from_samples(draws.iter().map(|d| d.map_or(0.0, |v| scale * v[i])));
    let (a, b) = (comp(0), comp(1));
    Ok(TermEstimate { n, value: [a.mean, b.mean], se: [a.se, b.se], samples: opts.samples, rejected })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub value: [f64; 2],
    pub terms: Vec<TermEstimate>,
    /// Bound on the omitted terms, times `‖f‖_∞`.
    pub tail_bound: f64,
    pub warnings: Vec<String>,
}

/// The first `order` terms of the series for `ρ^c u(x)`.
pub fn velocity_series(data: &VorticityData, x: [f64; 2], order: u32, c: f64, opts: &SeriesOptions) -> Result<SeriesEstimate> {
    if !(1..=3).contains(&order) {
        return Err(Error::invalid(format!("series order must be 1, 2 or 3, got {order}")));
    }
    let terms = (1..=order)
        .map(|n| series_term(data, x, n, c, opts))
        .collect::<Result<Vec<_>>>()?;
    let value = terms.iter().fold([0.0, 0.0], |acc, t| [acc[0] + t.value[0], acc[1] + t.value[1]]);
    let warnings = terms
        .iter()
        .filter(|t| t.magnitude_se() > opts.se_tol)
        .map(|t| format!("term {} standard error {:.3e} exceeds {:.3e}", t.n, t.magnitude_se(), opts.se_tol))
        .collect();
    Ok(SeriesEstimate { value, terms, tail_bound: tail_bound(order, c)? * data.sup_norm(), warnings })
}

/// Term 1 by deterministic polar quadrature centered at `x`:
/// `T_1(x) = -(1/2π) ∫₀^∞ ∫₀^{2π} e^⊥(θ) f(x+se) σ(x+se) dθ ds`.
pub fn term1_quadrature(data: &VorticityData, x: [f64; 2], c: f64) -> Result<[f64; 2]> {
    check_c(c)?;
    let s_max = x[0].hypot(x[1]) + data.support_radius() + 12.0 / c.sqrt();
    let rule = GaussLegendre::new(NonZeroUsize::new(16).expect("nonzero"));
    let panels = 128;
    let angles = 256;
    let ds = s_max / panels as f64;
    let dth = 2.0 * PI / angles as f64;
    let trig: Vec<(f64, f64)> = (0..angles).map(|j| (j as f64 * dth).sin_cos()).collect();
    let acc = (0..panels)
        .into_par_iter()
        .map(|p| {
            let mut a = [0.0, 0.0];
            for &(node, w) in rule.as_node_weight_pairs() {
                let s = (p as f64 + 0.5 * (node + 1.0)) * ds;
                for &(sn, cs) in &trig {
                    let y = [x[0] + s * cs, x[1] + s * sn];
                    let g = data.eval(y) * sigma(c, y) * w * 0.5 * ds * dth;
                    a[0] += sn * g;
                    a[1] -= cs * g;
                }
            }
            a
        })
        .reduce(|| [0.0, 0.0], |a, b| [a[0] + b[0], a[1] + b[1]]);
    Ok([acc[0] / (2.0 * PI), acc[1] / (2.0 * PI)])
}

/// Term 1 for radial data: only the vorticity inside `|y| < |x|` contributes,
/// `T_1(x) = x^⊥/|x|² ∫₀^{|x|} f(ρ) σ(ρ) ρ dρ`.
pub fn term1_radial(data: &VorticityData, x: [f64; 2], c: f64) -> Result<[f64; 2]> {
    check_c(c)?;
    if !data.is_radial() {
        return Err(Error::invalid(format!("{} data is not radially symmetric", data.name())));
    }
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        return Ok([0.0, 0.0]);
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(64).expect("nonzero"));
    let panels = 32;
    let h = r / panels as f64;
    let enclosed: f64 = (0..panels)
        .map(|i| {
            let a = i as f64 * h;
            rule.integrate(a, a + h, |rho| data.eval([rho, 0.0]) * sigma(c, [rho, 0.0]) * rho)
        })
        .sum();
    let p = perp(x);
    Ok([p[0] / (r * r) * enclosed, p[1] / (r * r) * enclosed])
}

/// `(1/2π) ∫ |K(x - y) - K(x' - y)| |f(y)| dσ(y)` by Monte Carlo with a
/// three-way mixture proposal: polar Gaussians around `x` and `x'`, and a
/// log-uniform radius around their midpoint for the intermediate range.
pub fn kernel_difference(data: &VorticityData, x: [f64; 2], xp: [f64; 2], c: f64, samples: usize, rng: &mut ChaCha8Rng) -> McEstimate {
    let normal = Normal::new(0.0, 1.0 / c.sqrt()).expect("finite scale");
    let d = (x[0] - xp[0]).hypot(x[1] - xp[1]);
    let mid = [0.5 * (x[0] + xp[0]), 0.5 * (x[1] + xp[1])];
    let (lo, hi) = (1e-2 * d.min(1.0), 4.0f64.max(4.0 * d));
    let log_span = (hi / lo).ln();
    let polar_q = |center: [f64; 2], y: [f64; 2]| {
        let s = (y[0] - center[0]).hypot(y[1] - center[1]);
        radius_density(c, s) / (2.0 * PI * s)
    };
    let loguni_q = |y: [f64; 2]| {
        let s = (y[0] - mid[0]).hypot(y[1] - mid[1]);
        if (lo..=hi).contains(&s) {
            1.0 / (2.0 * PI * s * s * log_span)
        } else {
            0.0
        }
    };
    let k = |z: [f64; 2]| {
        let n2 = z[0] * z[0] + z[1] * z[1];
        [-z[1] / n2, z[0] / n2]
    };
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let u: f64 = rng.random_range(0.0..3.0);
            let th = rng.random_range(0.0..2.0 * PI);
            let e = [th.cos(), th.sin()];
            let (center, s) = if u < 1.0 {
                (x, normal.sample(rng).abs())
            } else if u < 2.0 {
                (xp, normal.sample(rng).abs())
            } else {
                (mid, lo * (rng.random_range(0.0..log_span)).exp())
            };
            let y = [center[0] + s * e[0], center[1] + s * e[1]];
            let dx = (y[0] - x[0]).hypot(y[1] - x[1]);
            let dxp = (y[0] - xp[0]).hypot(y[1] - xp[1]);
            if dx < SINGULARITY_CUTOFF || dxp < SINGULARITY_CUTOFF {
                return 0.0;
            }
            let a = k([x[0] - y[0], x[1] - y[1]]);
            let b = k([xp[0] - y[0], xp[1] - y[1]]);
            let g = (a[0] - b[0]).hypot(a[1] - b[1]) * data.eval(y).abs() * sigma(c, y) / (2.0 * PI);
            let q = (polar_q(x, y) + polar_q(xp, y) + loguni_q(y)) / 3.0;
            g / q
        })
        .collect();
    McEstimate::from_samples(values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiLipschitzOptions {
    pub calibration_pairs: usize,
    pub test_pairs: usize,
    pub inner_samples: usize,
    /// Inner samples used to re-estimate a pair whose coarse ratio sets the
    /// calibration maximum or exceeds the fitted constant.
    pub refine_samples: usize,
    /// Safety factor applied to the calibrated maximum ratio.
    pub margin: f64,
    pub seed: u64,
}

impl Default for QuasiLipschitzOptions {
    fn default() -> Self {
        QuasiLipschitzOptions { calibration_pairs: 1000, test_pairs: 10_000, inner_samples: 2000, refine_samples: 200_000, margin: 1.25, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiLipschitzReport {
    /// The single fitted constant `C` in `D(x, x') ≤ C λ(|x - x'|)`.
    pub constant: f64,
    pub calibration_max_ratio: f64,
    pub test_max_ratio: f64,
    pub violations: usize,
    pub test_pairs: usize,
    /// Pairs re-estimated with `refine_samples`.
    pub refined: usize,
}

/// Pairs `x` uniform in the disc of radius 2, `|x - x'|` log-uniform in `[1e-6, 2]`.
fn random_pair(rng: &mut ChaCha8Rng) -> ([f64; 2], [f64; 2]) {
    let rad = 2.0 * rng.random::<f64>().sqrt();
    let th = rng.random_range(0.0..2.0 * PI);
    let x = [rad * th.cos(), rad * th.sin()];
    let r = (1e-6f64.ln() + rng.random::<f64>() * (2.0f64.ln() - 1e-6f64.ln())).exp();
    let phi = rng.random_range(0.0..2.0 * PI);
    (x, [x[0] + r * phi.cos(), x[1] + r * phi.sin()])
}

fn pair_ratio(data: &VorticityData, c: f64, opts: &QuasiLipschitzOptions, tag: u64, i: u64, refine: bool) -> f64 {
    let mut rng = stream(opts.seed, tag, i);
    let (x, xp) = random_pair(&mut rng);
    let d = if refine {
        // independent of the coarse estimate
        kernel_difference(data, x, xp, c, opts.refine_samples, &mut stream(opts.seed, tag | 1 << 32, i))
    } else {
        kernel_difference(data, x, xp, c, opts.inner_samples, &mut rng)
    };
    d.mean / modulus((x[0] - xp[0]).hypot(x[1] - xp[1]))
}

fn pair_ratios(data: &VorticityData, c: f64, pairs: usize, opts: &QuasiLipschitzOptions, tag: u64) -> Vec<f64> {
    (0..pairs as u64).into_par_iter().map(|i| pair_ratio(data, c, opts, tag, i, false)).collect()
}

/// Fits `C` once on calibration pairs and counts violations on fresh pairs.
/// Coarse estimates are noisy for nearly coincident points, so the pair
/// holding the calibration maximum is refined until the maximum rests on a
/// refined value, and a test pair counts as a violation only if its refined
/// ratio still exceeds `C`.
pub fn quasi_lipschitz_check(data: &VorticityData, c: f64, opts: &QuasiLipschitzOptions) -> Result<QuasiLipschitzReport> {
    check_c(c)?;
    if opts.calibration_pairs == 0 || opts.test_pairs == 0 || opts.inner_samples < 2 || opts.refine_samples < 2 {
        return Err(Error::invalid("quasi-Lipschitz check needs pairs and at least two inner samples"));
    }
    let mut calib = pair_ratios(data, c, opts.calibration_pairs, opts, 1);
    let mut is_refined = vec![false; calib.len()];
    let mut refined = 0;
    let calibration_max_ratio = loop {
        let (i, &max) = calib.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("at least one pair");
        if is_refined[i] {
            break max;
        }
        calib[i] = pair_ratio(data, c, opts, 1, i as u64, true);
        is_refined[i] = true;
        refined += 1;
    };
    let constant = opts.margin * calibration_max_ratio;
    let mut test = pair_ratios(data, c, opts.test_pairs, opts, 2);
    let suspects: Vec<usize> = (0..test.len()).filter(|&i| test[i] > constant).collect();
    refined += suspects.len();
    let updates: Vec<(usize, f64)> =
        suspects.into_par_iter().map(|i| (i, pair_ratio(data, c, opts, 2, i as u64, true))).collect();
    for (i, r) in updates {
        test[i] = r;
    }
    let test_max_ratio = test.iter().copied().fold(0.0, f64::max);
    let violations = test.iter().filter(|&&r| r > constant).count();
    Ok(QuasiLipschitzReport { constant, calibration_max_ratio, test_max_ratio, violations, test_pairs: opts.test_pairs, refined })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleOptions {
    pub order: u32,
    pub carriers_per_axis: usize,
    /// Fixed Monte Carlo chains for terms of order 2 and 3.
    pub inner_samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for ParticleOptions {
    fn default() -> Self {
        ParticleOptions { order: 1, carriers_per_axis: 24, inner_samples: 64, seed: 0, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleResult {
    pub path: CharPath,
    /// `|I(T) - I(0) - ∫₀ᵀ dI/dt|` for `I(t) = ∫ f(t) g dx` with a Gaussian test function `g`.
    pub weak_residual: f64,
    pub steps: usize,
}

/// Vorticity carried on a grid of Lagrangian points. The velocity field is
/// divergence free, so the quadrature weights `f₀(z_j)·area` stay fixed while
/// the points move.
struct Carriers {
    weights: Vec<f64>,
    blob: f64,
}

/// Fixed polar chains `[(r, e)]` for the higher-order terms.
struct Chains {
    steps: Vec<Vec<(f64, [f64; 2])>>,
}

struct ParticleField<'a> {
    c: f64,
    order: u32,
    carriers: &'a Carriers,
    chains: &'a Chains,
}

impl ParticleField<'_> {
    fn blob_ratio(&self, a: [f64; 2], y: [f64; 2]) -> f64 {
        let d = [a[0] - y[0], a[1] - y[1]];
        (a[0] * d[0] + a[1] * d[1]) / (d[0] * d[0] + d[1] * d[1] + self.carriers.blob.powi(2))
    }

    /// `∫ g(x_n) f(t, x_n) dσ(x_n)` over the carriers.
    fn carrier_sum(&self, ys: &[[f64; 2]], g: impl Fn([f64; 2]) -> f64) -> f64 {
        ys.iter().zip(&self.carriers.weights).map(|(&y, &w)| w * sigma(self.c, y) * g(y)).sum()
    }

    /// Velocity at `x`, and the Monte Carlo standard error of the higher terms.
    fn velocity(&self, x: [f64; 2], ys: &[[f64; 2]]) -> ([f64; 2], f64) {
        let c = self.c;
        let delta2 = self.carriers.blob.powi(2);
        let mut u = [0.0, 0.0];
        for (&y, &w) in ys.iter().zip(&self.carriers.weights) {
            let z = [x[0] - y[0], x[1] - y[1]];
            let s = w * sigma(c, y) / (z[0] * z[0] + z[1] * z[1] + delta2);
            u[0] -= z[1] * s;
            u[1] += z[0] * s;
        }
        u = [u[0] / (2.0 * PI), u[1] / (2.0 * PI)];
        let mut se2 = 0.0;
        for n in 2..=self.order {
            let scale = c.powi(n as i32 - 1) * (2.0 * PI).powi(-(n as i32));
            let per_chain: Vec<[f64; 2]> = self
                .chains
                .steps
                .iter()
                .map(|chain| {
                    let (r1, e1) = chain[0];
                    let mut xi = [x[0] + r1 * e1[0], x[1] + r1 * e1[1]];
                    let mut scalar = sigma(c, xi) * 2.0 * PI / radius_density(c, r1);
                    for &(r, e) in &chain[1..n as usize - 1] {
                        let next = [xi[0] + r * e[0], xi[1] + r * e[1]];
                        scalar *= -(xi[0] * e[0] + xi[1] * e[1]) * sigma(c, next) * 2.0 * PI / radius_density(c, r);
                        xi = next;
                    }
                    let last = xi;
                    scalar *= self.carrier_sum(ys, |y| self.blob_ratio(last, y));
                    let p = perp(e1);
                    [-p[0] * scalar * scale, -p[1] * scalar * scale]
                })
                .collect();
            for i in 0..2 {
                let est = McEstimate::from_samples(per_chain.iter().map(|v| v[i]));
                u[i] += est.mean;
                se2 += est.se * est.se;
            }
        }
        (u, se2.sqrt())
    }
}

/// Transports a particle and the vorticity carriers with classical RK4 under
/// the truncated series velocity.
pub fn particle_flow(data: &VorticityData, x0: [f64; 2], t_final: f64, c: f64, opts: &ParticleOptions) -> Result<ParticleResult> {
    let (carriers, chains, ys) = particle_setup(data, c, t_final, opts)?;
    let field = ParticleField { c, order: opts.order, carriers: &carriers, chains: &chains };
    let mut state: Vec<[f64; 2]> = std::iter::once(x0).chain(ys).collect();
    advance(&field, &mut state, t_final, opts)
}

/// Flows to `T` and back, carriers included; returns `|Φ_{-T}Φ_T(x₀) - x₀|`.
pub fn particle_round_trip(data: &VorticityData, x0: [f64; 2], t_final: f64, c: f64, opts: &ParticleOptions) -> Result<f64> {
    let (carriers, chains, ys) = particle_setup(data, c, t_final, opts)?;
    let field = ParticleField { c, order: opts.order, carriers: &carriers, chains: &chains };
    let mut state: Vec<[f64; 2]> = std::iter::once(x0).chain(ys).collect();
    advance(&field, &mut state, t_final, opts)?;
    advance(&field, &mut state, -t_final, opts)?;
    Ok((state[0][0] - x0[0]).hypot(state[0][1] - x0[1]))
}

fn particle_setup(data: &VorticityData, c: f64, t_final: f64, opts: &ParticleOptions) -> Result<(Carriers, Chains, Vec<[f64; 2]>)> {
    check_c(c)?;
    if !(1..=3).contains(&opts.order) {
        return Err(Error::invalid(format!("series order must be 1, 2 or 3, got {}", opts.order)));
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) || opts.carriers_per_axis < 2 || !t_final.is_finite() {
        return Err(Error::invalid("particle flow needs tol > 0, at least 2 carriers per axis and finite T"));
    }
    let m = opts.carriers_per_axis;
    let half = data.support_radius();
    let h = 2.0 * half / m as f64;
    let mut ys = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let y = [-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h];
            let f0 = data.eval(y);
            if f0 != 0.0 {
                ys.push(y);
                weights.push(f0 * h * h);
            }
        }
    }
    let mut rng = stream(opts.seed, 3, 0);
    let normal = Normal::new(0.0, 1.0 / c.sqrt()).expect("finite scale");
    let chains = Chains {
        steps: (0..opts.inner_samples)
            .map(|_| (0..2).map(|_| polar_step(&mut rng, &normal)).collect())
            .collect(),
    };
    Ok((Carriers { weights, blob: 2.0 * h }, chains, ys))
}

/// Classical RK4 on `[particle, carriers...]` over `[0, T]`.
fn advance(field: &ParticleField, state: &mut [[f64; 2]], t_final: f64, opts: &ParticleOptions) -> Result<ParticleResult> {
    let steps = ((t_final.abs() / opts.tol.powf(0.25)).ceil() as usize).max(8);
    let dt = t_final / steps as f64;
    let test_fn = |y: [f64; 2]| (-((y[0] - 0.3).powi(2) + (y[1] + 0.2).powi(2))).exp();
    let grad_test = |y: [f64; 2]| {
        let g = test_fn(y);
        [-2.0 * (y[0] - 0.3) * g, -2.0 * (y[1] + 0.2) * g]
    };
    let weights = &field.carriers.weights;
    let moment = |ys: &[[f64; 2]]| ys.iter().zip(weights).map(|(&y, &w)| w * test_fn(y)).sum::<f64>();
    let eval = |s: &[[f64; 2]]| -> (Vec<[f64; 2]>, f64) {
        let carriers_now = &s[1..];
        let vs: Vec<([f64; 2], f64)> = s.par_iter().map(|&p| field.velocity(p, carriers_now)).collect();
        let se = vs[0].1;
        (vs.into_iter().map(|(v, _)| v).collect(), se)
    };
    let rate = |s: &[[f64; 2]], v: &[[f64; 2]]| -> f64 {
        s[1..]
            .iter()
            .zip(&v[1..])
            .zip(weights)
            .map(|((&y, u), &w)| {
                let g = grad_test(y);
                w * (g[0] * u[0] + g[1] * u[1])
            })
            .sum()
    };
    let shift = |s: &[[f64; 2]], k: &[[f64; 2]], a: f64| -> Vec<[f64; 2]> {
        s.iter().zip(k).map(|(p, v)| [p[0] + a * v[0], p[1] + a * v[1]]).collect()
    };

    let x0 = state[0];
    let i0 = moment(&state[1..]);
    let mut times = vec![0.0];
    let mut points = vec![x0];
    let mut integral = 0.0;
    let (mut k1, mut se) = eval(state);
    let mut rate_prev = rate(state, &k1);
    for step in 0..steps {
        let t = step as f64 * dt;
        if se * t_final.abs() > opts.tol {
            return Err(Error::Resolution(format!(
                "kernel Monte Carlo error {se:.3e} too large for tol {:.1e} at t = {t}",
                opts.tol
            )));
        }
        let (k2, _) = eval(&shift(state, &k1, 0.5 * dt));
        let (k3, _) = eval(&shift(state, &k2, 0.5 * dt));
        let (k4, _) = eval(&shift(state, &k3, dt));
        for (i, p) in state.iter_mut().enumerate() {
            for d in 0..2 {
                p[d] += dt / 6.0 * (k1[i][d] + 2.0 * k2[i][d] + 2.0 * k3[i][d] + k4[i][d]);
            }
        }
        (k1, se) = eval(state);
        let rate_now = rate(state, &k1);
        integral += 0.5 * dt * (rate_prev + rate_now);
        rate_prev = rate_now;
        times.push(t + dt);
        points.push(state[0]);
    }
    let weak_residual = (moment(&state[1..]) - i0 - integral).abs();
    Ok(ParticleResult { path: CharPath { initial_point: x0, times, points }, weak_residual, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn term_bound_values() {
        assert!((term_bound(1, 0.3).unwrap() - 1.0 / (2.0 * (2.0 * PI).sqrt())).abs() < 1e-15);
        assert!((term_bound(2, 0.5).unwrap() - 0.015874).abs() < 1e-6);
        let ratio = term_bound(3, 0.4).unwrap() / term_bound(2, 0.4).unwrap();
        assert!((ratio - 0.4 / (2.0 * PI)).abs() < 1e-15);
        assert!(term_bound(0, 0.5).is_err());
    }

    #[test]
    fn modulus_values() {
        assert_eq!(modulus(1.0), 1.0);
        assert!((modulus(1.0 - 1e-12) - 1.0).abs() < 1e-11);
        assert!((modulus((-1f64).exp()) - 2.0 / 1f64.exp()).abs() < 1e-15);
        assert_eq!(modulus(2.0), 2.0);
        assert_eq!(modulus(0.0), 0.0);
        let grid: Vec<f64> = (1..=1000).map(|i| modulus(i as f64 / 1000.0)).collect();
        assert!(grid.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn osgood_integral_matches_closed_form() {
        for delta in [0.5f64, 1e-3, 1e-20, 1e-300] {
            let closed = (1.0 - delta.ln()).ln();
            assert!((osgood_integral(delta).unwrap() - closed).abs() < 1e-12 * closed.max(1.0));
        }
        assert!(osgood_integral(0.0).is_err());
    }

    #[test]
    fn zero_vorticity() {
        let data = VorticityData::gaussian(0.0, 0.5);
        let s = velocity_series(&data, [0.3, 0.1], 3, 0.5, &SeriesOptions { samples: 1000, ..Default::default() }).unwrap();
        assert_eq!(s.value, [0.0, 0.0]);
        let p = particle_flow(&data, [0.2, -0.4], 0.5, 0.5, &ParticleOptions::default()).unwrap();
        assert_eq!(p.path.final_point(), [0.2, -0.4]);
        assert!(velocity_series(&data, [0.0, 0.0], 4, 0.5, &SeriesOptions::default()).is_err());
    }

    #[test]
    fn term1_two_oracles_agree() {
        let data = VorticityData::gaussian(1.0, 0.7);
        for x in [[0.4, 0.0], [1.0, -1.5], [0.05, 0.02]] {
            let q = term1_quadrature(&data, x, 0.5).unwrap();
            let r = term1_radial(&data, x, 0.5).unwrap();
            assert!((q[0] - r[0]).abs() < 1e-9 && (q[1] - r[1]).abs() < 1e-9, "{q:?} vs {r:?}");
        }
        assert!(term1_radial(&VorticityData::from_name("dipole", 1.0, 0.5, 1.0).unwrap(), [1.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn term1_monte_carlo_matches_quadrature() {
        let data = VorticityData::Ring { amplitude: 1.0, radius: 1.0, width: 0.4 };
        let opts = SeriesOptions { samples: 200_000, seed: 3, se_tol: 1.0 };
        for x in [[0.5, 0.5], [1.5, -0.2]] {
            let mc = series_term(&data, x, 1, 0.5, &opts).unwrap();
            let q = term1_quadrature(&data, x, 0.5).unwrap();
            for i in 0..2 {
                assert!((mc.value[i] - q[i]).abs() < 4.0 * mc.se[i] + 1e-12, "{mc:?} vs {q:?}");
            }
        }
    }

    #[test]
    fn catalog_and_sup_norm() {
        for name in ["gaussian", "ring", "dipole"] {
            let d = VorticityData::from_name(name, -2.0, 0.4, 1.0).unwrap();
            for i in -20..=20 {
                for j in -20..=20 {
                    let y = [0.1 * i as f64, 0.1 * j as f64];
                    assert!(d.eval(y).abs() <= d.sup_norm());
                }
            }
        }
        assert!(VorticityData::from_name("square", 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn kernel_difference_vanishes_for_equal_points() {
        let data = VorticityData::gaussian(1.0, 0.5);
        let mut rng = stream(0, 0, 0);
        let d = kernel_difference(&data, [0.3, 0.2], [0.3 + 1e-3, 0.2], 0.5, 4000, &mut rng);
        assert!(d.mean > 0.0 && d.mean < 0.1);
    }

    #[test]
    fn particle_reversibility() {
        let opts = ParticleOptions { tol: 1e-6, ..Default::default() };
        let gauss = VorticityData::gaussian(1.0, 0.5);
        let fwd = particle_flow(&gauss, [0.6, 0.1], 0.5, 0.5, &opts).unwrap();
        let p = fwd.path.final_point();
        assert!((p[0] - 0.6).hypot(p[1] - 0.1) > 1e-3);
        assert!(fwd.weak_residual < 1e-6);
        for data in [gauss, VorticityData::from_name("dipole", 2.0, 0.4, 1.0).unwrap()] {
            let err = particle_round_trip(&data, [0.6, 0.1], 0.5, 0.5, &opts).unwrap();
            assert!(err < 10.0 * opts.tol, "{} {err}", data.name());
        }
    }

    #[test]
    fn higher_orders_report_resolution() {
        let data = VorticityData::gaussian(1.0, 0.5);
        let opts = ParticleOptions { order: 2, inner_samples: 4, carriers_per_axis: 8, tol: 1e-12, ..Default::default() };
        assert!(matches!(particle_flow(&data, [0.3, 0.0], 0.5, 0.5, &opts), Err(Error::Resolution(_))));
        let loose = ParticleOptions { tol: 1e-1, ..opts };
        let r = particle_flow(&data, [0.3, 0.0], 0.1, 0.5, &loose).unwrap();
        assert_eq!(r.path.times.len(), r.steps + 1);
    }
}
