//! Dormand-Prince 5(4) with PI step control and the fourth-order dense output
//! of Hairer, Nørsett & Wanner. Integrates forward or backward in time.

use serde::{Deserialize, Serialize};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DopriOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Smallest allowed `|h|` relative to `max(1, |t|)`.
    pub min_step_ratio: f64,
}

impl DopriOptions {
    pub fn with_tol(tol: f64) -> Self {
        DopriOptions { rtol: tol, atol: tol, max_steps: 1_000_000, min_step_ratio: 1e-14 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// One accepted step with its interpolation coefficients.
#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

impl Segment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }
}

/// Dense solution over `[t0, t_end]` (or `[t_end, t0]` when integrating backward).
#[derive(Clone, Debug)]
pub struct DenseSolution {
    t0: f64,
    y0: Vec<f64>,
    segments: Vec<Segment>,
    t_end: f64,
    y_end: Vec<f64>,
    pub stats: IntegratorStats,
}

/// The integrator stopped. `t`, `y` are the last accepted point.
#[derive(Clone, Debug)]
pub struct DopriFailure {
    pub t: f64,
    pub y: Vec<f64>,
    pub reason: String,
}

impl DenseSolution {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn y_end(&self) -> &[f64] {
        &self.y_end
    }

    /// Accepted step times including both endpoints.
    pub fn step_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.segments.iter().map(|s| s.t0).collect();
        ts.push(self.t_end);
        ts
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_end >= self.t0 { (self.t0, self.t_end) } else { (self.t_end, self.t0) };
        (lo..=hi).contains(&t)
    }

    /// Interpolated state at `t`, which must lie in the integration interval.
    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        if !self.contains(t) {
            return None;
        }
        let mut out = vec![0.0; self.y0.len()];
        if self.segments.is_empty() || t == self.t0 {
            out.copy_from_slice(&self.y0);
            return Some(out);
        }
        if t == self.t_end {
            out.copy_from_slice(&self.y_end);
            return Some(out);
        }
        let forward = self.t_end > self.t0;
        // Segments are ordered along the direction of integration.
        let idx = self.segments.partition_point(|s| if forward { s.t0 <= t } else { s.t0 >= t });
        self.segments[idx.saturating_sub(1)].eval(t, &mut out);
        Some(out)
    }
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], opts: &DopriOptions) -> f64 {
    let n = y0.len().max(1) as f64;
    let sum: f64 = y0
        .iter()
        .zip(y1)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Starting step after Hairer's heuristic.
fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, span: f64, opts: &DopriOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len().max(1) as f64;
    let sc = |y: f64| opts.atol + opts.rtol * y.abs();
    let d0 = (y0.iter().map(|y| (y / sc(*y)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(y0).map(|(f, y)| (f / sc(*y)).powi(2)).sum::<f64>() / n).sqrt();
    let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(t0 + dir * h, &y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(y0).map(|((a, b), y)| ((a - b) / sc(*y)).powi(2)).sum::<f64>() / n).sqrt() / h;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / dmax).powf(0.2) };
    (100.0 * h).min(h1).min(span)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
pub fn solve<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, opts: &DopriOptions) -> Result<DenseSolution, DopriFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut stats = IntegratorStats::default();
    let mut segments = Vec::new();
    if t1 == t0 {
        return Ok(DenseSolution { t0, y0: y0.to_vec(), segments, t_end: t0, y_end: y0.to_vec(), stats });
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t0, y0, &k1, dir, span, opts);
    stats.evaluations += 1;

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut fac_old: f64 = 1e-4;
    let expo = 0.2 - BETA * 0.75;
    let mut last = false;
    let fail = |t: f64, y: &[f64], reason: String| DopriFailure { t, y: y.to_vec(), reason };

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(fail(t, &y, format!("exceeded {} steps", opts.max_steps)));
        }
        if h < opts.min_step_ratio * t.abs().max(1.0) {
            return Err(fail(t, &y, format!("step size underflow (h = {h:.3e})")));
        }
        if (t + dir * h - t1) * dir >= 0.0 || (t1 - t).abs() - h <= 1e-12 * span {
            h = (t1 - t).abs();
            last = true;
        }
        let hs = dir * h;
        let stage = |ys: &mut [f64], coeffs: &[(f64, &[f64])], y: &[f64]| {
            for i in 0..n {
                ys[i] = y[i] + hs * coeffs.iter().map(|(a, k)| a * k[i]).sum::<f64>();
            }
        };
        stage(&mut ys, &[(A21, &k1)], &y);
        f(t + C2 * hs, &ys, &mut k2);
        stage(&mut ys, &[(A31, &k1), (A32, &k2)], &y);
        f(t + C3 * hs, &ys, &mut k3);
        stage(&mut ys, &[(A41, &k1), (A42, &k2), (A43, &k3)], &y);
        f(t + C4 * hs, &ys, &mut k4);
        stage(&mut ys, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &y);
        f(t + C5 * hs, &ys, &mut k5);
        stage(&mut ys, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], &y);
        f(t + hs, &ys, &mut k6);
        stage(&mut y1, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], &y);
        f(t + hs, &y1, &mut k7);
        stats.evaluations += 6;

        for i in 0..n {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&y, &y1, &err, opts);
        if !e.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            stats.rejected += 1;
            last = false;
            h *= FAC_MIN;
            continue;
        }
        let fac11 = e.powf(expo);
        if e <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = e.max(1e-4);
            stats.accepted += 1;

            let mut r = [y.clone(), vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                r[1][i] = ydiff;
                r[2][i] = bspl;
                r[3][i] = ydiff - hs * k7[i] - bspl;
                r[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            segments.push(Segment { t0: t, h: hs, rcont: r });

            std::mem::swap(&mut k1, &mut k7);
            std::mem::swap(&mut y, &mut y1);
            t = if last { t1 } else { t + hs };
            if last {
                return Ok(DenseSolution { t0, y0: y0.to_vec(), segments, t_end: t1, y_end: y, stats });
            }
            h /= fac;
        } else {
            stats.rejected += 1;
            last = false;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let opts = DopriOptions::with_tol(1e-10);
        let sol = solve(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], 2.0, &opts).unwrap();
        assert!((sol.y_end()[0] - (-2f64).exp()).abs() < 1e-9);
        for t in [0.1, 0.77, 1.5] {
            let y = sol.eval(t).unwrap()[0];
            assert!((y - (-t).exp()).abs() < 1e-8, "t={t}");
        }
        assert!(sol.eval(2.5).is_none());
    }

    #[test]
    fn backward_in_time() {
        let opts = DopriOptions::with_tol(1e-10);
        let sol = solve(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], -1.0, &opts).unwrap();
        assert!((sol.y_end()[0] - 1f64.exp()).abs() < 1e-8);
        assert!((sol.eval(-0.4).unwrap()[0] - 0.4f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let opts = DopriOptions::with_tol(1e-11);
        let f = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let sol = solve(f, 0.0, &[0.0, 1.0], 10.0, &opts).unwrap();
        for i in 0..200 {
            let t = 0.05 * i as f64;
            let y = sol.eval(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-8 && (y[1] - t.cos()).abs() < 1e-8, "t={t}");
        }
        assert!(sol.stats.accepted > 10);
    }

    #[test]
    fn zero_span() {
        let sol = solve(|_, _, dy| dy[0] = 1.0, 3.0, &[2.0], 3.0, &DopriOptions::with_tol(1e-8)).unwrap();
        assert_eq!(sol.y_end(), &[2.0]);
        assert_eq!(sol.eval(3.0).unwrap(), vec![2.0]);
    }

    #[test]
    fn blowup_is_a_failure() {
        // y' = y², y(0) = 1 blows up at t = 1.
        let err = solve(|_, y, dy| dy[0] = y[0] * y[0], 0.0, &[1.0], 2.0, &DopriOptions::with_tol(1e-8)).unwrap_err();
        assert!((err.t - 1.0).abs() < 1e-3, "{err:?}");
        assert!(err.y[0].is_finite());
    }
}
