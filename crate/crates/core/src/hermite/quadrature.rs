use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;

use super::{GaussianParams, Normalization};
use crate::error::{Error, Result};

/// A Gauss-Hermite rule for the 1D weight `w(x) ∝ e^{-c x²/2}`.
///
/// 2D integrals use the tensor product of the rule with itself, so the 2D
/// weight is `w(x1) w(x2)`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    c: f64,
    degree: usize,
    normalization: Normalization,
}

/// Nodes per axis for an integrand of polynomial degree `degree`.
pub fn order_for_degree(degree: usize) -> usize {
    (degree + 2) / 2 + 4
}

/// Gauss rule with `order` nodes, exact for polynomials of degree `2·order - 1`.
pub fn quadrature_rule(order: usize, params: GaussianParams) -> Result<QuadratureRule> {
    let order = NonZeroUsize::new(order).ok_or_else(|| Error::invalid("quadrature order must be at least 1"))?;
    let c = params.c();
    // Nodes t_i for ∫ f(t) e^{-t²} dt; substitute x = √(2/c) t.
    let rule = GaussHermite::new(order);
    let scale = (2.0 / c).sqrt();
    let weight_scale = match params.normalization() {
        Normalization::Normalized => 1.0 / PI.sqrt(),
        Normalization::Unnormalized => 1.0 / (c * PI).sqrt(),
    };
    let (nodes, weights) = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(t, _)| {
            let (t, w) = polish(t, order.get());
            (scale * t, weight_scale * w)
        })
        .unzip();
    Ok(QuadratureRule {
        nodes,
        weights,
        c,
        degree: 2 * order.get() - 1,
        normalization: params.normalization(),
    })
}

/// Orthonormal Hermite polynomials for `e^{-t²}`: returns `(p_n(t), p_{n-1}(t), Σ_{j<n} p_j(t)²)`.
fn orthonormal_hermite(n: usize, t: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut sum_sq = 0.0;
    for j in 0..n {
        sum_sq += cur * cur;
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * t * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

/// Newton-refines an eigenvalue-solver node and recomputes its Christoffel weight.
fn polish(mut t: f64, n: usize) -> (f64, f64) {
    for _ in 0..3 {
        let (p, pm1, _) = orthonormal_hermite(n, t);
        let dp = (2.0 * n as f64).sqrt() * pm1;
        if dp == 0.0 {
            break;
        }
        t -= p / dp;
    }
    let (_, _, sum_sq) = orthonormal_hermite(n, t);
    (t, 1.0 / sum_sq)
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Highest polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate_1d(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn integrate_2d(&self, mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
        let mut total = 0.0;
        for (&x1, &w1) in self.nodes.iter().zip(&self.weights) {
            for (&x2, &w2) in self.nodes.iter().zip(&self.weights) {
                total += w1 * w2 * f([x1, x2]);
            }
        }
        total
    }

    /// Tensor nodes and weights, row-major in `(x1, x2)`.
    pub fn tensor_points(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.nodes.iter().zip(&self.weights).flat_map(move |(&x1, &w1)| {
            self.nodes.iter().zip(&self.weights).map(move |(&x2, &w2)| ([x1, x2], w1 * w2))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::hermite_1d;

    fn params(c: f64) -> GaussianParams {
        GaussianParams::normalized(c).unwrap()
    }

    #[test]
    fn normalized_mass_is_one() {
        let rule = quadrature_rule(8, params(0.5)).unwrap();
        assert!((rule.integrate_1d(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((rule.integrate_2d(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(rule.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn unnormalized_mass_is_inverse_c() {
        let p = GaussianParams::new(0.4, Normalization::Unnormalized).unwrap();
        let rule = quadrature_rule(6, p).unwrap();
        assert!((rule.integrate_2d(|_| 1.0) - 1.0 / 0.4).abs() < 1e-13);
    }

    #[test]
    fn second_moment_is_inverse_c() {
        let rule = quadrature_rule(10, params(0.5)).unwrap();
        assert!((rule.integrate_1d(|x| x * x) - 2.0).abs() < 1e-13);
        let high = quadrature_rule(40, params(0.5)).unwrap();
        assert!((high.integrate_1d(|x| x * x) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn odd_moments_vanish() {
        for order in [1, 3, 7, 12] {
            let rule = quadrature_rule(order, params(0.3)).unwrap();
            let odd = rule.integrate_1d(|x| x.powi(2 * order as i32 + 1));
            let scale = rule.integrate_1d(|x| x.powi(2 * order as i32 + 2)).abs().max(1.0);
            assert!(odd.abs() < 1e-12 * scale, "order={order} odd={odd}");
        }
    }

    #[test]
    fn exact_to_declared_degree() {
        // E[x^{2m}] = (2m-1)!! / c^m for x ~ N(0, 1/c)
        let c = 0.7;
        let order = 9;
        let rule = quadrature_rule(order, params(c)).unwrap();
        assert_eq!(rule.degree(), 17);
        for m in 0..=8 {
            let dfact: f64 = (1..=2 * m).step_by(2).map(|j| j as f64).product();
            let exact = dfact / c.powi(m);
            let q = rule.integrate_1d(|x| x.powi(2 * m));
            assert!((q - exact).abs() <= 1e-12 * exact, "m={m}");
        }
    }

    #[test]
    fn zero_order_rejected() {
        assert!(quadrature_rule(0, params(0.5)).is_err());
    }

    #[test]
    fn one_dimensional_orthonormality() {
        let c = 0.25;
        let rule = quadrature_rule(order_for_degree(40), params(c)).unwrap();
        for n in 0..=20 {
            for m in 0..=20 {
                let g = rule.integrate_1d(|x| hermite_1d(n, c, x) * hermite_1d(m, c, x));
                let expect = if n == m { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12, "n={n} m={m} g={g}");
            }
        }
    }
}
