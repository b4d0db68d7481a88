//! Triadic interaction coefficients of the Hermite-Galerkin vorticity
//! equation.
//!
//! With the Rodrigues-derived differentiation rule,
//!
//! ```text
//! ∇⊥H_p · ∇H_q = c Σ_k A(p, q, k) H_k
//! ```
//!
//! where `A` is the purely combinatorial coefficient computed by
//! [`interaction`]. All powers of `c` live in the vector field prefactor (see
//! [`crate::field::prefactor`]); [`oracle_interaction`] recovers `A` from a
//! quadrature projection divided by `c`.

mod cache;

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hermite::{hermite_1d_derivative, order_for_degree, quadrature_rule, GaussianParams, MultiIndex, Normalization, QuadratureRule};

pub use cache::{read_table, write_table, CONVENTION_TAG, MAGIC};

/// The box truncation `{k : 0 ≤ k1, k2 ≤ N}`, sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalerkinBasis {
    max_index: u32,
    indices: Vec<MultiIndex>,
}

impl GalerkinBasis {
    pub fn new(max_index: u32) -> Self {
        let indices = (0..=max_index)
            .flat_map(|k1| (0..=max_index).map(move |k2| MultiIndex::new(k1, k2)))
            .collect();
        GalerkinBasis { max_index, indices }
    }

    pub fn shared(max_index: u32) -> Arc<Self> {
        Arc::new(Self::new(max_index))
    }

    pub fn max_index(&self) -> u32 {
        self.max_index
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Number of modes, `(N+1)²`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, k: MultiIndex) -> Option<usize> {
        (k.k1 <= self.max_index && k.k2 <= self.max_index)
            .then(|| k.k1 as usize * (self.max_index as usize + 1) + k.k2 as usize)
    }

    pub fn contains(&self, k: MultiIndex) -> bool {
        self.position(k).is_some()
    }
}

fn ln_factorial(n: u64) -> f64 {
    const TABLE_LEN: usize = 1024;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        let mut acc = 0.0;
        t.push(0.0);
        for j in 1..TABLE_LEN {
            acc += (j as f64).ln();
            t.push(acc);
        }
        t
    });
    match table.get(n as usize) {
        Some(&v) => v,
        None => ln_gamma(n as f64 + 1.0),
    }
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `Θ(n, m, r) = [C(n,r) C(m,r) C(n+m-2r, n-r)]^{1/2}`, zero outside
/// `0 ≤ r ≤ min(n, m)`.
///
/// Symmetric in `(n, m)` bit for bit.
pub fn theta(n: i64, m: i64, r: i64) -> f64 {
    if n < 0 || m < 0 || r < 0 || r > n.min(m) {
        return 0.0;
    }
    let (n, m) = (n.min(m) as u64, n.max(m) as u64);
    let r = r as u64;
    let ln = ln_binomial(n, r) + ln_binomial(m, r) + ln_binomial(n + m - 2 * r, n - r);
    (0.5 * ln).exp()
}

/// `r_i = (p_i + q_i - 1 - k_i) / 2` when it is a non-negative integer.
fn lowering(p: u32, q: u32, k: u32) -> Option<i64> {
    let s = p as i64 + q as i64 - 1 - k as i64;
    (s >= 0 && s % 2 == 0).then_some(s / 2)
}

/// Parity and support filter shared by [`interaction`] and [`build_table`].
pub fn admissible(p: MultiIndex, q: MultiIndex, k: MultiIndex) -> bool {
    let outside = |pi: u32, qi: u32, ki: u32| pi > qi + 1 + ki || qi > pi + 1 + ki;
    lowering(p.k1, q.k1, k.k1).is_some()
        && lowering(p.k2, q.k2, k.k2).is_some()
        && !outside(p.k1, q.k1, k.k1)
        && !outside(p.k2, q.k2, k.k2)
}

/// Canonical orientation: `|q| < |p|`, ties broken lexicographically.
fn is_canonical(p: MultiIndex, q: MultiIndex) -> bool {
    (p.order(), p) > (q.order(), q)
}

/// The c-free coefficient `A(p, q, k)`.
///
/// `A(p, q, k) = -A(q, p, k)` holds exactly: the non-canonical orientation is
/// computed as the negation of the canonical one.
pub fn interaction(p: MultiIndex, q: MultiIndex, k: MultiIndex) -> f64 {
    if p == q || !admissible(p, q, k) {
        return 0.0;
    }
    if !is_canonical(p, q) {
        return -interaction(q, p, k);
    }
    let (Some(r1), Some(r2)) = (lowering(p.k1, q.k1, k.k1), lowering(p.k2, q.k2, k.k2)) else {
        return 0.0;
    };
    let (p1, p2, q1, q2) = (p.k1 as i64, p.k2 as i64, q.k1 as i64, q.k2 as i64);
    let first = ((p2 * q1) as f64).sqrt() * theta(p1, q1 - 1, r1) * theta(p2 - 1, q2, r2);
    let second = ((p1 * q2) as f64).sqrt() * theta(p1 - 1, q1, r1) * theta(p2, q2 - 1, r2);
    second - first
}

/// One stored coefficient, `|q| < |p|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub p: MultiIndex,
    pub q: MultiIndex,
    pub k: MultiIndex,
    pub value: f64,
}

/// Sparse `A(p, q, k)` over a basis, one orientation per pair, grouped by `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionTable {
    basis: Arc<GalerkinBasis>,
    entries: Vec<TableEntry>,
    /// `offsets[i]..offsets[i+1]` are the entries whose `k` is basis element `i`.
    offsets: Vec<usize>,
}

/// Default cap on the number of candidate triples scanned by [`build_table`].
pub const DEFAULT_TRIPLE_BUDGET: u64 = 2_000_000_000;

pub fn build_table(basis: Arc<GalerkinBasis>) -> Result<InteractionTable> {
    build_table_with_budget(basis, DEFAULT_TRIPLE_BUDGET)
}

pub fn build_table_with_budget(basis: Arc<GalerkinBasis>, max_triples: u64) -> Result<InteractionTable> {
    let d = basis.len() as u64;
    let triples = d.saturating_mul(d).saturating_mul(d);
    if triples > max_triples {
        return Err(Error::Resource(format!(
            "interaction table for N = {} needs {triples} candidate triples, budget is {max_triples}",
            basis.max_index()
        )));
    }
    let idx = basis.indices();
    let per_k: Vec<Vec<TableEntry>> = idx
        .par_iter()
        .map(|&k| {
            let mut out = Vec::new();
            if k.is_zero() {
                return out;
            }
            for &p in idx {
                if 2 * p.order() < k.order() {
                    continue;
                }
                for &q in idx {
                    if q.order() >= p.order() || !admissible(p, q, k) {
                        continue;
                    }
                    let value = interaction(p, q, k);
                    if value != 0.0 && value.is_finite() {
                        out.push(TableEntry { p, q, k, value });
                    }
                }
            }
            out
        })
        .collect();
    Ok(InteractionTable::from_grouped(basis, per_k))
}

impl InteractionTable {
    fn from_grouped(basis: Arc<GalerkinBasis>, per_k: Vec<Vec<TableEntry>>) -> Self {
        let mut offsets = Vec::with_capacity(per_k.len() + 1);
        let mut entries = Vec::with_capacity(per_k.iter().map(Vec::len).sum());
        offsets.push(0);
        for group in per_k {
            entries.extend(group);
            offsets.push(entries.len());
        }
        InteractionTable { basis, entries, offsets }
    }

    /// Rebuild from entries in any order. Entries must lie in the basis and be
    /// canonically oriented.
    pub(crate) fn from_entries(basis: Arc<GalerkinBasis>, entries: Vec<TableEntry>) -> Result<Self> {
        let mut per_k = vec![Vec::new(); basis.len()];
        for e in entries {
            let pos = basis.position(e.k);
            if pos.is_none() || !basis.contains(e.p) || !basis.contains(e.q) || e.q.order() >= e.p.order() {
                return Err(Error::invalid(format!("entry {}, {}, {} does not fit the basis", e.p, e.q, e.k)));
            }
            per_k[pos.unwrap()].push(e);
        }
        for group in &mut per_k {
            group.sort_by_key(|e| (e.p, e.q));
        }
        Ok(Self::from_grouped(basis, per_k))
    }

    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries with a given output mode `k`.
    pub fn for_mode(&self, k: MultiIndex) -> &[TableEntry] {
        match self.basis.position(k) {
            Some(i) => &self.entries[self.offsets[i]..self.offsets[i + 1]],
            None => &[],
        }
    }

    /// Stored `A(p, q, k)` in either orientation. Pairs with `|p| = |q|` are
    /// not stored and read as 0.
    pub fn get(&self, p: MultiIndex, q: MultiIndex, k: MultiIndex) -> f64 {
        let (a, b, sign) = if q.order() < p.order() { (p, q, 1.0) } else { (q, p, -1.0) };
        let group = self.for_mode(k);
        match group.binary_search_by_key(&(a, b), |e| (e.p, e.q)) {
            Ok(i) => sign * group[i].value,
            Err(_) => 0.0,
        }
    }
}

/// Total polynomial degree per axis of `∂H_p ∂H_q H_k`.
fn oracle_degree(p: MultiIndex, q: MultiIndex, k: MultiIndex) -> usize {
    (p.k1 + q.k1 + k.k1).max(p.k2 + q.k2 + k.k2) as usize
}

/// `(1/c) ⟨∇⊥H_p · ∇H_q, H_k⟩` under the normalized Gaussian weight, by tensor
/// Gauss-Hermite quadrature of sufficient order.
pub fn oracle_interaction(p: MultiIndex, q: MultiIndex, k: MultiIndex, params: GaussianParams) -> Result<f64> {
    let normalized = GaussianParams::normalized(params.c())?;
    let rule = quadrature_rule(order_for_degree(oracle_degree(p, q, k)), normalized)?;
    oracle_interaction_with(&rule, p, q, k)
}

/// [`oracle_interaction`] with a caller-supplied rule, so one rule can serve a
/// whole sweep.
pub fn oracle_interaction_with(rule: &QuadratureRule, p: MultiIndex, q: MultiIndex, k: MultiIndex) -> Result<f64> {
    let needed = oracle_degree(p, q, k);
    if rule.degree() < needed {
        return Err(Error::invalid(format!(
            "quadrature degree {} cannot integrate degree {needed} exactly",
            rule.degree()
        )));
    }
    if rule.normalization() != Normalization::Normalized {
        return Err(Error::invalid("the interaction oracle needs the normalized weight"));
    }
    let c = rule.c();
    let d = |n: u32, m: usize, x: f64| hermite_1d_derivative(n as usize, m, c, x);
    let projection = rule.integrate_2d(|[x1, x2]| {
        // ∇⊥H_p = (-∂₂H_p, ∂₁H_p)
        let perp1 = -d(p.k1, 0, x1) * d(p.k2, 1, x2);
        let perp2 = d(p.k1, 1, x1) * d(p.k2, 0, x2);
        let grad1 = d(q.k1, 1, x1) * d(q.k2, 0, x2);
        let grad2 = d(q.k1, 0, x1) * d(q.k2, 1, x2);
        (perp1 * grad1 + perp2 * grad2) * d(k.k1, 0, x1) * d(k.k2, 0, x2)
    });
    Ok(projection / c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mi(a: u32, b: u32) -> MultiIndex {
        MultiIndex::new(a, b)
    }

    #[test]
    fn theta_values() {
        assert_abs_diff_eq!(theta(1, 1, 0), 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(theta(2, 2, 1), 8f64.sqrt(), epsilon = 1e-14);
        assert_eq!(theta(0, 0, 0), 1.0);
        assert_eq!(theta(2, 3, 3), 0.0);
        assert_eq!(theta(-1, 3, 0), 0.0);
        assert_eq!(theta(2, 3, -1), 0.0);
        assert_eq!(theta(4, 7, 2), theta(7, 4, 2));
    }

    #[test]
    fn theta_large_arguments_finite() {
        let v = theta(150, 170, 60);
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn interaction_hand_values() {
        assert_eq!(interaction(mi(1, 0), mi(0, 1), mi(0, 0)), 1.0);
        assert_eq!(interaction(mi(0, 1), mi(1, 0), mi(0, 0)), -1.0);
        for k in GalerkinBasis::new(4).indices() {
            assert_eq!(interaction(mi(2, 1), mi(0, 0), *k), 0.0);
            assert_eq!(interaction(mi(2, 3), mi(2, 3), *k), 0.0);
        }
    }

    #[test]
    fn oracle_hand_values() {
        let params = GaussianParams::normalized(0.5).unwrap();
        let v = oracle_interaction(mi(1, 0), mi(0, 1), mi(0, 0), params).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-10);
        for (p, k) in [(mi(2, 1), mi(1, 0)), (mi(3, 2), mi(2, 2))] {
            assert_abs_diff_eq!(oracle_interaction(p, p, k, params).unwrap(), 0.0, epsilon = 1e-10);
        }
        let (p, q, k) = (mi(3, 1), mi(1, 2), mi(1, 2));
        let sum = oracle_interaction(p, q, k, params).unwrap() + oracle_interaction(q, p, k, params).unwrap();
        assert_abs_diff_eq!(sum, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn oracle_rejects_low_order() {
        let params = GaussianParams::normalized(0.5).unwrap();
        let rule = quadrature_rule(2, params).unwrap();
        assert!(oracle_interaction_with(&rule, mi(3, 3), mi(2, 2), mi(3, 1)).is_err());
    }

    #[test]
    fn oracle_matches_closed_form_small_box() {
        let basis = GalerkinBasis::new(3);
        for &c in &[0.3, 0.8] {
            let params = GaussianParams::normalized(c).unwrap();
            let rule = quadrature_rule(order_for_degree(9), params).unwrap();
            for &p in basis.indices() {
                for &q in basis.indices() {
                    for &k in basis.indices() {
                        let o = oracle_interaction_with(&rule, p, q, k).unwrap();
                        let a = interaction(p, q, k);
                        assert!((a - o).abs() <= 1e-8 * (1.0 + o.abs()), "{p} {q} {k}: {a} vs {o}");
                    }
                }
            }
        }
    }

    #[test]
    fn table_sizes() {
        assert!(build_table(GalerkinBasis::shared(0)).unwrap().is_empty());
        let t = build_table(GalerkinBasis::shared(2)).unwrap();
        assert!(!t.is_empty());
        for e in t.entries() {
            assert_eq!(e.value, interaction(e.p, e.q, e.k));
            assert!(e.q.order() < e.p.order());
            assert!(!e.k.is_zero());
        }
    }

    #[test]
    fn table_lookup_both_orientations() {
        let basis = GalerkinBasis::shared(3);
        let t = build_table(basis.clone()).unwrap();
        for &p in basis.indices() {
            for &q in basis.indices() {
                for &k in basis.indices() {
                    let expect = if p.order() == q.order() || k.is_zero() { 0.0 } else { interaction(p, q, k) };
                    assert_eq!(t.get(p, q, k), expect);
                }
            }
        }
    }

    #[test]
    fn table_budget() {
        let err = build_table_with_budget(GalerkinBasis::shared(5), 1000).unwrap_err();
        assert!(matches!(err, Error::Resource(ref m) if m.contains("N = 5")));
    }

    #[test]
    fn table_independent_of_thread_count() {
        let basis = GalerkinBasis::shared(4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| build_table(basis.clone()).unwrap());
        let b = many.install(|| build_table(basis.clone()).unwrap());
        assert_eq!(a, b);
    }
}
