//! Closed-form two-sided bound quantities for the summation operator.
//!
//! * [`theorem1_bound`]: `M = max_v ‖u‖_{p'}([root, v]) · ‖w‖_q(T_v)`, equivalent
//!   to the `l_p -> l_q` norm for `1 < p < q < ∞`.
//! * [`bennett_bound`]: the same quantity for sequences (chains), valid for
//!   `p <= q`.
//! * [`theorem2_bound`] / [`theorem2_vertex_form`]: the level form for regular
//!   trees with level-constant weights, equivalent to the `l_q(l_p) -> l_q` norm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{LevelProfile, LevelWeights};
use crate::norm::PowerSum;
use crate::tree::{Exponents, Regime, RootedTree, WeightPair};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub value: f64,
    /// Vertex id, sequence index or level attaining the maximum (smallest on ties).
    pub argmax: usize,
    /// The products being maximized, indexed like `argmax`.
    pub terms: Vec<f64>,
    /// False when the exponents fall outside the regime the bound is stated for.
    pub in_regime: bool,
}

impl BoundReport {
    fn from_terms(terms: Vec<f64>, in_regime: bool) -> Self {
        let mut argmax = 0;
        for (i, t) in terms.iter().enumerate() {
            if *t > terms[argmax] {
                argmax = i;
            }
        }
        Self {
            value: terms[argmax],
            argmax,
            terms,
            in_regime,
        }
    }
}

pub fn theorem1_bound(t: &RootedTree, wt: &WeightPair, e: &Exponents) -> Result<BoundReport> {
    wt.check_tree(t)?;
    let path = t.path_norms(&wt.u, e.p_dual)?;
    let sub = t.subtree_norms(&wt.w, e.q)?;
    let terms = path.iter().zip(&sub).map(|(a, b)| a * b).collect();
    Ok(BoundReport::from_terms(terms, e.regime() == Regime::Below))
}

/// The path certificate for vertex `v`: `f(a) = u(a)^{p'/p}` on `[root, v]`
/// and zero elsewhere. Its Rayleigh ratio is at least
/// `‖u‖_{p'}([root, v]) · ‖w‖_q(T_v)`, because `Sf` equals at least
/// `w(x) · Σ_path u^{p'}` on every `x >= v`.
///
/// The path is rescaled by its largest `u` first, which leaves the ratio
/// unchanged.
pub fn lower_certificate(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    v: usize,
) -> Result<Vec<f64>> {
    wt.check_tree(t)?;
    let path = t.path_to_root(v)?;
    let umax = path.iter().fold(0.0f64, |m, &a| m.max(wt.u[a]));
    let mut f = vec![0.0; t.len()];
    if umax == 0.0 {
        return Ok(f);
    }
    let expo = e.p_dual / e.p;
    for a in path {
        f[a] = (wt.u[a] / umax).powf(expo);
    }
    Ok(f)
}

/// `max_m (Σ_{n>=m} w_n^q)^{1/q} (Σ_{n<=m} u_n^{p'})^{1/p'}`.
pub fn bennett_bound(u: &[f64], w: &[f64], e: &Exponents) -> Result<BoundReport> {
    if u.len() != w.len() {
        return Err(Error::LengthMismatch {
            u: u.len(),
            w: w.len(),
        });
    }
    if u.is_empty() {
        return Err(Error::InvalidSize(0));
    }
    if e.regime() == Regime::Above {
        return Err(Error::InvalidExponent(format!(
            "chain criterion needs p <= q, got p = {}, q = {}",
            e.p, e.q
        )));
    }
    WeightPair::new(u.to_vec(), w.to_vec())?;
    let n = u.len();
    let mut suffix = vec![0.0; n];
    let mut acc = PowerSum::ZERO;
    for m in (0..n).rev() {
        acc.add(w[m], e.q);
        suffix[m] = acc.norm(e.q);
    }
    let mut acc = PowerSum::ZERO;
    let terms = (0..n)
        .map(|m| {
            acc.add(u[m], e.p_dual);
            acc.norm(e.p_dual) * suffix[m]
        })
        .collect();
    Ok(BoundReport::from_terms(terms, true))
}

/// `max_j u_j (Σ_{i>=j} w_i^q S(i)/S(j))^{1/q}` over the profile's levels.
pub fn theorem2_bound(
    profile: &LevelProfile,
    lw: &LevelWeights,
    e: &Exponents,
) -> Result<BoundReport> {
    let levels = profile.depth() + 1;
    if lw.len() != levels || lw.w_levels.len() != levels {
        return Err(Error::DepthMismatch {
            profile: levels,
            weights: lw.len(),
        });
    }
    let s = profile.level_sizes();
    // Σ_{i>=j} w_i^q S(i) in scaled form; S(i)^{1/q} w_i has the same q-th power.
    let mut tails = vec![PowerSum::ZERO; levels];
    let mut acc = PowerSum::ZERO;
    for i in (0..levels).rev() {
        acc.add(lw.w_levels[i] * s[i].powf(1.0 / e.q), e.q);
        tails[i] = acc;
    }
    let terms = (0..levels)
        .map(|j| lw.u_levels[j] * tails[j].norm(e.q) / s[j].powf(1.0 / e.q))
        .collect();
    Ok(BoundReport::from_terms(terms, e.regime() == Regime::Below))
}

/// `max_v u(v) · ‖w‖_q(T_v)`.
pub fn theorem2_vertex_form(t: &RootedTree, wt: &WeightPair, e: &Exponents) -> Result<BoundReport> {
    wt.check_tree(t)?;
    let sub = t.subtree_norms(&wt.w, e.q)?;
    let terms = wt.u.iter().zip(&sub).map(|(a, b)| a * b).collect();
    Ok(BoundReport::from_terms(terms, e.regime() == Regime::Below))
}
