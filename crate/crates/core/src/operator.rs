//! The summation operator `(Sf)(v) = w(v) · Σ_{a <= v} u(a) f(a)`, its
//! adjoint, plain and mixed norms, and numerical estimates of the operator
//! norms `l_p -> l_q` and `l_q(l_p) -> l_q`.
//!
//! Every estimate is a certified lower bound: the returned value is the
//! ratio `‖S f‖_q / ‖f‖` recomputed from the returned maximizer `f`.

use crate::bounds::lower_certificate;
use crate::error::{Error, Result};
use crate::generators::Stream;
use crate::norm::{check_exponent, lp_norm_unchecked, PowerSum};
use crate::tree::{Exponents, RootedTree, WeightPair};

pub use crate::norm::lp_norm;

/// Largest tree accepted by [`brute_force_norm`].
pub const BRUTE_FORCE_LIMIT: usize = 8;
pub const DEFAULT_BRUTE_FORCE_SAMPLES: usize = 100_000;

fn check_len(t: &RootedTree, x: &[f64]) -> Result<()> {
    if x.len() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Applies `S`: one root-first pass carrying the running sum `Σ_{a<=v} u f`.
pub fn apply_summation(t: &RootedTree, wt: &WeightPair, f: &[f64]) -> Result<Vec<f64>> {
    wt.check_tree(t)?;
    check_len(t, f)?;
    Ok(apply_unchecked(t, wt, f))
}

fn apply_unchecked(t: &RootedTree, wt: &WeightPair, f: &[f64]) -> Vec<f64> {
    let mut running = vec![0.0; t.len()];
    let mut out = vec![0.0; t.len()];
    for &v in t.bfs_order() {
        let above = t.parent(v).map_or(0.0, |p| running[p]);
        running[v] = above + wt.u[v] * f[v];
        out[v] = wt.w[v] * running[v];
    }
    out
}

/// Applies the transpose of `S`: `h(a) = u(a) · Σ_{v >= a} w(v) y(v)`,
/// accumulated leaves-first.
pub fn adjoint_apply(t: &RootedTree, wt: &WeightPair, y: &[f64]) -> Result<Vec<f64>> {
    wt.check_tree(t)?;
    check_len(t, y)?;
    Ok(adjoint_unchecked(t, wt, y))
}

fn adjoint_unchecked(t: &RootedTree, wt: &WeightPair, y: &[f64]) -> Vec<f64> {
    let mut acc: Vec<f64> = wt.w.iter().zip(y).map(|(w, y)| w * y).collect();
    for &v in t.bfs_order().iter().rev() {
        if let Some(p) = t.parent(v) {
            acc[p] += acc[v];
        }
    }
    acc.iter_mut().zip(&wt.u).for_each(|(a, u)| *a *= u);
    acc
}

/// `l_q` norm across levels of the per-level `l_p` norms.
pub fn mixed_norm(t: &RootedTree, f: &[f64], p: f64, q: f64) -> Result<f64> {
    check_exponent(p)?;
    check_exponent(q)?;
    check_len(t, f)?;
    Ok(mixed_norm_unchecked(&t.level_sets(), f, p, q))
}

fn mixed_norm_unchecked(levels: &[Vec<usize>], f: &[f64], p: f64, q: f64) -> f64 {
    let mut outer = PowerSum::ZERO;
    for level in levels {
        let mut inner = PowerSum::ZERO;
        for &v in level {
            inner.add(f[v], p);
        }
        outer.add(inner.norm(p), q);
    }
    outer.norm(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Number of seeded random starts.
    pub restarts: usize,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Stop a start once the ratio grows by less than `tol` (relative).
    pub tol: f64,
    /// Also start from every path certificate of the bound `M`.
    pub include_certificate_starts: bool,
    pub seed: u64,
    /// Caller-supplied nonnegative starting vectors.
    pub extra_starts: Vec<Vec<f64>>,
    /// Ascent step used by [`mixed_operator_norm`].
    pub mixed_step: MixedStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MixedStep {
    /// Maximize `<f, S^T (Sf)^{q-1}>` over the mixed unit ball in closed form
    /// (nested Hölder). Monotone, with the convergence of the power method.
    #[default]
    DualMap,
    /// Projected gradient ascent on the Rayleigh ratio with backtracking.
    ProjectedGradient,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iter: 10_000,
            tol: 1e-10,
            include_certificate_starts: true,
            seed: 0,
            extra_starts: Vec::new(),
            mixed_step: MixedStep::DualMap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartLabel {
    /// Path certificate ending at the given vertex.
    Certificate(usize),
    Constant,
    /// The given random restart.
    Random(usize),
    /// The given entry of [`SolverOptions::extra_starts`].
    Supplied(usize),
}

impl std::fmt::Display for StartLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StartLabel::Certificate(v) => write!(f, "certificate:{v}"),
            StartLabel::Constant => write!(f, "constant"),
            StartLabel::Random(i) => write!(f, "random:{i}"),
            StartLabel::Supplied(i) => write!(f, "supplied:{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    /// Best certified lower bound on the operator norm.
    pub value: f64,
    /// Nonnegative maximizer with unit source norm.
    pub maximizer: Vec<f64>,
    /// Iterations summed over all starts.
    pub iterations: usize,
    /// Number of starts that were run.
    pub restarts_used: usize,
    /// Whether the winning start met the tolerance before the cap.
    pub converged: bool,
    pub start_label: StartLabel,
}

/// Which source norm the ascent works against.
#[derive(Clone, Copy)]
enum Source<'a> {
    Plain,
    Mixed(&'a [Vec<usize>]),
}

struct Problem<'a> {
    t: &'a RootedTree,
    wt: &'a WeightPair,
    e: Exponents,
    source: Source<'a>,
}

struct StartOutcome {
    ratio: f64,
    f: Vec<f64>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

impl Problem<'_> {
    fn source_norm(&self, f: &[f64]) -> f64 {
        match self.source {
            Source::Plain => lp_norm_unchecked(f, self.e.p),
            Source::Mixed(levels) => mixed_norm_unchecked(levels, f, self.e.p, self.e.q),
        }
    }

    /// Normalizes `f` in place and returns its Rayleigh ratio.
    fn normalize_and_ratio(&self, f: &mut [f64]) -> Result<f64> {
        let d = self.source_norm(f);
        if d == 0.0 {
            return Ok(0.0);
        }
        if !d.is_finite() {
            return Err(Error::NonFiniteIterate);
        }
        f.iter_mut().for_each(|x| *x /= d);
        let r = lp_norm_unchecked(&apply_unchecked(self.t, self.wt, f), self.e.q);
        if !r.is_finite() {
            return Err(Error::NonFiniteIterate);
        }
        Ok(r)
    }

    /// `S^T (Sf)^{q-1}` up to a positive factor, or `None` when `Sf = 0`.
    fn dual_direction(&self, f: &[f64]) -> Option<Vec<f64>> {
        let g = apply_unchecked(self.t, self.wt, f);
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(*x));
        if gmax == 0.0 {
            return None;
        }
        let y: Vec<f64> = g.iter().map(|x| (x / gmax).powf(self.e.q - 1.0)).collect();
        let h = adjoint_unchecked(self.t, self.wt, &y);
        let hmax = h.iter().fold(0.0f64, |m, x| m.max(*x));
        (hmax > 0.0).then(|| h.iter().map(|x| x / hmax).collect())
    }

    fn ascend(&self, start: &[f64], opts: &SolverOptions) -> Result<StartOutcome> {
        let mut f: Vec<f64> = start.iter().map(|x| x.max(0.0)).collect();
        let mut ratio = self.normalize_and_ratio(&mut f)?;
        let mut out = StartOutcome {
            ratio,
            f: f.clone(),
            iterations: 0,
            converged: true,
            trace: vec![ratio],
        };
        if ratio == 0.0 {
            return Ok(out);
        }
        out.converged = false;
        let mut step = None;
        for it in 1..=opts.max_iter {
            let next = match self.source {
                Source::Plain => self.power_step(&f),
                Source::Mixed(levels) => match opts.mixed_step {
                    MixedStep::DualMap => self.mixed_dual_step(&f, levels),
                    MixedStep::ProjectedGradient => {
                        self.gradient_step(&f, ratio, levels, &mut step)?
                    }
                },
            };
            out.iterations = it;
            let Some(mut next) = next else {
                out.converged = true;
                break;
            };
            let next_ratio = self.normalize_and_ratio(&mut next)?;
            out.trace.push(next_ratio);
            if next_ratio > ratio {
                out.ratio = next_ratio;
                out.f.clone_from(&next);
            }
            let gain = next_ratio - ratio;
            f = next;
            ratio = next_ratio;
            if gain <= opts.tol * next_ratio {
                out.converged = true;
                break;
            }
        }
        Ok(out)
    }

    /// One step of the nonlinear power method:
    /// `f <- (S^T (Sf)^{q-1})^{1/(p-1)}`. Monotone by Hölder's inequality.
    fn power_step(&self, f: &[f64]) -> Option<Vec<f64>> {
        let h = self.dual_direction(f)?;
        let expo = 1.0 / (self.e.p - 1.0);
        Some(h.iter().map(|x| x.powf(expo)).collect())
    }

    /// The mixed-norm analogue of [`Problem::power_step`]: with
    /// `h = S^T (Sf)^{q-1}` and `b_j = ‖h‖_{p'}` on level `j`, the maximizer of
    /// `<f, h>` over the unit ball of `l_q(l_p)` is
    /// `f = b_j^{q'-1} (h / b_j)^{p'-1}` on level `j`, up to normalization.
    fn mixed_dual_step(&self, f: &[f64], levels: &[Vec<usize>]) -> Option<Vec<f64>> {
        let h = self.dual_direction(f)?;
        let (p_dual, q_dual) = (self.e.p_dual, self.e.q_dual);
        let mut out = vec![0.0; h.len()];
        for level in levels {
            let mut acc = PowerSum::ZERO;
            for &v in level {
                acc.add(h[v], p_dual);
            }
            let b = acc.norm(p_dual);
            if b == 0.0 {
                continue;
            }
            let c = b.powf(q_dual - 1.0);
            for &v in level {
                out[v] = c * (h[v] / b).powf(p_dual - 1.0);
            }
        }
        Some(out)
    }

    /// Projected gradient step on the Rayleigh ratio over the mixed-norm
    /// sphere, with backtracking until the ratio increases. `f` has unit
    /// mixed norm on entry.
    fn gradient_step(
        &self,
        f: &[f64],
        ratio: f64,
        levels: &[Vec<usize>],
        step: &mut Option<f64>,
    ) -> Result<Option<Vec<f64>>> {
        let (p, q) = (self.e.p, self.e.q);
        let g = apply_unchecked(self.t, self.wt, f);
        let gnorm = lp_norm_unchecked(&g, q);
        if gnorm == 0.0 {
            return Ok(None);
        }
        let y: Vec<f64> = g.iter().map(|x| (x / gnorm).powf(q - 1.0)).collect();
        let mut grad = adjoint_unchecked(self.t, self.wt, &y);
        // Subtract ratio · ∇‖f‖_{q(p)}; zero level blocks take subgradient 0.
        for level in levels {
            let mut inner = PowerSum::ZERO;
            for &v in level {
                inner.add(f[v], p);
            }
            let l = inner.norm(p);
            if l == 0.0 {
                continue;
            }
            let lq = l.powf(q - 1.0);
            for &v in level {
                grad[v] -= ratio * lq * (f[v] / l).powf(p - 1.0);
            }
        }
        // Active constraints f >= 0 with an outward gradient do not move.
        for (gv, fv) in grad.iter_mut().zip(f) {
            if *fv == 0.0 && *gv < 0.0 {
                *gv = 0.0;
            }
        }
        let gmax = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gmax == 0.0 || !gmax.is_finite() {
            return Ok(None);
        }
        let fmax = f.iter().fold(0.0f64, |m, x| m.max(*x));
        let mut s = step.unwrap_or(0.25 * fmax / gmax) * 2.0;
        for _ in 0..60 {
            let mut cand: Vec<f64> = f
                .iter()
                .zip(&grad)
                .map(|(x, d)| (x + s * d).max(0.0))
                .collect();
            let r = self.normalize_and_ratio(&mut cand)?;
            if r > ratio {
                *step = Some(s);
                return Ok(Some(cand));
            }
            s *= 0.5;
        }
        Ok(None)
    }

    fn starts(&self, opts: &SolverOptions) -> Result<Vec<(StartLabel, Vec<f64>)>> {
        let n = self.t.len();
        let mut starts = Vec::new();
        if opts.include_certificate_starts {
            for v in 0..n {
                let f = lower_certificate(self.t, self.wt, &self.e, v)?;
                if f.iter().any(|x| *x > 0.0) {
                    starts.push((StartLabel::Certificate(v), f));
                }
            }
        }
        starts.push((StartLabel::Constant, vec![1.0; n]));
        let mut rng = Stream::new(opts.seed);
        for i in 0..opts.restarts {
            let f = (0..n).map(|_| rng.unit() + 1e-3).collect();
            starts.push((StartLabel::Random(i), f));
        }
        for (i, f) in opts.extra_starts.iter().enumerate() {
            check_len(self.t, f)?;
            starts.push((StartLabel::Supplied(i), f.clone()));
        }
        Ok(starts)
    }

    fn solve(&self, opts: &SolverOptions) -> Result<NormEstimate> {
        let n = self.t.len();
        if self.wt.u.iter().all(|x| *x == 0.0) || self.wt.w.iter().all(|x| *x == 0.0) {
            let mut f = vec![1.0; n];
            let d = self.source_norm(&f);
            f.iter_mut().for_each(|x| *x /= d);
            return Ok(NormEstimate {
                value: 0.0,
                maximizer: f,
                iterations: 0,
                restarts_used: 0,
                converged: true,
                start_label: StartLabel::Constant,
            });
        }
        let starts = self.starts(opts)?;
        let mut best: Option<(StartLabel, StartOutcome)> = None;
        let mut iterations = 0;
        for (label, f0) in &starts {
            let out = self.ascend(f0, opts)?;
            iterations += out.iterations;
            // Ties keep the earliest start.
            if best.as_ref().is_none_or(|(_, b)| out.ratio > b.ratio) {
                best = Some((*label, out));
            }
        }
        let (label, out) = best.expect("at least the constant start runs");
        Ok(NormEstimate {
            value: out.ratio,
            maximizer: out.f,
            iterations,
            restarts_used: starts.len(),
            converged: out.converged,
            start_label: label,
        })
    }
}

/// Estimates the `l_p -> l_q` norm of `S` by the nonlinear power method
/// from many starts.
pub fn operator_norm(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    opts: &SolverOptions,
) -> Result<NormEstimate> {
    wt.check_tree(t)?;
    Problem {
        t,
        wt,
        e: *e,
        source: Source::Plain,
    }
    .solve(opts)
}

/// Estimates the `l_q(l_p) -> l_q` norm of `S` from many starts, using the
/// ascent step selected by [`SolverOptions::mixed_step`].
pub fn mixed_operator_norm(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    opts: &SolverOptions,
) -> Result<NormEstimate> {
    wt.check_tree(t)?;
    let levels = t.level_sets();
    Problem {
        t,
        wt,
        e: *e,
        source: Source::Mixed(&levels),
    }
    .solve(opts)
}

/// Ratio sequence of a single ascent run from `start` (plain source norm).
pub fn ascent_trace(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    wt.check_tree(t)?;
    check_len(t, start)?;
    Ok(Problem {
        t,
        wt,
        e: *e,
        source: Source::Plain,
    }
    .ascend(start, opts)?
    .trace)
}

/// Ratio sequence of a single mixed-norm ascent run from `start`.
pub fn mixed_ascent_trace(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    wt.check_tree(t)?;
    check_len(t, start)?;
    let levels = t.level_sets();
    Ok(Problem {
        t,
        wt,
        e: *e,
        source: Source::Mixed(&levels),
    }
    .ascend(start, opts)?
    .trace)
}

/// `‖S f‖_q / ‖f‖_p`, zero for `f = 0`.
pub fn rayleigh_ratio(t: &RootedTree, wt: &WeightPair, e: &Exponents, f: &[f64]) -> Result<f64> {
    let d = lp_norm_unchecked(f, e.p);
    let g = apply_summation(t, wt, f)?;
    Ok(if d == 0.0 {
        0.0
    } else {
        lp_norm_unchecked(&g, e.q) / d
    })
}

/// `‖S f‖_q / ‖f‖_{l_q(l_p)}`, zero for `f = 0`.
pub fn mixed_rayleigh_ratio(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    f: &[f64],
) -> Result<f64> {
    let d = mixed_norm(t, f, e.p, e.q)?;
    let g = apply_summation(t, wt, f)?;
    Ok(if d == 0.0 {
        0.0
    } else {
        lp_norm_unchecked(&g, e.q) / d
    })
}

/// Reference estimate for tiny trees: best of `samples` random nonnegative
/// directions and all 0/1 indicator vectors, each of the best few refined
/// by cyclic golden-section search on single coordinates.
pub fn brute_force_norm(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    const KEEP: usize = 8;
    wt.check_tree(t)?;
    let n = t.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let ratio = |f: &[f64]| -> f64 {
        let d = lp_norm_unchecked(f, e.p);
        if d == 0.0 {
            0.0
        } else {
            lp_norm_unchecked(&apply_unchecked(t, wt, f), e.q) / d
        }
    };

    let mut pool: Vec<(f64, Vec<f64>)> = Vec::new();
    let consider = |f: Vec<f64>, pool: &mut Vec<(f64, Vec<f64>)>| {
        let r = ratio(&f);
        if pool.len() < KEEP || r > pool[pool.len() - 1].0 {
            pool.push((r, f));
            pool.sort_by(|a, b| b.0.total_cmp(&a.0));
            pool.truncate(KEEP);
        }
    };
    for mask in 1u32..(1 << n) {
        consider(
            (0..n).map(|i| f64::from((mask >> i) & 1)).collect(),
            &mut pool,
        );
    }
    let mut rng = Stream::new(seed);
    for _ in 0..samples {
        // Exponential coordinates give uniformly distributed simplex directions.
        consider(
            (0..n).map(|_| -(1.0 - rng.unit()).ln()).collect(),
            &mut pool,
        );
    }

    let mut best = 0.0f64;
    for (mut r, mut f) in pool {
        loop {
            let before = r;
            for i in 0..n {
                let fmax = f.iter().fold(0.0f64, |m, x| m.max(*x));
                f.iter_mut().for_each(|x| *x /= fmax);
                let (x, rx) = golden_max(0.0, 2.0, |x| {
                    let old = f[i];
                    f[i] = x;
                    let v = ratio(&f);
                    f[i] = old;
                    v
                });
                let cur = ratio(&f);
                if rx > cur {
                    f[i] = x;
                    r = rx;
                } else {
                    r = cur;
                }
            }
            if r - before <= 1e-9 * r {
                break;
            }
        }
        best = best.max(r);
    }
    Ok(best)
}

fn golden_max(mut a: f64, mut b: f64, mut g: impl FnMut(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > 1e-13 {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    // The endpoints are candidates too: optima often sit on f_i = 0.
    [(a, g(a)), (c, gc), (d, gd), (b, g(b))]
        .into_iter()
        .fold(
            (a, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        )
}
