//! Sigma-sets, the partition of a tree into sigma-blocks, the reduced tree of
//! blocks, and checks of the inequalities the construction guarantees.
//!
//! For a vertex `v` the sigma-set is `{x >= v : ‖w‖_q(T_x) >= σ ‖w‖_q(T_v)}`.
//! Blocks are carved round by round: every minimal vertex of what is left
//! takes its sigma-set, until nothing is left. Block `k` is a child of block
//! `m` in the reduced tree when the root of `k` hangs off a vertex of `m`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::norm::PowerSum;
use crate::operator::{operator_norm, SolverOptions};
use crate::tree::{Exponents, RootedTree, WeightPair};

pub const DEFAULT_SIGMA: f64 = 0.1;

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

/// The sigma-set of `v`, sorted ascending. When `‖w‖_q(T_v) = 0` the
/// defining inequality is vacuous and `{v}` is returned instead.
pub fn sigma_set(t: &RootedTree, w: &[f64], q: f64, v: usize, sigma: f64) -> Result<Vec<usize>> {
    check_sigma(sigma)?;
    let norms = t.subtree_norms(w, q)?;
    if v >= t.len() {
        return Err(Error::InvalidVertex(v));
    }
    Ok(sigma_set_from_norms(t, &norms, v, sigma))
}

fn sigma_set_from_norms(t: &RootedTree, norms: &[f64], v: usize, sigma: f64) -> Vec<usize> {
    if norms[v] == 0.0 {
        return vec![v];
    }
    let threshold = sigma * norms[v];
    let mut set: Vec<usize> = t
        .subtree_vertices(v)
        .expect("vertex checked by caller")
        .into_iter()
        .filter(|&x| norms[x] >= threshold)
        .collect();
    set.sort_unstable();
    set
}

/// Vertices of `set` with no child in `set`.
fn maximal_vertices(t: &RootedTree, set: &[usize], in_set: &[bool]) -> Vec<usize> {
    set.iter()
        .copied()
        .filter(|&x| t.children(x).iter().all(|&c| !in_set[c]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub root: usize,
    /// Sorted ascending.
    pub vertices: Vec<usize>,
    /// Construction round that carved this block (0 for the root block).
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTree {
    /// One vertex per block; vertex `m` is block `m`.
    pub tree: RootedTree,
    /// `‖u‖_{p'}` over each block.
    pub u_hat: Vec<f64>,
    /// `‖w‖_q` over each block.
    pub w_hat: Vec<f64>,
}

impl ReducedTree {
    pub fn weights(&self) -> WeightPair {
        WeightPair {
            u: self.u_hat.clone(),
            w: self.w_hat.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPartition {
    pub sigma: f64,
    pub q: f64,
    pub blocks: Vec<Block>,
    /// Block index of every vertex.
    pub membership: Vec<usize>,
    /// Blocks whose root has a zero subtree norm (singleton convention).
    pub degenerate_blocks: usize,
    /// Filled in by [`reduce`].
    pub reduced: Option<ReducedTree>,
}

impl SigmaPartition {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Parent block of block `k` in the reduced tree.
    pub fn parent_block(&self, t: &RootedTree, k: usize) -> Option<usize> {
        t.parent(self.blocks[k].root).map(|p| self.membership[p])
    }
}

/// Carves the tree into sigma-blocks. Within a round, minimal vertices are
/// processed in ascending id order, so the result is deterministic.
pub fn build_partition(t: &RootedTree, w: &[f64], q: f64, sigma: f64) -> Result<SigmaPartition> {
    check_sigma(sigma)?;
    let norms = t.subtree_norms(w, q)?;
    let n = t.len();
    let mut membership = vec![usize::MAX; n];
    let mut blocks = Vec::new();
    let mut degenerate_blocks = 0;
    let mut roots = vec![t.root()];
    let mut round = 0;
    while !roots.is_empty() {
        let mut next = Vec::new();
        for &r in &roots {
            let id = blocks.len();
            if norms[r] == 0.0 {
                degenerate_blocks += 1;
            }
            let vertices: Vec<usize> = sigma_set_from_norms(t, &norms, r, sigma)
                .into_iter()
                .filter(|&x| membership[x] == usize::MAX)
                .collect();
            for &x in &vertices {
                membership[x] = id;
            }
            blocks.push(Block {
                root: r,
                vertices,
                round,
            });
        }
        for b in &blocks[blocks.len() - roots.len()..] {
            for &x in &b.vertices {
                next.extend(
                    t.children(x)
                        .iter()
                        .copied()
                        .filter(|&c| membership[c] == usize::MAX),
                );
            }
        }
        next.sort_unstable();
        roots = next;
        round += 1;
    }
    Ok(SigmaPartition {
        sigma,
        q,
        blocks,
        membership,
        degenerate_blocks,
        reduced: None,
    })
}

/// Builds the reduced tree with block weights `û = ‖u‖_{p'}(A_m)` and
/// `ŵ = ‖w‖_q(A_m)`.
pub fn reduce(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    mut partition: SigmaPartition,
) -> Result<SigmaPartition> {
    wt.check_tree(t)?;
    let parents: Vec<Option<usize>> = (0..partition.block_count())
        .map(|k| partition.parent_block(t, k))
        .collect();
    let tree = RootedTree::from_parents(&parents)?;
    let block_norm = |x: &[f64], r: f64, b: &Block| {
        let mut acc = PowerSum::ZERO;
        for &v in &b.vertices {
            acc.add(x[v], r);
        }
        acc.norm(r)
    };
    let u_hat = partition
        .blocks
        .iter()
        .map(|b| block_norm(&wt.u, e.p_dual, b))
        .collect();
    let w_hat = partition
        .blocks
        .iter()
        .map(|b| block_norm(&wt.w, e.q, b))
        .collect();
    partition.reduced = Some(ReducedTree { tree, u_hat, w_hat });
    Ok(partition)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// False when the check was not run (e.g. instance too large).
    pub ran: bool,
    pub measured: f64,
    pub bound: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Run the numerical domination check only up to this many vertices.
    pub domination_max_n: usize,
    /// Relative slack for the domination check.
    pub domination_slack: f64,
    pub solver: SolverOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            domination_max_n: 40,
            domination_slack: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

/// Summary numbers used by the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionStats {
    pub block_count: usize,
    pub max_vmax_card: usize,
    pub min_succession_ratio: f64,
    pub max_succession_ratio: f64,
}

fn succession_ratios(t: &RootedTree, norms: &[f64], part: &SigmaPartition) -> (Vec<f64>, usize) {
    let mut ratios = Vec::new();
    let mut degenerate = 0;
    for k in 0..part.block_count() {
        if let Some(m) = part.parent_block(t, k) {
            let (top, child) = (norms[part.blocks[m].root], norms[part.blocks[k].root]);
            if top == 0.0 {
                degenerate += 1;
            } else {
                ratios.push(child / top);
            }
        }
    }
    (ratios, degenerate)
}

/// Largest number of maximal vertices over all sigma-sets.
fn max_vmax_card(t: &RootedTree, norms: &[f64], sigma: f64) -> usize {
    let mut in_set = vec![false; t.len()];
    let mut best = 0;
    for v in 0..t.len() {
        let set = sigma_set_from_norms(t, norms, v, sigma);
        set.iter().for_each(|&x| in_set[x] = true);
        best = best.max(maximal_vertices(t, &set, &in_set).len());
        set.iter().for_each(|&x| in_set[x] = false);
    }
    best
}

pub fn partition_stats(t: &RootedTree, w: &[f64], part: &SigmaPartition) -> Result<PartitionStats> {
    let norms = t.subtree_norms(w, part.q)?;
    let (ratios, _) = succession_ratios(t, &norms, part);
    Ok(PartitionStats {
        block_count: part.block_count(),
        max_vmax_card: max_vmax_card(t, &norms, part.sigma),
        min_succession_ratio: ratios.iter().copied().fold(f64::NAN, f64::min),
        max_succession_ratio: ratios.iter().copied().fold(f64::NAN, f64::max),
    })
}

/// Checks every property the construction guarantees:
///
/// * `succession_ratio`: `‖w‖_q(T_root(k)) < σ ‖w‖_q(T_root(m))` on every
///   reduced-tree edge `m -> k`;
/// * `vmax_card`: every sigma-set has at most `σ^{-q}` maximal vertices;
/// * `partition`: blocks are disjoint, cover the tree, are connected with
///   their root as minimum, and each round's roots are the minimal vertices
///   of what was left;
/// * `reduced_edges`: reduced-tree edges are exactly the succession relation;
/// * `reduced_weights`: block norms, and `‖ŵ‖_q` over reduced subtrees equal
///   `‖w‖_q` over the corresponding original subtrees;
/// * `domination`: the estimated norm on the tree does not exceed the
///   estimated norm on the reduced tree (small instances only).
pub fn verify_partition(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    part: &SigmaPartition,
    opts: &VerifyOptions,
) -> Result<CheckReport> {
    wt.check_tree(t)?;
    let sigma = part.sigma;
    check_sigma(sigma)?;
    let norms = t.subtree_norms(&wt.w, part.q)?;
    let n = t.len();
    let mut checks = Vec::new();

    // (i) succession ratio, in the same multiplied form used to carve blocks.
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    let mut degenerate = 0;
    for k in 0..part.block_count() {
        if let Some(m) = part.parent_block(t, k) {
            let (top, child) = (norms[part.blocks[m].root], norms[part.blocks[k].root]);
            if top == 0.0 {
                degenerate += 1;
                continue;
            }
            ok &= child < sigma * top;
            worst = worst.max(child / top);
        }
    }
    checks.push(Check {
        name: "succession_ratio",
        passed: ok,
        ran: true,
        measured: if worst.is_finite() { worst } else { 0.0 },
        bound: sigma,
        detail: format!(
            "{} edges, {degenerate} with zero-norm parent block skipped",
            part.block_count().saturating_sub(1)
        ),
    });

    // (ii) maximal-vertex count of every sigma-set.
    let card = max_vmax_card(t, &norms, sigma);
    let bound = sigma.powf(-part.q);
    checks.push(Check {
        name: "vmax_card",
        passed: card as f64 <= bound,
        ran: true,
        measured: card as f64,
        bound,
        detail: format!("max over {n} sigma-sets"),
    });

    // (iii) partition structure.
    let mut problems = Vec::new();
    let mut owner = vec![usize::MAX; n];
    for (k, b) in part.blocks.iter().enumerate() {
        for &x in &b.vertices {
            if owner[x] != usize::MAX {
                problems.push(format!("vertex {x} in blocks {} and {k}", owner[x]));
            }
            owner[x] = k;
        }
        if b.vertices.binary_search(&b.root).is_err() {
            problems.push(format!("block {k} misses its root {}", b.root));
        }
        for &x in &b.vertices {
            let parent_inside = t
                .parent(x)
                .is_some_and(|p| b.vertices.binary_search(&p).is_ok());
            if (x == b.root) == parent_inside {
                problems.push(format!("block {k} is not a subtree rooted at {}", b.root));
                break;
            }
        }
    }
    if let Some(x) = owner.iter().position(|&o| o == usize::MAX) {
        problems.push(format!("vertex {x} in no block"));
    }
    if owner != part.membership {
        problems.push("membership disagrees with block lists".into());
    }
    let rounds = part.blocks.iter().map(|b| b.round).max().unwrap_or(0);
    let mut assigned = vec![false; n];
    for round in 0..=rounds {
        let mut minimal: Vec<usize> = (0..n)
            .filter(|&x| !assigned[x] && t.parent(x).is_none_or(|p| assigned[p]))
            .collect();
        minimal.sort_unstable();
        let mut got: Vec<usize> = part
            .blocks
            .iter()
            .filter(|b| b.round == round)
            .map(|b| b.root)
            .collect();
        got.sort_unstable();
        if minimal != got {
            problems.push(format!(
                "round {round} roots {got:?} differ from minimal {minimal:?}"
            ));
        }
        for b in part.blocks.iter().filter(|b| b.round == round) {
            b.vertices.iter().for_each(|&x| assigned[x] = true);
        }
    }
    checks.push(Check {
        name: "partition",
        passed: problems.is_empty(),
        ran: true,
        measured: problems.len() as f64,
        bound: 0.0,
        detail: problems
            .first()
            .cloned()
            .unwrap_or_else(|| format!("{} blocks over {} rounds", part.block_count(), rounds + 1)),
    });

    if let Some(red) = &part.reduced {
        // Succession by definition: root(j) < root(s) and the path from
        // root(j) up to but excluding root(s) lies inside block j.
        let blocks = &part.blocks;
        let succeeds = |s: usize, j: usize| -> bool {
            let (rj, rs) = (blocks[j].root, blocks[s].root);
            if rj == rs || !t.precedes_or_eq(rj, rs) {
                return false;
            }
            let path = t.path_to_root(rs).expect("valid vertex");
            let from = path.iter().position(|&x| x == rj).expect("rj precedes rs");
            path[from..path.len() - 1]
                .iter()
                .all(|x| blocks[j].vertices.binary_search(x).is_ok())
        };
        let mut mismatches = 0;
        for s in 0..blocks.len() {
            for j in 0..blocks.len() {
                if succeeds(s, j) != (red.tree.parent(s) == Some(j)) {
                    mismatches += 1;
                }
            }
        }
        checks.push(Check {
            name: "reduced_edges",
            passed: mismatches == 0 && red.tree.len() == blocks.len(),
            ran: true,
            measured: mismatches as f64,
            bound: 0.0,
            detail: format!("{} reduced vertices", red.tree.len()),
        });

        let mut err = 0.0f64;
        let rel = |a: f64, b: f64| {
            if a == b {
                0.0
            } else {
                (a - b).abs() / a.abs().max(b.abs())
            }
        };
        for (k, b) in blocks.iter().enumerate() {
            let uk: Vec<f64> = b.vertices.iter().map(|&x| wt.u[x]).collect();
            let wk: Vec<f64> = b.vertices.iter().map(|&x| wt.w[x]).collect();
            err = err.max(rel(
                red.u_hat[k],
                crate::norm::lp_norm_unchecked(&uk, e.p_dual),
            ));
            err = err.max(rel(red.w_hat[k], crate::norm::lp_norm_unchecked(&wk, e.q)));
        }
        let reduced_sub = red.tree.subtree_norms(&red.w_hat, e.q)?;
        for (k, b) in blocks.iter().enumerate() {
            err = err.max(rel(reduced_sub[k], norms[b.root]));
        }
        checks.push(Check {
            name: "reduced_weights",
            passed: err <= 1e-12,
            ran: true,
            measured: err,
            bound: 1e-12,
            detail: "block norms and reduced subtree norms, max relative error".into(),
        });

        if n <= opts.domination_max_n {
            let on_tree = operator_norm(t, wt, e, &opts.solver)?.value;
            let on_reduced = operator_norm(&red.tree, &red.weights(), e, &opts.solver)?.value;
            let slack = opts.domination_slack * on_tree.max(on_reduced);
            checks.push(Check {
                name: "domination",
                passed: on_tree <= on_reduced + slack,
                ran: true,
                measured: on_tree,
                bound: on_reduced,
                detail: format!("tree estimate vs reduced estimate, slack {slack:e}"),
            });
        } else {
            checks.push(Check {
                name: "domination",
                passed: true,
                ran: false,
                measured: f64::NAN,
                bound: f64::NAN,
                detail: format!("skipped: n = {n} > {}", opts.domination_max_n),
            });
        }
    }
    Ok(CheckReport { checks })
}

/// For every vertex `v`, checks that the sigma-set `A` of `v` is the union of
/// the paths from `v` to its maximal vertices, and that
/// `Σ_{A} u^{p'} <= Σ_{ζ maximal} Σ_{v <= x <= ζ} u^{p'}(x)`
/// `<= card(maximal) · max_ζ Σ_{v <= x <= ζ} u^{p'}(x)`.
pub fn uw_block_bound_check(
    t: &RootedTree,
    wt: &WeightPair,
    e: &Exponents,
    sigma: f64,
) -> Result<CheckReport> {
    wt.check_tree(t)?;
    check_sigma(sigma)?;
    let norms = t.subtree_norms(&wt.w, e.q)?;
    let n = t.len();
    let up: Vec<f64> = wt.u.iter().map(|x| x.powf(e.p_dual)).collect();
    let mut in_set = vec![false; n];
    let mut mult = vec![0usize; n];
    let (mut cover_fail, mut ineq_fail, mut star_fail) = (0, 0, 0);
    let mut worst_ratio = 0.0f64;
    for v in 0..n {
        let set = sigma_set_from_norms(t, &norms, v, sigma);
        set.iter().for_each(|&x| in_set[x] = true);
        let maximal = maximal_vertices(t, &set, &in_set);
        let mut best_path = 0.0f64;
        for &z in &maximal {
            let path = t.path_to_root(z)?;
            let from = path
                .iter()
                .position(|&x| x == v)
                .expect("sigma-set lies above v");
            let mut s = 0.0;
            for &x in &path[from..] {
                mult[x] += 1;
                s += up[x];
            }
            best_path = best_path.max(s);
        }
        if set.iter().any(|&x| mult[x] == 0) || (0..n).any(|x| mult[x] > 0 && !in_set[x]) {
            cover_fail += 1;
        }
        let lhs: f64 = set.iter().map(|&x| up[x]).sum();
        let rhs: f64 = set.iter().map(|&x| mult[x] as f64 * up[x]).sum();
        if lhs > rhs {
            ineq_fail += 1;
        }
        let star = maximal.len() as f64 * best_path;
        if lhs > star * (1.0 + 1e-12) {
            star_fail += 1;
        }
        if rhs > 0.0 {
            worst_ratio = worst_ratio.max(lhs / rhs);
        }
        set.iter().for_each(|&x| in_set[x] = false);
        mult.iter_mut().for_each(|m| *m = 0);
    }
    let mk = |name, fails: usize, measured, detail: &str| Check {
        name,
        passed: fails == 0,
        ran: true,
        measured,
        bound: 0.0,
        detail: format!("{fails} of {n} vertices fail; {detail}"),
    };
    Ok(CheckReport {
        checks: vec![
            mk(
                "path_cover",
                cover_fail,
                cover_fail as f64,
                "sigma-set = union of paths to maximal vertices",
            ),
            mk(
                "path_sum_bound",
                ineq_fail,
                worst_ratio,
                "measured is max lhs/rhs",
            ),
            mk(
                "zeta_star_bound",
                star_fail,
                star_fail as f64,
                "lhs <= card · best path sum",
            ),
        ],
    })
}
