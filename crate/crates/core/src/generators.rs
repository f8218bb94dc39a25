//! Seeded construction of trees and weights.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Uniform
//! reals are `(next_u64() >> 11) · 2^-53`; a uniform index in `0..k` is
//! `min(⌊unit · k⌋, k − 1)`. Both rules are simple enough to reproduce in
//! other languages.

use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tree::{RootedTree, WeightPair};

pub const DEFAULT_VERTEX_CAP: usize = 100_000;

pub(crate) struct Stream(ChaCha8Rng);

impl Stream {
    pub(crate) fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub(crate) fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub(crate) fn index(&mut self, k: usize) -> usize {
        ((self.unit() * k as f64) as usize).min(k - 1)
    }
}

/// SplitMix64 mix of a master seed and a stream tag, for deriving
/// independent per-instance or per-weight seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Level populations of an exactly regular tree: every vertex at level `j`
/// has `branching[j]` children, so `S(j) = b_0 ⋯ b_{j-1}` and `C* = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelProfile {
    branching: Vec<usize>,
    sizes: Vec<f64>,
}

impl LevelProfile {
    pub fn new(branching: Vec<usize>) -> Result<Self> {
        if let Some(j) = branching.iter().position(|&b| b < 2) {
            return Err(Error::InvalidProfile(format!(
                "branching at level {j} is {}, need at least 2",
                branching[j]
            )));
        }
        let mut sizes = Vec::with_capacity(branching.len() + 1);
        sizes.push(1.0);
        for &b in &branching {
            let last = *sizes.last().unwrap();
            sizes.push(last * b as f64);
        }
        Ok(Self { branching, sizes })
    }

    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    /// Number of edges on a root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.branching.len()
    }

    /// `S(0), …, S(depth)`.
    pub fn level_sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// Smallest growth ratio `S(j+1)/S(j)`; `None` for a single level.
    pub fn r(&self) -> Option<f64> {
        self.branching.iter().min().map(|&b| b as f64)
    }

    /// Largest growth ratio `S(j+1)/S(j)`; `None` for a single level.
    pub fn r0(&self) -> Option<f64> {
        self.branching.iter().max().map(|&b| b as f64)
    }

    pub fn c_star(&self) -> f64 {
        1.0
    }

    pub fn total_vertices(&self) -> u128 {
        let mut level: u128 = 1;
        let mut total: u128 = 1;
        for &b in &self.branching {
            level = level.saturating_mul(b as u128);
            total = total.saturating_add(level);
        }
        total
    }
}

/// Per-level weights `u_j`, `w_j` for `j = 0..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelWeights {
    pub u_levels: Vec<f64>,
    pub w_levels: Vec<f64>,
}

impl LevelWeights {
    pub fn new(u_levels: Vec<f64>, w_levels: Vec<f64>) -> Result<Self> {
        // Reuse the vertex-weight validation.
        let pair = WeightPair::new(u_levels, w_levels)?;
        Ok(Self {
            u_levels: pair.u,
            w_levels: pair.w,
        })
    }

    pub fn len(&self) -> usize {
        self.u_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_levels.is_empty()
    }

    pub fn weights_for(&self, tree: &RootedTree) -> Result<WeightPair> {
        let u = gen_weights(tree, 0, &WeightLaw::FromLevels(self.u_levels.clone()))?;
        let w = gen_weights(tree, 0, &WeightLaw::FromLevels(self.w_levels.clone()))?;
        WeightPair::for_tree(tree, u, w)
    }
}

pub fn gen_chain(n: usize) -> Result<RootedTree> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    let parents: Vec<_> = (0..n).map(|k| k.checked_sub(1)).collect();
    RootedTree::from_parents(&parents)
}

pub fn gen_regular_tree(profile: &LevelProfile) -> Result<RootedTree> {
    gen_regular_tree_capped(profile, DEFAULT_VERTEX_CAP)
}

/// Vertices are numbered level by level, so level `j` occupies a contiguous
/// id range.
pub fn gen_regular_tree_capped(profile: &LevelProfile, cap: usize) -> Result<RootedTree> {
    let total = profile.total_vertices();
    if total > cap as u128 {
        return Err(Error::SizeCapExceeded {
            requested: total,
            cap,
        });
    }
    let mut parents = Vec::with_capacity(total as usize);
    parents.push(None);
    let mut level_start = 0;
    let mut level_len = 1;
    for &b in profile.branching() {
        for v in level_start..level_start + level_len {
            parents.extend(std::iter::repeat_n(Some(v), b));
        }
        level_start += level_len;
        level_len *= b;
    }
    RootedTree::from_parents(&parents)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeModel {
    /// Each new vertex attaches to a uniformly chosen existing vertex.
    UniformAttachment,
    /// As uniform attachment, restricted to vertices with fewer than
    /// `max_children` children.
    BoundedBranching { max_children: usize },
}

pub fn gen_random_tree(n: usize, seed: u64, model: TreeModel) -> Result<RootedTree> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    let mut rng = Stream::new(seed);
    let mut parents = Vec::with_capacity(n);
    parents.push(None);
    match model {
        TreeModel::UniformAttachment => {
            for k in 1..n {
                parents.push(Some(rng.index(k)));
            }
        }
        TreeModel::BoundedBranching { max_children } => {
            if max_children == 0 && n > 1 {
                return Err(Error::InfeasibleModel(
                    "bounded branching with max_children = 0 admits only one vertex".into(),
                ));
            }
            let mut open = vec![0usize];
            let mut count = vec![0usize; n];
            for k in 1..n {
                let slot = rng.index(open.len());
                let p = open[slot];
                parents.push(Some(p));
                count[p] += 1;
                if count[p] == max_children {
                    open.swap_remove(slot);
                }
                open.push(k);
            }
        }
    }
    RootedTree::from_parents(&parents)
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightLaw {
    Constant(f64),
    /// `x(v) = rho^depth(v)`.
    GeometricByDepth(f64),
    /// `exp` of a uniform draw on `[ln lo, ln hi]`, i.i.d. per vertex.
    LogUniform {
        lo: f64,
        hi: f64,
    },
    /// `x(v) = levels[depth(v)]`.
    FromLevels(Vec<f64>),
}

impl WeightLaw {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidLaw(msg));
        match self {
            WeightLaw::Constant(c) if !(c.is_finite() && *c >= 0.0) => {
                bad(format!("constant must be finite and nonnegative, got {c}"))
            }
            WeightLaw::GeometricByDepth(rho) if !(rho.is_finite() && *rho > 0.0) => {
                bad(format!("geometric ratio must be positive, got {rho}"))
            }
            WeightLaw::LogUniform { lo, hi }
                if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo <= hi) =>
            {
                bad(format!(
                    "log-uniform needs 0 < lo <= hi, got lo = {lo}, hi = {hi}"
                ))
            }
            WeightLaw::FromLevels(levels)
                if levels.iter().any(|x| !(x.is_finite() && *x >= 0.0)) =>
            {
                bad("level weights must be finite and nonnegative".into())
            }
            _ => Ok(()),
        }
    }
}

pub fn gen_weights(tree: &RootedTree, seed: u64, law: &WeightLaw) -> Result<Vec<f64>> {
    law.validate()?;
    let n = tree.len();
    Ok(match law {
        WeightLaw::Constant(c) => vec![*c; n],
        WeightLaw::GeometricByDepth(rho) => {
            tree.depths().iter().map(|&d| rho.powi(d as i32)).collect()
        }
        WeightLaw::LogUniform { lo, hi } => {
            let mut rng = Stream::new(seed);
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|_| (a + rng.unit() * (b - a)).exp()).collect()
        }
        WeightLaw::FromLevels(levels) => {
            if levels.len() != tree.max_depth() + 1 {
                return Err(Error::InvalidLaw(format!(
                    "{} level weights for a tree with {} levels",
                    levels.len(),
                    tree.max_depth() + 1
                )));
            }
            tree.depths().iter().map(|&d| levels[d]).collect()
        }
    })
}

fn parse_num(field: &str, spec: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidLaw(format!("bad number {field:?} in {spec:?}")))
}

/// Parses `constant:c`, `geometric:rho`, `loguniform:lo:hi` or `levels:a,b,…`.
impl FromStr for WeightLaw {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let law = match kind {
            "constant" => WeightLaw::Constant(parse_num(rest, spec)?),
            "geometric" => WeightLaw::GeometricByDepth(parse_num(rest, spec)?),
            "loguniform" => {
                let (lo, hi) = rest.split_once(':').ok_or_else(|| {
                    Error::InvalidLaw(format!("expected loguniform:lo:hi, got {spec:?}"))
                })?;
                WeightLaw::LogUniform {
                    lo: parse_num(lo, spec)?,
                    hi: parse_num(hi, spec)?,
                }
            }
            "levels" => WeightLaw::FromLevels(
                rest.split(',')
                    .map(|x| parse_num(x, spec))
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(Error::InvalidLaw(format!("unknown weight law {spec:?}"))),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Parses `uniform-attachment` or `bounded-branching:k`.
impl FromStr for TreeModel {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        match spec.split_once(':') {
            None if spec == "uniform-attachment" => Ok(TreeModel::UniformAttachment),
            Some(("bounded-branching", k)) => k
                .trim()
                .parse()
                .map(|max_children| TreeModel::BoundedBranching { max_children })
                .map_err(|_| Error::InfeasibleModel(format!("bad branching bound in {spec:?}"))),
            _ => Err(Error::InfeasibleModel(format!(
                "unknown tree model {spec:?}"
            ))),
        }
    }
}
