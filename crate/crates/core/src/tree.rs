//! Finite rooted trees, the ancestor order, weights and exponent pairs.
//!
//! Vertex ids are dense `0..n`. The order is the usual one on a rooted tree:
//! `a <= b` when `a` lies on the path from the root to `b`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::norm::{check_exponent, PowerSum};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    /// Breadth-first order from the root; every parent precedes its children.
    bfs: Vec<usize>,
}

impl RootedTree {
    /// Builds and validates a tree from a parent list. Exactly one entry must
    /// be `None`; it becomes the root. Vertex ids are preserved.
    pub fn from_parents(parents: &[Option<usize>]) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::EmptyTree);
        }
        let mut root = None;
        let mut children = vec![Vec::new(); n];
        for (v, p) in parents.iter().enumerate() {
            match *p {
                None => match root {
                    None => root = Some(v),
                    Some(first) => return Err(Error::MultipleRoots { first, second: v }),
                },
                Some(p) if p >= n => {
                    return Err(Error::DanglingParent {
                        vertex: v,
                        parent: p,
                    })
                }
                Some(p) if p == v => return Err(Error::CycleDetected { vertex: v }),
                Some(p) => children[p].push(v),
            }
        }
        let Some(root) = root else {
            // n vertices, n parent edges: there must be a cycle.
            let vertex = find_cycle_vertex(parents, &vec![false; n]).unwrap_or(0);
            return Err(Error::CycleDetected { vertex });
        };

        let mut depth = vec![usize::MAX; n];
        let mut bfs = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        depth[root] = 0;
        while let Some(v) = queue.pop_front() {
            bfs.push(v);
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                queue.push_back(c);
            }
        }
        if bfs.len() != n {
            let mut seen = vec![false; n];
            for &v in &bfs {
                seen[v] = true;
            }
            let vertex = find_cycle_vertex(parents, &seen)
                .unwrap_or_else(|| seen.iter().position(|s| !s).unwrap());
            return Err(Error::CycleDetected { vertex });
        }
        Ok(Self {
            root,
            parent: parents.to_vec(),
            children,
            depth,
            bfs,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Root-first breadth-first order.
    pub fn bfs_order(&self) -> &[usize] {
        &self.bfs
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.children[v].is_empty()
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidVertex(v))
        }
    }

    /// `a <= b` in the tree order (`a` is `b` or one of its ancestors).
    pub fn precedes_or_eq(&self, a: usize, b: usize) -> bool {
        if self.depth[a] > self.depth[b] {
            return false;
        }
        let mut v = b;
        for _ in 0..(self.depth[b] - self.depth[a]) {
            v = self.parent[v].expect("non-root vertex has a parent");
        }
        v == a
    }

    /// Vertex set of the subtree rooted at `v`, sorted ascending.
    pub fn subtree_vertices(&self, v: usize) -> Result<Vec<usize>> {
        self.check_vertex(v)?;
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out.sort_unstable();
        Ok(out)
    }

    /// The path `(root, …, v)`, root first.
    pub fn path_to_root(&self, v: usize) -> Result<Vec<usize>> {
        self.check_vertex(v)?;
        let mut path = Vec::with_capacity(self.depth[v] + 1);
        let mut cur = Some(v);
        while let Some(x) = cur {
            path.push(x);
            cur = self.parent[x];
        }
        path.reverse();
        Ok(path)
    }

    /// `level_sets()[j]` holds the vertices at depth `j`, sorted ascending.
    pub fn level_sets(&self) -> Vec<Vec<usize>> {
        let mut levels = vec![Vec::new(); self.max_depth() + 1];
        for v in 0..self.len() {
            levels[self.depth[v]].push(v);
        }
        levels
    }

    /// Per-vertex `l_r` power sums over the subtree rooted at each vertex,
    /// accumulated leaves-first in one pass.
    pub fn subtree_power_sums(&self, x: &[f64], r: f64) -> Result<Vec<PowerSum>> {
        check_exponent(r)?;
        self.check_values(x)?;
        let mut acc: Vec<PowerSum> = x.iter().map(|&v| PowerSum::of(v, r)).collect();
        for &v in self.bfs.iter().rev() {
            if let Some(p) = self.parent[v] {
                let child = acc[v];
                acc[p].merge(&child, r);
            }
        }
        Ok(acc)
    }

    /// `‖x‖_{l_r(T_v)}` for every vertex `v`.
    pub fn subtree_norms(&self, x: &[f64], r: f64) -> Result<Vec<f64>> {
        Ok(self
            .subtree_power_sums(x, r)?
            .iter()
            .map(|s| s.norm(r))
            .collect())
    }

    /// `‖x‖_{l_r([root, v])}` for every vertex `v`, accumulated root-first.
    pub fn path_norms(&self, x: &[f64], r: f64) -> Result<Vec<f64>> {
        check_exponent(r)?;
        self.check_values(x)?;
        let mut acc = vec![PowerSum::ZERO; self.len()];
        for &v in &self.bfs {
            let mut s = match self.parent[v] {
                Some(p) => acc[p],
                None => PowerSum::ZERO,
            };
            s.add(x[v], r);
            acc[v] = s;
        }
        Ok(acc.iter().map(|s| s.norm(r)).collect())
    }

    fn check_values(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights(format!("entry {i} is {}", x[i])));
        }
        Ok(())
    }
}

fn find_cycle_vertex(parents: &[Option<usize>], reached: &[bool]) -> Option<usize> {
    // Walk parent links from an unreached vertex; the first repeated vertex
    // lies on the cycle.
    let start = reached.iter().position(|r| !r)?;
    let mut seen = vec![false; parents.len()];
    let mut v = start;
    loop {
        if seen[v] {
            return Some(v);
        }
        seen[v] = true;
        v = parents[v]?;
    }
}

/// Nonnegative vertex weights `u` (inner) and `w` (outer).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl WeightPair {
    pub fn new(u: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if u.len() != w.len() {
            return Err(Error::LengthMismatch {
                u: u.len(),
                w: w.len(),
            });
        }
        for (name, xs) in [("u", &u), ("w", &w)] {
            if let Some(i) = xs.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidWeights(format!("{name}[{i}] = {}", xs[i])));
            }
        }
        Ok(Self { u, w })
    }

    pub fn for_tree(tree: &RootedTree, u: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let pair = Self::new(u, w)?;
        pair.check_tree(tree)?;
        Ok(pair)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn check_tree(&self, tree: &RootedTree) -> Result<()> {
        if self.len() != tree.len() {
            return Err(Error::DimensionMismatch {
                expected: tree.len(),
                found: self.len(),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64, beta: f64) -> Self {
        Self {
            u: self.u.iter().map(|x| alpha * x).collect(),
            w: self.w.iter().map(|x| beta * x).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `p < q`: the two-sided bounds for trees apply.
    Below,
    /// `p = q`: only the chain criterion applies.
    Equal,
    /// `p > q`: outside every bound in this crate.
    Above,
}

/// Source exponent `p`, target exponent `q` and their duals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub p_dual: f64,
    pub q_dual: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        check_exponent(p)?;
        check_exponent(q)?;
        Ok(Self {
            p,
            q,
            p_dual: p / (p - 1.0),
            q_dual: q / (q - 1.0),
        })
    }

    /// Exponents for the tree bounds, which need `p < q`.
    pub fn strict(p: f64, q: f64) -> Result<Self> {
        let e = Self::new(p, q)?;
        if e.regime() != Regime::Below {
            return Err(Error::InvalidExponent(format!(
                "need p < q, got p = {p}, q = {q}"
            )));
        }
        Ok(e)
    }

    /// Exponents for the chain criterion, which needs `p <= q`.
    pub fn non_strict(p: f64, q: f64) -> Result<Self> {
        let e = Self::new(p, q)?;
        if e.regime() == Regime::Above {
            return Err(Error::InvalidExponent(format!(
                "need p <= q, got p = {p}, q = {q}"
            )));
        }
        Ok(e)
    }

    pub fn regime(&self) -> Regime {
        if self.p < self.q {
            Regime::Below
        } else if self.p == self.q {
            Regime::Equal
        } else {
            Regime::Above
        }
    }
}
