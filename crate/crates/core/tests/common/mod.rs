#![allow(dead_code)]

use hardy_tree::generators::{derive_seed, gen_random_tree, gen_weights, TreeModel, WeightLaw};
use hardy_tree::{RootedTree, WeightPair};
use proptest::prelude::*;

/// Exponent pairs with `p < q` used throughout the tests.
pub const GRID: [(f64, f64); 6] = [
    (1.25, 1.5),
    (1.25, 2.5),
    (1.25, 4.0),
    (2.0, 2.5),
    (2.0, 4.0),
    (3.0, 4.0),
];

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Random recursive tree (`parent[k] < k`), built from raw draws.
pub fn tree_from_draws(draws: &[usize]) -> RootedTree {
    let mut parents = vec![None];
    for (k, d) in draws.iter().enumerate() {
        parents.push(Some(d % (k + 1)));
    }
    RootedTree::from_parents(&parents).unwrap()
}

/// Weights in `[1e-3, 1e3]`, with roughly one entry in eight set to zero.
fn weight() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 7 => (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))]
}

pub fn instance(max_n: usize) -> impl Strategy<Value = (RootedTree, WeightPair)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<usize>(), n - 1),
            prop::collection::vec(weight(), n),
            prop::collection::vec(weight(), n),
        )
            .prop_map(|(draws, u, w)| {
                let t = tree_from_draws(&draws);
                (t, WeightPair::new(u, w).unwrap())
            })
    })
}

pub fn positive_instance(max_n: usize) -> impl Strategy<Value = (RootedTree, WeightPair)> {
    (1..=max_n).prop_flat_map(|n| {
        let pos = || prop::collection::vec((-2.0f64..2.0).prop_map(|e| 10f64.powf(e)), n);
        (prop::collection::vec(any::<usize>(), n - 1), pos(), pos())
            .prop_map(|(draws, u, w)| (tree_from_draws(&draws), WeightPair::new(u, w).unwrap()))
    })
}

pub fn exponents() -> impl Strategy<Value = (f64, f64)> {
    prop::sample::select(GRID.to_vec())
}

pub fn loguniform_instance(n: usize, seed: u64, model: TreeModel) -> (RootedTree, WeightPair) {
    let t = gen_random_tree(n, seed, model).unwrap();
    let law = WeightLaw::LogUniform { lo: 0.1, hi: 10.0 };
    let u = gen_weights(&t, derive_seed(seed, 1), &law).unwrap();
    let w = gen_weights(&t, derive_seed(seed, 2), &law).unwrap();
    (t.clone(), WeightPair::for_tree(&t, u, w).unwrap())
}

/// Largest singular value of the explicit matrix `w(v) u(a) [a <= v]`.
pub fn dense_spectral_norm(t: &RootedTree, wt: &WeightPair) -> f64 {
    let n = t.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |v, a| {
        if t.precedes_or_eq(a, v) {
            wt.w[v] * wt.u[a]
        } else {
            0.0
        }
    });
    m.singular_values().max()
}
