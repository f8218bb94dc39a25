//! Weighted summation (discrete Hardy-type) operators on finite rooted trees.
//!
//! The crate evaluates `(Sf)(v) = w(v) Σ_{a <= v} u(a) f(a)`, estimates its
//! `l_p -> l_q` and `l_q(l_p) -> l_q` operator norms numerically, computes the
//! closed-form bound quantities that are two-sidedly equivalent to those norms,
//! and builds the sigma-partition of a tree into blocks together with the
//! reduced tree of blocks.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod io;
pub mod norm;
pub mod operator;
pub mod partition;
pub mod tree;

pub use error::{Error, Result};
pub use tree::{Exponents, Regime, RootedTree, WeightPair};
