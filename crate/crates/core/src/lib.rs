//! Ballot-type probabilities for mean-zero random walks, computed exactly by
//! constrained-path dynamic programming and statistically by seeded Monte
//! Carlo, plus scaling scans over `n`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod distributions;
pub mod error;
pub mod exact;
pub mod harness;
pub mod mc;
pub mod rational;
pub mod schema;
pub mod walk;

pub use error::{Error, Result};
pub use rational::Rational;
pub use walk::{lattice_info, moment, LatticeInfo, ProbResult, StepDistribution, WalkQuery};
