//! Domain types shared by every engine: step laws, moments, lattice data,
//! queries and probability results.

mod dist;
mod lattice;
mod query;

pub use dist::{moment, Atom, FloatAtoms, Moment, StepDistribution, StepKind, StepSampler};
pub use lattice::{lattice_info, LatticeInfo};
pub use query::{Flag, Method, Multiset, ProbResult, Scalar, WalkQuery};
