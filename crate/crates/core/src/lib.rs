//! Charged-particle track reconstruction posed as a QUBO.
//!
//! Triplets of detector hits become binary variables, their pairwise
//! compatibility becomes the quadratic couplings, and the resulting model is
//! minimised by a sub-QUBO decomposition whose small subproblems are solved
//! by a statevector QAOA simulator. Simulated annealing and exhaustive search
//! serve as baselines and oracles.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, event displays
//! and the command-line driver live in the `qtrack` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod anneal;
pub mod error;
pub mod optim;
pub mod qaoa;
pub mod qubo;
pub mod seed;
pub mod subqubo;
pub mod synthetic;
pub mod tracking;

pub use error::{Error, Result};
pub use qubo::{BitSolution, IsingModel, QuboBuilder, QuboModel};
