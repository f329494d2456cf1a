//! Non-Markovian open-quantum-system dynamics from memory-kernel master
//! equations, built so that every propagator can be computed by several
//! independent routes that cross-validate each other:
//!
//! - truncated Neumann series of discrete convolutions over map families
//!   ([`series`]),
//! - direct Volterra integro-differential solvers ([`gme`]),
//! - trajectory Monte Carlo over renewal jump times ([`montecarlo`]),
//! - closed-form Laplace-domain identities checked pointwise ([`gme`]).
//!
//! The classical semi-Markov machinery ([`semimarkov`]) doubles as the
//! commuting-limit oracle for the quantum constructions.

pub mod error;
pub mod gme;
pub mod grid;
pub mod linalg;
pub mod liouville;
pub mod montecarlo;
pub mod rational;
pub mod renewal;
pub mod semimarkov;
pub mod series;

pub use error::MemKernelError;
