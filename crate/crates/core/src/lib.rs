//! Reduction from 3-SAT to high-multiplicity Bin Packing.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`cnf`] parses DIMACS input and normalizes it so every variable occurs
//!   twice positively and once negatively, with a power-of-two variable count.
//! * [`encode`] packs the occurrence structure into one big integer `Z`.
//! * [`ilp`] builds the compact equality system whose solutions are exactly
//!   the `5n` configuration vectors, and enumerates them.
//! * [`aggregate`] folds the system and its bounds into one knapsack equation.
//! * [`binpack`] derives the instance family indexed by the selector guess.
//! * [`witness`] maps satisfying assignments to packings and back.
//! * [`verify`] drives the whole thing end to end against a brute-force oracle.
//!
//! All arithmetic is exact and big-integer backed.

pub mod aggregate;
pub mod binpack;
pub mod cli;
pub mod cnf;
pub mod encode;
pub mod ilp;
pub mod verify;
pub mod witness;

/// Arbitrary-precision non-negative integer.
pub type Nat = num_bigint::BigUint;
/// Arbitrary-precision signed integer, used for row coefficients.
pub type Int = num_bigint::BigInt;

pub use verify::{end_to_end, PipelineError, Reduction, Report, SolveOptions};
