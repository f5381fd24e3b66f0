//! Equivalence checking of concurrent quantum protocols.
//!
//! Protocols are written in a small process language (prefixing, parallel
//! composition, synchronous channels, measurement and classically controlled
//! Clifford gates). A protocol and its specification are both run on every
//! stabilizer basis input, exploring all interleavings and measurement
//! branches; by linearity of superoperators, agreement on the basis implies
//! agreement on every input state.

pub mod bench;
pub mod dense;
pub mod engine;
pub mod lang;
pub mod scheduler;
pub mod stabilizer;
pub mod weight;

pub use engine::{check, compare, run_protocol, BasisInput, CheckOptions, EquivalenceReport, Verdict};
pub use lang::{load_definition, parse_source, validate, CheckedProgram, Program};
pub use scheduler::Mode;
pub use stabilizer::Tableau;
pub use weight::Weight;
