//! Stabilizer states as bit-packed generator tableaux.

mod pauli;
mod tableau;

pub use pauli::PauliString;
pub use tableau::{MeasurementOutcome, StabilizerError, Tableau};
