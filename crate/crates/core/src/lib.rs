//! Learning the locally averaged Pauli noise of a surface-code patch running
//! stabilizer-preparation circuits.
//!
//! The crate covers the whole analysis chain:
//!
//! * [`prob`] and [`pauli`]/[`tableau`]: bit-level Pauli algebra, the
//!   Walsh–Hadamard kernels linking error-indicator distributions to channel
//!   eigenvalues, and Euclidean simplex projection.
//! * [`surface`]: rotated surface-code geometry and the scheduled
//!   stabilizer-preparation round.
//! * [`protocol`]: randomized sequences with their single-qubit inversion layer.
//! * [`sim`]: a Pauli-frame Monte Carlo device simulator.
//! * [`estimate`]: decay fitting, reconstruction, correlations and bootstrap.
//! * [`models`]: IID / IND / Ising / CG1D graphical noise models and metrics.
//! * [`counterfactual`]: fractional powers of a learned channel.
//! * [`decoder`]: code-capacity maximum-likelihood decoding and logical error rates.

pub mod clifford1q;
pub mod counterfactual;
pub mod decoder;
pub mod error;
pub mod estimate;
pub mod io;
pub mod models;
pub mod pauli;
pub mod prob;
pub mod protocol;
pub mod rng;
pub mod sim;
pub mod surface;
pub mod synthetic;
pub mod tableau;

pub use error::{LaceError, Result};
pub use pauli::{BitString, PauliOp};
pub use prob::{EigenvalueVector, ProbDist};
