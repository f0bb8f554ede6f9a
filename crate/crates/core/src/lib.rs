//! Reduced-complexity space-time block codes for `2^a` transmit antennas.
//!
//! The crate builds rate-1, 4-group decodable codes from Clifford-algebra
//! generator matrices, stacks them into full-rate layered codes, and
//! evaluates the result: ML decoding (exhaustive, per-group and
//! conditional), structure of the equivalent channel's R factor, ergodic
//! capacity and error rates over Rayleigh block fading.

pub mod capacity;
pub mod channel;
pub mod clifford;
pub mod decoder;
pub mod design;
pub mod error;
pub mod gain;
pub mod linalg;
pub mod rng;
pub mod sim;

pub use error::{Result, StbcError};
pub use linalg::{ComplexMatrix, RealMatrix};
