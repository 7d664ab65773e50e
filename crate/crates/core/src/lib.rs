//! Simulation laboratory for statistical-query learning of quantum states.
//!
//! The crate is organized bottom-up:
//!
//! - [`pauli`]: signed Pauli operators with exact phase tracking.
//! - [`stabilizer`]: canonical stabilizer tableaux, membership, intersection
//!   counting and exhaustive enumeration for small `n`.
//! - [`pconcept`]: states viewed as p-concepts `f_ρ(E) = 2tr(Eρ) - 1` over
//!   measurement distributions, with exact and Monte Carlo inner products.
//! - [`oracle`]: a simulated SQ oracle with response policies, noise models
//!   and the noise-correcting oracle wrappers.
//! - [`learners`]: the product-state and basis-state SQ learners, the parity
//!   embedding and GF(2) / maximum-likelihood parity solvers.
//! - [`sda`]: average correlation and statistical dimension on average.

pub mod bits;
pub mod error;
pub mod exact;
pub mod learners;
pub mod oracle;
pub mod pauli;
pub mod pconcept;
pub mod rng;
pub mod sda;
pub mod stabilizer;

pub use bits::BitString;
pub use error::{Error, Result};
pub use pauli::{PauliMeasurement, PauliOperator, Phase, PhasedPauli};
pub use stabilizer::{Membership, StabilizerGroup};
