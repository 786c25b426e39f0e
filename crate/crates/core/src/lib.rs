//! Projected least-squares quantum state and process tomography for
//! adaptive (non-i.i.d.) sources.
//!
//! The library simulates round-by-round tomography experiments in which the
//! prepared state or channel may depend arbitrarily on the past history,
//! reconstructs the trajectory average by linear inversion followed by a
//! Frobenius projection onto the physical set, and provides the closed-form
//! sample-size and tail bounds that guarantee the reconstruction accuracy.
//!
//! Module map:
//! - [`linalg`]: dense complex Hermitian matrices, eigendecomposition,
//!   tensor products, partial traces, norms.
//! - [`designs`]: measurement ensembles (MUB, SIC, local Pauli) and their
//!   single-shot estimators plus moment-identity verifiers.
//! - [`sources`]: adaptive state sources and trajectory bookkeeping.
//! - [`state_tomo`]: the state measurement loop and histogram aggregation.
//! - [`projection`]: projections onto density matrices and Choi states.
//! - [`process_tomo`]: channels, Choi matrices, the process loop.
//! - [`bounds`]: sample sizes, the martingale tail bound, norm conversion.
//! - [`harness`]: experiment driver, config, CSV/summary export.

pub mod bounds;
pub mod designs;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod process_tomo;
pub mod projection;
pub mod sources;
pub mod state_tomo;

pub use error::{Error, Result};
