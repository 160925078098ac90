//! Simulation and verification of nondemolition position/momentum
//! measurements with possibly correlated probes.
//!
//! Units: ħ = 1 and momentum is carried as the wave number `K = P/ħ`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod gaussian_prep;
pub mod instruments;
pub mod moments;
pub mod oracle;
pub mod sampler;

pub use error::{Error, Result};
pub use exec::Exec;
