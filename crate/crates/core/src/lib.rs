//! Numerical laboratory for the homogenization of
//! `u_t = ε^α Δu + g(u/ε)` with a positive periodic potential `g`.
//!
//! * [`potential`]: the forcing and its means.
//! * [`cell`]: correctors and the effective speed `c̄(|p|)`.
//! * [`microsim`]: direct finite-difference simulation of the ε-problem.
//! * [`effective`]: the ε → 0 dynamics in every regime of α.
//! * [`harness`]: ε-sweeps against the effective references.

// `!(x > 0.0)` is the NaN-rejecting form used for every input check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod effective;
pub mod error;
pub mod harness;
pub mod initial;
pub mod microsim;
pub mod potential;
pub mod roots;

pub use error::{Error, Result};
pub use potential::{PeriodicPotential, PotentialDescriptor, PotentialStats};
