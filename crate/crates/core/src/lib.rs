//! Algebraic inverse models for observable SISO systems whose output is a
//! finite series `y(t) = Σ αᵢ ψᵢ(t)`.
//!
//! The pipeline: a system in observer canonical form ([`model`]) is
//! parameterized by successive state elimination ([`param`]); the input
//! series `u(t) = Σ βᵢ ψᵢ(t)` is then found exactly for linear systems
//! ([`lininv`]) or by Taylor matching at `t₀` for polynomial nonlinearities
//! ([`nlinv`]). [`traj`] produces α from boundary conditions and
//! [`verify`] integrates the original dynamics under the computed input.

pub mod cli;
pub mod error;
pub mod fmt;
#[cfg(test)]
mod fixtures;
pub mod linalg;
pub mod lininv;
pub mod model;
pub mod nlinv;
pub mod param;
pub mod series;
pub mod traj;
pub mod verify;

pub use error::{Error, Result};
