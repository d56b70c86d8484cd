//! Blind bounded source separation toolkit.
//!
//! Bounded sources mixed through an unknown full-rank linear system are
//! recovered, up to sign and permutation, by matching diagonally weighted
//! output inner products to input inner products while confining outputs to
//! the unit infinity-norm ball. The crate provides:
//!
//! - [`signals`]: bounded source generation, mixing, and batch whitening;
//! - [`network`]: the online recurrent separator with a clipping (or clipped
//!   soft-threshold) activation and local Hebbian / anti-Hebbian / gain
//!   update rules;
//! - [`analysis`]: offline optimality checks for the weighted
//!   similarity-matching program and separation metrics (SIR, alignment,
//!   excitation/inhibition balance);
//! - [`io`]: CSV matrices, binary PGM images, JSON run logs, run
//!   configuration, and network state snapshots.

pub mod analysis;
pub mod error;
pub mod io;
pub mod network;
pub mod signals;

mod la;

pub use error::{Error, Result};
