//! Core library for robust entropy minimization in online test-time adaptation.
//!
//! The crate is `no_std` (with `alloc`) and fully deterministic: every random
//! quantity flows from an explicit seed through the documented generator in
//! [`rng`], and all floating-point math goes through software implementations,
//! so identical inputs produce bit-identical outputs on any platform.
//!
//! Module layout:
//! - [`robust_loss`] — the general robust loss family, its derivatives,
//!   inverse derivative, explicit self-paced regularizer, and the
//!   hard-threshold (EATA) limiting cases.
//! - [`spl`] — self-paced-learning weights plus a brute-force oracle for the
//!   equivalence between robust minimization and the regularized joint problem.
//! - [`model`] — a toy classifier with a frozen feature map, adaptable
//!   per-feature affine parameters, and hand-derived gradients.
//! - [`data`] — seeded synthetic source/target generation, corruption
//!   operators, CSV parsing, and deterministic stream shuffling.
//! - [`adapt`] — the online single-sample adaptation engine (no-adapt, Tent,
//!   EATA, and the robust-loss strategy) with per-step logging.
//! - [`check`] — the runnable invariant suite behind the `check` subcommand.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adapt;
pub mod check;
pub mod data;
mod error;
mod math;
pub mod model;
pub mod rng;
pub mod robust_loss;
pub mod spl;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
