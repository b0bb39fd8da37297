//! Roll-acceleration moments of a ship in irregular head seas.
//!
//! The crate covers the whole chain from a wave spectrum to a fitted
//! probability density:
//!
//! - [`wave`]: ITTC spectrum, Grim effective-wave transfer, component synthesis.
//! - [`sim`]: Monte-Carlo ensemble of the nonlinear roll equation.
//! - [`closure`]: Gaussian closure of mixed moments of (φ, φ̇, A_w).
//! - [`moments`]: analytic moments of roll and cargo lateral acceleration.
//! - [`fit`]: non-Gaussian PDF families fitted to a moment set.
//! - [`config`]: the TOML run description shared by all of the above.

// `!(x > 0.0)` guards are written that way on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closure;
pub mod config;
pub mod error;
pub mod fit;
pub mod moments;
pub mod sim;
mod simplex;
pub mod wave;

pub use error::{Error, Result};
