//! Nonlinear Schrödinger dynamics with a point interaction in three dimensions, and its
//! approximation by a smeared, rescaled nonlinear interaction.

pub mod config;
pub mod conv;
pub mod error;
pub mod filon;
pub mod form_factor;
pub mod fractional;
pub mod harness;
pub mod initial;
pub mod io;
pub mod kernels;
pub mod limit;
pub mod quad;
pub mod radial;
pub mod scaled;
pub mod selftest;
pub mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
