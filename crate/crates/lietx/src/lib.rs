//! Symbolic-numeric engine for maps represented by Lie series and Lie
//! transforms.
//!
//! A perturbed map is factored into its integrable part `R` and a Lie
//! transform `T_W` generated by a sequence of vector fields. The library
//! composes and inverts such representations with triangular order-by-order
//! truncation and computes formal normal forms, either through a single Lie
//! transform or through an iterated composition of Lie series. Brute-force
//! substitution and floating-point iteration oracles verify the results.
//!
//! Two arithmetic modes are supported throughout: complex double precision
//! and exact Gaussian-rational coefficients.

pub mod algebra;
pub mod coeff;
mod error;
pub mod io;
pub mod lie;
pub mod normalform;
pub mod oracle;
pub mod poly;
pub mod represent;

pub use coeff::{Coeff, Mode};
pub use error::{Error, Result};
