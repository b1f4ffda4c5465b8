//! Truncated series arithmetic: polynomial and Fourier--Taylor vector
//! fields, their linear operations, commutators, evaluation and truncation.

pub mod fourier;
pub mod polyfield;

pub use fourier::{FtCaps, FtField, FtScalar, FtSlice, FtTerm, ModeKey};
pub use polyfield::{GradedPolyField, HomogeneousPolyField};
