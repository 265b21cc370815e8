//! Centered moments of one-level densities for orthogonal and symplectic families, with
//! compactly supported piecewise-polynomial test functions.

pub mod cli;
pub mod error;
pub mod haarsim;
pub mod partitions;
pub mod predictions;
pub mod quadrature;
pub mod splinefourier;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
