//! Dual-transform machinery for quasi-linear Schrodinger ground states:
//! builds the transform g reducing the quasi-linear problem to a semilinear
//! one, certifies the Serrin-Tang uniqueness criterion for the reduced
//! nonlinearity, and cross-validates by radial shooting with pullback
//! u = g(v) to the original equation.

pub mod cli;
pub mod coefficient;
pub mod config;
pub mod criterion;
pub mod dual;
pub mod error;
pub mod numerics;
pub mod shooting;

pub use error::{Error, Result};
