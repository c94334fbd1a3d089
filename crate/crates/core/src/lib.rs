//! Lie–Trotter splitting for Schrödinger operators with Coulomb-type
//! singularities.
//!
//! The crate discretises `H = -Δ + V` on offset lattices, runs the
//! kinetic-then-potential splitting `e^{-itV} e^{-itA}`, measures its error
//! against a Krylov reference propagator, and audits the functional
//! inequalities and constants behind the quarter-order error bound.

pub mod audit;
pub mod bounds;
pub mod cli;
pub mod cutoff;
pub mod error;
pub mod lab;
pub mod operators;
pub mod quadrature;
pub mod spectral;
pub mod trotter;

pub use error::{Error, Result};
pub use num_complex::Complex64;
