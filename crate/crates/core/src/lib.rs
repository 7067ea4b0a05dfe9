//! Radial nonlinear Schrödinger dynamics on the rotationally symmetric
//! manifolds `M_k^n` with metric `dr^2 + phi_k(r)^2 dω^2`, where
//! `phi_k` is the degree `2k+1` Taylor polynomial of `sinh`. The family
//! runs from Euclidean space (`k = 0`) to hyperbolic space (`k = ∞`).

pub mod error;
pub mod exponents;
pub mod tridiag;
pub mod discretization;
pub mod evolution;
pub mod diagnostics;
pub mod geometry;
pub mod harness;

pub use error::{Error, Result};
