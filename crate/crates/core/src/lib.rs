//! Numerical checks of subgaussian concentration for bounded nonlinearities
//! of correlated Gaussian vectors.
//!
//! The crate samples `X ~ N(0, Σ)`, applies a coordinatewise map `φ` with
//! `|φ| ≤ 1`, and estimates the subgaussian norm of `Y = φ(X)` against the
//! `√κ(Σ)` scaling, together with the supporting pieces: covariance
//! splitting, Gaussian smoothing of `φ`, the random-matrix specialisation
//! `Y = sgn(Wx)`, and the rank-one counterexample.

pub mod bootstrap;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod nonlinearity;
pub mod psi2;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
