//! Numerics for linear water waves over a slowly varying bottom.
//!
//! The crate covers the closed-form symbol layer of the Dirichlet-to-Neumann
//! operator (dispersion root, principal symbols, normal forms), a brute-force
//! strip solver that certifies it, grid pseudodifferential operators and
//! resolvents, Hamiltonian ray fans, and the leading-order asymptotic Green
//! function with its exact constant-depth oracle. [`verify`] runs the
//! numerical acceptance criteria.

// `!(x > 0.0)` is the NaN-rejecting guard used for every parameter check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bathymetry;
pub mod dispersion;
pub mod error;
pub mod fft;
pub mod greenfn;
pub mod linalg;
pub mod numerics;
pub mod pdo;
pub mod rays;
pub mod strip;
pub mod verify;

pub use bathymetry::{AnalyticProfile, DepthProfile, DepthSample, GriddedDepth, Point, RawGridHeader};
pub use error::{Error, Result};

/// Version of the numerics library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
