//! Numerical laboratory for projective Finsler geometry.
//!
//! The crate evaluates Finsler metrics given as closed form expressions,
//! differentiates them with truncated multivariate Taylor arithmetic (jets in
//! the `2n` variables `x^1..x^n, y^1..y^n`), builds the geodesic spray and
//! the curvature tensors attached to it, and classifies metrics into
//! projective curvature classes by fitted residual tests at sampled points.
//!
//! Everything is generic over the scalar type through [`num::Real`]
//! (implemented for `f32` and `f64`); the crate root exports `f64` aliases
//! for the common types.

pub mod alphabeta;
pub mod classify;
pub mod projective;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod gallery;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod metric;
pub mod num;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};

/// Jet over `f64`, the default working scalar.
pub type Jet64 = jet::Jet<f64>;
/// Jet over `f32`, mainly for precision experiments.
pub type Jet32 = jet::Jet<f32>;
