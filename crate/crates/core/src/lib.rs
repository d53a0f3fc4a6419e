//! Continuous wavelet analysis and synthesis for the full affine group of the plane.
//!
//! The group `G2` of maps `z -> A z + x` acts on three-dimensional volumes
//! through a square-integrable representation. This crate provides the group
//! algebra, the cocycle kernel, analytic and sampled fields, the representation
//! operators, admissibility, the voice transform over a truncated Haar
//! quadrature and weak reconstruction.

pub mod cocycle;
pub mod error;
pub mod exec;
pub mod field;
pub mod group;
pub mod representation;
pub mod verify;
pub mod wavelet;

pub use error::{Error, Result};
pub use exec::Exec;
