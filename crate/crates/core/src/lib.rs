//! Finite-grid laboratory for phase-space properties of the free massive
//! scalar field: local subspaces, the operator `T` dominating the damped
//! restrictions, truncated Fock spaces, the rank-one expansion of the
//! energy-damped map, and numerical checks of the associated bounds.
//!
//! Everything works in one spatial dimension by default. Vectors on the
//! momentum grid are stored in weight-scaled coordinates so that the plain
//! Euclidean inner product equals the quadrature inner product.

pub mod bounds;
pub mod config;
pub mod content;
pub mod error;
pub mod expansion;
pub mod fock;
pub mod grid;
pub mod lab;
pub mod linalg;
pub mod lub;
pub mod relaxation;
pub mod report;
pub mod suite;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
