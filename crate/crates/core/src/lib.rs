//! Numerical laboratory for special flows over translations of T^2.
//!
//! The crate covers exact rotation arithmetic, trigonometric polynomials and
//! the cohomological equation, explicit roof constructions with plateau
//! polynomials, the normalized time-one map of the special flow, symbolic
//! names with the f-bar metric, Rokhlin towers, and mixing diagnostics.

pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod maps;
pub mod mc;
pub mod roof;
pub mod rotation;
pub mod sum;
pub mod symbolic;
pub mod torus;
pub mod towers;
pub mod trigpoly;

pub use error::{Error, Result};
