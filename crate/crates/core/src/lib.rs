//! carnot-lab: a numerical toolbox for sub-Riemannian geometry on desk-scale
//! systems of Hörmander vector fields.
//!
//! The crate builds symbolic vector fields and their nested commutators,
//! integrates flows and approximate exponentials, realizes the ball-box maps
//! `E_{I,x}`, estimates Carnot–Carathéodory distances from above, evaluates
//! anisotropic fractional seminorms, and ships verification suites that turn
//! the underlying comparison theorems into pass/fail numerical checks.

/// Hard cap on the ambient dimension; hot paths use stack buffers of this size.
pub const MAX_DIM: usize = 8;

pub mod ballbox;
pub mod domain;
pub mod error;
pub mod expr;
pub mod fit;
pub mod flows;
pub mod metric;
pub mod opt;
pub mod report;
pub mod scenario;
pub mod seminorms;
pub mod verify;
pub mod vf;

pub use error::{Error, Result};
