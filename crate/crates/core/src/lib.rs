//! Finite-element solvers for strongly damped semilinear wave equations with
//! oscillatory coefficients.
//!
//! The crate provides
//! - Q1/Q2 finite elements on uniform quadrilateral meshes ([`fe`]),
//! - micro cell problems and homogenized tensors for the finite-element
//!   heterogeneous multiscale method ([`micro`], [`macro_assembly`]),
//! - the IMEX, implicit and explicit midpoint integrators ([`time`]),
//! - the manufactured-solution model problem ([`model`]), and
//! - a convergence-study driver ([`study`]).

pub mod error;
pub mod fe;
pub mod macro_assembly;
pub mod mesh;
pub mod micro;
pub mod model;
pub mod study;
pub mod tensor;
pub mod time;

pub use error::{Error, Result};
pub use mesh::{Mesh, Point};
pub use tensor::{SymTensor2, TensorField};
