//! Q1/Q2 finite elements on uniform quadrilateral meshes.

pub mod assembly;
pub mod basis;
pub mod norms;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;

pub use assembly::{
    assemble_load, assemble_mass, assemble_stiffness, assemble_with_tensors, assembly_rule, error_rule,
    quadrature_points,
};
pub use norms::{error_norms, function_norms};
pub use quadrature::{gauss_rule, QuadratureRule};
pub use solver::{jacobi, pcg, solve_spd, SolveStats};
pub use space::{interpolate_nodal, Constraint, FeFunction, FeSpace};
pub use sparse::SparseMatrix;
