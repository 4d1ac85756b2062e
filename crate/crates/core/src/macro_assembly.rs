//! Macro-scale operators: stiffness from a (homogenized) tensor field, and the
//! constrained mass/stiffness/damping triple of the wave problem.

use rayon::prelude::*;

use crate::error::Result;
use crate::fe::{assemble_mass, assemble_with_tensors, assembly_rule, quadrature_points, FeSpace, SparseMatrix};
use crate::tensor::{SymTensor2, TensorField};
use crate::time::SystemOperators;

/// Tensor values at every macro quadrature point, evaluated in parallel.
/// The first failing point (in element order) is reported.
pub fn macro_tensors(space: &FeSpace, field: &dyn TensorField) -> Result<Vec<SymTensor2>> {
    quadrature_points(space, &assembly_rule(space.order()))
        .into_par_iter()
        .map(|x| field.eval(x))
        .collect()
}

/// Unconstrained macro stiffness matrix of `field`. With an
/// [`HmmTensorField`](crate::micro::HmmTensorField) this solves two cell
/// problems per macro quadrature point.
pub fn assemble_macro_stiffness(space: &FeSpace, field: &dyn TensorField) -> Result<SparseMatrix> {
    let tensors = macro_tensors(space, field)?;
    assemble_with_tensors(space, &assembly_rule(space.order()), &tensors)
}

/// Constrained operators for `u'' − ∇·(a∇u) − β Δu' = …` on `space`.
pub fn wave_operators(space: &FeSpace, field: &dyn TensorField, beta: f64) -> Result<SystemOperators> {
    let rule = assembly_rule(space.order());
    let mass = space.constrain_matrix(&assemble_mass(space), 1.0);
    let stiffness = space.constrain_matrix(&assemble_macro_stiffness(space, field)?, 0.0);
    let laplace = assemble_with_tensors(
        space,
        &rule,
        &vec![SymTensor2::identity(); space.mesh().num_elements() * rule.len()],
    )?;
    let damping = space.constrain_matrix(&laplace.scaled(beta), 0.0);
    SystemOperators::new(mass, stiffness, damping, space.constrained_mask().to_vec())
}
