//! Element-loop assembly of mass and stiffness matrices.
//!
//! Element matrices are computed in parallel and scattered in element order,
//! so results do not depend on the thread count.

use rayon::prelude::*;

use super::basis::Tabulation;
use super::quadrature::{gauss_rule, QuadratureRule};
use super::space::FeSpace;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::tensor::{SymTensor2, TensorField};

/// Assembly rule: 2×2 Gauss for Q1, 3×3 for Q2.
pub fn assembly_rule(order: usize) -> QuadratureRule {
    gauss_rule(order + 1).expect("order is 1 or 2")
}

/// Error-norm rule, one point per axis more than assembly.
pub fn error_rule(order: usize) -> QuadratureRule {
    gauss_rule(order + 2).expect("order is 1 or 2")
}

/// Physical coordinates of every quadrature point, element by element.
pub fn quadrature_points(space: &FeSpace, rule: &QuadratureRule) -> Vec<Point> {
    let mesh = space.mesh();
    let h = mesh.element_size();
    (0..mesh.num_elements())
        .flat_map(|e| {
            let o = mesh.element_origin(e);
            rule.points()
                .iter()
                .map(move |p| [o[0] + p[0] * h[0], o[1] + p[1] * h[1]])
        })
        .collect()
}

fn scatter(space: &FeSpace, locals: Vec<Vec<f64>>) -> SparseMatrix {
    let k = space.dofs_per_element();
    let mut triplets = Vec::with_capacity(locals.len() * k * k);
    for (e, local) in locals.into_iter().enumerate() {
        let dofs = space.element_dofs(e);
        for a in 0..k {
            for b in 0..k {
                triplets.push((dofs[a], dofs[b], local[a * k + b]));
            }
        }
    }
    SparseMatrix::from_triplets(space.dof_count(), &triplets)
}

/// `M_ij = ∫ φ_i φ_j`, unconstrained.
pub fn assemble_mass(space: &FeSpace) -> SparseMatrix {
    let rule = assembly_rule(space.order());
    let tab = Tabulation::new(space.order(), &rule, space.mesh().element_size());
    let k = space.dofs_per_element();
    // Uniform mesh: every element matrix is the same.
    let mut local = vec![0.0; k * k];
    for q in 0..tab.num_points() {
        let (v, w) = (&tab.values[q], tab.weights[q]);
        for a in 0..k {
            for b in 0..k {
                local[a * k + b] += w * v[a] * v[b];
            }
        }
    }
    scatter(space, vec![local; space.mesh().num_elements()])
}

/// Stiffness matrix from tensors already evaluated at every quadrature point
/// (element-major, in the order of [`quadrature_points`]).
pub fn assemble_with_tensors(
    space: &FeSpace,
    rule: &QuadratureRule,
    tensors: &[SymTensor2],
) -> Result<SparseMatrix> {
    let nq = rule.len();
    let ne = space.mesh().num_elements();
    if tensors.len() != ne * nq {
        return Err(Error::DimensionMismatch {
            expected: ne * nq,
            actual: tensors.len(),
        });
    }
    if let Some(i) = tensors.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFinite(format!(
            "tensor at quadrature point {} of element {}",
            i % nq,
            i / nq
        )));
    }
    let tab = Tabulation::new(space.order(), rule, space.mesh().element_size());
    let k = space.dofs_per_element();
    let locals: Vec<Vec<f64>> = (0..ne)
        .into_par_iter()
        .map(|e| {
            let mut local = vec![0.0; k * k];
            for q in 0..nq {
                let t = &tensors[e * nq + q];
                let g = &tab.gradients[q];
                let w = tab.weights[q];
                for a in 0..k {
                    let ag = t.apply(g[a]);
                    for b in 0..k {
                        local[a * k + b] += w * (ag[0] * g[b][0] + ag[1] * g[b][1]);
                    }
                }
            }
            local
        })
        .collect();
    Ok(scatter(space, locals))
}

/// `A_ij = Σ_K Σ_q ω_q a(x_q) ∇φ_i(x_q)·∇φ_j(x_q)`, unconstrained.
pub fn assemble_stiffness(
    space: &FeSpace,
    tensor: &dyn TensorField,
    rule: &QuadratureRule,
) -> Result<SparseMatrix> {
    let tensors = quadrature_points(space, rule)
        .into_iter()
        .map(|x| tensor.eval(x))
        .collect::<Result<Vec<_>>>()?;
    assemble_with_tensors(space, rule, &tensors)
}

/// Load vector of nodally interpolated data: `M · nodal_values`.
pub fn assemble_load(space: &FeSpace, nodal_values: &[f64]) -> Result<Vec<f64>> {
    assemble_mass(space).try_mul_vec(nodal_values)
}
