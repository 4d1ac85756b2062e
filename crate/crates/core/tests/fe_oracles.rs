//! Finite-element assembly and solver checked against dense brute-force oracles.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use wavehmm::fe::{
    assemble_mass, assemble_stiffness, assembly_rule, solve_spd, Constraint, FeSpace, SparseMatrix,
};
use wavehmm::macro_assembly::{assemble_macro_stiffness, wave_operators};
use wavehmm::micro::{CellConfig, CoefficientMode, Coupling, ExactHomogenizedTensor, HmmTensorField};
use wavehmm::model::OscillatoryCoefficient;
use wavehmm::tensor::{ConstantTensor, FnTensor, TensorKind};
use wavehmm::{Mesh, Point, SymTensor2, TensorField};

fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let n = a.dim();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j))
}

/// Q1 stiffness by a plain double loop over elements, corners and 2×2 Gauss points,
/// mapping corners to dofs by coordinates.
fn brute_force_q1_stiffness(space: &FeSpace, a: impl Fn(Point) -> SymTensor2) -> DMatrix<f64> {
    let mesh = space.mesh();
    let n = space.dof_count();
    let [hx, hy] = mesh.element_size();
    let g = 0.5 / 3f64.sqrt();
    let gauss = [0.5 - g, 0.5 + g];
    let dof_at = |p: Point| {
        (0..n)
            .find(|&d| {
                let q = space.dof_point(d);
                (q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12
            })
            .expect("corner is a dof")
    };
    let mut k = DMatrix::zeros(n, n);
    for e in 0..mesh.num_elements() {
        let o = mesh.element_origin(e);
        let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let dofs: Vec<usize> = corners.iter().map(|&(i, j)| dof_at([o[0] + i * hx, o[1] + j * hy])).collect();
        for &s in &gauss {
            for &t in &gauss {
                let x = [o[0] + s * hx, o[1] + t * hy];
                let w = 0.25 * hx * hy;
                let grad = |(i, j): (f64, f64)| {
                    let fx = if i == 0.0 { 1.0 - s } else { s };
                    let fy = if j == 0.0 { 1.0 - t } else { t };
                    let dx = if i == 0.0 { -1.0 } else { 1.0 } / hx;
                    let dy = if j == 0.0 { -1.0 } else { 1.0 } / hy;
                    [dx * fy, fx * dy]
                };
                let at = a(x);
                for (ai, &ca) in corners.iter().enumerate() {
                    for (bi, &cb) in corners.iter().enumerate() {
                        k[(dofs[ai], dofs[bi])] += w * at.bilinear(grad(ca), grad(cb));
                    }
                }
            }
        }
    }
    k
}

#[test]
fn four_element_exact_field_matches_brute_force() {
    let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, 2).unwrap(), 1, Constraint::None).unwrap();
    let a = dense(&assemble_macro_stiffness(&space, &ExactHomogenizedTensor).unwrap());
    let b = brute_force_q1_stiffness(&space, |x| ExactHomogenizedTensor.eval(x).unwrap());
    assert!((a - b).abs().max() < 1e-13);
}

#[test]
fn constant_field_matches_plain_stiffness() {
    for order in [1, 2] {
        let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, 5).unwrap(), order, Constraint::None).unwrap();
        let c = ConstantTensor(SymTensor2::new(1.3, 0.2, 0.7));
        let a = dense(&assemble_macro_stiffness(&space, &c).unwrap());
        let b = dense(&assemble_stiffness(&space, &c, &assembly_rule(order)).unwrap());
        assert!((a - b).abs().max() < 1e-13);
    }
}

#[test]
fn mass_integrates_constants_and_stiffness_is_psd() {
    for order in [1, 2] {
        let space = FeSpace::new(Mesh::uniform([0.5, -1.0], [2.0, 0.5], [3, 4]).unwrap(), order, Constraint::None)
            .unwrap();
        let m = dense(&assemble_mass(&space));
        assert!((m.sum() - 1.0).abs() < 1e-13);
        let k = dense(&assemble_macro_stiffness(&space, &ExactHomogenizedTensor).unwrap());
        assert!((&k - k.transpose()).abs().max() < 1e-13);
        let eig = k.clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() > -1e-12);
        // constants are in the kernel
        let ones = DVector::from_element(space.dof_count(), 1.0);
        assert!((&k * ones).abs().max() < 1e-12);
    }
}

#[test]
fn constrained_operators_are_definite() {
    let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, 4).unwrap(), 2, Constraint::Dirichlet).unwrap();
    let ops = wave_operators(&space, &ExactHomogenizedTensor, 0.01).unwrap();
    let free = space.free_dofs();
    let k = dense(&ops.stiffness).select_rows(&free).select_columns(&free);
    assert!(k.symmetric_eigen().eigenvalues.min() > 0.0);
}

#[test]
fn pcg_matches_dense_cholesky() {
    let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, 6).unwrap(), 2, Constraint::Dirichlet).unwrap();
    let ops = wave_operators(&space, &ExactHomogenizedTensor, 0.01).unwrap();
    let sys = SparseMatrix::linear_combination(&[(1.0, &ops.mass), (0.3, &ops.stiffness)]).unwrap();
    let mut b: Vec<f64> = (0..space.dof_count()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
    ops.zero_constrained(&mut b);
    let x = solve_spd(&sys, &b, 1e-13).unwrap();
    let oracle = dense(&sys).cholesky().expect("SPD").solve(&DVector::from_vec(b));
    let err = (DVector::from_vec(x) - &oracle).abs().max();
    assert!(err < 1e-10 * oracle.abs().max(), "{err}");
}

#[test]
fn hmm_stiffness_approaches_exact_stiffness() {
    let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, 2).unwrap(), 1, Constraint::None).unwrap();
    let exact = dense(&assemble_macro_stiffness(&space, &ExactHomogenizedTensor).unwrap());
    let scale = exact.abs().max();
    let mut diffs = Vec::new();
    for n in [16, 32, 64] {
        let template = CellConfig::new([0.0, 0.0], 1.0 / 32.0, 1.0 / 128.0, n, Coupling::Periodic, CoefficientMode::Frozen);
        let field = HmmTensorField::new(std::sync::Arc::new(OscillatoryCoefficient), template).unwrap();
        let a = dense(&assemble_macro_stiffness(&space, &field).unwrap());
        let quad_points = space.mesh().num_elements() * assembly_rule(1).len();
        assert_eq!(field.cell_solves(), 2 * quad_points);
        // reassembly hits the cache
        assemble_macro_stiffness(&space, &field).unwrap();
        assert_eq!(field.cell_solves(), 2 * quad_points);
        let h_over_eps = (1.0 / 32.0) / n as f64 * 128.0;
        let d = (a - &exact).abs().max();
        assert!(d <= h_over_eps.powi(2) * scale, "n = {n}: {d}");
        diffs.push(d);
    }
    assert!(diffs.windows(2).all(|w| w[1] < 0.5 * w[0]), "{diffs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembly_is_symmetric_with_constant_kernel(
        xx in 0.1f64..3.0, yy in 0.1f64..3.0, r in -0.9f64..0.9, n in 1usize..6, order in 1usize..3,
    ) {
        let xy = r * (xx * yy).sqrt();
        let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, n).unwrap(), order, Constraint::None).unwrap();
        let field = FnTensor::new(TensorKind::Custom, move |x: Point| {
            SymTensor2::new(xx * (1.0 + x[0]), xy, yy * (1.0 + x[1] * x[1]))
        });
        let k = assemble_macro_stiffness(&space, &field).unwrap();
        prop_assert!(k.symmetry_defect() < 1e-13 * k.max_abs());
        let row_sums = k.mul_vec(&vec![1.0; space.dof_count()]);
        prop_assert!(row_sums.iter().all(|s| s.abs() < 1e-12 * k.max_abs()));
    }

    #[test]
    fn stiffness_reproduces_energy_of_linear_functions(
        gx in -2.0f64..2.0, gy in -2.0f64..2.0, c in 0.2f64..2.0, n in 1usize..5, order in 1usize..3,
    ) {
        // ∫ c |∇u|² over the unit square for u = g·x is c |g|²
        let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, n).unwrap(), order, Constraint::None).unwrap();
        let k = assemble_macro_stiffness(&space, &ConstantTensor(SymTensor2::isotropic(c))).unwrap();
        let u: Vec<f64> = space.dof_points().iter().map(|p| gx * p[0] + gy * p[1]).collect();
        let e = k.quadratic_form(&u);
        prop_assert!((e - c * (gx * gx + gy * gy)).abs() < 1e-12 * (1.0 + e));
    }
}
