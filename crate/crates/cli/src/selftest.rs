//! Quick sanity checks with closed-form answers, runnable from the binary.

use wavehmm::fe::{
    assemble_mass, assemble_stiffness, assembly_rule, gauss_rule, interpolate_nodal, solve_spd, Constraint, FeSpace,
    SparseMatrix,
};
use wavehmm::micro::{homogenized_tensor_exact, homogenized_tensor_hmm, CellConfig, CoefficientMode, ConstantCoefficient, Coupling};
use wavehmm::model::{exact_solution, exact_velocity, oscillatory_coefficient, Nonlinearity};
use wavehmm::tensor::ConstantTensor;
use wavehmm::time::{check_step_restriction, integrate, Integrator, NoForcing, Scheme, SolverParams, State, SystemOperators};
use wavehmm::{Mesh, Result, SymTensor2};

type Check = (&'static str, fn() -> Result<bool>);

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn smallest_meshes() -> Result<bool> {
    let one = Mesh::square([0.0, 0.0], 1.0, 1)?;
    let two = Mesh::square([0.0, 0.0], 1.0, 2)?;
    Ok((one.num_nodes(), one.num_elements(), one.boundary_nodes().len()) == (4, 1, 4)
        && (two.num_nodes(), two.num_elements(), two.boundary_nodes().len()) == (9, 4, 8)
        && one.periodic_identification().len() == 3)
}

fn quadrature() -> Result<bool> {
    let mid = gauss_rule(1)?;
    let two = gauss_rule(2)?;
    let integral: f64 = two.iter().map(|(p, w)| w * p[0] * p[0] * p[1] * p[1]).sum();
    Ok(mid.len() == 1 && mid.points()[0] == [0.5, 0.5] && mid.weights()[0] == 1.0 && close(integral, 1.0 / 9.0, 1e-15))
}

fn assembly() -> Result<bool> {
    let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, 3)?, 2, Constraint::None)?;
    let mass = assemble_mass(&space);
    let total: f64 = mass.mul_vec(&vec![1.0; space.dof_count()]).iter().sum();
    let c = SymTensor2::new(1.2, 0.3, 0.8);
    let k = assemble_stiffness(&space, &ConstantTensor(c), &assembly_rule(2))?;
    let k5 = assemble_stiffness(&space, &ConstantTensor(c.scaled(5.0)), &assembly_rule(2))?;
    let kernel = k.mul_vec(&vec![2.0; space.dof_count()]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scaling = SparseMatrix::linear_combination(&[(5.0, &k), (-1.0, &k5)])?.max_abs();
    Ok(close(total, 1.0, 1e-13) && kernel < 1e-12 && scaling < 1e-12)
}

fn interpolation() -> Result<bool> {
    let space = FeSpace::new(Mesh::square([0.0, 0.0], 1.0, 4)?, 1, Constraint::None)?;
    let ones = interpolate_nodal(&space, |_| 1.0)?;
    let linear = interpolate_nodal(&space, |x| 2.0 * x[0] - x[1] + 0.5)?;
    let p = [0.37, 0.81];
    let value = linear.value_at(p).unwrap_or(f64::NAN);
    Ok(ones.coefficients().iter().all(|&v| v == 1.0) && close(value, 2.0 * p[0] - p[1] + 0.5, 1e-14))
}

fn linear_solves() -> Result<bool> {
    let b = [1.0, -2.0, 3.5];
    let x = solve_spd(&SparseMatrix::identity(3), &b, 1e-14)?;
    let d = [2.0, 4.0, 0.5];
    let y = solve_spd(&SparseMatrix::from_diagonal(&d), &b, 1e-14)?;
    Ok(x.iter().zip(&b).all(|(x, b)| close(*x, *b, 1e-14))
        && y.iter().zip(b.iter().zip(&d)).all(|(y, (b, d))| close(*y, b / d, 1e-14)))
}

fn constant_cell_tensor() -> Result<bool> {
    let two = SymTensor2::isotropic(2.0);
    let mut ok = true;
    for coupling in [Coupling::Periodic, Coupling::Dirichlet, Coupling::Neumann] {
        let cfg = CellConfig::new([0.4, 0.4], 1.0 / 32.0, 1.0 / 128.0, 8, coupling, CoefficientMode::Frozen);
        ok &= homogenized_tensor_hmm(&ConstantCoefficient(two), &cfg)?.frobenius_distance(&two) < 1e-8;
    }
    Ok(ok)
}

fn model_identities() -> Result<bool> {
    let g = Nonlinearity::default();
    let a = oscillatory_coefficient([0.0, 0.3], 1.0 / 128.0);
    let t = homogenized_tensor_exact([0.25, 0.0]);
    Ok(g.eval(0.0) == 0.0
        && g.eval(-0.7) == -g.eval(0.7)
        && close(a.xx, 0.33, 1e-15)
        && a.xx == a.yy
        && close(t.xx, 0.455961, 1e-6)
        && close(t.yy, 0.48, 1e-14)
        && exact_solution(0.3, [0.0, 0.4]) == 0.0
        && close(exact_velocity(0.3, [0.2, 0.4]), std::f64::consts::PI * exact_solution(0.3, [0.2, 0.4]), 1e-15))
}

fn scalar_ops(b: f64) -> Result<SystemOperators> {
    let one = |v| SparseMatrix::from_diagonal(&[v]);
    SystemOperators::new(one(1.0), one(0.0), one(b), vec![false])
}

fn amplification() -> Result<bool> {
    // ν' = λν with λ = −10⁴, τ = 10⁻³
    let (tau, lambda): (f64, f64) = (1e-3, -1e4);
    let z = tau * lambda;
    let ops = scalar_ops(-lambda)?;
    let mut ok = true;
    for (scheme, expected) in [
        (Scheme::Imex, (1.0 + z / 2.0) / (1.0 - z / 2.0)),
        (Scheme::ImplicitMidpoint, (1.0 + z / 2.0) / (1.0 - z / 2.0)),
        (Scheme::ExplicitMidpoint, 1.0 + z + z * z / 2.0),
    ] {
        let mut it = Integrator::new(&ops, &NoForcing, scheme, tau, SolverParams::default())?;
        let mut s = State::new(0.0, vec![0.0], vec![1.0]);
        it.step(&mut s)?;
        ok &= close(it.nodal_velocity(&mut s)?[0], expected, 1e-12 * expected.abs().max(1.0));
    }
    Ok(ok && close(1.0 + z + z * z / 2.0, 41.0, 1e-12))
}

fn trivial_runs() -> Result<bool> {
    let ops = scalar_ops(1.0)?;
    let mut ok = true;
    for scheme in Scheme::ALL {
        let (zero, _, _) = integrate(scheme, State::new(0.0, vec![0.0], vec![0.0]), &ops, &NoForcing, 0.1, 1.0, SolverParams::default(), |_| {})?;
        let (same, _, _) = integrate(scheme, State::new(0.5, vec![1.5], vec![-2.0]), &ops, &NoForcing, 0.1, 0.5, SolverParams::default(), |_| {})?;
        ok &= zero.displacement == [0.0] && same.displacement == [1.5] && same.time == 0.5;
    }
    Ok(ok)
}

fn step_restriction() -> Result<bool> {
    Ok(check_step_restriction(10.0, 0.0) && check_step_restriction(0.5, 1.0) && !check_step_restriction(2.0, 1.0))
}

pub const CHECKS: [Check; 10] = [
    ("mesh counts and periodic identification", smallest_meshes),
    ("quadrature weights and exactness", quadrature),
    ("mass total, stiffness kernel and linearity", assembly),
    ("nodal interpolation of constants and linears", interpolation),
    ("identity and diagonal solves", linear_solves),
    ("constant coefficient cell tensor", constant_cell_tensor),
    ("model coefficient, nonlinearity and exact solution", model_identities),
    ("scalar amplification factors", amplification),
    ("zero data and zero steps", trivial_runs),
    ("step-size restriction", step_restriction),
];

/// Runs every check; returns `(name, passed, error message)`.
pub fn run() -> Vec<(&'static str, bool, Option<String>)> {
    CHECKS
        .iter()
        .map(|(name, check)| match check() {
            Ok(ok) => (*name, ok, None),
            Err(e) => (*name, false, Some(e.to_string())),
        })
        .collect()
}
