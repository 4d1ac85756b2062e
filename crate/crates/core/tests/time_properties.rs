//! Integrator invariants on random small systems.

use proptest::prelude::*;

use wavehmm::fe::SparseMatrix;
use wavehmm::time::{
    integrate, ConstantForcing, Dependence, Forcing, Integrator, NoForcing, Scheme, SolverParams, State,
    SystemOperators, Velocity,
};
use wavehmm::{Error, Result};

fn tight() -> SolverParams {
    SolverParams {
        cg_tol: 1e-15,
        fp_tol: 1e-13,
        ..Default::default()
    }
}

/// `L Lᵀ + shift·I` from a flat list of lower-triangle entries.
fn spd(n: usize, entries: &[f64], shift: f64) -> SparseMatrix {
    let mut l = vec![vec![0.0; n]; n];
    let mut it = entries.iter().cycle();
    for (i, row) in l.iter_mut().enumerate() {
        for v in row.iter_mut().take(i + 1) {
            *v = *it.next().unwrap();
        }
    }
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|k| l[i][k] * l[j][k]).sum::<f64>() + if i == j { shift } else { 0.0 };
            if v != 0.0 {
                t.push((i, j, v));
            }
        }
    }
    SparseMatrix::from_triplets(n, &t)
}

fn system(n: usize, m: &[f64], a: &[f64], b: Option<&[f64]>) -> SystemOperators {
    let damping = match b {
        Some(b) => spd(n, b, 0.0),
        None => SparseMatrix::from_triplets(n, &[]),
    };
    SystemOperators::new(spd(n, m, 1.0), spd(n, a, 0.0), damping, vec![false; n]).unwrap()
}

fn nodal(it: &mut Integrator<'_>, s: &mut State) -> Vec<f64> {
    it.nodal_velocity(s).unwrap().to_vec()
}

fn energies(ops: &SystemOperators, scheme: Scheme, tau: f64, s0: &State, steps: usize) -> Vec<f64> {
    let mut it = Integrator::new(ops, &NoForcing, scheme, tau, tight()).unwrap();
    let mut s = s0.clone();
    let v = nodal(&mut it, &mut s);
    let mut out = vec![ops.energy(&s.displacement, &v)];
    for _ in 0..steps {
        it.step(&mut s).unwrap();
        let v = nodal(&mut it, &mut s);
        out.push(ops.energy(&s.displacement, &v));
    }
    out
}

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

/// `G(ν) = −κ ν` (velocity dependent, linear).
struct Friction(f64);

impl Forcing for Friction {
    fn dependence(&self) -> Dependence {
        Dependence::Full
    }

    fn load(&self, _t: f64, _mu: &[f64], nu: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, v) in out.iter_mut().zip(nu) {
            *o = -self.0 * v;
        }
        Ok(())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn damped_energy_never_increases(
        m in entries(36), a in entries(36), b in entries(36), x in entries(16), tau in 0.01f64..0.5,
    ) {
        let ops = system(8, &m, &a, Some(&b));
        let s0 = State::new(0.0, x[..8].to_vec(), x[8..].to_vec());
        for scheme in [Scheme::Imex, Scheme::ImplicitMidpoint] {
            let e = energies(&ops, scheme, tau, &s0, 100);
            for w in e.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * e[0], "{scheme}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn undamped_implicit_midpoint_conserves_energy(
        m in entries(36), a in entries(36), x in entries(16), tau in 0.01f64..1.0,
    ) {
        let ops = system(8, &m, &a, None);
        let s0 = State::new(0.0, x[..8].to_vec(), x[8..].to_vec());
        let e = energies(&ops, Scheme::ImplicitMidpoint, tau, &s0, 100);
        for v in &e {
            prop_assert!((v - e[0]).abs() <= 1e-8 * e[0]);
        }
    }

    #[test]
    fn imex_and_implicit_agree_for_constant_forcing(
        m in entries(21), a in entries(21), b in entries(21), x in entries(12), g in entries(6),
    ) {
        let ops = system(6, &m, &a, Some(&b));
        let forcing = ConstantForcing(g);
        let s0 = State::new(0.0, x[..6].to_vec(), x[6..].to_vec());
        let run = |scheme| {
            let (s, _, _) = integrate(scheme, s0.clone(), &ops, &forcing, 0.05, 1.0, tight(), |_| {}).unwrap();
            s
        };
        let (p, q) = (run(Scheme::Imex), run(Scheme::ImplicitMidpoint));
        let d = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (Velocity::Nodal(vp), Velocity::Nodal(vq)) = (&p.velocity, &q.velocity) else {
            panic!("integrate returns nodal velocities");
        };
        prop_assert!(d(&p.displacement, &q.displacement) <= 1e-12);
        prop_assert!(d(vp, vq) <= 1e-12);
    }

    #[test]
    fn linear_friction_matches_added_damping(
        m in entries(21), a in entries(21), x in entries(12), kappa in 0.0f64..2.0,
    ) {
        // G(ν) = −κν treated explicitly vs κI moved into B: both second order,
        // so they agree to O(τ²) over a unit interval
        let n = 6;
        let ops = system(n, &m, &a, None);
        let moved = SystemOperators::new(
            ops.mass.clone(),
            ops.stiffness.clone(),
            SparseMatrix::from_diagonal(&vec![kappa; n]),
            vec![false; n],
        ).unwrap();
        let s0 = State::new(0.0, x[..n].to_vec(), x[n..].to_vec());
        let final_disp = |ops: &SystemOperators, f: &dyn Forcing, tau: f64| {
            integrate(Scheme::Imex, s0.clone(), ops, f, tau, 1.0, tight(), |_| {}).unwrap().0.displacement
        };
        let gap = |tau: f64| {
            let (p, q) = (final_disp(&ops, &Friction(kappa), tau), final_disp(&moved, &NoForcing, tau));
            p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(1.0 / 64.0), gap(1.0 / 128.0));
        prop_assert!(g2 <= 0.3 * g1 + 1e-12, "{g1} {g2}");
    }
}

#[test]
fn counters_follow_the_step_accounting() {
    let ops = system(5, &[0.3, -0.2, 0.5, 0.1], &[0.7, 0.2, -0.4], Some(&[0.1, 0.05]));
    let s0 = State::new(0.0, vec![0.1, 0.2, -0.3, 0.4, 0.0], vec![0.5, 0.0, 0.1, -0.2, 0.3]);
    let g = ConstantForcing(vec![0.1; 5]);
    let cases: [(&dyn Forcing, Scheme, usize, usize, usize); 4] = [
        // forcing, scheme, evaluations, system solves, mass solves per step
        (&Friction(0.5), Scheme::Imex, 2, 1, 1),
        (&g, Scheme::Imex, 2, 1, 0),
        (&NoForcing, Scheme::Imex, 2, 1, 0),
        (&Friction(0.5), Scheme::ExplicitMidpoint, 2, 0, 2),
    ];
    for (forcing, scheme, evals, system_solves, mass_solves) in cases {
        let mut it = Integrator::new(&ops, forcing, scheme, 0.1, SolverParams::default()).unwrap();
        let mut s = s0.clone();
        for _ in 0..10 {
            it.step(&mut s).unwrap();
        }
        let c = it.counters();
        assert_eq!(c.steps, 10);
        assert_eq!(c.forcing_evals, 10 * evals, "{scheme} {:?}", forcing.dependence());
        assert_eq!(c.system_solves, 10 * system_solves, "{scheme}");
        assert_eq!(c.mass_solves, 10 * mass_solves, "{scheme}");
    }
    // implicit midpoint with a constant load: a single sweep confirms the fixed point
    let mut it = Integrator::new(&ops, &g, Scheme::ImplicitMidpoint, 0.1, SolverParams::default()).unwrap();
    let mut s = s0.clone();
    it.step(&mut s).unwrap();
    assert!(it.counters().fixed_point_sweeps <= 2);
}

#[test]
fn fixed_point_failure_is_reported() {
    // τ·κ far beyond the contraction limit of the fixed-point iteration
    let ops = system(3, &[0.0], &[0.5, 0.1], None);
    let params = SolverParams {
        fp_maxit: 5,
        ..Default::default()
    };
    let mut it = Integrator::new(&ops, &Friction(1e3), Scheme::ImplicitMidpoint, 0.1, params).unwrap();
    let mut s = State::new(0.0, vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.0]);
    match it.step(&mut s) {
        Err(Error::FixedPointNotConverged { iterations, .. }) => assert_eq!(iterations, 5),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn dimension_mismatch_is_rejected() {
    let ops = system(3, &[0.2], &[0.5], None);
    let mut it = Integrator::new(&ops, &NoForcing, Scheme::Imex, 0.1, SolverParams::default()).unwrap();
    let mut s = State::new(0.0, vec![1.0, 0.0], vec![0.0, 1.0]);
    assert!(matches!(it.step(&mut s), Err(Error::DimensionMismatch { .. })));
}
