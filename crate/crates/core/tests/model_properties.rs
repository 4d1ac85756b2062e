//! Model-problem properties: the nonlinearity, the manufactured forcing and the initial data.

use std::f64::consts::PI;

use proptest::prelude::*;

use wavehmm::fe::{error_norms, error_rule, interpolate_nodal};
use wavehmm::micro::homogenized_tensor_exact;
use wavehmm::model::{
    exact_gradient, exact_solution, exact_velocity, exact_velocity_gradient, initial_data, manufactured_rhs,
    oscillatory_coefficient, wave_residual, Nonlinearity, NonlinearityForm, ProblemSpec, TensorJet,
};
use wavehmm::study::macro_space;
use wavehmm::SymTensor2;

const H: f64 = 1e-4;

/// `∂_tt u − ∇·(a⁰∇u) − β Δ∂_t u + g(∂_t u)` by central differences of the
/// exact solution and of the closed-form tensor only.
fn residual_by_differences(problem: &ProblemSpec, t: f64, x: [f64; 2]) -> f64 {
    let u = exact_solution;
    let [x1, x2] = x;
    let utt = (u(t + H, x) - 2.0 * u(t, x) + u(t - H, x)) / (H * H);
    let a = |x1: f64| homogenized_tensor_exact([x1, 0.0]);
    let flux = a(x1 + H / 2.0).xx * (u(t, [x1 + H, x2]) - u(t, x)) - a(x1 - H / 2.0).xx * (u(t, x) - u(t, [x1 - H, x2]))
        + a(x1).yy * (u(t, [x1, x2 + H]) - 2.0 * u(t, x) + u(t, [x1, x2 - H]));
    let ut = |x: [f64; 2]| (u(t + H, x) - u(t - H, x)) / (2.0 * H);
    let lap_ut = (ut([x1 + H, x2]) + ut([x1 - H, x2]) + ut([x1, x2 + H]) + ut([x1, x2 - H]) - 4.0 * ut(x)) / (H * H);
    utt - flux / (H * H) - problem.beta * lap_ut + problem.nonlinearity.eval(ut(x))
}

#[test]
fn nonlinearity_reference_values() {
    let g = Nonlinearity::default();
    assert_eq!(g.eval(0.0), 0.0);
    let expected = 2.0001f64.powf(0.6) - 1e-4f64.powf(0.6);
    assert!((g.eval(2.0) - expected).abs() < 1e-15);
    assert!((g.eval(2.0) - 1.51178).abs() < 1e-5);
    assert!((g.lipschitz() - 0.6 / 1e-4f64.powf(0.4)).abs() < 1e-12);
}

#[test]
fn literal_form_differs_only_for_negative_arguments() {
    let reg = Nonlinearity::default();
    let lit = Nonlinearity {
        form: NonlinearityForm::Literal,
        ..reg
    };
    for eta in [1e-6, 0.3, 2.0, 50.0] {
        assert_eq!(reg.eval(eta), lit.eval(eta));
        assert!(reg.eval(-eta) != lit.eval(-eta));
    }
}

#[test]
fn problem_validation() {
    assert!(ProblemSpec::default().validate().is_ok());
    let mut p = ProblemSpec::default();
    p.nonlinearity.gamma = 1.5;
    assert!(p.validate().is_err());
    p = ProblemSpec {
        epsilon: 0.0,
        ..Default::default()
    };
    assert!(p.validate().is_err());
    p = ProblemSpec {
        final_time: -1.0,
        ..Default::default()
    };
    assert!(p.validate().is_err());
}

#[test]
fn center_value_matches_high_order_differences() {
    // fourth-order stencils at t = 0, x = (½, ½), step 1e-3
    let problem = ProblemSpec::default();
    let h = 1e-3;
    let x = [0.5, 0.5];
    let d2 = |f: &dyn Fn(f64) -> f64| (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h);
    let d1 = |f: &dyn Fn(f64) -> f64| (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
    let u = |t: f64, x: [f64; 2]| exact_solution(t, x);
    let utt = d2(&|s| u(s, x));
    let a = homogenized_tensor_exact(x);
    let da11 = d1(&|s| homogenized_tensor_exact([x[0] + s, x[1]]).xx);
    let u1 = d1(&|s| u(0.0, [x[0] + s, x[1]]));
    let u11 = d2(&|s| u(0.0, [x[0] + s, x[1]]));
    let u22 = d2(&|s| u(0.0, [x[0], x[1] + s]));
    // a⁰₂₂ does not depend on x₂, so only ∂₁a⁰₁₁ enters
    let div = da11 * u1 + a.xx * u11 + a.yy * u22;
    let ut = d1(&|s| u(s, x));
    let lap_ut = d1(&|s| d2(&|r| u(s, [x[0] + r, x[1]])) + d2(&|r| u(s, [x[0], x[1] + r])));
    let f = utt - div - problem.beta * lap_ut + problem.nonlinearity.eval(ut);
    let value = manufactured_rhs(&problem, 0.0, x);
    assert!((value - f).abs() < 1e-6 * value.abs().max(1.0), "{value} vs {f}");
}

#[test]
fn plain_wave_residual() {
    // no damping, no nonlinearity, identity tensor: f = u_tt − Δu
    let id = |_| TensorJet {
        value: SymTensor2::identity(),
        d1: SymTensor2::new(0.0, 0.0, 0.0),
        d2: SymTensor2::new(0.0, 0.0, 0.0),
    };
    for &(t, x) in &[(0.0, [0.3, 0.7]), (0.8, [0.55, 0.1])] {
        let [x1, x2] = x;
        let (s1, s2) = ((PI * x1 * x1).sin(), (PI * x2 * x2).sin());
        let dd = |r: f64| 2.0 * PI * (PI * r * r).cos() - 4.0 * PI * PI * r * r * (PI * r * r).sin();
        let lap = (PI * t).exp() * (dd(x1) * s2 + s1 * dd(x2));
        let expected = PI * PI * exact_solution(t, x) - lap;
        let f = wave_residual(t, x, 0.0, id, |_| 0.0);
        assert!((f - expected).abs() < 1e-11 * expected.abs().max(1.0));
    }
}

#[test]
fn initial_data_properties() {
    for order in [1, 2] {
        let space = macro_space(3, order).unwrap();
        let (mu, nu) = initial_data(&space, 0.0).unwrap();
        for d in space.constrained_dofs() {
            assert_eq!((mu[d], nu[d]), (0.0, 0.0));
        }
        for (u, v) in mu.iter().zip(&nu) {
            assert!((v - PI * u).abs() < 1e-14);
        }
    }
}

#[test]
fn interpolation_error_decays_at_order_p() {
    for order in [1usize, 2] {
        let errors: Vec<f64> = (3..=5)
            .map(|k| {
                let space = macro_space(k, order).unwrap();
                let u = interpolate_nodal(&space, |x| exact_solution(0.0, x)).unwrap();
                error_norms(&u, |x| exact_solution(0.0, x), |x| exact_gradient(0.0, x), &error_rule(order)).1
            })
            .collect();
        let rate = (errors[1] / errors[2]).log2();
        assert!((rate - order as f64).abs() < 0.15, "p = {order}: {rate}");
    }
}

#[test]
fn exact_solution_identities() {
    assert!((exact_solution(0.0, [0.5, 0.5]) - 0.5).abs() < 1e-15);
    for x in [[0.0, 0.3], [1.0, 0.6], [0.2, 0.0], [0.9, 1.0]] {
        assert!(exact_solution(0.7, x).abs() < 1e-14);
    }
    let x = [0.35, 0.8];
    assert!((exact_velocity(0.4, x) - PI * exact_solution(0.4, x)).abs() < 1e-14);
    let (g, gv) = (exact_gradient(0.4, x), exact_velocity_gradient(0.4, x));
    assert!((gv[0] - PI * g[0]).abs() < 1e-13 && (gv[1] - PI * g[1]).abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nonlinearity_is_odd_and_monotone(eta in -100.0f64..100.0, d in 0.0f64..10.0) {
        let g = Nonlinearity::default();
        prop_assert_eq!(g.eval(-eta), -g.eval(eta));
        prop_assert!(g.eval(eta + d) >= g.eval(eta));
    }

    #[test]
    fn nonlinearity_is_lipschitz(pairs in prop::collection::vec((-5.0f64..5.0, -1e-3f64..1e-3), 100)) {
        // 100 cases × 100 pairs; half of each pair sits close to the kink at 0
        let g = Nonlinearity::default();
        let l = g.lipschitz();
        for (a, b) in pairs {
            for (p, q) in [(a, b), (b, -b * 0.5), (a, a + b)] {
                prop_assert!((g.eval(p) - g.eval(q)).abs() <= l * (p - q).abs() * (1.0 + 1e-12) + 1e-15);
            }
        }
    }

    #[test]
    fn oscillatory_coefficient_in_ellipticity_window(x1 in 0.0f64..1.0, k in 2i32..16) {
        let a = oscillatory_coefficient([x1, 0.5], 2f64.powi(-k));
        prop_assert!(a.xx >= 0.03 && a.xx <= 0.63 && a.xx == a.yy && a.xy == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn manufactured_rhs_matches_differences(t in 0.01f64..0.99, x1 in 0.01f64..0.99, x2 in 0.01f64..0.99) {
        let problem = ProblemSpec::default();
        let f = manufactured_rhs(&problem, t, [x1, x2]);
        let fd = residual_by_differences(&problem, t, [x1, x2]);
        prop_assert!((f - fd).abs() <= 1e-6 * f.abs().max(1.0), "{} vs {}", f, fd);
    }
}
