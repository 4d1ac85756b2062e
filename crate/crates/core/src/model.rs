//! The damped semilinear test problem on the unit square:
//!
//! ```text
//! u_tt − ∇·(a⁰∇u) − β Δu_t + g(u_t) = f,   u = 0 on ∂Ω,
//! ```
//!
//! with manufactured solution `u = e^{πt} sin(πx₁²) sin(πx₂²)` and the
//! homogenized tensor of the layered coefficient
//! `a^ε = 0.33 + 0.15 (sin 2πx₁ + sin 2πx₁/ε)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::basis::Tabulation;
use crate::fe::{error_rule, interpolate_nodal, quadrature_points, FeSpace};
use crate::mesh::Point;
use crate::micro::TwoScaleCoefficient;
use crate::tensor::SymTensor2;
use crate::time::{Dependence, Forcing, SystemOperators};

/// Layered oscillatory coefficient `0.33 + 0.15 (sin 2πx₁ + sin 2πy₁)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OscillatoryCoefficient;

impl OscillatoryCoefficient {
    pub fn scalar(x1: f64, y1: f64) -> f64 {
        0.33 + 0.15 * ((2.0 * PI * x1).sin() + (2.0 * PI * y1).sin())
    }

    /// `a^ε(x)` for a given `ε`.
    pub fn at_scale(x: Point, epsilon: f64) -> f64 {
        Self::scalar(x[0], x[0] / epsilon)
    }
}

impl TwoScaleCoefficient for OscillatoryCoefficient {
    fn eval(&self, x: Point, y: Point) -> SymTensor2 {
        SymTensor2::isotropic(Self::scalar(x[0], y[0]))
    }
}

/// `a^ε(x)` as a tensor.
pub fn oscillatory_coefficient(x: Point, epsilon: f64) -> SymTensor2 {
    SymTensor2::isotropic(OscillatoryCoefficient::at_scale(x, epsilon))
}

/// A tensor with its partial derivatives `∂₁a`, `∂₂a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorJet {
    pub value: SymTensor2,
    pub d1: SymTensor2,
    pub d2: SymTensor2,
}

/// Closed-form homogenized tensor and its derivatives.
pub fn homogenized_tensor_jet(x: Point) -> TensorJet {
    let c = 1.1 + 0.5 * (2.0 * PI * x[0]).sin();
    let dc = PI * (2.0 * PI * x[0]).cos();
    let root = (c * c - 0.25).sqrt();
    TensorJet {
        value: SymTensor2::diag(0.3 * root, 0.3 * c),
        d1: SymTensor2::diag(0.3 * c * dc / root, 0.3 * dc),
        d2: SymTensor2::diag(0.0, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityForm {
    /// `θ((|η| + σ)^γ − σ^γ) sgn η`: odd and globally Lipschitz.
    #[default]
    Regularized,
    /// `sgn(η) (|η + σ|^γ − σ^γ)`, as printed for the numerical example.
    Literal,
}

/// Damping nonlinearity `g(u_t)`, entering the equation as `+g(u_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Nonlinearity {
    pub form: NonlinearityForm,
    pub theta: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Self {
            form: NonlinearityForm::Regularized,
            theta: 1.0,
            gamma: 0.6,
            sigma: 1e-4,
        }
    }
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.sigma >= 0.0) || !self.theta.is_finite() {
            return Err(Error::invalid("sigma must be non-negative and theta finite"));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.theta == 0.0
    }

    pub fn eval(&self, eta: f64) -> f64 {
        if eta == 0.0 {
            return 0.0;
        }
        let s = self.sigma.powf(self.gamma);
        let mag = match self.form {
            NonlinearityForm::Regularized => (eta.abs() + self.sigma).powf(self.gamma) - s,
            NonlinearityForm::Literal => (eta + self.sigma).abs().powf(self.gamma) - s,
        };
        self.theta * mag * eta.signum()
    }

    /// Global Lipschitz bound `|θ| γ / σ^{1−γ}` of the regularized form.
    pub fn lipschitz(&self) -> f64 {
        self.theta.abs() * self.gamma / self.sigma.powf(1.0 - self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    /// Fast scale of the oscillatory coefficient.
    pub epsilon: f64,
    /// Coefficient of the strong damping `−β Δu_t`.
    pub beta: f64,
    pub final_time: f64,
    pub nonlinearity: Nonlinearity,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            epsilon: 1.0 / 128.0,
            beta: 0.01,
            final_time: 1.0,
            nonlinearity: Nonlinearity::default(),
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be non-negative, got {}", self.beta)));
        }
        if !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return Err(Error::invalid(format!("final time must be positive, got {}", self.final_time)));
        }
        self.nonlinearity.validate()
    }
}

/// Spatial factor `s(x₁) s(x₂)` with `s(r) = sin(πr²)`, plus derivatives.
struct Profile {
    s: [f64; 2],
    ds: [f64; 2],
    dds: [f64; 2],
}

impl Profile {
    fn new(x: Point) -> Self {
        let f = |r: f64| {
            let (sn, cs) = (PI * r * r).sin_cos();
            (sn, 2.0 * PI * r * cs, 2.0 * PI * cs - 4.0 * PI * PI * r * r * sn)
        };
        let (a, b) = (f(x[0]), f(x[1]));
        Self {
            s: [a.0, b.0],
            ds: [a.1, b.1],
            dds: [a.2, b.2],
        }
    }

    fn value(&self) -> f64 {
        self.s[0] * self.s[1]
    }

    fn gradient(&self) -> [f64; 2] {
        [self.ds[0] * self.s[1], self.s[0] * self.ds[1]]
    }

    /// `[u₁₁, u₁₂, u₂₂]` of the spatial factor.
    fn hessian(&self) -> [f64; 3] {
        [
            self.dds[0] * self.s[1],
            self.ds[0] * self.ds[1],
            self.s[0] * self.dds[1],
        ]
    }
}

pub fn exact_solution(t: f64, x: Point) -> f64 {
    (PI * t).exp() * Profile::new(x).value()
}

pub fn exact_velocity(t: f64, x: Point) -> f64 {
    PI * exact_solution(t, x)
}

pub fn exact_gradient(t: f64, x: Point) -> [f64; 2] {
    let g = Profile::new(x).gradient();
    let e = (PI * t).exp();
    [e * g[0], e * g[1]]
}

pub fn exact_velocity_gradient(t: f64, x: Point) -> [f64; 2] {
    let g = exact_gradient(t, x);
    [PI * g[0], PI * g[1]]
}

/// `u_tt − ∇·(a∇u) − β Δu_t + g(u_t)` for the manufactured `u`, with an
/// arbitrary tensor (given with its derivatives) and nonlinearity.
pub fn wave_residual<A, G>(t: f64, x: Point, beta: f64, tensor: A, g: G) -> f64
where
    A: Fn(Point) -> TensorJet,
    G: Fn(f64) -> f64,
{
    let p = Profile::new(x);
    let e = (PI * t).exp();
    let u = e * p.value();
    let gu = p.gradient().map(|v| e * v);
    let [u11, u12, u22] = p.hessian().map(|v| e * v);
    let TensorJet { value: a, d1, d2 } = tensor(x);
    // ∇·(a∇u) = Σ_i ∂_i(a_ij u_j)
    let div = d1.xx * gu[0] + d1.xy * gu[1] + d2.xy * gu[0] + d2.yy * gu[1]
        + a.xx * u11
        + 2.0 * a.xy * u12
        + a.yy * u22;
    let lap_ut = PI * (u11 + u22);
    PI * PI * u - div - beta * lap_ut + g(PI * u)
}

/// Right-hand side `f` for the homogenized tensor.
pub fn manufactured_rhs(problem: &ProblemSpec, t: f64, x: Point) -> f64 {
    let g = problem.nonlinearity;
    wave_residual(t, x, problem.beta, homogenized_tensor_jet, |eta| g.eval(eta))
}

/// Nodal interpolants of `u(t₀)` and `u_t(t₀)`.
pub fn initial_data(space: &FeSpace, t0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut mu = interpolate_nodal(space, |x| exact_solution(t0, x))?.into_coefficients();
    let mut nu = interpolate_nodal(space, |x| exact_velocity(t0, x))?.into_coefficients();
    space.apply_constraints(&mut mu);
    space.apply_constraints(&mut nu);
    Ok((mu, nu))
}

/// Load vector `∫ f(t) φ_i − M g(ν)`, with `f` integrated by quadrature
/// one order above the assembly rule and `g` taken nodally.
///
/// `f` splits as `e^{πt} L(x) + g(π e^{πt} s(x))`, so the linear part is
/// integrated once and only the nonlinear part is re-evaluated.
pub struct ModelForcing<'a> {
    ops: &'a SystemOperators,
    nonlinearity: Nonlinearity,
    linear_load: Vec<f64>,
    /// `s(x_q)` at every quadrature point, element-major.
    quad_profile: Vec<f64>,
    /// Shape values times quadrature weight, per reference point.
    quad_shapes: Vec<Vec<f64>>,
    element_dofs: Vec<Vec<usize>>,
}

impl<'a> ModelForcing<'a> {
    pub fn new(space: &FeSpace, ops: &'a SystemOperators, problem: &ProblemSpec) -> Result<Self> {
        if ops.dim() != space.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: space.dof_count(),
                actual: ops.dim(),
            });
        }
        let rule = error_rule(space.order());
        let tab = Tabulation::new(space.order(), &rule, space.mesh().element_size());
        let points = quadrature_points(space, &rule);
        let nq = rule.len();
        let element_dofs: Vec<Vec<usize>> = (0..space.mesh().num_elements()).map(|e| space.element_dofs(e)).collect();
        let quad_shapes: Vec<Vec<f64>> = (0..nq)
            .map(|q| tab.values[q].iter().map(|v| v * tab.weights[q]).collect())
            .collect();
        let mut linear_load = vec![0.0; space.dof_count()];
        for (e, dofs) in element_dofs.iter().enumerate() {
            for q in 0..nq {
                let l = wave_residual(0.0, points[e * nq + q], problem.beta, homogenized_tensor_jet, |_| 0.0);
                for (&d, w) in dofs.iter().zip(&quad_shapes[q]) {
                    linear_load[d] += l * w;
                }
            }
        }
        let quad_profile = points.iter().map(|&x| Profile::new(x).value()).collect();
        Ok(Self {
            ops,
            nonlinearity: problem.nonlinearity,
            linear_load,
            quad_profile,
            quad_shapes,
            element_dofs,
        })
    }
}

impl Forcing for ModelForcing<'_> {
    fn dependence(&self) -> Dependence {
        if self.nonlinearity.is_zero() {
            Dependence::None
        } else {
            Dependence::Full
        }
    }

    fn load(&self, t: f64, _mu: &[f64], nu: &[f64], out: &mut [f64]) -> Result<()> {
        let e = (PI * t).exp();
        for (o, l) in out.iter_mut().zip(&self.linear_load) {
            *o = e * l;
        }
        let g = &self.nonlinearity;
        if !g.is_zero() {
            let nq = self.quad_shapes.len();
            for (el, dofs) in self.element_dofs.iter().enumerate() {
                for q in 0..nq {
                    let v = g.eval(PI * e * self.quad_profile[el * nq + q]);
                    for (&d, w) in dofs.iter().zip(&self.quad_shapes[q]) {
                        out[d] += v * w;
                    }
                }
            }
            let mut gn: Vec<f64> = nu.iter().map(|&v| g.eval(v)).collect();
            self.ops.zero_constrained(&mut gn);
            let mg = self.ops.mass.mul_vec(&gn);
            for (o, m) in out.iter_mut().zip(&mg) {
                *o -= m;
            }
        }
        self.ops.zero_constrained(out);
        Ok(())
    }
}
