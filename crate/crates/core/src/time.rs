//! Time integration of the semi-discrete damped wave equation
//!
//! ```text
//! μ' = ν,    M ν' = −A μ − B ν + G(t, μ, ν)
//! ```
//!
//! with the IMEX midpoint scheme, the implicit midpoint rule (fixed-point
//! iteration on the half step) and the explicit midpoint rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{jacobi, pcg, SparseMatrix};

/// Entries beyond this magnitude count as a blow-up.
pub const DIVERGENCE_THRESHOLD: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "imex")]
    Imex,
    #[serde(rename = "implicit_mp", alias = "implicit_midpoint")]
    ImplicitMidpoint,
    #[serde(rename = "explicit_mp", alias = "explicit_midpoint")]
    ExplicitMidpoint,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Imex, Scheme::ImplicitMidpoint, Scheme::ExplicitMidpoint];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Imex => "imex",
            Scheme::ImplicitMidpoint => "implicit_mp",
            Scheme::ExplicitMidpoint => "explicit_mp",
        }
    }

    fn long_name(self) -> &'static str {
        match self {
            Scheme::Imex => "imex",
            Scheme::ImplicitMidpoint => "implicit_midpoint",
            Scheme::ExplicitMidpoint => "explicit_midpoint",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s || sc.long_name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Relative residual for every CG solve.
    pub cg_tol: f64,
    /// Fixed-point increment tolerance (implicit midpoint) in the energy norm
    /// `(ΔνᵀMΔν + ΔμᵀAΔμ)^½`.
    pub fp_tol: f64,
    pub fp_maxit: usize,
    /// Lipschitz estimate of the forcing; a warning is logged when
    /// `τ L ≥ 2` for the implicit midpoint rule.
    pub lipschitz: Option<f64>,
    /// `c_qm^S` for the step-size restriction check, if known.
    pub c_qm_s: Option<f64>,
    /// Growth of the largest state entry, relative to the initial one, that
    /// counts as divergence.
    pub divergence_growth: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            cg_tol: 1e-12,
            fp_tol: 1e-10,
            fp_maxit: 50,
            lipschitz: None,
            c_qm_s: None,
            divergence_growth: 1e12,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::invalid(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol)));
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::invalid(format!("fp_tol must be positive, got {}", self.fp_tol)));
        }
        if !(self.divergence_growth > 1.0) {
            return Err(Error::invalid("divergence_growth must exceed 1"));
        }
        if self.fp_maxit == 0 {
            return Err(Error::invalid("fp_maxit must be at least 1"));
        }
        Ok(())
    }
}

/// Mass, stiffness and damping matrices with constraints already applied
/// (constrained rows of `mass` carry a unit diagonal, of the others zero).
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub damping: SparseMatrix,
    constrained: Vec<bool>,
    mass_inv_diag: Vec<f64>,
}

impl SystemOperators {
    pub fn new(
        mass: SparseMatrix,
        stiffness: SparseMatrix,
        damping: SparseMatrix,
        constrained: Vec<bool>,
    ) -> Result<Self> {
        let n = mass.dim();
        for (m, name) in [(&stiffness, "stiffness"), (&damping, "damping")] {
            if m.dim() != n {
                return Err(Error::invalid(format!(
                    "{name} has dimension {} but mass has {n}",
                    m.dim()
                )));
            }
        }
        if constrained.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: constrained.len(),
            });
        }
        let mass_inv_diag = jacobi(&mass);
        Ok(Self {
            mass,
            stiffness,
            damping,
            constrained,
            mass_inv_diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    /// Zeroes the constrained entries of a load or state vector.
    pub fn zero_constrained(&self, v: &mut [f64]) {
        for (x, &c) in v.iter_mut().zip(&self.constrained) {
            if c {
                *x = 0.0;
            }
        }
    }

    /// `½ νᵀMν + ½ μᵀAμ`.
    pub fn energy(&self, displacement: &[f64], velocity: &[f64]) -> f64 {
        0.5 * self.mass.quadratic_form(velocity) + 0.5 * self.stiffness.quadratic_form(displacement)
    }

    /// Solves `M x = b` starting from the content of `x`.
    fn mass_solve(&self, b: &[f64], x: &mut [f64], tol: f64) -> Result<usize> {
        Ok(pcg(&self.mass, &self.mass_inv_diag, b, x, tol, None)?.iterations)
    }
}

/// What the forcing reads from the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    /// Only time.
    None,
    Displacement,
    /// Displacement and velocity.
    Full,
}

/// Right-hand side `G(t, μ, ν)` as a load vector (tested against the basis).
pub trait Forcing: Sync {
    fn dependence(&self) -> Dependence;

    /// Writes the load into `out`. `nu` is empty when the dependence is not `Full`.
    fn load(&self, t: f64, mu: &[f64], nu: &[f64], out: &mut [f64]) -> Result<()>;
}

/// `G ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn dependence(&self) -> Dependence {
        Dependence::None
    }

    fn load(&self, _t: f64, _mu: &[f64], _nu: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }
}

/// A fixed load vector.
#[derive(Debug, Clone)]
pub struct ConstantForcing(pub Vec<f64>);

impl Forcing for ConstantForcing {
    fn dependence(&self) -> Dependence {
        Dependence::None
    }

    fn load(&self, _t: f64, _mu: &[f64], _nu: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                actual: self.0.len(),
            });
        }
        out.copy_from_slice(&self.0);
        Ok(())
    }
}

/// Velocity as nodal coefficients or premultiplied by the mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Velocity {
    Nodal(Vec<f64>),
    MassWeighted(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub displacement: Vec<f64>,
    pub velocity: Velocity,
}

impl State {
    pub fn new(time: f64, displacement: Vec<f64>, velocity: Vec<f64>) -> Self {
        Self {
            time,
            displacement,
            velocity: Velocity::Nodal(velocity),
        }
    }

    /// Largest entry magnitude, `∞` if any entry is not finite.
    fn magnitude(&self) -> f64 {
        let v = match &self.velocity {
            Velocity::Nodal(v) | Velocity::MassWeighted(v) => v,
        };
        self.displacement.iter().chain(v).fold(0.0, |m, x| {
            if x.is_finite() {
                m.max(x.abs())
            } else {
                f64::INFINITY
            }
        })
    }
}

/// Work counters, accumulated over the lifetime of an [`Integrator`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub steps: usize,
    /// Solves with `M + τ²/4 A + τ/2 B`.
    pub system_solves: usize,
    pub mass_solves: usize,
    pub forcing_evals: usize,
    pub fixed_point_sweeps: usize,
    pub cg_iterations: usize,
}

/// `M + τ²/4 A + τ/2 B` with its Jacobi preconditioner.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub matrix: SparseMatrix,
    inv_diag: Vec<f64>,
}

impl StepSystem {
    pub fn new(ops: &SystemOperators, tau: f64) -> Result<Self> {
        let matrix = SparseMatrix::linear_combination(&[
            (1.0, &ops.mass),
            (0.25 * tau * tau, &ops.stiffness),
            (0.5 * tau, &ops.damping),
        ])?;
        let inv_diag = jacobi(&matrix);
        Ok(Self { matrix, inv_diag })
    }

    fn solve(&self, b: &[f64], x: &mut [f64], tol: f64) -> Result<usize> {
        Ok(pcg(&self.matrix, &self.inv_diag, b, x, tol, None)?.iterations)
    }
}

/// Result of [`Integrator::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub steps: usize,
    /// Step index and time at which the solution blew up.
    pub diverged: Option<(usize, f64)>,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<Self> {
        match self.diverged {
            Some((step, time)) => Err(Error::Diverged { step, time }),
            None => Ok(self),
        }
    }
}

pub struct Integrator<'a> {
    ops: &'a SystemOperators,
    forcing: &'a dyn Forcing,
    scheme: Scheme,
    tau: f64,
    params: SolverParams,
    system: Option<StepSystem>,
    counters: Counters,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl<'a> Integrator<'a> {
    pub fn new(
        ops: &'a SystemOperators,
        forcing: &'a dyn Forcing,
        scheme: Scheme,
        tau: f64,
        params: SolverParams,
    ) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {tau}")));
        }
        params.validate()?;
        if let Some(c) = params.c_qm_s {
            if !check_step_restriction(tau, c) {
                log::warn!("time step {tau} violates the step-size restriction tau < 1/{c}");
            }
        }
        if let (Scheme::ImplicitMidpoint, Some(l)) = (scheme, params.lipschitz) {
            if tau * l >= 2.0 {
                log::warn!("tau * L = {} >= 2: the fixed-point iteration may not contract", tau * l);
            }
        }
        let system = match scheme {
            Scheme::ExplicitMidpoint => None,
            _ => Some(StepSystem::new(ops, tau)?),
        };
        Ok(Self {
            ops,
            forcing,
            scheme,
            tau,
            params,
            system,
            counters: Counters::default(),
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    fn check_state(&self, state: &State) -> Result<()> {
        let n = self.ops.dim();
        let v = match &state.velocity {
            Velocity::Nodal(v) | Velocity::MassWeighted(v) => v.len(),
        };
        for len in [state.displacement.len(), v] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        Ok(())
    }

    fn load(&mut self, t: f64, mu: &[f64], nu: &[f64], out: &mut [f64]) -> Result<()> {
        self.counters.forcing_evals += 1;
        let nu = if self.forcing.dependence() == Dependence::Full { nu } else { &[] };
        self.forcing.load(t, mu, nu, out)?;
        self.ops.zero_constrained(out);
        Ok(())
    }

    fn mass_solve(&mut self, b: &[f64], x: &mut [f64]) -> Result<()> {
        self.counters.mass_solves += 1;
        self.counters.cg_iterations += self.ops.mass_solve(b, x, self.params.cg_tol)?;
        Ok(())
    }

    fn system_solve(&mut self, b: &[f64], x: &mut [f64]) -> Result<()> {
        self.counters.system_solves += 1;
        let sys = self.system.as_ref().expect("implicit schemes build the step system");
        self.counters.cg_iterations += sys.solve(b, x, self.params.cg_tol)?;
        Ok(())
    }

    /// Converts the velocity to nodal form (one mass solve if needed).
    pub fn nodal_velocity<'s>(&mut self, state: &'s mut State) -> Result<&'s [f64]> {
        if let Velocity::MassWeighted(w) = &state.velocity {
            let mut x = w.clone();
            self.mass_solve(w, &mut x)?;
            state.velocity = Velocity::Nodal(x);
        }
        match &state.velocity {
            Velocity::Nodal(v) => Ok(v),
            Velocity::MassWeighted(_) => unreachable!(),
        }
    }

    /// Returns `(ν nodal if available, M ν)`.
    fn split_velocity(&self, state: &State) -> (Option<Vec<f64>>, Vec<f64>) {
        match &state.velocity {
            Velocity::Nodal(v) => (Some(v.clone()), self.ops.mass.mul_vec(v)),
            Velocity::MassWeighted(w) => (None, w.clone()),
        }
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &mut State) -> Result<()> {
        self.check_state(state)?;
        if self.forcing.dependence() == Dependence::Full || self.scheme == Scheme::ExplicitMidpoint {
            self.nodal_velocity(state)?;
        }
        match self.scheme {
            Scheme::Imex => self.imex_step(state)?,
            Scheme::ImplicitMidpoint => self.implicit_midpoint_step(state)?,
            Scheme::ExplicitMidpoint => self.explicit_midpoint_step(state)?,
        }
        self.counters.steps += 1;
        Ok(())
    }

    fn imex_step(&mut self, state: &mut State) -> Result<()> {
        let tau = self.tau;
        let n = self.ops.dim();
        let t = state.time;
        let (nu_n, m_nu_n) = self.split_velocity(state);
        let nu_n_ref = nu_n.as_deref().unwrap_or(&[]);
        let mu_n = &state.displacement;

        let mut g_n = vec![0.0; n];
        self.load(t, &mu_n.clone(), nu_n_ref, &mut g_n)?;

        // (M + τ²/4 A + τ/2 B) ν½ = Mνⁿ − τ/2 Aμⁿ + τ/2 Gⁿ
        let mut rhs = m_nu_n.clone();
        axpy(&mut rhs, -0.5 * tau, &self.ops.stiffness.mul_vec(mu_n));
        axpy(&mut rhs, 0.5 * tau, &g_n);
        let mut nu_half = nu_n.clone().unwrap_or_else(|| vec![0.0; n]);
        self.system_solve(&rhs, &mut nu_half)?;

        let mut mu_half = mu_n.clone();
        axpy(&mut mu_half, 0.5 * tau, &nu_half);
        let mut g_half = vec![0.0; n];
        self.load(t + 0.5 * tau, &mu_half, &nu_half, &mut g_half)?;

        // Mν^{n+1} = 2Mν½ − Mνⁿ + τ(G½ − Gⁿ)
        let mut m_nu_next = self.ops.mass.mul_vec(&nu_half);
        for i in 0..n {
            m_nu_next[i] = 2.0 * m_nu_next[i] - m_nu_n[i] + tau * (g_half[i] - g_n[i]);
        }
        axpy(&mut state.displacement, tau, &nu_half);
        state.time = t + tau;

        state.velocity = if self.forcing.dependence() == Dependence::Full {
            let mut guess = nu_half.clone();
            for i in 0..n {
                guess[i] = 2.0 * nu_half[i] - nu_n_ref.get(i).copied().unwrap_or(nu_half[i]);
            }
            self.mass_solve(&m_nu_next, &mut guess)?;
            Velocity::Nodal(guess)
        } else {
            Velocity::MassWeighted(m_nu_next)
        };
        Ok(())
    }

    fn implicit_midpoint_step(&mut self, state: &mut State) -> Result<()> {
        let tau = self.tau;
        let n = self.ops.dim();
        let t_half = state.time + 0.5 * tau;
        let (nu_n, m_nu_n) = self.split_velocity(state);
        let mu_n = state.displacement.clone();

        let mut base = m_nu_n;
        axpy(&mut base, -0.5 * tau, &self.ops.stiffness.mul_vec(&mu_n));

        let mut nu_half = nu_n.clone().unwrap_or_else(|| vec![0.0; n]);
        let mut mu_half = mu_n.clone();
        axpy(&mut mu_half, 0.5 * tau, &nu_half);
        let mut g = vec![0.0; n];
        let single = self.forcing.dependence() == Dependence::None;
        let mut converged = false;
        let mut increment = f64::INFINITY;
        for _ in 0..self.params.fp_maxit {
            self.counters.fixed_point_sweeps += 1;
            self.load(t_half, &mu_half, &nu_half, &mut g)?;
            let mut rhs = base.clone();
            axpy(&mut rhs, 0.5 * tau, &g);
            let previous = nu_half.clone();
            self.system_solve(&rhs, &mut nu_half)?;
            mu_half.copy_from_slice(&mu_n);
            axpy(&mut mu_half, 0.5 * tau, &nu_half);
            if single {
                converged = true;
                break;
            }
            let dnu: Vec<f64> = nu_half.iter().zip(&previous).map(|(a, b)| a - b).collect();
            increment = (self.ops.mass.quadratic_form(&dnu)
                + 0.25 * tau * tau * self.ops.stiffness.quadratic_form(&dnu))
            .max(0.0)
            .sqrt();
            if !increment.is_finite() {
                break;
            }
            if increment <= self.params.fp_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::FixedPointNotConverged {
                iterations: self.params.fp_maxit,
                increment,
            });
        }

        // x^{n+1} = 2 x½ − xⁿ
        for i in 0..n {
            state.displacement[i] = 2.0 * mu_half[i] - mu_n[i];
        }
        state.velocity = match nu_n {
            Some(v) => Velocity::Nodal(nu_half.iter().zip(&v).map(|(h, o)| 2.0 * h - o).collect()),
            None => {
                let w = match &state.velocity {
                    Velocity::MassWeighted(w) => w,
                    Velocity::Nodal(_) => unreachable!(),
                };
                let m_half = self.ops.mass.mul_vec(&nu_half);
                Velocity::MassWeighted(m_half.iter().zip(w).map(|(h, o)| 2.0 * h - o).collect())
            }
        };
        state.time += tau;
        Ok(())
    }

    /// `−Aμ − Bν + G(t, μ, ν)`.
    fn acceleration_load(&mut self, t: f64, mu: &[f64], nu: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; mu.len()];
        self.load(t, mu, nu, &mut out)?;
        axpy(&mut out, -1.0, &self.ops.stiffness.mul_vec(mu));
        axpy(&mut out, -1.0, &self.ops.damping.mul_vec(nu));
        Ok(out)
    }

    fn explicit_midpoint_step(&mut self, state: &mut State) -> Result<()> {
        let tau = self.tau;
        let t = state.time;
        let nu_n = match &state.velocity {
            Velocity::Nodal(v) => v.clone(),
            Velocity::MassWeighted(_) => unreachable!("made nodal in step()"),
        };
        let mu_n = state.displacement.clone();
        let m_nu_n = self.ops.mass.mul_vec(&nu_n);

        let mut mu_half = mu_n.clone();
        axpy(&mut mu_half, 0.5 * tau, &nu_n);
        let mut rhs = m_nu_n.clone();
        axpy(&mut rhs, 0.5 * tau, &self.acceleration_load(t, &mu_n, &nu_n)?);
        let mut nu_half = nu_n.clone();
        self.mass_solve(&rhs, &mut nu_half)?;

        let mut rhs = m_nu_n;
        axpy(&mut rhs, tau, &self.acceleration_load(t + 0.5 * tau, &mu_half, &nu_half)?);
        let mut nu_next = nu_half.clone();
        self.mass_solve(&rhs, &mut nu_next)?;

        axpy(&mut state.displacement, tau, &nu_half);
        state.velocity = Velocity::Nodal(nu_next);
        state.time = t + tau;
        Ok(())
    }

    /// Takes `steps` steps, calling `observer` after each one. Stops early
    /// and reports divergence once an entry exceeds
    /// `min(1e150, divergence_growth · max(1, initial magnitude))` or is not
    /// finite; a failing solve on a state near that limit counts too.
    pub fn run<O>(&mut self, state: &mut State, steps: usize, mut observer: O) -> Result<RunOutcome>
    where
        O: FnMut(&mut Self, &mut State) -> Result<()>,
    {
        let limit = DIVERGENCE_THRESHOLD.min(self.params.divergence_growth * state.magnitude().max(1.0));
        for k in 0..steps {
            let (was_large, t0) = (state.magnitude() > 1e-3 * limit, state.time);
            if let Err(e) = self.step(state) {
                if was_large || matches!(e, Error::SolverNotConverged { residual, .. } if !residual.is_finite()) {
                    return Ok(RunOutcome {
                        steps: k,
                        diverged: Some((k + 1, t0 + self.tau)),
                    });
                }
                return Err(e);
            }
            if state.magnitude() > limit {
                return Ok(RunOutcome {
                    steps: k + 1,
                    diverged: Some((k + 1, state.time)),
                });
            }
            observer(self, state)?;
        }
        Ok(RunOutcome { steps, diverged: None })
    }
}

/// Integrates from `initial.time` to `t_end`, which must be a whole number
/// of steps (within 1e-12 relative). Returns the final state with nodal
/// velocity, the outcome and the work counters.
#[allow(clippy::too_many_arguments)]
pub fn integrate<O>(
    scheme: Scheme,
    initial: State,
    ops: &SystemOperators,
    forcing: &dyn Forcing,
    tau: f64,
    t_end: f64,
    params: SolverParams,
    mut observer: O,
) -> Result<(State, RunOutcome, Counters)>
where
    O: FnMut(&State),
{
    let steps = step_count(t_end - initial.time, tau)?;
    let mut it = Integrator::new(ops, forcing, scheme, tau, params)?;
    let mut state = initial;
    let outcome = it.run(&mut state, steps, |_, s| {
        observer(s);
        Ok(())
    })?;
    if outcome.diverged.is_none() {
        it.nodal_velocity(&mut state)?;
    }
    Ok((state, outcome, it.counters()))
}

/// Number of steps of size `tau` in `span`; errors unless it is integral.
pub fn step_count(span: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0) || !(span >= 0.0) || !span.is_finite() {
        return Err(Error::invalid(format!("cannot split time span {span} into steps of {tau}")));
    }
    let n = (span / tau).round();
    if (n * tau - span).abs() > 1e-12 * span.max(1.0) {
        return Err(Error::invalid(format!("time span {span} is not a multiple of tau = {tau}")));
    }
    Ok(n as usize)
}

/// `C_{H,V} = 1/√(1 + λ_min(M⁻¹A))` over the unconstrained dofs, by inverse
/// iteration with `A + M`.
pub fn norm_equivalence_constant(ops: &SystemOperators, tol: f64) -> Result<f64> {
    let n = ops.dim();
    let shifted = SparseMatrix::linear_combination(&[(1.0, &ops.stiffness), (1.0, &ops.mass)])?;
    let inv_diag = jacobi(&shifted);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    ops.zero_constrained(&mut x);
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("no free degrees of freedom"));
    }
    let mut lambda = f64::INFINITY;
    let mut y = vec![0.0; n];
    for _ in 0..500 {
        let mx = ops.mass.mul_vec(&x);
        pcg(&shifted, &inv_diag, &mx, &mut y, 1e-12, None)?;
        ops.zero_constrained(&mut y);
        let norm = ops.mass.quadratic_form(&y).sqrt();
        x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / norm);
        let next = shifted.quadratic_form(&x) / ops.mass.quadratic_form(&x);
        let done = (next - lambda).abs() <= tol * next;
        lambda = next;
        if done {
            return Ok(1.0 / lambda.sqrt());
        }
    }
    Err(Error::SolverNotConverged {
        iterations: 500,
        residual: lambda,
    })
}

/// `c_qm^S = ½ c_G C_{H,V} + c_qm`.
pub fn step_restriction_constant(ops: &SystemOperators, c_g: f64, c_qm: f64) -> Result<f64> {
    Ok(0.5 * c_g * norm_equivalence_constant(ops, 1e-10)? + c_qm)
}

/// Whether `τ < 1 / c_qm^S`.
pub fn check_step_restriction(tau: f64, c_qm_s: f64) -> bool {
    tau * c_qm_s < 1.0
}
