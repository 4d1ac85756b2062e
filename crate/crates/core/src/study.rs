//! Convergence studies: spatial and temporal refinement of the model
//! problem, micro-resolution sweeps of the HMM tensor, and the HMM plateau.
//!
//! Rows are computed in parallel and reported in configuration order. With
//! `record_timing = false` (the default) the CSV output is bitwise
//! reproducible.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{error_norms, error_rule, function_norms, Constraint, FeFunction, FeSpace};
use crate::macro_assembly::wave_operators;
use crate::mesh::{Mesh, Point};
use crate::micro::{
    homogenized_tensor_exact, homogenized_tensor_hmm, CellConfig, CoefficientMode, Coupling, ExactHomogenizedTensor,
    HmmTensorField,
};
use crate::model::{
    exact_gradient, exact_solution, exact_velocity, initial_data, ModelForcing, OscillatoryCoefficient, ProblemSpec,
};
use crate::tensor::TensorField;
use crate::time::{integrate, step_count, Counters, RunOutcome, Scheme, SolverParams, State, SystemOperators};

pub const CSV_HEADER: &str =
    "study,scheme,p,H,tau,eps,delta,micro_n,coupling,mode,err_u_H1,err_v_L2,E_total,rate,diverged,wall_ms,cg_iters";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Space,
    Time,
    Micro,
    Plateau,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Space => "space",
            StudyKind::Time => "time",
            StudyKind::Micro => "micro",
            StudyKind::Plateau => "plateau",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorSource {
    Exact,
    Hmm,
}

/// What time-study errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceStrategy {
    /// A fine-step solution on the same mesh (isolates the temporal error).
    Reference,
    /// The exact solution (plateaus at the spatial error).
    Exact,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmmParams {
    pub delta: f64,
    /// Micro subdivisions per cell side; the micro study sweeps this list,
    /// the other studies use its first entry.
    pub micro_subdivisions: Vec<usize>,
    pub coupling: Coupling,
    pub mode: CoefficientMode,
    /// Macro point of the micro study.
    pub macro_point: Point,
    /// Optional cell sizes swept by the micro study instead of `delta`.
    pub deltas: Vec<f64>,
    /// Replace ε and δ by 2⁻¹⁵ and 2⁻¹³.
    pub full_scale: bool,
}

impl Default for HmmParams {
    fn default() -> Self {
        Self {
            delta: 1.0 / 32.0,
            micro_subdivisions: vec![16],
            coupling: Coupling::Periodic,
            mode: CoefficientMode::Frozen,
            macro_point: [0.3, 0.6],
            deltas: Vec::new(),
            full_scale: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceParams {
    pub strategy: ReferenceStrategy,
    pub tau: f64,
    pub scheme: Scheme,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            strategy: ReferenceStrategy::Reference,
            tau: 1.0 / 4096.0,
            scheme: Scheme::Imex,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub schemes: Vec<Scheme>,
    /// Macro polynomial orders (1 or 2).
    pub orders: Vec<usize>,
    /// Macro mesh levels `k`, `H = 2^{-k}`.
    pub mesh_levels: Vec<u32>,
    pub taus: Vec<f64>,
    pub tensor: TensorSource,
    pub hmm: HmmParams,
    pub problem: ProblemSpec,
    pub solver: SolverParams,
    pub reference: ReferenceParams,
    /// Record diverged runs as rows instead of failing the study.
    pub tolerate_divergence: bool,
    /// Fill `wall_ms`; otherwise it is written as 0 so output is reproducible.
    pub record_timing: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            kind: StudyKind::Space,
            schemes: vec![Scheme::Imex],
            orders: vec![1],
            mesh_levels: vec![2, 3, 4, 5],
            taus: vec![1e-3],
            tensor: TensorSource::Exact,
            hmm: HmmParams::default(),
            problem: ProblemSpec::default(),
            solver: SolverParams::default(),
            reference: ReferenceParams::default(),
            tolerate_divergence: true,
            record_timing: false,
        }
    }
}

impl StudyConfig {
    /// `(ε, δ)` actually used by the HMM.
    pub fn scales(&self) -> (f64, f64) {
        if self.hmm.full_scale {
            (2f64.powi(-15), 2f64.powi(-13))
        } else {
            (self.problem.epsilon, self.hmm.delta)
        }
    }

    fn deltas(&self) -> Vec<f64> {
        if self.hmm.deltas.is_empty() || self.hmm.full_scale {
            vec![self.scales().1]
        } else {
            self.hmm.deltas.clone()
        }
    }

    /// Cell template at an arbitrary point for micro resolution `n` and size `delta`.
    pub fn cell_template(&self, n: usize, delta: f64) -> CellConfig {
        let mut c = CellConfig::new(
            self.hmm.macro_point,
            delta,
            self.scales().0,
            n,
            self.hmm.coupling,
            self.hmm.mode,
        );
        c.tolerance = self.solver.cg_tol.max(1e-14);
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.solver.validate()?;
        let nonempty = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must not be empty")))
            }
        };
        match self.kind {
            StudyKind::Space | StudyKind::Plateau => {
                nonempty(!self.mesh_levels.is_empty(), "mesh_levels")?;
                nonempty(!self.orders.is_empty(), "orders")?;
                nonempty(!self.schemes.is_empty(), "schemes")?;
                nonempty(!self.taus.is_empty(), "taus")?;
            }
            StudyKind::Time => {
                nonempty(!self.mesh_levels.is_empty(), "mesh_levels")?;
                nonempty(!self.orders.is_empty(), "orders")?;
                nonempty(!self.schemes.is_empty(), "schemes")?;
                nonempty(!self.taus.is_empty(), "taus")?;
                if self.reference.strategy != ReferenceStrategy::Exact {
                    step_count(self.problem.final_time, self.reference.tau)?;
                }
            }
            StudyKind::Micro => {}
        }
        nonempty(!self.hmm.micro_subdivisions.is_empty(), "hmm.micro_subdivisions")?;
        if let Some(&p) = self.orders.iter().find(|&&p| p != 1 && p != 2) {
            return Err(Error::invalid(format!("macro order must be 1 or 2, got {p}")));
        }
        if let Some(&k) = self.mesh_levels.iter().find(|&&k| k > 12) {
            return Err(Error::invalid(format!("mesh level {k} is out of range (max 12)")));
        }
        if self.kind != StudyKind::Micro {
            for &tau in &self.taus {
                step_count(self.problem.final_time, tau)?;
            }
        }
        for &d in &self.deltas() {
            self.cell_template(self.hmm.micro_subdivisions[0], d).validate()?;
        }
        Ok(())
    }
}

/// One line of the result table. Fields that do not apply are `None` and
/// written as empty CSV fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyRow {
    pub study: String,
    pub scheme: Option<Scheme>,
    pub p: Option<usize>,
    pub h: Option<f64>,
    pub tau: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub micro_n: Option<usize>,
    pub coupling: Option<Coupling>,
    pub mode: Option<CoefficientMode>,
    pub err_u_h1: Option<f64>,
    pub err_v_l2: Option<f64>,
    /// `inf` for diverged runs.
    pub e_total: f64,
    pub rate: Option<f64>,
    pub diverged: bool,
    /// Step index and time of the blow-up, for diverged simulation rows.
    pub diverged_at: Option<(usize, f64)>,
    pub wall_ms: u64,
    pub cg_iters: usize,
    /// Refinement parameter the rate is taken against.
    pub parameter: f64,
}

impl StudyRow {
    /// Rows with equal keys form one refinement sequence.
    fn group_key(&self) -> String {
        format!(
            "{}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}",
            self.study,
            self.scheme,
            self.p,
            if self.study == "space" || self.study == "plateau" { None } else { self.h },
            if self.study.starts_with("time") { None } else { self.tau },
            self.delta.filter(|_| self.study != "micro_delta"),
            self.micro_n.filter(|_| self.study != "micro"),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub kind: StudyKind,
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    /// Rows of one study label, in order.
    pub fn rows_of<'a>(&'a self, study: &'a str) -> impl Iterator<Item = &'a StudyRow> + 'a {
        self.rows.iter().filter(move |r| r.study == study)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let f = |v: Option<f64>| v.map(|x| fmt_f64(x)).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.study,
                r.scheme.map(|s| s.name().to_string()).unwrap_or_default(),
                r.p.map(|p| p.to_string()).unwrap_or_default(),
                f(r.h),
                f(r.tau),
                f(r.eps),
                f(r.delta),
                r.micro_n.map(|n| n.to_string()).unwrap_or_default(),
                r.coupling.map(coupling_name).unwrap_or_default(),
                r.mode.map(mode_name).unwrap_or_default(),
                f(r.err_u_h1),
                f(r.err_v_l2),
                fmt_f64(r.e_total),
                f(r.rate),
                r.diverged,
                r.wall_ms,
                r.cg_iters,
            );
        }
        out
    }
}

/// Shortest round-trip decimal; infinities as `inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

pub fn coupling_name(c: Coupling) -> String {
    match c {
        Coupling::Periodic => "periodic",
        Coupling::Dirichlet => "dirichlet",
        Coupling::Neumann => "neumann",
    }
    .into()
}

pub fn mode_name(m: CoefficientMode) -> String {
    match m {
        CoefficientMode::Frozen => "frozen",
        CoefficientMode::Sampled => "sampled",
    }
    .into()
}

/// `rate_i = log(e_i/e_{i+1}) / log(p_i/p_{i+1})`.
pub fn estimate_rates(errors: &[f64], parameters: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != parameters.len() {
        return Err(Error::DimensionMismatch {
            expected: parameters.len(),
            actual: errors.len(),
        });
    }
    if errors.len() < 2 {
        return Err(Error::invalid("at least two values are needed for a rate"));
    }
    if errors.iter().chain(parameters).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("errors and parameters must be positive and finite"));
    }
    if parameters.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("parameters must be strictly decreasing"));
    }
    Ok(errors
        .windows(2)
        .zip(parameters.windows(2))
        .map(|(e, p)| (e[0] / e[1]).ln() / (p[0] / p[1]).ln())
        .collect())
}

/// Fills `rate` for consecutive rows of equal group whose errors are finite and positive.
fn fill_rates(rows: &mut [StudyRow]) {
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        if a.group_key() != b.group_key() {
            continue;
        }
        if let Ok(r) = estimate_rates(&[a.e_total, b.e_total], &[a.parameter, b.parameter]) {
            rows[i].rate = Some(r[0]);
        }
    }
}

/// Error components of the relative error functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub err_u_h1: f64,
    pub err_v_l2: f64,
    pub total: f64,
}

/// `(‖u‖_{H¹} + ‖u_t‖_{L²})` of the exact solution at `t`, by quadrature on `space`'s mesh.
pub fn exact_norm(space: &FeSpace, t: f64) -> f64 {
    let rule = error_rule(space.order());
    let (l2, h1) = function_norms(space, |x| exact_solution(t, x), |x| exact_gradient(t, x), &rule);
    let (vl2, _) = function_norms(space, |x| exact_velocity(t, x), |_| [0.0, 0.0], &rule);
    (l2 * l2 + h1 * h1).sqrt() + vl2
}

/// Relative error `(‖u_H − u‖_{H¹} + ‖v_H − u_t‖_{L²}) / (‖u‖_{H¹} + ‖u_t‖_{L²})` at time `t`.
pub fn error_functional(u_h: &FeFunction<'_>, v_h: &FeFunction<'_>, t: f64) -> Result<ErrorReport> {
    let space = u_h.space();
    let rule = error_rule(space.order());
    let (l2, h1) = error_norms(u_h, |x| exact_solution(t, x), |x| exact_gradient(t, x), &rule);
    let (vl2, _) = error_norms(v_h, |x| exact_velocity(t, x), |_| [0.0, 0.0], &rule);
    relative(space, (l2 * l2 + h1 * h1).sqrt(), vl2, t)
}

/// The same functional with a discrete reference `(u_ref, v_ref)` in the numerator.
pub fn reference_error(
    u_h: &FeFunction<'_>,
    v_h: &FeFunction<'_>,
    u_ref: &[f64],
    v_ref: &[f64],
    t: f64,
) -> Result<ErrorReport> {
    let space = u_h.space();
    let diff = |a: &[f64], b: &[f64]| -> Result<Vec<f64>> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
    };
    let du = FeFunction::new(space, diff(u_h.coefficients(), u_ref)?)?;
    let dv = FeFunction::new(space, diff(v_h.coefficients(), v_ref)?)?;
    let rule = error_rule(space.order());
    let zero = |_| 0.0;
    let zgrad = |_| [0.0, 0.0];
    let (l2, h1) = error_norms(&du, zero, zgrad, &rule);
    let (vl2, _) = error_norms(&dv, zero, zgrad, &rule);
    relative(space, (l2 * l2 + h1 * h1).sqrt(), vl2, t)
}

fn relative(space: &FeSpace, err_u: f64, err_v: f64, t: f64) -> Result<ErrorReport> {
    let denom = exact_norm(space, t);
    if !(denom >= 1e-14) {
        return Err(Error::NonFinite(format!("exact solution norm {denom} too small")));
    }
    Ok(ErrorReport {
        err_u_h1: err_u,
        err_v_l2: err_v,
        total: (err_u + err_v) / denom,
    })
}

/// Macro space on the unit square with Dirichlet constraints.
pub fn macro_space(level: u32, order: usize) -> Result<FeSpace> {
    FeSpace::new(Mesh::square([0.0, 0.0], 1.0, 1usize << level)?, order, Constraint::Dirichlet)
}

/// Assembled model problem on one macro space.
pub struct Discretization {
    pub space: FeSpace,
    pub ops: SystemOperators,
    pub problem: ProblemSpec,
}

/// Final state of one simulation.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub state: State,
    pub outcome: RunOutcome,
    pub counters: Counters,
}

impl SimulationOutput {
    pub fn velocity(&self) -> &[f64] {
        match &self.state.velocity {
            crate::time::Velocity::Nodal(v) | crate::time::Velocity::MassWeighted(v) => v,
        }
    }
}

impl Discretization {
    pub fn new(space: FeSpace, field: &dyn TensorField, problem: ProblemSpec) -> Result<Self> {
        problem.validate()?;
        let ops = wave_operators(&space, field, problem.beta)?;
        Ok(Self { space, ops, problem })
    }

    /// Integrates from the interpolated initial data to the final time.
    pub fn simulate(&self, scheme: Scheme, tau: f64, params: SolverParams) -> Result<SimulationOutput> {
        let forcing = ModelForcing::new(&self.space, &self.ops, &self.problem)?;
        let (mu, nu) = initial_data(&self.space, 0.0)?;
        let (state, outcome, counters) = integrate(
            scheme,
            State::new(0.0, mu, nu),
            &self.ops,
            &forcing,
            tau,
            self.problem.final_time,
            params,
            |_| {},
        )?;
        Ok(SimulationOutput {
            state,
            outcome,
            counters,
        })
    }

    pub fn exact_error(&self, out: &SimulationOutput) -> Result<ErrorReport> {
        let u = FeFunction::new(&self.space, out.state.displacement.clone())?;
        let v = FeFunction::new(&self.space, out.velocity().to_vec())?;
        error_functional(&u, &v, out.state.time)
    }
}

/// Builds the macro tensor field a study asks for.
pub fn tensor_field(config: &StudyConfig, micro_n: usize) -> Result<Arc<dyn TensorField + Send + Sync>> {
    Ok(match config.tensor {
        TensorSource::Exact => Arc::new(ExactHomogenizedTensor),
        TensorSource::Hmm => Arc::new(HmmTensorField::new(
            Arc::new(OscillatoryCoefficient),
            config.cell_template(micro_n, config.scales().1),
        )?),
    })
}

fn elapsed_ms(start: Instant, record: bool) -> u64 {
    if record {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn check_divergence(config: &StudyConfig, rows: &[StudyRow]) -> Result<()> {
    if config.tolerate_divergence {
        return Ok(());
    }
    match rows.iter().find_map(|r| r.diverged_at) {
        Some((step, time)) => Err(Error::Diverged { step, time }),
        None => Ok(()),
    }
}

/// Row template carrying the HMM columns when the tensor is computed by HMM.
fn base_row(config: &StudyConfig, study: &str, micro_n: usize) -> StudyRow {
    let mut row = StudyRow {
        study: study.into(),
        ..Default::default()
    };
    if config.tensor == TensorSource::Hmm || matches!(config.kind, StudyKind::Micro | StudyKind::Plateau) {
        let (eps, delta) = config.scales();
        row.eps = Some(eps);
        row.delta = Some(delta);
        row.micro_n = Some(micro_n);
        row.coupling = Some(config.hmm.coupling);
        row.mode = Some(config.hmm.mode);
    }
    row
}

fn simulation_row(
    mut row: StudyRow,
    out: &SimulationOutput,
    report: impl FnOnce(&SimulationOutput) -> Result<ErrorReport>,
) -> Result<StudyRow> {
    row.cg_iters = out.counters.cg_iterations;
    if out.outcome.diverged.is_some() {
        row.diverged = true;
        row.diverged_at = out.outcome.diverged;
        row.e_total = f64::INFINITY;
    } else {
        let e = report(out)?;
        row.err_u_h1 = Some(e.err_u_h1);
        row.err_v_l2 = Some(e.err_v_l2);
        row.e_total = e.total;
    }
    Ok(row)
}

/// Spatial refinement: one row per (order, scheme, τ, level), errors against
/// the exact solution at the final time.
pub fn run_space_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let study = if config.kind == StudyKind::Plateau { "plateau" } else { "space" };
    let micro_n = config.hmm.micro_subdivisions[0];
    let field = tensor_field(config, micro_n)?;
    let mut jobs = Vec::new();
    for &p in &config.orders {
        for &scheme in &config.schemes {
            for &tau in &config.taus {
                for &k in &config.mesh_levels {
                    jobs.push((p, scheme, tau, k));
                }
            }
        }
    }
    let mut rows = jobs
        .par_iter()
        .map(|&(p, scheme, tau, k)| -> Result<StudyRow> {
            let start = Instant::now();
            let disc = Discretization::new(macro_space(k, p)?, field.as_ref(), config.problem)?;
            let out = disc.simulate(scheme, tau, config.solver)?;
            let mut row = base_row(config, study, micro_n);
            row.scheme = Some(scheme);
            row.p = Some(p);
            row.h = Some(2f64.powi(-(k as i32)));
            row.tau = Some(tau);
            row.parameter = row.h.unwrap();
            let mut row = simulation_row(row, &out, |o| disc.exact_error(o))?;
            row.wall_ms = elapsed_ms(start, config.record_timing);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    fill_rates(&mut rows);
    check_divergence(config, &rows)?;
    Ok(StudyResult { kind: config.kind, rows })
}

/// Temporal refinement on fixed meshes. Errors against a fine-step reference
/// (study label `time`) and/or the exact solution (`time_exact`).
pub fn run_time_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let micro_n = config.hmm.micro_subdivisions[0];
    let field = tensor_field(config, micro_n)?;
    let strategy = config.reference.strategy;
    let mut rows = Vec::new();
    for &p in &config.orders {
        for &k in &config.mesh_levels {
            let disc = Discretization::new(macro_space(k, p)?, field.as_ref(), config.problem)?;
            let reference = if strategy == ReferenceStrategy::Exact {
                None
            } else {
                let r = disc.simulate(config.reference.scheme, config.reference.tau, config.solver)?;
                if let Some((step, time)) = r.outcome.diverged {
                    return Err(Error::Diverged { step, time });
                }
                Some(r)
            };
            let jobs: Vec<(Scheme, f64)> = config
                .schemes
                .iter()
                .flat_map(|&s| config.taus.iter().map(move |&t| (s, t)))
                .collect();
            let outputs = jobs
                .par_iter()
                .map(|&(scheme, tau)| {
                    let start = Instant::now();
                    disc.simulate(scheme, tau, config.solver)
                        .map(|o| (scheme, tau, o, elapsed_ms(start, config.record_timing)))
                })
                .collect::<Result<Vec<_>>>()?;
            let labels: &[&str] = match strategy {
                ReferenceStrategy::Reference => &["time"],
                ReferenceStrategy::Exact => &["time_exact"],
                ReferenceStrategy::Both => &["time", "time_exact"],
            };
            for &label in labels {
                for (scheme, tau, out, ms) in &outputs {
                    let mut row = base_row(config, label, micro_n);
                    row.scheme = Some(*scheme);
                    row.p = Some(p);
                    row.h = Some(2f64.powi(-(k as i32)));
                    row.tau = Some(*tau);
                    row.parameter = *tau;
                    let mut row = simulation_row(row, out, |o| {
                        if label == "time_exact" {
                            disc.exact_error(o)
                        } else {
                            let r = reference.as_ref().expect("reference computed");
                            let u = FeFunction::new(&disc.space, o.state.displacement.clone())?;
                            let v = FeFunction::new(&disc.space, o.velocity().to_vec())?;
                            reference_error(&u, &v, &r.state.displacement, r.velocity(), o.state.time)
                        }
                    })?;
                    row.wall_ms = *ms;
                    rows.push(row);
                }
            }
        }
    }
    fill_rates(&mut rows);
    check_divergence(config, &rows)?;
    Ok(StudyResult { kind: config.kind, rows })
}

/// HMM tensor error `‖a_HMM − a⁰‖_F` at the configured macro point, sweeping
/// micro resolutions (label `micro`, rate in `h = δ/n`) for each cell size,
/// and cell sizes (label `micro_delta`, rate in `δ`) when several are given.
pub fn run_micro_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let x = config.hmm.macro_point;
    let exact = homogenized_tensor_exact(x);
    let deltas = config.deltas();
    let jobs: Vec<(f64, usize)> = deltas
        .iter()
        .flat_map(|&d| config.hmm.micro_subdivisions.iter().map(move |&n| (d, n)))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(delta, n)| {
            let start = Instant::now();
            let cell = config.cell_template(n, delta).at(x);
            homogenized_tensor_hmm(&OscillatoryCoefficient, &cell)
                .map(|t| (t.frobenius_distance(&exact), elapsed_ms(start, config.record_timing)))
        })
        .collect::<Result<Vec<_>>>()?;
    let label = if config.hmm.micro_subdivisions.len() == 1 && deltas.len() > 1 {
        "micro_delta"
    } else {
        "micro"
    };
    let mut rows: Vec<StudyRow> = jobs
        .iter()
        .zip(&errors)
        .map(|(&(delta, n), &(err, ms))| {
            let mut row = base_row(config, label, n);
            row.delta = Some(delta);
            row.e_total = err;
            row.wall_ms = ms;
            row.parameter = if label == "micro" { delta / n as f64 } else { delta };
            row
        })
        .collect();
    fill_rates(&mut rows);
    Ok(StudyResult { kind: config.kind, rows })
}

/// Relative `L²(Ω)` tensor error `‖a_HMM − a⁰‖ / ‖a⁰‖` (Frobenius norm
/// pointwise), integrated with the macro assembly rule on level `level`.
pub fn tensor_error_level(config: &StudyConfig, micro_n: usize, level: u32, order: usize) -> Result<f64> {
    let space = macro_space(level, order)?;
    let rule = crate::fe::assembly_rule(order);
    let points = crate::fe::quadrature_points(&space, &rule);
    let template = config.cell_template(micro_n, config.scales().1);
    let terms = points
        .par_iter()
        .map(|&x| {
            let exact = homogenized_tensor_exact(x);
            homogenized_tensor_hmm(&OscillatoryCoefficient, &template.at(x))
                .map(|t| (t.frobenius_distance(&exact).powi(2), exact.frobenius_norm().powi(2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let w = rule.weights();
    let (num, den) = terms
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(n, d), (i, (a, b))| (n + w[i % w.len()] * a, d + w[i % w.len()] * b));
    Ok((num / den).sqrt())
}

/// Space study with HMM tensors at fixed micro resolution, followed by one
/// `tensor_level` row holding the micro tensor error level on the finest
/// macro mesh (see [`tensor_error_level`]).
pub fn run_plateau_study(config: &StudyConfig) -> Result<StudyResult> {
    let mut cfg = config.clone();
    cfg.kind = StudyKind::Plateau;
    cfg.tensor = TensorSource::Hmm;
    let mut result = run_space_study(&cfg)?;
    let micro_n = cfg.hmm.micro_subdivisions[0];
    let finest = *cfg.mesh_levels.iter().max().expect("validated nonempty");
    let order = cfg.orders[0];
    let mut row = base_row(&cfg, "tensor_level", micro_n);
    row.p = Some(order);
    row.h = Some(2f64.powi(-(finest as i32)));
    row.e_total = tensor_error_level(&cfg, micro_n, finest, order)?;
    result.rows.push(row);
    Ok(result)
}

/// Dispatches on `config.kind`.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    match config.kind {
        StudyKind::Space => run_space_study(config),
        StudyKind::Time => run_time_study(config),
        StudyKind::Micro => run_micro_study(config),
        StudyKind::Plateau => run_plateau_study(config),
    }
}
