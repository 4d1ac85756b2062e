//! Micro cell problems of the heterogeneous multiscale method.
//!
//! Around a macro quadrature point `x_K` we place the centered cell
//! `K_δ = x_K + δ·(−½, ½)²`, mesh it with `n × n` Q1 elements and solve, for
//! each Cartesian direction `e^j`, for `φ_j = (x − x_K)·e^j + w_j` with
//!
//! ```text
//! ∫_{K_δ} a ∇φ_j · ∇z = 0   for all admissible z,
//! ```
//!
//! where the correction `w_j` is periodic (one dof pinned), vanishes on the
//! cell boundary, or has zero mean gradient, depending on the coupling. The
//! discrete homogenized tensor is `(1/|K_δ|) ∫ a ∇φ_m · ∇φ_n`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::basis::Tabulation;
use crate::fe::quadrature::gauss_rule_1d;
use crate::fe::{assemble_with_tensors, assembly_rule, jacobi, pcg, quadrature_points, Constraint, FeFunction, FeSpace};
use crate::mesh::{Mesh, Point};
use crate::tensor::{SymTensor2, TensorField, TensorKind};

/// Coupling space for the cell correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Periodic,
    Dirichlet,
    /// Zero mean gradient over the cell.
    Neumann,
}

/// How the two-scale coefficient is sampled inside the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    /// `a(x_K, x/ε)`: slow variable frozen at the macro point.
    Frozen,
    /// `a(x, x/ε)`: the raw oscillatory coefficient.
    Sampled,
}

/// A coefficient `a(x, y)`, 1-periodic in the fast variable `y`.
pub trait TwoScaleCoefficient: Send + Sync {
    fn eval(&self, x: Point, y: Point) -> SymTensor2;
}

/// Constant coefficient, independent of both scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCoefficient(pub SymTensor2);

impl TwoScaleCoefficient for ConstantCoefficient {
    fn eval(&self, _x: Point, _y: Point) -> SymTensor2 {
        self.0
    }
}

impl<F> TwoScaleCoefficient for F
where
    F: Fn(Point, Point) -> SymTensor2 + Send + Sync,
{
    fn eval(&self, x: Point, y: Point) -> SymTensor2 {
        self(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellConfig {
    pub macro_point: Point,
    pub delta: f64,
    pub epsilon: f64,
    pub micro_subdivisions: usize,
    pub coupling: Coupling,
    pub mode: CoefficientMode,
    /// Relative residual for the cell solves.
    pub tolerance: f64,
}

impl CellConfig {
    pub fn new(
        macro_point: Point,
        delta: f64,
        epsilon: f64,
        micro_subdivisions: usize,
        coupling: Coupling,
        mode: CoefficientMode,
    ) -> Self {
        Self {
            macro_point,
            delta,
            epsilon,
            micro_subdivisions,
            coupling,
            mode,
            tolerance: 1e-10,
        }
    }

    /// Same parameters at another macro point.
    pub fn at(&self, macro_point: Point) -> Self {
        Self { macro_point, ..*self }
    }

    pub fn micro_h(&self) -> f64 {
        self.delta / self.micro_subdivisions as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta >= self.epsilon) || !self.delta.is_finite() {
            return Err(Error::invalid(format!(
                "cell size delta = {} must be at least epsilon = {}",
                self.delta, self.epsilon
            )));
        }
        if self.micro_subdivisions < 2 {
            return Err(Error::invalid("at least 2 micro subdivisions are required"));
        }
        if !self.macro_point.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("macro point must be finite"));
        }
        if self.micro_h() >= self.epsilon {
            log::warn!(
                "micro mesh width {} does not resolve epsilon = {}",
                self.micro_h(),
                self.epsilon
            );
        }
        Ok(())
    }

    pub fn cell_mesh(&self) -> Result<Mesh> {
        let half = 0.5 * self.delta;
        Mesh::square(
            [self.macro_point[0] - half, self.macro_point[1] - half],
            self.delta,
            self.micro_subdivisions,
        )
    }

    fn coefficient_at(&self, coeff: &dyn TwoScaleCoefficient, x: Point) -> SymTensor2 {
        let y = [x[0] / self.epsilon, x[1] / self.epsilon];
        match self.mode {
            CoefficientMode::Frozen => coeff.eval(self.macro_point, y),
            CoefficientMode::Sampled => coeff.eval(x, y),
        }
    }
}

/// Solution of one cell problem.
#[derive(Debug, Clone)]
pub struct CellSolution {
    space: FeSpace,
    correction: Vec<f64>,
    direction: usize,
    macro_point: Point,
    pub cg_iterations: usize,
}

impl CellSolution {
    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn direction(&self) -> usize {
        self.direction
    }

    /// The correction `w_j = φ_j − Φ^lin`.
    pub fn correction(&self) -> FeFunction<'_> {
        FeFunction::new(&self.space, self.correction.clone()).expect("length matches space")
    }

    /// The full cell solution `φ_j = (x − x_K)·e^j + w_j`.
    pub fn phi(&self) -> FeFunction<'_> {
        let c = self
            .space
            .dof_points()
            .iter()
            .zip(&self.correction)
            .map(|(p, w)| p[self.direction] - self.macro_point[self.direction] + w)
            .collect();
        FeFunction::new(&self.space, c).expect("length matches space")
    }
}

/// Assembled cell operator shared by both directions.
struct CellSystem {
    space: FeSpace,
    matrix: crate::fe::SparseMatrix,
    inv_diag: Vec<f64>,
    tensors: Vec<SymTensor2>,
    tab: Tabulation,
}

impl CellSystem {
    fn build(coeff: &dyn TwoScaleCoefficient, config: &CellConfig, pinned: usize) -> Result<Self> {
        config.validate()?;
        let mesh = config.cell_mesh()?;
        let constraint = match config.coupling {
            Coupling::Periodic => Constraint::Periodic { pinned },
            Coupling::Dirichlet => Constraint::Dirichlet,
            Coupling::Neumann => Constraint::Pinned { dof: pinned },
        };
        let space = FeSpace::new(mesh, 1, constraint)?;
        let rule = assembly_rule(1);
        let tensors: Vec<SymTensor2> = quadrature_points(&space, &rule)
            .into_iter()
            .map(|x| config.coefficient_at(coeff, x))
            .collect();
        if let Some(t) = tensors.iter().find(|t| !t.is_finite()) {
            return Err(Error::NonFinite(format!("cell coefficient {t:?}")));
        }
        let raw = assemble_with_tensors(&space, &rule, &tensors)?;
        let matrix = space.constrain_matrix(&raw, 1.0);
        let inv_diag = jacobi(&matrix);
        let tab = Tabulation::new(1, &rule, space.mesh().element_size());
        Ok(Self {
            space,
            matrix,
            inv_diag,
            tensors,
            tab,
        })
    }

    /// `Σ_K Σ_q ω_q (a_q v) · ∇φ_i` for a constant vector `v`.
    fn flux_load(&self, v: [f64; 2], use_tensor: bool) -> Vec<f64> {
        let nq = self.tab.num_points();
        let mut b = vec![0.0; self.space.dof_count()];
        for e in 0..self.space.mesh().num_elements() {
            let dofs = self.space.element_dofs(e);
            for q in 0..nq {
                let f = if use_tensor { self.tensors[e * nq + q].apply(v) } else { v };
                let w = self.tab.weights[q];
                for (a, &d) in dofs.iter().enumerate() {
                    let g = self.tab.gradients[q][a];
                    b[d] += w * (f[0] * g[0] + f[1] * g[1]);
                }
            }
        }
        b
    }

    fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
        let mut b = rhs.to_vec();
        self.space.constrain_rhs(&mut b);
        let mut x = vec![0.0; b.len()];
        let stats = pcg(&self.matrix, &self.inv_diag, &b, &mut x, tol, None)?;
        Ok((x, stats.iterations))
    }

    fn solve_direction(&self, config: &CellConfig, direction: usize) -> Result<CellSolution> {
        let mut e = [0.0, 0.0];
        e[direction] = 1.0;
        let mut rhs = self.flux_load(e, true);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let (mut w, mut iters) = self.solve(&rhs, config.tolerance)?;

        if config.coupling == Coupling::Neumann {
            // Enforce ∫ ∇w = 0 through the 2×2 Schur complement of the
            // bordered system [K G; Gᵀ 0].
            let g: Vec<Vec<f64>> = (0..2)
                .map(|k| {
                    let mut unit = [0.0, 0.0];
                    unit[k] = 1.0;
                    let mut gk = self.flux_load(unit, false);
                    self.space.constrain_rhs(&mut gk);
                    gk
                })
                .collect();
            let mut y = Vec::with_capacity(2);
            for gk in &g {
                let (yk, it) = self.solve(gk, config.tolerance)?;
                iters += it;
                y.push(yk);
            }
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let s = [[dot(&g[0], &y[0]), dot(&g[0], &y[1])], [dot(&g[1], &y[0]), dot(&g[1], &y[1])]];
            let r = [dot(&g[0], &w), dot(&g[1], &w)];
            let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
            if !(det.abs() > 0.0) || !det.is_finite() {
                return Err(Error::NonFinite("singular gradient-mean constraint".into()));
            }
            let lambda = [
                (r[0] * s[1][1] - r[1] * s[0][1]) / det,
                (s[0][0] * r[1] - s[1][0] * r[0]) / det,
            ];
            for i in 0..w.len() {
                w[i] -= lambda[0] * y[0][i] + lambda[1] * y[1][i];
            }
        }

        self.space.apply_constraints(&mut w);
        Ok(CellSolution {
            space: self.space.clone(),
            correction: w,
            direction,
            macro_point: config.macro_point,
            cg_iterations: iters,
        })
    }

    /// `(1/|K_δ|) ∫ a ∇φ_m · ∇φ_n` from the two corrections.
    fn tensor(&self, w: [&[f64]; 2]) -> SymTensor2 {
        let nq = self.tab.num_points();
        let mut acc = [[0.0; 2]; 2];
        for e in 0..self.space.mesh().num_elements() {
            let dofs = self.space.element_dofs(e);
            for q in 0..nq {
                let mut grad = [[1.0, 0.0], [0.0, 1.0]];
                for (a, &d) in dofs.iter().enumerate() {
                    let g = self.tab.gradients[q][a];
                    for j in 0..2 {
                        grad[j][0] += w[j][d] * g[0];
                        grad[j][1] += w[j][d] * g[1];
                    }
                }
                let t = &self.tensors[e * nq + q];
                let wq = self.tab.weights[q];
                for m in 0..2 {
                    for n in 0..2 {
                        acc[m][n] += wq * t.bilinear(grad[m], grad[n]);
                    }
                }
            }
        }
        let area = self.space.mesh().area();
        SymTensor2::new(
            acc[0][0] / area,
            0.5 * (acc[0][1] + acc[1][0]) / area,
            acc[1][1] / area,
        )
    }
}

fn check_direction(direction: usize) -> Result<()> {
    if direction > 1 {
        return Err(Error::invalid(format!("cell direction must be 0 or 1, got {direction}")));
    }
    Ok(())
}

/// Solves the cell problem in direction `e^direction` (0 or 1). Periodic and
/// Neumann couplings pin the lower-left node.
pub fn solve_cell_problem(
    coeff: &dyn TwoScaleCoefficient,
    config: &CellConfig,
    direction: usize,
) -> Result<CellSolution> {
    solve_cell_problem_pinned(coeff, config, direction, 0)
}

/// As [`solve_cell_problem`] with an explicit pinned node.
pub fn solve_cell_problem_pinned(
    coeff: &dyn TwoScaleCoefficient,
    config: &CellConfig,
    direction: usize,
    pinned: usize,
) -> Result<CellSolution> {
    check_direction(direction)?;
    CellSystem::build(coeff, config, pinned)?.solve_direction(config, direction)
}

/// Discrete homogenized tensor at `config.macro_point`.
pub fn homogenized_tensor_hmm(coeff: &dyn TwoScaleCoefficient, config: &CellConfig) -> Result<SymTensor2> {
    homogenized_tensor_hmm_pinned(coeff, config, 0)
}

pub fn homogenized_tensor_hmm_pinned(
    coeff: &dyn TwoScaleCoefficient,
    config: &CellConfig,
    pinned: usize,
) -> Result<SymTensor2> {
    let sys = CellSystem::build(coeff, config, pinned)?;
    let s0 = sys.solve_direction(config, 0)?;
    let s1 = sys.solve_direction(config, 1)?;
    Ok(sys.tensor([&s0.correction, &s1.correction]))
}

/// Closed-form homogenized tensor of the layered example coefficient
/// `0.33 + 0.15 (sin 2πx₁ + sin 2πx₁/ε)`.
pub fn homogenized_tensor_exact(x: Point) -> SymTensor2 {
    let c = 1.1 + 0.5 * (2.0 * PI * x[0]).sin();
    SymTensor2::diag(0.3 * (c * c - 0.25).sqrt(), 0.3 * c)
}

/// Harmonic and arithmetic means of a 1-periodic scalar over one period,
/// by composite 5-point Gauss–Legendre quadrature on `panels` panels.
pub fn layered_means<F: Fn(f64) -> f64>(f: F, panels: usize) -> (f64, f64) {
    let (nodes, weights) = gauss_rule_1d(5).expect("5-point rule exists");
    let h = 1.0 / panels.max(1) as f64;
    let (mut inv, mut mean) = (0.0, 0.0);
    for p in 0..panels.max(1) {
        for (s, w) in nodes.iter().zip(&weights) {
            let v = f((p as f64 + s) * h);
            inv += h * w / v;
            mean += h * w * v;
        }
    }
    (1.0 / inv, mean)
}

/// Layered-media reference: for a scalar coefficient varying only along the
/// first fast axis, the homogenized tensor is diag(harmonic mean, arithmetic mean).
/// `quadrature_points` is the number of composite panels over the period.
pub fn homogenized_tensor_reference_1d(
    coeff: &dyn TwoScaleCoefficient,
    x: Point,
    quadrature_points: usize,
) -> SymTensor2 {
    let (harmonic, arithmetic) = layered_means(|y| coeff.eval(x, [y, 0.0]).xx, quadrature_points);
    SymTensor2::diag(harmonic, arithmetic)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    point: [i64; 2],
    delta: u64,
    epsilon: u64,
    micro_subdivisions: usize,
    coupling: Coupling,
    mode: CoefficientMode,
}

impl CacheKey {
    fn new(c: &CellConfig) -> Self {
        let q = |v: f64| (v * 1e14).round() as i64;
        Self {
            point: [q(c.macro_point[0]), q(c.macro_point[1])],
            delta: c.delta.to_bits(),
            epsilon: c.epsilon.to_bits(),
            micro_subdivisions: c.micro_subdivisions,
            coupling: c.coupling,
            mode: c.mode,
        }
    }
}

/// Thread-safe memo of HMM tensors. Concurrent misses may both compute; the
/// values are identical, so whichever insert wins is fine.
#[derive(Debug, Default)]
pub struct TensorCache {
    map: RwLock<HashMap<CacheKey, SymTensor2>>,
}

impl TensorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, c: &CellConfig) -> Option<SymTensor2> {
        self.map.read().expect("cache lock").get(&CacheKey::new(c)).copied()
    }

    fn insert(&self, c: &CellConfig, t: SymTensor2) {
        self.map.write().expect("cache lock").insert(CacheKey::new(c), t);
    }
}

/// Tensor field whose value at `x` is the HMM tensor of the cell centered at `x`.
pub struct HmmTensorField {
    coefficient: Arc<dyn TwoScaleCoefficient>,
    template: CellConfig,
    cache: TensorCache,
    cell_solves: AtomicUsize,
}

impl HmmTensorField {
    /// `template.macro_point` is ignored.
    pub fn new(coefficient: Arc<dyn TwoScaleCoefficient>, template: CellConfig) -> Result<Self> {
        template.validate()?;
        Ok(Self {
            coefficient,
            template,
            cache: TensorCache::new(),
            cell_solves: AtomicUsize::new(0),
        })
    }

    pub fn template(&self) -> &CellConfig {
        &self.template
    }

    /// Number of cell problems solved so far (two per uncached point).
    pub fn cell_solves(&self) -> usize {
        self.cell_solves.load(Ordering::Relaxed)
    }

    pub fn cache(&self) -> &TensorCache {
        &self.cache
    }
}

impl TensorField for HmmTensorField {
    fn eval(&self, x: Point) -> Result<SymTensor2> {
        let config = self.template.at(x);
        if let Some(t) = self.cache.get(&config) {
            return Ok(t);
        }
        let t = homogenized_tensor_hmm(self.coefficient.as_ref(), &config).map_err(|e| Error::CellProblem {
            x: x[0],
            y: x[1],
            source: Box::new(e),
        })?;
        self.cell_solves.fetch_add(2, Ordering::Relaxed);
        self.cache.insert(&config, t);
        Ok(t)
    }

    fn kind(&self) -> TensorKind {
        TensorKind::Hmm
    }
}

/// The closed-form homogenized tensor as a field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactHomogenizedTensor;

impl TensorField for ExactHomogenizedTensor {
    fn eval(&self, x: Point) -> Result<SymTensor2> {
        Ok(homogenized_tensor_exact(x))
    }

    fn kind(&self) -> TensorKind {
        TensorKind::Exact
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(x: Point, y: Point) -> SymTensor2 {
        SymTensor2::isotropic(0.33 + 0.15 * ((2.0 * PI * x[0]).sin() + (2.0 * PI * y[0]).sin()))
    }

    #[test]
    fn exact_tensor_values() {
        let t = homogenized_tensor_exact([0.0, 0.7]);
        assert!((t.xx - 0.3 * 0.96f64.sqrt()).abs() < 1e-15);
        assert!((t.xx - 0.293939).abs() < 1e-6);
        assert!((t.yy - 0.33).abs() < 1e-15);
        let t = homogenized_tensor_exact([0.25, 0.0]);
        assert!((t.xx - 0.455961).abs() < 1e-6);
        assert!((t.xx - 0.3 * 2.31f64.sqrt()).abs() < 1e-15);
        assert!((t.yy - 0.48).abs() < 1e-15);
        for x1 in [0.1, 0.4, 0.9] {
            let t = homogenized_tensor_exact([x1, 0.0]);
            assert!((t.yy - (0.33 + 0.15 * (2.0 * PI * x1).sin())).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_1d_constant_and_sine() {
        let c = ConstantCoefficient(SymTensor2::isotropic(0.7));
        let t = homogenized_tensor_reference_1d(&c, [0.3, 0.3], 4);
        assert!((t.xx - 0.7).abs() < 1e-15 && (t.yy - 0.7).abs() < 1e-15);

        let t = homogenized_tensor_reference_1d(&example, [0.0, 0.0], 32);
        assert!((t.xx - (0.33f64.powi(2) - 0.15f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!((t.yy - 0.33).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let ok = CellConfig::new([0.5, 0.5], 0.1, 0.025, 8, Coupling::Periodic, CoefficientMode::Frozen);
        assert!(ok.validate().is_ok());
        assert!(CellConfig { delta: 0.01, ..ok }.validate().is_err());
        assert!(CellConfig { epsilon: 0.0, ..ok }.validate().is_err());
        assert!(CellConfig { micro_subdivisions: 1, ..ok }.validate().is_err());
        let c = ConstantCoefficient(SymTensor2::identity());
        assert!(solve_cell_problem(&c, &ok, 2).is_err());
    }

    #[test]
    fn constant_coefficient_has_no_correction() {
        let c = ConstantCoefficient(SymTensor2::isotropic(2.0));
        for coupling in [Coupling::Periodic, Coupling::Dirichlet, Coupling::Neumann] {
            let cfg = CellConfig::new([0.3, 0.6], 0.1, 0.05, 6, coupling, CoefficientMode::Sampled);
            let s = solve_cell_problem(&c, &cfg, 0).unwrap();
            assert!(s.correction().coefficients().iter().all(|w| w.abs() < 1e-12));
            let t = homogenized_tensor_hmm(&c, &cfg).unwrap();
            assert!(t.frobenius_distance(&SymTensor2::isotropic(2.0)) < 1e-8, "{coupling:?}");
        }
    }

    #[test]
    fn layered_coefficient_orthogonal_direction() {
        let cfg = CellConfig::new([0.3, 0.6], 0.04, 0.01, 16, Coupling::Periodic, CoefficientMode::Frozen);
        let s = solve_cell_problem(&example, &cfg, 1).unwrap();
        assert!(s.correction().coefficients().iter().all(|w| w.abs() < 1e-12));
        let phi = s.phi();
        let p = s.space().dof_point(20);
        assert!((phi.coefficients()[20] - (p[1] - 0.6)).abs() < 1e-14);
    }

    #[test]
    fn cache_reuses_results() {
        let tmpl = CellConfig::new([0.0, 0.0], 0.04, 0.01, 8, Coupling::Periodic, CoefficientMode::Frozen);
        let f = HmmTensorField::new(Arc::new(example), tmpl).unwrap();
        let a = f.eval([0.2, 0.2]).unwrap();
        let b = f.eval([0.2, 0.2]).unwrap();
        assert_eq!(a, b);
        assert_eq!(f.cell_solves(), 2);
        assert_eq!(f.cache().len(), 1);
    }
}
