//! Q1/Q2 Lagrange spaces on uniform quadrilateral meshes, with
//! homogeneous Dirichlet, periodic and single-pin constraints.

use super::basis;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    None,
    /// Homogeneous Dirichlet on every boundary dof.
    Dirichlet,
    /// Max faces identified with min faces; `pinned` (a master dof) is fixed to zero.
    Periodic { pinned: usize },
    /// A single dof fixed to zero, everything else free.
    Pinned { dof: usize },
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    order: usize,
    grid: [usize; 2],
    constraint: Constraint,
    constrained: Vec<bool>,
    master: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Mesh, order: usize, constraint: Constraint) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::invalid(format!("element order must be 1 or 2, got {order}")));
        }
        let [n1, n2] = mesh.subdivisions();
        let grid = [order * n1 + 1, order * n2 + 1];
        let count = grid[0] * grid[1];

        let mut master: Vec<usize> = (0..count).collect();
        let mut constrained = vec![false; count];
        match constraint {
            Constraint::None => {}
            Constraint::Dirichlet => {
                for j in 0..grid[1] {
                    for i in 0..grid[0] {
                        if i == 0 || j == 0 || i + 1 == grid[0] || j + 1 == grid[1] {
                            constrained[i + grid[0] * j] = true;
                        }
                    }
                }
            }
            Constraint::Periodic { pinned } => {
                for j in 0..grid[1] {
                    for i in 0..grid[0] {
                        let mi = if i + 1 == grid[0] { 0 } else { i };
                        let mj = if j + 1 == grid[1] { 0 } else { j };
                        let d = i + grid[0] * j;
                        master[d] = mi + grid[0] * mj;
                        constrained[d] = master[d] != d;
                    }
                }
                if pinned >= count || master[pinned] != pinned {
                    return Err(Error::invalid(format!(
                        "pinned dof {pinned} is not a periodic master"
                    )));
                }
                constrained[pinned] = true;
            }
            Constraint::Pinned { dof } => {
                if dof >= count {
                    return Err(Error::invalid(format!("pinned dof {dof} out of range")));
                }
                constrained[dof] = true;
            }
        }

        Ok(Self {
            mesh,
            order,
            grid,
            constraint,
            constrained,
            master,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn dof_count(&self) -> usize {
        self.grid[0] * self.grid[1]
    }

    /// Dofs per axis.
    pub fn dof_grid(&self) -> [usize; 2] {
        self.grid
    }

    pub fn dofs_per_element(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }

    pub fn dof_point(&self, dof: usize) -> Point {
        let (i, j) = (dof % self.grid[0], dof / self.grid[0]);
        let o = self.mesh.origin();
        let l = self.mesh.side_lengths();
        let coord = |k: usize, n: usize, axis: usize| {
            if k + 1 == n {
                o[axis] + l[axis]
            } else {
                o[axis] + l[axis] * k as f64 / (n - 1) as f64
            }
        };
        [coord(i, self.grid[0], 0), coord(j, self.grid[1], 1)]
    }

    pub fn dof_points(&self) -> Vec<Point> {
        (0..self.dof_count()).map(|d| self.dof_point(d)).collect()
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        let (i, j) = (dof % self.grid[0], dof / self.grid[0]);
        i == 0 || j == 0 || i + 1 == self.grid[0] || j + 1 == self.grid[1]
    }

    /// Global dofs of element `e` in local lexicographic order.
    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        let (ei, ej) = self.mesh.element_position(e);
        let k = self.order + 1;
        let mut out = Vec::with_capacity(k * k);
        for b in 0..k {
            for a in 0..k {
                out.push((self.order * ei + a) + self.grid[0] * (self.order * ej + b));
            }
        }
        out
    }

    pub fn constrained_mask(&self) -> &[bool] {
        &self.constrained
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.dof_count()).filter(|&d| !self.constrained[d]).collect()
    }

    pub fn constrained_dofs(&self) -> Vec<usize> {
        (0..self.dof_count()).filter(|&d| self.constrained[d]).collect()
    }

    /// Periodic representative of a dof (identity for other constraints).
    pub fn master(&self, dof: usize) -> usize {
        self.master[dof]
    }

    /// Folds periodic slaves into their masters, then zeros constrained rows and
    /// columns and puts `diag` on their diagonal. Symmetry is preserved.
    pub fn constrain_matrix(&self, a: &SparseMatrix, diag: f64) -> SparseMatrix {
        if let Constraint::Periodic { .. } = self.constraint {
            let folded: Vec<_> = a
                .triplets()
                .into_iter()
                .map(|(i, j, v)| (self.master[i], self.master[j], v))
                .collect();
            SparseMatrix::from_triplets(a.dim(), &folded).eliminate(&self.constrained, diag)
        } else {
            a.eliminate(&self.constrained, diag)
        }
    }

    /// Right-hand side counterpart of [`Self::constrain_matrix`] for homogeneous constraints.
    pub fn constrain_rhs(&self, b: &mut [f64]) {
        if let Constraint::Periodic { .. } = self.constraint {
            for d in 0..b.len() {
                let m = self.master[d];
                if m != d {
                    b[m] += b[d];
                }
            }
        }
        for (bi, &c) in b.iter_mut().zip(&self.constrained) {
            if c {
                *bi = 0.0;
            }
        }
    }

    /// Makes a coefficient vector honor the constraints: Dirichlet dofs are
    /// zeroed, periodic slaves copy their master. Pinned dofs are left alone.
    pub fn apply_constraints(&self, coeffs: &mut [f64]) {
        match self.constraint {
            Constraint::Dirichlet => {
                for (c, &m) in coeffs.iter_mut().zip(&self.constrained) {
                    if m {
                        *c = 0.0;
                    }
                }
            }
            Constraint::Periodic { .. } => {
                for d in 0..coeffs.len() {
                    coeffs[d] = coeffs[self.master[d]];
                }
            }
            Constraint::None | Constraint::Pinned { .. } => {}
        }
    }

    /// Locates the element containing `x` and its reference coordinates.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 2])> {
        let o = self.mesh.origin();
        let h = self.mesh.element_size();
        let [n1, n2] = self.mesh.subdivisions();
        let s = [(x[0] - o[0]) / h[0], (x[1] - o[1]) / h[1]];
        let tol = 1e-12;
        if s[0] < -tol || s[1] < -tol || s[0] > n1 as f64 + tol || s[1] > n2 as f64 + tol {
            return None;
        }
        let i = (s[0].floor().max(0.0) as usize).min(n1 - 1);
        let j = (s[1].floor().max(0.0) as usize).min(n2 - 1);
        Some((i + n1 * j, [s[0] - i as f64, s[1] - j as f64]))
    }
}

/// Coefficient vector over a space.
#[derive(Debug, Clone)]
pub struct FeFunction<'s> {
    space: &'s FeSpace,
    coefficients: Vec<f64>,
}

impl<'s> FeFunction<'s> {
    pub fn new(space: &'s FeSpace, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: space.dof_count(),
                actual: coefficients.len(),
            });
        }
        Ok(Self { space, coefficients })
    }

    pub fn zeros(space: &'s FeSpace) -> Self {
        Self {
            space,
            coefficients: vec![0.0; space.dof_count()],
        }
    }

    pub fn space(&self) -> &'s FeSpace {
        self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Point evaluation; `None` outside the mesh.
    pub fn value_at(&self, x: Point) -> Option<f64> {
        let (e, r) = self.space.locate(x)?;
        let phi = basis::shape_values(self.space.order, r);
        Some(
            self.space
                .element_dofs(e)
                .iter()
                .zip(&phi)
                .map(|(&d, p)| self.coefficients[d] * p)
                .sum(),
        )
    }
}

/// Nodal interpolant: coefficients are `g` at the dof points (vertices for
/// Q1; vertices, edge midpoints and cell centers for Q2).
pub fn interpolate_nodal<'s, G>(space: &'s FeSpace, g: G) -> Result<FeFunction<'s>>
where
    G: Fn(Point) -> f64,
{
    let mut coefficients = Vec::with_capacity(space.dof_count());
    for d in 0..space.dof_count() {
        let p = space.dof_point(d);
        let v = g(p);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("interpolated value at ({}, {})", p[0], p[1])));
        }
        coefficients.push(v);
    }
    Ok(FeFunction { space, coefficients })
}
