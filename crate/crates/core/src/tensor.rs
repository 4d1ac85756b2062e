//! 2×2 symmetric diffusion tensors and point-wise tensor providers.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        Self { xx, xy: 0.0, yy }
    }

    pub const fn isotropic(c: f64) -> Self {
        Self::diag(c, c)
    }

    pub const fn identity() -> Self {
        Self::isotropic(1.0)
    }

    pub fn scaled(self, s: f64) -> Self {
        Self::new(s * self.xx, s * self.xy, s * self.yy)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// `uᵀ A v`
    pub fn bilinear(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        let av = self.apply(v);
        u[0] * av[0] + u[1] * av[1]
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * (self.xx + self.yy);
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        [m - d, m + d]
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy).sqrt()
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        Self::new(self.xx - other.xx, self.xy - other.xy, self.yy - other.yy).frobenius_norm()
    }
}

/// What a tensor field represents; carried for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Constant,
    Exact,
    Hmm,
    Oscillatory,
    Custom,
}

/// Point → symmetric positive definite tensor.
pub trait TensorField: Sync {
    fn eval(&self, x: Point) -> Result<SymTensor2>;

    fn kind(&self) -> TensorKind {
        TensorKind::Custom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantTensor(pub SymTensor2);

impl TensorField for ConstantTensor {
    fn eval(&self, _x: Point) -> Result<SymTensor2> {
        Ok(self.0)
    }

    fn kind(&self) -> TensorKind {
        TensorKind::Constant
    }
}

/// Wraps a closure as a tensor field.
pub struct FnTensor<F> {
    f: F,
    kind: TensorKind,
}

impl<F> FnTensor<F>
where
    F: Fn(Point) -> SymTensor2 + Sync,
{
    pub fn new(kind: TensorKind, f: F) -> Self {
        Self { f, kind }
    }
}

impl<F> TensorField for FnTensor<F>
where
    F: Fn(Point) -> SymTensor2 + Sync,
{
    fn eval(&self, x: Point) -> Result<SymTensor2> {
        Ok((self.f)(x))
    }

    fn kind(&self) -> TensorKind {
        self.kind
    }
}
