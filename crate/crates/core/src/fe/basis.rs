//! Tensor-product Lagrange shape functions on the reference square.
//!
//! Local dofs are ordered lexicographically (x₂ major) over the
//! `(order + 1)²` equispaced nodes `{0, 1/order, .., 1}²`.

use super::quadrature::QuadratureRule;

fn lagrange_1d(order: usize, s: f64) -> ([f64; 3], [f64; 3]) {
    match order {
        1 => ([1.0 - s, s, 0.0], [-1.0, 1.0, 0.0]),
        2 => (
            [
                2.0 * (s - 0.5) * (s - 1.0),
                -4.0 * s * (s - 1.0),
                2.0 * s * (s - 0.5),
            ],
            [4.0 * s - 3.0, 4.0 - 8.0 * s, 4.0 * s - 1.0],
        ),
        _ => unreachable!("only Q1 and Q2 are supported"),
    }
}

/// Shape function values at reference point `p`.
pub fn shape_values(order: usize, p: [f64; 2]) -> Vec<f64> {
    let (vx, _) = lagrange_1d(order, p[0]);
    let (vy, _) = lagrange_1d(order, p[1]);
    let k = order + 1;
    let mut out = Vec::with_capacity(k * k);
    for b in 0..k {
        for a in 0..k {
            out.push(vx[a] * vy[b]);
        }
    }
    out
}

/// Reference gradients at `p` (derivatives with respect to the [0,1]² coordinates).
pub fn shape_gradients(order: usize, p: [f64; 2]) -> Vec<[f64; 2]> {
    let (vx, dx) = lagrange_1d(order, p[0]);
    let (vy, dy) = lagrange_1d(order, p[1]);
    let k = order + 1;
    let mut out = Vec::with_capacity(k * k);
    for b in 0..k {
        for a in 0..k {
            out.push([dx[a] * vy[b], vx[a] * dy[b]]);
        }
    }
    out
}

/// Shape function values and physical gradients tabulated at every point of a rule,
/// for an axis-aligned element with widths `h`.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub values: Vec<Vec<f64>>,
    pub gradients: Vec<Vec<[f64; 2]>>,
    pub weights: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn new(order: usize, rule: &QuadratureRule, h: [f64; 2]) -> Self {
        let area = h[0] * h[1];
        let values = rule.points().iter().map(|&p| shape_values(order, p)).collect();
        let gradients = rule
            .points()
            .iter()
            .map(|&p| {
                shape_gradients(order, p)
                    .into_iter()
                    .map(|g| [g[0] / h[0], g[1] / h[1]])
                    .collect()
            })
            .collect();
        Self {
            values,
            gradients,
            weights: rule.weights().iter().map(|w| w * area).collect(),
            points: rule.points().to_vec(),
        }
    }

    pub fn num_points(&self) -> usize {
        self.weights.len()
    }
}
