//! Tensor-product Gauss–Legendre rules on the reference square [0, 1]².

use crate::error::{Error, Result};

/// Points and weights on [0, 1]²; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    points_per_axis: usize,
}

impl QuadratureRule {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Highest polynomial degree per axis integrated exactly.
    pub fn exactness(&self) -> usize {
        2 * self.points_per_axis - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], closed forms for 1..=5 points.
fn gauss_legendre_1d(n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let r = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt();
            let inner = (3.0 / 7.0 - 2.0 / 7.0 * s).sqrt();
            let outer = (3.0 / 7.0 + 2.0 / 7.0 * s).sqrt();
            let w_in = (18.0 + 30f64.sqrt()) / 36.0;
            let w_out = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-outer, -inner, inner, outer], vec![w_out, w_in, w_in, w_out])
        }
        5 => {
            let s = (10.0f64 / 7.0).sqrt();
            let inner = (5.0 - 2.0 * s).sqrt() / 3.0;
            let outer = (5.0 + 2.0 * s).sqrt() / 3.0;
            let w_in = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let w_out = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (
                vec![-outer, -inner, 0.0, inner, outer],
                vec![w_out, w_in, 128.0 / 225.0, w_in, w_out],
            )
        }
        _ => return None,
    };
    Some(r)
}

/// Gauss–Legendre rule with `n` points on [0, 1].
pub fn gauss_rule_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_legendre_1d(n)
        .ok_or_else(|| Error::invalid(format!("Gauss rule needs 1..=5 points per axis, got {n}")))?;
    Ok((
        x.iter().map(|&s| 0.5 * (s + 1.0)).collect(),
        w.iter().map(|&v| 0.5 * v).collect(),
    ))
}

/// Tensor-product Gauss rule with `points_per_axis²` points, exact for
/// polynomials of degree `2·points_per_axis − 1` in each variable.
pub fn gauss_rule(points_per_axis: usize) -> Result<QuadratureRule> {
    let (x, w) = gauss_rule_1d(points_per_axis)?;
    let mut points = Vec::with_capacity(x.len() * x.len());
    let mut weights = Vec::with_capacity(x.len() * x.len());
    for (yj, wj) in x.iter().zip(&w) {
        for (xi, wi) in x.iter().zip(&w) {
            points.push([*xi, *yj]);
            weights.push(wi * wj);
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        points_per_axis,
    })
}
