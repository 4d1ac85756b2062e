//! Uniform quadrilateral meshes of axis-aligned rectangles.
//!
//! Nodes are numbered lexicographically with the x₂ index major and the
//! x₁ index minor, so node `(i, j)` has index `i + (n₁ + 1) j`. Elements use
//! the same ordering and list their vertices counter-clockwise starting at
//! the lower-left corner:
//!
//! ```text
//!   3 ---- 2
//!   |      |
//!   0 ---- 1
//! ```

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Uniform partition of `origin + [0, L₁] × [0, L₂]` into `n₁ × n₂` equal rectangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    origin: Point,
    side_lengths: [f64; 2],
    subdivisions: [usize; 2],
    nodes: Vec<Point>,
    elements: Vec<[usize; 4]>,
    boundary: Vec<bool>,
    periodic_pairs: BTreeMap<usize, usize>,
}

impl Mesh {
    /// Builds the mesh; rejects non-positive or non-finite sizes and zero subdivisions.
    pub fn uniform(origin: Point, side_lengths: [f64; 2], subdivisions: [usize; 2]) -> Result<Self> {
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("mesh origin must be finite"));
        }
        if !side_lengths.iter().all(|&l| l.is_finite() && l > 0.0) {
            return Err(Error::invalid(format!(
                "mesh side lengths must be positive, got {side_lengths:?}"
            )));
        }
        if subdivisions.contains(&0) {
            return Err(Error::invalid(format!(
                "mesh subdivisions must be at least 1, got {subdivisions:?}"
            )));
        }

        let [n1, n2] = subdivisions;
        let h = [side_lengths[0] / n1 as f64, side_lengths[1] / n2 as f64];

        let mut nodes = Vec::with_capacity((n1 + 1) * (n2 + 1));
        let mut boundary = Vec::with_capacity((n1 + 1) * (n2 + 1));
        for j in 0..=n2 {
            for i in 0..=n1 {
                // Snap the last node onto the far face so face coordinates are exact.
                let x = if i == n1 { origin[0] + side_lengths[0] } else { origin[0] + i as f64 * h[0] };
                let y = if j == n2 { origin[1] + side_lengths[1] } else { origin[1] + j as f64 * h[1] };
                nodes.push([x, y]);
                boundary.push(i == 0 || j == 0 || i == n1 || j == n2);
            }
        }

        let stride = n1 + 1;
        let mut elements = Vec::with_capacity(n1 * n2);
        for j in 0..n2 {
            for i in 0..n1 {
                let v0 = i + stride * j;
                elements.push([v0, v0 + 1, v0 + 1 + stride, v0 + stride]);
            }
        }

        let mut periodic_pairs = BTreeMap::new();
        for j in 0..=n2 {
            for i in 0..=n1 {
                if i != n1 && j != n2 {
                    continue;
                }
                let mi = if i == n1 { 0 } else { i };
                let mj = if j == n2 { 0 } else { j };
                periodic_pairs.insert(i + stride * j, mi + stride * mj);
            }
        }

        Ok(Self {
            origin,
            side_lengths,
            subdivisions,
            nodes,
            elements,
            boundary,
            periodic_pairs,
        })
    }

    /// Square mesh `origin + [0, side]²` with `n × n` elements.
    pub fn square(origin: Point, side: f64, n: usize) -> Result<Self> {
        Self::uniform(origin, [side, side], [n, n])
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn side_lengths(&self) -> [f64; 2] {
        self.side_lengths
    }

    pub fn subdivisions(&self) -> [usize; 2] {
        self.subdivisions
    }

    /// Element widths per axis.
    pub fn element_size(&self) -> [f64; 2] {
        [
            self.side_lengths[0] / self.subdivisions[0] as f64,
            self.side_lengths[1] / self.subdivisions[1] as f64,
        ]
    }

    pub fn element_area(&self) -> f64 {
        let h = self.element_size();
        h[0] * h[1]
    }

    pub fn area(&self) -> f64 {
        self.side_lengths[0] * self.side_lengths[1]
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// `(i, j)` grid position of element `e`.
    pub fn element_position(&self, e: usize) -> (usize, usize) {
        (e % self.subdivisions[0], e / self.subdivisions[0])
    }

    /// Lower-left corner of element `e`.
    pub fn element_origin(&self, e: usize) -> Point {
        self.nodes[self.elements[e][0]]
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&n| self.boundary[n]).collect()
    }

    /// Map from every node on an x₁-max or x₂-max face to its partner on the
    /// opposite min face. The max-max corner maps to the min-min corner, so
    /// no master is itself a slave.
    pub fn periodic_identification(&self) -> &BTreeMap<usize, usize> {
        &self.periodic_pairs
    }

    /// Applies the periodic map, leaving masters and interior nodes unchanged.
    pub fn periodic_master(&self, node: usize) -> usize {
        self.periodic_pairs.get(&node).copied().unwrap_or(node)
    }
}
