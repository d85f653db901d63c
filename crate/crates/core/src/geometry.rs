//! Closed polygonal curves and the geometry frozen at the start of a step.
//!
//! Vertices are stored counterclockwise and indexed periodically. Edge `j`
//! joins `x_j` to `x_{j+1}`; its unit tangent is `τ_{j+1/2}`. Nodal tangents
//! are the normalized average of the two adjacent edge tangents and the nodal
//! normal is the tangent rotated by +90°, which points inward on a
//! counterclockwise curve. With this convention convex curves have positive
//! curvature.

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Rotation by +π/2.
#[inline]
pub fn rot90(v: Point) -> Point {
    Point::new(-v.y, v.x)
}

#[inline]
fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Ordered, periodic, counterclockwise vertex list with `N >= 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalCurve {
    vertices: Vec<Point>,
}

impl PolygonalCurve {
    /// Validates all invariants: at least three vertices, no zero-length edge
    /// and strictly positive signed area.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        validate_points(&vertices)?;
        let area = signed_area(&vertices);
        if !(area > 0.0) {
            return Err(Error::ClockwiseOrientation { area });
        }
        Ok(Self { vertices })
    }

    /// Like [`PolygonalCurve::new`], but reverses a clockwise input first.
    pub fn from_vertices_ccw(mut vertices: Vec<Point>) -> Result<Self> {
        validate_points(&vertices)?;
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self::new(vertices)
    }

    pub fn from_xy(coords: &[[f64; 2]]) -> Result<Self> {
        Self::from_vertices_ccw(coords.iter().map(|c| Point::new(c[0], c[1])).collect())
    }

    /// Regular `n`-gon inscribed in the circle of the given radius, first
    /// vertex on the positive x axis.
    pub fn regular(n: usize, radius: f64) -> Result<Self> {
        let vertices = (0..n)
            .map(|j| {
                let theta = std::f64::consts::TAU * j as f64 / n as f64;
                Point::new(radius * theta.cos(), radius * theta.sin())
            })
            .collect();
        Self::new(vertices)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point> {
        self.vertices
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        edge_lengths(&self.vertices)
    }

    /// Shoelace area, positive for this (counterclockwise) curve.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn length(&self) -> f64 {
        perimeter(&self.vertices)
    }

    pub fn area_gradient(&self) -> Vec<Point> {
        area_gradient(&self.vertices)
    }

    pub fn length_gradient(&self) -> Vec<Point> {
        length_gradient(&self.vertices)
    }

    /// Ratio of the longest to the shortest edge.
    pub fn mesh_ratio(&self) -> f64 {
        let l = self.edge_lengths();
        let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = l.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}

fn validate_points(vertices: &[Point]) -> Result<()> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::TooFewVertices(n));
    }
    for j in 0..n {
        let l = (vertices[(j + 1) % n] - vertices[j]).norm();
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::DegenerateEdge { index: j });
        }
    }
    Ok(())
}

pub fn edge_lengths(vertices: &[Point]) -> Vec<f64> {
    let n = vertices.len();
    (0..n)
        .map(|j| (vertices[(j + 1) % n] - vertices[j]).norm())
        .collect()
}

/// Signed shoelace area `½ Σ x_j × x_{j+1}`.
pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|j| cross(&vertices[j], &vertices[(j + 1) % n]))
        .sum::<f64>()
}

pub fn perimeter(vertices: &[Point]) -> f64 {
    edge_lengths(vertices).iter().sum()
}

/// Nodal gradient of the shoelace area: `½ (x_{j+1} − x_{j−1})` rotated by
/// −π/2. Points outward on a counterclockwise curve.
pub fn area_gradient(vertices: &[Point]) -> Vec<Point> {
    let n = vertices.len();
    (0..n)
        .map(|j| {
            let d = vertices[(j + 1) % n] - vertices[(j + n - 1) % n];
            Point::new(0.5 * d.y, -0.5 * d.x)
        })
        .collect()
}

/// Nodal gradient of the perimeter: `τ_{j−1/2} − τ_{j+1/2}`.
pub fn length_gradient(vertices: &[Point]) -> Vec<Point> {
    let n = vertices.len();
    let tangents: Vec<Point> = (0..n)
        .map(|j| (vertices[(j + 1) % n] - vertices[j]).normalize())
        .collect();
    (0..n)
        .map(|j| tangents[(j + n - 1) % n] - tangents[j])
        .collect()
}

/// Geometric quantities evaluated on the known curve and held fixed for one
/// time step.
#[derive(Debug, Clone)]
pub struct FrozenFrame {
    /// `l_j = |x_{j+1} − x_j|`.
    pub edge_lengths: Vec<f64>,
    /// `τ_{j+1/2}`, unit tangent of edge `j`.
    pub edge_tangents: Vec<Point>,
    pub nodal_tangents: Vec<Point>,
    pub nodal_normals: Vec<Point>,
    /// `κ_j = −(K x)_j · ν_j / m_j`.
    pub nodal_curvatures: Vec<f64>,
    /// `m_j = (l_{j−1} + l_j) / 2`.
    pub lumped_masses: Vec<f64>,
}

impl FrozenFrame {
    pub fn build(curve: &PolygonalCurve) -> Result<Self> {
        Self::from_points(curve.vertices())
    }

    /// Same as [`FrozenFrame::build`] for a raw vertex list.
    pub fn from_points(vertices: &[Point]) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::TooFewVertices(n));
        }
        let mut edge_lengths = Vec::with_capacity(n);
        let mut edge_tangents = Vec::with_capacity(n);
        for j in 0..n {
            let e = vertices[(j + 1) % n] - vertices[j];
            let l = e.norm();
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::DegenerateEdge { index: j });
            }
            edge_lengths.push(l);
            edge_tangents.push(e / l);
        }

        let mut nodal_tangents = Vec::with_capacity(n);
        let mut nodal_normals = Vec::with_capacity(n);
        let mut nodal_curvatures = Vec::with_capacity(n);
        let mut lumped_masses = Vec::with_capacity(n);
        for j in 0..n {
            let prev = (j + n - 1) % n;
            let sum = edge_tangents[prev] + edge_tangents[j];
            let norm = sum.norm();
            // |τ₋ + τ₊| is exactly zero only for a perfect fold; anything this
            // small has lost all digits of the direction.
            if !(norm > 1e-14) {
                return Err(Error::FoldedVertex { index: j });
            }
            let tau = sum / norm;
            let nu = rot90(tau);
            let mass = 0.5 * (edge_lengths[prev] + edge_lengths[j]);
            // (K x)_j for the periodic P1 stiffness matrix.
            let kx = edge_tangents[prev] - edge_tangents[j];
            nodal_tangents.push(tau);
            nodal_normals.push(nu);
            nodal_curvatures.push(-kx.dot(&nu) / mass);
            lumped_masses.push(mass);
        }

        Ok(Self {
            edge_lengths,
            edge_tangents,
            nodal_tangents,
            nodal_normals,
            nodal_curvatures,
            lumped_masses,
        })
    }

    pub fn len(&self) -> usize {
        self.edge_lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_lengths.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.edge_lengths.iter().sum()
    }
}
