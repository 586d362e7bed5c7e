//! Density fields and quadrature of mass, first and second moments over
//! convex cells.
//!
//! Cells are fan-triangulated from their vertex average; every triangle is
//! integrated with a degree-5 seven-point symmetric rule on a uniform
//! refinement of `4^depth` subtriangles. Depth grows until the estimated
//! relative error of the finest level, taken from the change between the last
//! two levels, drops below `rel_tol`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{voronoi_cells, ConvexPolygon, GeometryError, Point2, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("cannot integrate over an empty region")]
    EmptyRegion,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Strictly positive density over the workspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityField {
    /// Constant density 1.
    Uniform,
    /// `exp(-coefficient * |z - center|^2)`.
    Gaussian { center: Point2, coefficient: f64 },
}

impl DensityField {
    #[inline]
    pub fn evaluate(&self, z: Point2) -> f64 {
        match *self {
            DensityField::Uniform => 1.0,
            DensityField::Gaussian {
                center,
                coefficient,
            } => (-coefficient * (z - center).norm_squared()).exp(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            DensityField::Uniform => Ok(()),
            DensityField::Gaussian {
                center,
                coefficient,
            } => {
                if !center.is_finite() {
                    Err("gaussian center must be finite".into())
                } else if !(coefficient > 0.0 && coefficient.is_finite()) {
                    Err(format!("gaussian coefficient must be positive, got {coefficient}"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Base rule applied on each subtriangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleRule {
    /// Seven-point symmetric rule, exact for polynomials of degree 5.
    #[default]
    Degree5,
}

impl TriangleRule {
    /// Barycentric nodes `(l1, l2, l3)` and weights summing to one.
    fn nodes(self) -> [([f64; 3], f64); 7] {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = 1.0 - 2.0 * a1;
        let w1 = (155.0 - s15) / 1200.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = 1.0 - 2.0 * a2;
        let w2 = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        [
            ([third, third, third], 9.0 / 40.0),
            ([a1, a1, b1], w1),
            ([a1, b1, a1], w1),
            ([b1, a1, a1], w1),
            ([a2, a2, b2], w2),
            ([a2, b2, a2], w2),
            ([b2, a2, a2], w2),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default)]
    pub base_rule: TriangleRule,
    #[serde(default = "QuadratureSpec::default_depth")]
    pub max_subdivision_depth: u32,
    #[serde(default = "QuadratureSpec::default_rel_tol")]
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            base_rule: TriangleRule::Degree5,
            max_subdivision_depth: Self::default_depth(),
            rel_tol: Self::default_rel_tol(),
        }
    }
}

impl QuadratureSpec {
    fn default_depth() -> u32 {
        8
    }

    fn default_rel_tol() -> f64 {
        1e-9
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(format!("quadrature rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        if self.max_subdivision_depth > 12 {
            return Err(format!(
                "quadrature max_subdivision_depth {} is unreasonably large (max 12)",
                self.max_subdivision_depth
            ));
        }
        Ok(())
    }
}

/// Density moments of a region about a reference point `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMoments {
    pub origin: Point2,
    /// `∫ φ`
    pub mass: f64,
    /// `∫ (z - origin) φ`
    pub first: Vec2,
    /// `∫ |z - origin|^2 φ`
    pub second: f64,
    /// Subdivision depth of the returned estimate.
    pub depth: u32,
    pub converged: bool,
}

impl CellMoments {
    pub fn centroid(&self) -> Point2 {
        self.origin + self.first / self.mass
    }

    /// Second moment about `origin`, i.e. the cost of an agent sitting there.
    pub fn cost(&self) -> f64 {
        self.second
    }
}

#[derive(Clone, Copy, Default)]
struct Accum {
    mass: f64,
    first: Vec2,
    second: f64,
}

impl Accum {
    fn add(&mut self, other: Accum) {
        self.mass += other.mass;
        self.first += other.first;
        self.second += other.second;
    }
}

fn integrate_triangle(
    a: Point2,
    b: Point2,
    c: Point2,
    phi: &DensityField,
    origin: Point2,
    nodes: &[([f64; 3], f64); 7],
) -> Accum {
    let area = 0.5 * (b - a).cross(c - a).abs();
    let mut acc = Accum::default();
    for &([l1, l2, l3], w) in nodes {
        let z = Point2::new(
            l1 * a.x + l2 * b.x + l3 * c.x,
            l1 * a.y + l2 * b.y + l3 * c.y,
        );
        let f = w * phi.evaluate(z);
        let r = z - origin;
        acc.mass += f;
        acc.first += r * f;
        acc.second += r.norm_squared() * f;
    }
    Accum {
        mass: acc.mass * area,
        first: acc.first * area,
        second: acc.second * area,
    }
}

/// Integrates over the triangle `(a, b, c)` split into `n^2` congruent pieces.
fn integrate_refined(
    a: Point2,
    b: Point2,
    c: Point2,
    n: usize,
    phi: &DensityField,
    origin: Point2,
    nodes: &[([f64; 3], f64); 7],
) -> Accum {
    let inv = 1.0 / n as f64;
    let du = (b - a) * inv;
    let dv = (c - a) * inv;
    let at = |i: usize, j: usize| a + du * i as f64 + dv * j as f64;
    let mut acc = Accum::default();
    for i in 0..n {
        for j in 0..n - i {
            acc.add(integrate_triangle(at(i, j), at(i + 1, j), at(i, j + 1), phi, origin, nodes));
            if i + j + 1 < n {
                acc.add(integrate_triangle(
                    at(i + 1, j),
                    at(i + 1, j + 1),
                    at(i, j + 1),
                    phi,
                    origin,
                    nodes,
                ));
            }
        }
    }
    acc
}

fn integrate_level(
    cell: &ConvexPolygon,
    hub: Point2,
    depth: u32,
    phi: &DensityField,
    origin: Point2,
    nodes: &[([f64; 3], f64); 7],
) -> Accum {
    let n = 1usize << depth;
    let mut acc = Accum::default();
    for (v0, v1) in cell.edges() {
        acc.add(integrate_refined(hub, v0, v1, n, phi, origin, nodes));
    }
    acc
}

/// Mass, first and second moments of `cell` about `origin`.
pub fn cell_moments(
    cell: &ConvexPolygon,
    phi: &DensityField,
    quad: &QuadratureSpec,
    origin: Point2,
) -> Result<CellMoments, IntegrationError> {
    let hub = cell.vertex_average().ok_or(IntegrationError::EmptyRegion)?;
    if cell.area() <= 0.0 {
        return Err(IntegrationError::EmptyRegion);
    }
    let nodes = quad.base_rule.nodes();
    let scale = cell.max_distance_from(origin).max(cell.max_distance_from(hub));
    // Halving the mesh divides the degree-5 error by about 64, so the finer
    // level's error is roughly the level difference over 63. Accepting a
    // difference of 16 tol keeps that estimate near tol / 4.
    let tol = 16.0 * quad.rel_tol;

    let mut prev = integrate_level(cell, hub, 0, phi, origin, &nodes);
    let mut depth = 0;
    let mut converged = false;
    while depth < quad.max_subdivision_depth {
        depth += 1;
        let next = integrate_level(cell, hub, depth, phi, origin, &nodes);
        let agree = (next.mass - prev.mass).abs() <= tol * next.mass.abs()
            && (next.first - prev.first).norm() <= tol * next.mass.abs() * scale
            && (next.second - prev.second).abs() <= tol * next.second.abs();
        prev = next;
        if agree {
            converged = true;
            break;
        }
    }
    if !(prev.mass > 0.0) {
        return Err(IntegrationError::EmptyRegion);
    }
    Ok(CellMoments {
        origin,
        mass: prev.mass,
        first: prev.first,
        second: prev.second,
        depth,
        converged,
    })
}

/// `∫_cell φ`.
pub fn mass(
    cell: &ConvexPolygon,
    phi: &DensityField,
    quad: &QuadratureSpec,
) -> Result<f64, IntegrationError> {
    let origin = cell.vertex_average().ok_or(IntegrationError::EmptyRegion)?;
    Ok(cell_moments(cell, phi, quad, origin)?.mass)
}

/// Density-weighted centroid `∫ z φ / ∫ φ`.
pub fn weighted_centroid(
    cell: &ConvexPolygon,
    phi: &DensityField,
    quad: &QuadratureSpec,
) -> Result<Point2, IntegrationError> {
    let origin = cell.vertex_average().ok_or(IntegrationError::EmptyRegion)?;
    Ok(cell_moments(cell, phi, quad, origin)?.centroid())
}

/// `∫_cell |x_p - z|^2 φ(z) dz`.
pub fn cell_cost(
    x_p: Point2,
    cell: &ConvexPolygon,
    phi: &DensityField,
    quad: &QuadratureSpec,
) -> Result<f64, IntegrationError> {
    Ok(cell_moments(cell, phi, quad, x_p)?.cost())
}

/// Sum of per-agent cell costs over the Voronoi partition of `workspace`.
pub fn locational_cost(
    config: &[Point2],
    workspace: &ConvexPolygon,
    phi: &DensityField,
    quad: &QuadratureSpec,
) -> Result<f64, IntegrationError> {
    let cells = voronoi_cells(config, workspace)?;
    cells
        .iter()
        .zip(config)
        .map(|(cell, &x)| cell_cost(x, &cell.polygon, phi, quad))
        .sum()
}
