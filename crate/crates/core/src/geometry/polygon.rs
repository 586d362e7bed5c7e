use serde::{Deserialize, Serialize};

use super::{GeometryError, Point2, Vec2, EPS_GEOM};

/// Closed half-plane `{z : <normal, z> <= offset}` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Vec2,
    pub offset: f64,
}

impl HalfPlane {
    /// Builds a half-plane from any nonzero normal, rescaling it to unit length.
    pub fn new(normal: Vec2, offset: f64) -> Option<Self> {
        let len = normal.norm();
        if !(len > EPS_GEOM) || !offset.is_finite() {
            return None;
        }
        Some(Self {
            normal: normal / len,
            offset: offset / len,
        })
    }

    /// Positive outside, negative inside, zero on the boundary line.
    #[inline]
    pub fn signed_distance(&self, z: Point2) -> f64 {
        self.normal.dot(z) - self.offset
    }

    #[inline]
    pub fn contains(&self, z: Point2) -> bool {
        self.signed_distance(z) <= EPS_GEOM
    }
}

/// Convex polygon with counter-clockwise vertices, lexicographically smallest
/// vertex first. The empty polygon (no vertices) is a valid degenerate value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl TryFrom<Vec<Point2>> for ConvexPolygon {
    type Error = GeometryError;

    fn try_from(vertices: Vec<Point2>) -> Result<Self, Self::Error> {
        ConvexPolygon::new(vertices)
    }
}

impl From<ConvexPolygon> for Vec<Point2> {
    fn from(poly: ConvexPolygon) -> Self {
        poly.vertices
    }
}

impl ConvexPolygon {
    /// Validates and normalizes a vertex list. Clockwise input is reversed.
    /// An empty list yields the empty polygon.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.is_empty() {
            return Ok(Self::empty());
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidConfig(
                "polygon vertex is not finite".into(),
            ));
        }
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidConfig(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i].distance(vertices[(i + 1) % n]) <= EPS_GEOM {
                return Err(GeometryError::InvalidConfig(format!(
                    "polygon vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) < -EPS_GEOM {
                return Err(GeometryError::InvalidConfig(format!(
                    "polygon is not convex at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        if signed_area(&vertices) <= EPS_GEOM {
            return Err(GeometryError::InvalidConfig(
                "polygon has zero area".into(),
            ));
        }
        Ok(Self::from_ccw(vertices))
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
        }
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0).expect("unit square is valid")
    }

    /// Regular `n`-gon inscribed in the circle of given center and radius,
    /// with a vertex at angle zero.
    pub fn regular(n: usize, center: Point2, radius: f64) -> Result<Self, GeometryError> {
        let verts = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                center + Point2::new(a.cos(), a.sin()) * radius
            })
            .collect();
        Self::new(verts)
    }

    /// Trusted constructor for CCW vertex lists produced internally.
    pub(crate) fn from_ccw(mut vertices: Vec<Point2>) -> Self {
        if let Some(start) = lexicographic_min(&vertices) {
            vertices.rotate_left(start);
        }
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).max(0.0)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Directed edges `(v_i, v_{i+1})`, closing back to the first vertex.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Arithmetic mean of the vertices; an interior point for nonempty polygons.
    pub fn vertex_average(&self) -> Option<Point2> {
        if self.vertices.is_empty() {
            return None;
        }
        let sum = self
            .vertices
            .iter()
            .fold(Point2::ZERO, |acc, &v| acc + v);
        Some(sum / self.vertices.len() as f64)
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> Option<(Point2, Point2)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                Point2::new(lo.x.min(v.x), lo.y.min(v.y)),
                Point2::new(hi.x.max(v.x), hi.y.max(v.y)),
            )
        }))
    }

    /// Largest distance from `p` to any vertex.
    pub fn max_distance_from(&self, p: Point2) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.distance(p))
            .fold(0.0, f64::max)
    }

    /// Signed distance-like exterior measure: the largest distance by which
    /// `p` violates an edge line. Nonpositive iff `p` is inside.
    pub fn exterior_distance(&self, p: Point2) -> f64 {
        if self.vertices.is_empty() {
            return f64::INFINITY;
        }
        self.edges()
            .map(|(a, b)| {
                let e = b - a;
                -e.cross(p - a) / e.norm()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.exterior_distance(p) <= tol
    }

    /// Half-planes whose intersection is this polygon, one per edge.
    pub fn halfplanes(&self) -> Vec<HalfPlane> {
        self.edges()
            .filter_map(|(a, b)| {
                let e = b - a;
                // outward normal of a CCW edge
                let n = Vec2::new(e.y, -e.x);
                HalfPlane::new(n, n.dot(a))
            })
            .collect()
    }
}

/// Returns `poly` intersected with `h`. Empty if they are disjoint or the
/// intersection is degenerate.
pub fn clip(poly: &ConvexPolygon, h: &HalfPlane) -> ConvexPolygon {
    let labels = vec![0usize; poly.len()];
    let (verts, _) = clip_labeled(poly.vertices(), &labels, h, 1);
    ConvexPolygon::from_ccw(verts)
}

/// Sutherland-Hodgman step on a convex CCW polygon whose edges carry labels.
/// `labels[i]` identifies the constraint that produced edge `v_i -> v_{i+1}`;
/// the new edge along the clip line gets `new_label`.
pub(crate) fn clip_labeled<L: Copy>(
    verts: &[Point2],
    labels: &[L],
    h: &HalfPlane,
    new_label: L,
) -> (Vec<Point2>, Vec<L>) {
    let n = verts.len();
    let mut out_v = Vec::with_capacity(n + 1);
    let mut out_l = Vec::with_capacity(n + 1);
    if n == 0 {
        return (out_v, out_l);
    }
    let dist: Vec<f64> = verts.iter().map(|&v| h.signed_distance(v)).collect();
    if dist.iter().all(|&d| d <= EPS_GEOM) {
        return (verts.to_vec(), labels.to_vec());
    }
    if dist.iter().all(|&d| d > EPS_GEOM) {
        return (out_v, out_l);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (verts[i], verts[j]);
        let (da, db) = (dist[i], dist[j]);
        let a_in = da <= EPS_GEOM;
        let b_in = db <= EPS_GEOM;
        if a_in {
            out_v.push(a);
            out_l.push(labels[i]);
        }
        if a_in != b_in {
            let t = da / (da - db);
            let cut = a + (b - a) * t;
            out_v.push(cut);
            out_l.push(if a_in { new_label } else { labels[i] });
        }
    }
    dedup_cyclic(&mut out_v, &mut out_l);
    if out_v.len() < 3 || signed_area(&out_v) <= EPS_GEOM * EPS_GEOM {
        out_v.clear();
        out_l.clear();
    }
    (out_v, out_l)
}

/// Drops vertices closer than `EPS_GEOM` to their successor; the surviving
/// vertex keeps the successor's outgoing-edge label.
fn dedup_cyclic<L: Copy>(verts: &mut Vec<Point2>, labels: &mut Vec<L>) {
    let mut i = 0;
    while verts.len() > 1 && i < verts.len() {
        let j = (i + 1) % verts.len();
        if verts[i].distance(verts[j]) <= EPS_GEOM {
            verts.remove(i);
            labels.remove(i);
        } else {
            i += 1;
        }
    }
}

pub(crate) fn signed_area(verts: &[Point2]) -> f64 {
    let n = verts.len();
    if n < 3 {
        return 0.0;
    }
    let o = verts[0];
    let mut twice = 0.0;
    for i in 1..n - 1 {
        twice += (verts[i] - o).cross(verts[i + 1] - o);
    }
    0.5 * twice
}

pub(crate) fn lexicographic_min(verts: &[Point2]) -> Option<usize> {
    verts
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)))
        .map(|(i, _)| i)
}
