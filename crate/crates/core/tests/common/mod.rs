//! Brute-force oracles shared by the integration tests. They avoid the
//! library's clipping and quadrature entirely.
#![allow(dead_code)]

use coverage_core::density::DensityField;
use coverage_core::geometry::{ConvexPolygon, Point2};
use rand::Rng;

/// Cell areas from nearest-agent labels of `n x n` pixel centres over the
/// workspace's bounding box.
pub fn grid_cell_areas(config: &[Point2], workspace: &ConvexPolygon, n: usize) -> Vec<f64> {
    let (lo, hi) = workspace.bounding_box().unwrap();
    let dx = (hi.x - lo.x) / n as f64;
    let dy = (hi.y - lo.y) / n as f64;
    let mut counts = vec![0usize; config.len()];
    for i in 0..n {
        let y = lo.y + (i as f64 + 0.5) * dy;
        let Some((xl, xr)) = row_extent(workspace, y) else {
            continue;
        };
        for k in 0..n {
            let x = lo.x + (k as f64 + 0.5) * dx;
            if x < xl || x > xr {
                continue;
            }
            let z = Point2::new(x, y);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (p, q) in config.iter().enumerate() {
                let d = (z - *q).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = p;
                }
            }
            counts[best] += 1;
        }
    }
    counts.iter().map(|&c| c as f64 * dx * dy).collect()
}

/// Horizontal extent of a convex polygon at height `y`, computed directly
/// from its edges.
pub fn row_extent(poly: &ConvexPolygon, y: f64) -> Option<(f64, f64)> {
    let mut xl = f64::INFINITY;
    let mut xr = f64::NEG_INFINITY;
    for (a, b) in poly.edges() {
        let (ylo, yhi) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
        if y < ylo || y > yhi {
            continue;
        }
        if yhi - ylo == 0.0 {
            xl = xl.min(a.x.min(b.x));
            xr = xr.max(a.x.max(b.x));
            continue;
        }
        let x = a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y);
        xl = xl.min(x);
        xr = xr.max(x);
    }
    (xl <= xr).then_some((xl, xr))
}

/// `(mass, first moment, second moment)` about `origin` by a midpoint sum on
/// an `n x n` grid over the bounding box. Rows containing a vertex are split
/// at the vertex height so every strip has a linear chord, each strip uses
/// the exact chord through its centre line, and the partial pixels at the
/// chord ends are weighted by their covered length.
pub fn riemann_moments(
    poly: &ConvexPolygon,
    phi: &DensityField,
    origin: Point2,
    n: usize,
) -> (f64, Point2, f64) {
    let (lo, hi) = poly.bounding_box().unwrap();
    let dx = (hi.x - lo.x) / n as f64;
    let dy = (hi.y - lo.y) / n as f64;
    let mut vertex_ys: Vec<f64> = poly.vertices().iter().map(|v| v.y).collect();
    vertex_ys.sort_by(f64::total_cmp);
    let (mut m, mut fx, mut fy, mut s) = (0.0, 0.0, 0.0, 0.0);
    let mut cuts = Vec::new();
    for i in 0..n {
        let ya = lo.y + i as f64 * dy;
        let yb = if i + 1 == n { hi.y } else { ya + dy };
        cuts.clear();
        cuts.push(ya);
        cuts.extend(vertex_ys.iter().copied().filter(|&v| v > ya && v < yb));
        cuts.push(yb);
        for w in cuts.windows(2) {
            let h = w[1] - w[0];
            let y = 0.5 * (w[0] + w[1]);
            let Some((xl, xr)) = row_extent(poly, y) else {
                continue;
            };
            let k0 = (((xl - lo.x) / dx).floor().max(0.0)) as usize;
            let k1 = (((xr - lo.x) / dx).ceil() as usize).min(n);
            for k in k0..k1 {
                let a = (lo.x + k as f64 * dx).max(xl);
                let b = (lo.x + (k + 1) as f64 * dx).min(xr);
                if b <= a {
                    continue;
                }
                let z = Point2::new(0.5 * (a + b), y);
                let wgt = phi.evaluate(z) * (b - a) * h;
                let r = z - origin;
                m += wgt;
                fx += wgt * r.x;
                fy += wgt * r.y;
                s += wgt * r.norm_squared();
            }
        }
    }
    (m, Point2::new(fx, fy), s)
}

/// `count` distinct points at least `margin` inside `workspace` and at least
/// `sep` apart.
pub fn random_config<R: Rng>(
    rng: &mut R,
    workspace: &ConvexPolygon,
    count: usize,
    margin: f64,
    sep: f64,
) -> Vec<Point2> {
    let (lo, hi) = workspace.bounding_box().unwrap();
    let mut pts: Vec<Point2> = Vec::new();
    while pts.len() < count {
        let z = Point2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if workspace.exterior_distance(z) <= -margin && pts.iter().all(|p| p.distance(z) >= sep) {
            pts.push(z);
        }
    }
    pts
}

/// Random convex workspace: a regular polygon or an axis-aligned rectangle.
pub fn random_workspace<R: Rng>(rng: &mut R) -> ConvexPolygon {
    if rng.gen_bool(0.3) {
        let w = rng.gen_range(1.0..10.0);
        let h = rng.gen_range(1.0..10.0);
        return ConvexPolygon::rectangle(0.0, 0.0, w, h).unwrap();
    }
    let n = rng.gen_range(3..9);
    let r = rng.gen_range(1.0..6.0);
    let c = Point2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let verts = (0..n)
        .map(|k| {
            let a = phase + std::f64::consts::TAU * k as f64 / n as f64;
            c + Point2::new(a.cos(), a.sin()) * r
        })
        .collect();
    ConvexPolygon::new(verts).unwrap()
}

pub fn random_density<R: Rng>(rng: &mut R, workspace: &ConvexPolygon) -> DensityField {
    random_density_with(rng, workspace, 0.01..1.0)
}

/// Uniform density or a Gaussian centred in the bounding box with a
/// coefficient drawn from `coefficients`.
pub fn random_density_with<R: Rng>(
    rng: &mut R,
    workspace: &ConvexPolygon,
    coefficients: std::ops::Range<f64>,
) -> DensityField {
    if rng.gen_bool(0.25) {
        return DensityField::Uniform;
    }
    let (lo, hi) = workspace.bounding_box().unwrap();
    DensityField::Gaussian {
        center: Point2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y)),
        coefficient: rng.gen_range(coefficients),
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
