use std::collections::BTreeSet;

use super::polygon::{clip_labeled, lexicographic_min};
use super::{ConvexPolygon, GeometryError, HalfPlane, Point2, EPS_GEOM};

/// Half-plane of points at least as close to `p` as to `q`.
pub fn bisector_halfplane(p: Point2, q: Point2) -> Result<HalfPlane, GeometryError> {
    let d = q - p;
    let len = d.norm();
    if !(len > EPS_GEOM) {
        return Err(GeometryError::CoincidentAgents { p: 0, q: 1 });
    }
    let normal = d / len;
    Ok(HalfPlane {
        normal,
        offset: normal.dot((p + q) * 0.5),
    })
}

/// A bounded Voronoi cell together with the origin of each edge.
///
/// `edge_sources[i]` names the agent whose bisector produced the edge
/// `v_i -> v_{i+1}`, or `None` for a piece of the workspace boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiCell {
    pub polygon: ConvexPolygon,
    pub edge_sources: Vec<Option<usize>>,
}

impl VoronoiCell {
    /// Agents sharing an interface longer than `EPS_GEOM` with this cell.
    pub fn neighbors(&self) -> BTreeSet<usize> {
        self.polygon
            .edges()
            .zip(&self.edge_sources)
            .filter_map(|((a, b), src)| match src {
                Some(q) if a.distance(b) > EPS_GEOM => Some(*q),
                _ => None,
            })
            .collect()
    }
}

/// Checks `N >= 2`, membership of every position in the workspace, and
/// pairwise distinctness.
pub(crate) fn validate_configuration(
    config: &[Point2],
    workspace: &ConvexPolygon,
) -> Result<(), GeometryError> {
    if config.len() < 2 {
        return Err(GeometryError::InvalidConfig(format!(
            "at least 2 agents required, got {}",
            config.len()
        )));
    }
    if workspace.is_empty() {
        return Err(GeometryError::InvalidConfig("workspace is empty".into()));
    }
    for (agent, &x) in config.iter().enumerate() {
        if !x.is_finite() || !workspace.contains(x, EPS_GEOM) {
            return Err(GeometryError::PositionOutsideWorkspace {
                agent,
                x: x.x,
                y: x.y,
            });
        }
    }
    for p in 0..config.len() {
        for q in p + 1..config.len() {
            if config[p].distance(config[q]) <= EPS_GEOM {
                return Err(GeometryError::CoincidentAgents { p, q });
            }
        }
    }
    Ok(())
}

/// Cell of agent `p` without input validation.
pub(crate) fn cell_unchecked(config: &[Point2], p: usize, workspace: &ConvexPolygon) -> VoronoiCell {
    let xp = config[p];
    let mut others: Vec<(f64, usize)> = config
        .iter()
        .enumerate()
        .filter(|&(q, _)| q != p)
        .map(|(q, &xq)| (xp.distance(xq), q))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut verts = workspace.vertices().to_vec();
    let mut labels: Vec<Option<usize>> = vec![None; verts.len()];
    let mut reach = workspace.max_distance_from(xp);
    for (dist, q) in others {
        // the bisector lies at dist/2 from xp; nothing beyond the cell's reach can cut it
        if 0.5 * dist > reach + EPS_GEOM {
            break;
        }
        let normal = (config[q] - xp) / dist;
        let h = HalfPlane {
            normal,
            offset: normal.dot((xp + config[q]) * 0.5),
        };
        let (v, l) = clip_labeled(&verts, &labels, &h, Some(q));
        verts = v;
        labels = l;
        if verts.is_empty() {
            break;
        }
        reach = verts.iter().map(|v| v.distance(xp)).fold(0.0, f64::max);
    }
    if let Some(start) = lexicographic_min(&verts) {
        verts.rotate_left(start);
        labels.rotate_left(start);
    }
    VoronoiCell {
        polygon: ConvexPolygon::from_ccw(verts),
        edge_sources: labels,
    }
}

/// Voronoi cell of agent `p` within `workspace`.
pub fn voronoi_cell(
    config: &[Point2],
    p: usize,
    workspace: &ConvexPolygon,
) -> Result<ConvexPolygon, GeometryError> {
    Ok(labeled_cell(config, p, workspace)?.polygon)
}

/// Voronoi cell of agent `p` with edge provenance.
pub fn labeled_cell(
    config: &[Point2],
    p: usize,
    workspace: &ConvexPolygon,
) -> Result<VoronoiCell, GeometryError> {
    validate_configuration(config, workspace)?;
    if p >= config.len() {
        return Err(GeometryError::InvalidConfig(format!(
            "agent index {p} out of range for {} agents",
            config.len()
        )));
    }
    Ok(cell_unchecked(config, p, workspace))
}

/// All cells of a configuration, in agent order.
pub fn voronoi_cells(
    config: &[Point2],
    workspace: &ConvexPolygon,
) -> Result<Vec<VoronoiCell>, GeometryError> {
    validate_configuration(config, workspace)?;
    Ok((0..config.len())
        .map(|p| cell_unchecked(config, p, workspace))
        .collect())
}

/// Agents whose cells share an interface of positive length with cell `p`.
pub fn voronoi_neighbors(
    config: &[Point2],
    p: usize,
    workspace: &ConvexPolygon,
) -> Result<BTreeSet<usize>, GeometryError> {
    Ok(labeled_cell(config, p, workspace)?.neighbors())
}
