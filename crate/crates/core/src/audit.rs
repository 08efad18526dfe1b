//! Quality and conformity audit of a finished mesh.

use std::fmt::Write as _;

use crate::delaunay::Triangulation;
use crate::frame::BoundingFrame;
use crate::geometry::{encroaches, Point2};
use crate::index::PointGrid;
use crate::mesh::{lfs_ratio_min, RefinedMesh, VertexKind};

/// Slack on the radius-edge bound.
pub const RATIO_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct MeshAudit {
    pub beta: f64,
    pub min_angle_deg: f64,
    pub max_radius_edge: f64,
    pub triangle_count: usize,
    pub vertex_count: usize,
    pub steiner_count: usize,
    pub loose_pair_count: usize,
    pub encroached_boundary_count: usize,
    pub all_points_in_unit_square: bool,
    pub lfs_ratio_min: Option<f64>,
}

impl MeshAudit {
    pub fn pass(&self) -> bool {
        self.loose_pair_count == 0
            && self.max_radius_edge <= self.beta + RATIO_TOL
            && self.encroached_boundary_count == 0
            && self.all_points_in_unit_square
    }

    pub fn record(&self) -> Vec<(&'static str, String)> {
        vec![
            ("pass", self.pass().to_string()),
            ("beta", format!("{:.9}", self.beta)),
            ("min_angle_deg", format!("{:.6}", self.min_angle_deg)),
            ("max_radius_edge", format!("{:.9}", self.max_radius_edge)),
            ("triangle_count", self.triangle_count.to_string()),
            ("vertex_count", self.vertex_count.to_string()),
            ("steiner_count", self.steiner_count.to_string()),
            ("loose_pair_count", self.loose_pair_count.to_string()),
            ("encroached_boundary_count", self.encroached_boundary_count.to_string()),
            ("all_points_in_unit_square", self.all_points_in_unit_square.to_string()),
            ("lfs_ratio_min", self.lfs_ratio_min.map_or_else(|| "na".into(), |r| format!("{r:.6}"))),
        ]
    }

    /// Same counts and flags, floats within `tol` relative.
    pub fn matches(&self, o: &MeshAudit, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
        let lfs = match (self.lfs_ratio_min, o.lfs_ratio_min) {
            (Some(a), Some(b)) => close(a, b),
            (a, b) => a.is_none() && b.is_none(),
        };
        self.pass() == o.pass()
            && self.triangle_count == o.triangle_count
            && self.vertex_count == o.vertex_count
            && self.steiner_count == o.steiner_count
            && self.loose_pair_count == o.loose_pair_count
            && self.encroached_boundary_count == o.encroached_boundary_count
            && self.all_points_in_unit_square == o.all_points_in_unit_square
            && close(self.min_angle_deg, o.min_angle_deg)
            && close(self.max_radius_edge, o.max_radius_edge)
            && lfs
    }
}

/// `key=value` lines.
pub fn format_record(rec: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in rec {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

/// Hull edges whose diametral disk strictly contains a vertex.
pub fn encroached_hull_edges(tri: &Triangulation) -> usize {
    let pts = tri.points();
    let grid = PointGrid::new(pts);
    let hull = tri.hull();
    let mut near = Vec::new();
    let mut count = 0;
    for i in 0..hull.len() {
        let (a, b) = (tri.point(hull[i]), tri.point(hull[(i + 1) % hull.len()]));
        grid.within(pts, a.midpoint(b), 0.5 * a.dist(b) * (1.0 + 1e-9), &mut near);
        if near.iter().any(|&j| {
            let x = pts[j as usize];
            x != a && x != b && encroaches(x, a, b).unwrap_or(false)
        }) {
            count += 1;
        }
    }
    count
}

/// Audit a triangulation of normalized coordinates. `kinds` labels every
/// vertex; input vertices define the lfs denominator together with the
/// initial frame points.
pub fn audit(tri: &Triangulation, kinds: &[VertexKind], beta: f64) -> MeshAudit {
    let pts = tri.points();
    let mut initial: Vec<Point2> = pts
        .iter()
        .zip(kinds)
        .filter(|(_, k)| **k == VertexKind::Input)
        .map(|(p, _)| *p)
        .collect();
    let n_input = initial.len();
    initial.extend(BoundingFrame::initial_points());
    MeshAudit {
        beta,
        min_angle_deg: tri.min_angle().to_degrees(),
        max_radius_edge: tri.max_radius_edge(),
        triangle_count: tri.triangle_count(),
        vertex_count: tri.num_vertices(),
        steiner_count: kinds.iter().filter(|k| matches!(k, VertexKind::Steiner | VertexKind::BoundarySplit)).count(),
        loose_pair_count: tri.loose_pairs(beta).len(),
        encroached_boundary_count: encroached_hull_edges(tri),
        all_points_in_unit_square: pts.iter().all(|p| (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)),
        lfs_ratio_min: if n_input > 0 { lfs_ratio_min(&initial, pts, n_input) } else { None },
    }
}

pub fn audit_mesh(mesh: &RefinedMesh, beta: f64) -> MeshAudit {
    audit(&mesh.triangulation, &mesh.kinds, beta)
}

/// Rebuild the mesh with vertex `v` removed, for fault injection.
pub fn without_vertex(tri: &Triangulation, kinds: &[VertexKind], v: usize) -> (Triangulation, Vec<VertexKind>) {
    let mut pts = tri.points().to_vec();
    let mut ks = kinds.to_vec();
    pts.remove(v);
    ks.remove(v);
    let t = Triangulation::build(&pts).expect("frame keeps the set two-dimensional");
    (t, ks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{refine, RefinerConfig};
    use crate::geometry::alpha_for_beta;

    fn sample() -> Vec<Point2> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        (0..40).map(|_| Point2::new(rng.gen_range(0.34..0.66), rng.gen_range(0.34..0.66))).collect()
    }

    #[test]
    fn baseline_output_passes() {
        let beta = std::f64::consts::SQRT_2;
        let m = refine(&sample(), &RefinerConfig::new(beta)).unwrap();
        let a = audit_mesh(&m, beta);
        assert!(a.pass(), "{a:?}");
        assert!(a.min_angle_deg >= alpha_for_beta(beta).to_degrees() - 1e-7);
        assert!(a.min_angle_deg >= 20.70);
        assert_eq!(a.steiner_count, m.stats.steiner_count + m.stats.boundary_split_count);
        assert!(a.lfs_ratio_min.unwrap() > 0.0);
    }

    #[test]
    fn deleting_a_steiner_point_fails() {
        let beta = std::f64::consts::SQRT_2;
        let m = refine(&sample(), &RefinerConfig::new(beta)).unwrap();
        let failing = (0..m.kinds.len())
            .filter(|&v| m.kinds[v] == VertexKind::Steiner)
            .take(20)
            .filter(|&v| {
                let (t, k) = without_vertex(&m.triangulation, &m.kinds, v);
                let a = audit(&t, &k, beta);
                assert_eq!(a.pass(), a.loose_pair_count == 0 && a.max_radius_edge <= beta + RATIO_TOL);
                !a.pass() && a.loose_pair_count > 0
            })
            .count();
        assert!(failing > 0);
    }

    #[test]
    fn record_has_every_field() {
        let m = refine(&[], &RefinerConfig::new(1.5)).unwrap();
        let text = format_record(&audit_mesh(&m, 1.5).record());
        assert!(text.contains("loose_pair_count=0\n"));
        assert!(text.contains("lfs_ratio_min=na\n"));
        assert_eq!(text.lines().count(), 11);
    }
}
