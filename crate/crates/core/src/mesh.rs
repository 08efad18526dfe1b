//! Mesh state shared by the refiners.

use crate::delaunay::{InsertOutcome, Triangulation, VertexId};
use crate::error::RefineError;
use crate::frame::{validate_points, BoundingFrame, Encroachment, Transform};
use crate::geometry::Point2;
use crate::index::PointGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexKind {
    Input,
    Frame,
    Steiner,
    BoundarySplit,
}

impl VertexKind {
    /// Attribute column value in `.node` output.
    pub fn code(self) -> u8 {
        match self {
            VertexKind::Input => 0,
            VertexKind::Frame => 1,
            VertexKind::Steiner => 2,
            VertexKind::BoundarySplit => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => VertexKind::Input,
            1 => VertexKind::Frame,
            2 => VertexKind::Steiner,
            3 => VertexKind::BoundarySplit,
            _ => return None,
        })
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, VertexKind::Frame | VertexKind::BoundarySplit)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RefinementStats {
    pub input_count: usize,
    pub steiner_count: usize,
    pub boundary_split_count: usize,
    pub rejected_encroaching_count: usize,
    pub duplicate_skip_count: usize,
    pub final_vertex_count: usize,
    pub final_triangle_count: usize,
    pub min_angle_deg: f64,
    pub max_radius_edge: f64,
    /// The insertion cap stopped the run early.
    pub capped: bool,
    /// Popped pair lengths that dropped below the previous pop with no
    /// boundary split in between.
    pub monotone_violations: usize,
    /// Minimum over input points of lfs in the final set divided by lfs in
    /// the initial set (input plus frame).
    pub lfs_ratio_min: Option<f64>,
    /// Wall time of the refinement proper, excluding the final statistics
    /// and (for the fast refiner) the final Delaunay construction.
    pub work_time: std::time::Duration,
}

impl RefinementStats {
    /// Total insertions counted against a cap.
    pub fn insertions(&self) -> usize {
        self.steiner_count + self.boundary_split_count
    }

    pub fn record(&self) -> Vec<(&'static str, String)> {
        vec![
            ("input_count", self.input_count.to_string()),
            ("steiner_count", self.steiner_count.to_string()),
            ("boundary_split_count", self.boundary_split_count.to_string()),
            ("rejected_encroaching_count", self.rejected_encroaching_count.to_string()),
            ("duplicate_skip_count", self.duplicate_skip_count.to_string()),
            ("final_vertex_count", self.final_vertex_count.to_string()),
            ("final_triangle_count", self.final_triangle_count.to_string()),
            ("min_angle_deg", format!("{:.6}", self.min_angle_deg)),
            ("max_radius_edge", format!("{:.6}", self.max_radius_edge)),
            ("capped", self.capped.to_string()),
            ("monotone_violations", self.monotone_violations.to_string()),
            (
                "lfs_ratio_min",
                self.lfs_ratio_min.map_or_else(|| "na".to_string(), |r| format!("{r:.6}")),
            ),
        ]
    }
}

/// A refined mesh in normalized coordinates.
#[derive(Clone, Debug)]
pub struct RefinedMesh {
    pub triangulation: Triangulation,
    pub kinds: Vec<VertexKind>,
    pub frame: BoundingFrame,
    pub stats: RefinementStats,
    pub transform: Transform,
}

impl RefinedMesh {
    pub fn points(&self) -> &[Point2] {
        self.triangulation.points()
    }

    pub fn input_points(&self) -> impl Iterator<Item = Point2> + '_ {
        self.points()
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| **k == VertexKind::Input)
            .map(|(p, _)| *p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Placement {
    Inserted(VertexId),
    /// Rejected for encroachment; these boundary midpoints went in instead.
    Rejected(Vec<VertexId>),
    Duplicate,
}

/// Triangulation plus frame bookkeeping during refinement.
#[derive(Clone, Debug)]
pub(crate) struct MeshState {
    pub tri: Triangulation,
    pub kinds: Vec<VertexKind>,
    pub frame: BoundingFrame,
    pub stats: RefinementStats,
    /// Input plus the twelve frame points.
    pub initial: Vec<Point2>,
    midpoints: Vec<Point2>,
}

impl MeshState {
    /// `input` must already be normalized into the open unit square. An empty
    /// input refines the frame alone.
    pub fn new(input: &[Point2]) -> Result<Self, RefineError> {
        if !input.is_empty() {
            validate_points(input)?;
        }
        if let Some(p) = input.iter().find(|p| !(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0)) {
            return Err(RefineError::Config(format!("input point {p} is outside the open unit square; normalize first")));
        }
        let mut initial = input.to_vec();
        initial.extend(BoundingFrame::initial_points());
        let tri = Triangulation::build(&initial)?;
        let mut kinds = vec![VertexKind::Input; input.len()];
        kinds.resize(initial.len(), VertexKind::Frame);
        let stats = RefinementStats { input_count: input.len(), ..Default::default() };
        Ok(MeshState { tri, kinds, frame: BoundingFrame::new(), stats, initial, midpoints: Vec::new() })
    }

    /// Resume from an existing triangulation.
    pub fn from_parts(
        tri: Triangulation,
        kinds: Vec<VertexKind>,
        frame: BoundingFrame,
        stats: RefinementStats,
        initial: Vec<Point2>,
    ) -> Self {
        MeshState { tri, kinds, frame, stats, initial, midpoints: Vec::new() }
    }

    /// Insert a Steiner candidate unless it encroaches the boundary.
    pub fn place(&mut self, c: Point2) -> Result<Placement, RefineError> {
        self.midpoints.clear();
        let mut mids = std::mem::take(&mut self.midpoints);
        let verdict = self.frame.handle_encroachment(c, &mut mids);
        let out = match verdict {
            Encroachment::Accept => match self.tri.insert(c)? {
                InsertOutcome::Inserted(v) => {
                    self.kinds.push(VertexKind::Steiner);
                    self.stats.steiner_count += 1;
                    Placement::Inserted(v)
                }
                InsertOutcome::Duplicate(_) => {
                    self.stats.duplicate_skip_count += 1;
                    Placement::Duplicate
                }
            },
            Encroachment::RejectAndSplit => {
                self.stats.rejected_encroaching_count += 1;
                let mut ids = Vec::with_capacity(mids.len());
                for &m in &mids {
                    if let InsertOutcome::Inserted(v) = self.tri.insert(m)? {
                        self.kinds.push(VertexKind::BoundarySplit);
                        self.stats.boundary_split_count += 1;
                        ids.push(v);
                    }
                }
                Placement::Rejected(ids)
            }
        };
        self.midpoints = mids;
        Ok(out)
    }

    pub fn finish(mut self, transform: Transform) -> RefinedMesh {
        let tri = &self.tri;
        self.stats.final_vertex_count = tri.num_vertices();
        self.stats.final_triangle_count = tri.triangle_count();
        self.stats.min_angle_deg = tri.min_angle().to_degrees();
        self.stats.max_radius_edge = tri.max_radius_edge();
        self.stats.lfs_ratio_min = lfs_ratio_min(&self.initial, tri.points(), self.stats.input_count);
        RefinedMesh { triangulation: self.tri, kinds: self.kinds, frame: self.frame, stats: self.stats, transform }
    }
}

/// Minimum over the first `n_input` points of `lfs_final / lfs_initial`.
pub fn lfs_ratio_min(initial: &[Point2], fin: &[Point2], n_input: usize) -> Option<f64> {
    let g0 = PointGrid::new(initial);
    let g1 = PointGrid::new(fin);
    initial[..n_input]
        .iter()
        .filter_map(|&p| {
            let a = g0.kth_nearest(initial, p, 2)?;
            let b = g1.kth_nearest(fin, p, 2)?;
            Some(b / a)
        })
        .reduce(f64::min)
}
