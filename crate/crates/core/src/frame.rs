//! Input normalization and the bounding square.
//!
//! Inputs are scaled so their minimum enclosing square becomes
//! `[1/3, 2/3]^2`; the unit square around it has each side split into thirds.
//! Boundary sub-edges are split at their midpoint whenever a candidate vertex
//! encroaches them.

use std::collections::BTreeSet;

use rustc_hash::FxHashSet;

use crate::error::RefineError;
use crate::geometry::{encroaches, Point2};

/// Similarity transform `x -> (x - center) * scale + 0.5`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub center: Point2,
    pub scale: f64,
}

impl Transform {
    pub fn identity() -> Self {
        Transform { center: Point2::new(0.5, 0.5), scale: 1.0 }
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::new(
            (p.x - self.center.x) * self.scale + 0.5,
            (p.y - self.center.y) * self.scale + 0.5,
        )
    }

    pub fn invert(&self, p: Point2) -> Point2 {
        Point2::new(
            (p.x - 0.5) / self.scale + self.center.x,
            (p.y - 0.5) / self.scale + self.center.y,
        )
    }
}

/// Reject non-finite and duplicate points.
pub fn validate_points(pts: &[Point2]) -> Result<(), RefineError> {
    if pts.is_empty() {
        return Err(RefineError::EmptyInput);
    }
    let mut seen = FxHashSet::default();
    for p in pts {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(RefineError::NonFinite);
        }
        if !seen.insert(p.key()) {
            return Err(RefineError::Duplicate(*p));
        }
    }
    Ok(())
}

/// Map `raw` so that its minimum enclosing square is `[1/3, 2/3]^2`. A single
/// point lands on `(0.5, 0.5)`.
pub fn normalize_input(raw: &[Point2]) -> Result<(Vec<Point2>, Transform), RefineError> {
    validate_points(raw)?;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in raw {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let side = (x1 - x0).max(y1 - y0);
    let center = Point2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let scale = if side > 0.0 { (1.0 / 3.0) / side } else { 1.0 };
    if !scale.is_finite() {
        return Err(RefineError::Config("input extent too small to normalize".into()));
    }
    let t = Transform { center, scale };
    let pts: Vec<Point2> = raw.iter().map(|&p| t.apply(p)).collect();
    // rounding can merge points that were distinct at the original scale
    validate_points(&pts)?;
    Ok((pts, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SquareSide {
    Bottom,
    Right,
    Top,
    Left,
}

const SIDES: [SquareSide; 4] = [SquareSide::Bottom, SquareSide::Right, SquareSide::Top, SquareSide::Left];

impl SquareSide {
    fn point_at(self, t: f64) -> Point2 {
        match self {
            SquareSide::Bottom => Point2::new(t, 0.0),
            SquareSide::Top => Point2::new(t, 1.0),
            SquareSide::Left => Point2::new(0.0, t),
            SquareSide::Right => Point2::new(1.0, t),
        }
    }

    fn param(self, p: Point2) -> f64 {
        match self {
            SquareSide::Bottom | SquareSide::Top => p.x,
            SquareSide::Left | SquareSide::Right => p.y,
        }
    }

    /// Signed distance of `p` beyond this side (positive outside the square).
    fn beyond(self, p: Point2) -> f64 {
        match self {
            SquareSide::Bottom => -p.y,
            SquareSide::Top => p.y - 1.0,
            SquareSide::Left => -p.x,
            SquareSide::Right => p.x - 1.0,
        }
    }
}

/// Ordered float key for the breakpoint sets; parameters live in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
struct Param(f64);
impl Eq for Param {}
#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for Param {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// A boundary sub-edge of the unit square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub side: SquareSide,
    pub a: Point2,
    pub b: Point2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Encroachment {
    Accept,
    /// The candidate was rejected; these boundary midpoints were added.
    RejectAndSplit,
}

#[derive(Clone, Debug)]
pub struct BoundingFrame {
    breaks: [BTreeSet<Param>; 4],
}

impl Default for BoundingFrame {
    fn default() -> Self {
        Self::new()
    }
}

impl BoundingFrame {
    /// Unit square with every side split into three.
    pub fn new() -> Self {
        let init = || -> BTreeSet<Param> {
            [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0].into_iter().map(Param).collect()
        };
        BoundingFrame { breaks: [init(), init(), init(), init()] }
    }

    /// Corners followed by the side thirds points (12 points).
    pub fn initial_points() -> Vec<Point2> {
        let t = [1.0 / 3.0, 2.0 / 3.0];
        let mut pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        for side in SIDES {
            for &s in &t {
                pts.push(side.point_at(s));
            }
        }
        pts
    }

    /// All boundary vertices (corners counted once).
    pub fn vertices(&self) -> Vec<Point2> {
        let mut seen = FxHashSet::default();
        let mut out = Vec::new();
        for side in SIDES {
            for t in &self.breaks[side as usize] {
                let p = side.point_at(t.0);
                if seen.insert(p.key()) {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn edges(&self) -> Vec<BoundaryEdge> {
        let mut out = Vec::new();
        for side in SIDES {
            let b: Vec<f64> = self.breaks[side as usize].iter().map(|t| t.0).collect();
            for w in b.windows(2) {
                out.push(BoundaryEdge { side, a: side.point_at(w[0]), b: side.point_at(w[1]) });
            }
        }
        out
    }

    fn segment_around(&self, side: SquareSide, t: f64) -> Option<(f64, f64)> {
        let set = &self.breaks[side as usize];
        let lo = set.range(..=Param(t)).next_back()?.0;
        let hi = set.range(Param(t)..).next()?.0;
        if lo == hi {
            // exactly on a breakpoint: take the segment to the right, if any
            let hi = set.range((std::ops::Bound::Excluded(Param(t)), std::ops::Bound::Unbounded)).next()?.0;
            return Some((lo, hi));
        }
        Some((lo, hi))
    }

    fn diametral_encroached(&self, x: Point2) -> Option<BoundaryEdge> {
        for side in SIDES {
            let t = side.param(x);
            if !(0.0..=1.0).contains(&t) {
                continue;
            }
            if let Some((lo, hi)) = self.segment_around(side, t) {
                let (a, b) = (side.point_at(lo), side.point_at(hi));
                if encroaches(x, a, b).unwrap_or(false) {
                    return Some(BoundaryEdge { side, a, b });
                }
            }
        }
        None
    }

    fn edge_beyond(&self, x: Point2) -> Option<BoundaryEdge> {
        let side = SIDES.into_iter().find(|s| s.beyond(x) > 0.0)?;
        let t = side.param(x).clamp(0.0, 1.0);
        let (lo, hi) = match self.segment_around(side, t) {
            Some(s) => s,
            None => {
                let set = &self.breaks[side as usize];
                (set.range(..Param(t)).next_back()?.0, t)
            }
        };
        Some(BoundaryEdge { side, a: side.point_at(lo), b: side.point_at(hi) })
    }

    /// A boundary edge whose diametral disk strictly contains `x`. Points
    /// outside the closed square always report the edge they lie beyond.
    pub fn encroached_edge(&self, x: Point2) -> Option<BoundaryEdge> {
        self.diametral_encroached(x).or_else(|| self.edge_beyond(x))
    }

    /// Split `e` at its midpoint. Returns the midpoint.
    pub fn split(&mut self, e: BoundaryEdge) -> Point2 {
        let t = 0.5 * (e.side.param(e.a) + e.side.param(e.b));
        self.breaks[e.side as usize].insert(Param(t));
        e.side.point_at(t)
    }

    /// Reject `candidate` if it encroaches a boundary edge, splitting every
    /// boundary edge it encroaches until it encroaches none. A candidate
    /// outside the square that encroaches nothing splits the edge it lies
    /// beyond once. New midpoints are appended to `midpoints`.
    pub fn handle_encroachment(&mut self, candidate: Point2, midpoints: &mut Vec<Point2>) -> Encroachment {
        let mut rejected = false;
        while let Some(e) = self.diametral_encroached(candidate) {
            rejected = true;
            midpoints.push(self.split(e));
        }
        if !rejected {
            if let Some(e) = self.edge_beyond(candidate) {
                rejected = true;
                midpoints.push(self.split(e));
            }
        }
        if rejected {
            Encroachment::RejectAndSplit
        } else {
            Encroachment::Accept
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn normalize_examples() {
        let (pts, t) = normalize_input(&[pt(0., 0.), pt(10., 10.)]).unwrap();
        assert!((pts[0].x - 1.0 / 3.0).abs() < 1e-15 && (pts[0].y - 1.0 / 3.0).abs() < 1e-15);
        assert!((pts[1].x - 2.0 / 3.0).abs() < 1e-15 && (pts[1].y - 2.0 / 3.0).abs() < 1e-15);
        let back = t.invert(pts[1]);
        assert!((back.x - 10.0).abs() < 1e-12);

        let (pts, _) = normalize_input(&[pt(5., 5.)]).unwrap();
        assert_eq!(pts, vec![pt(0.5, 0.5)]);

        assert!(matches!(normalize_input(&[pt(1., 1.), pt(1., 1.)]), Err(RefineError::Duplicate(_))));
        assert!(matches!(normalize_input(&[]), Err(RefineError::EmptyInput)));
        assert!(matches!(normalize_input(&[pt(f64::NAN, 1.)]), Err(RefineError::NonFinite)));
    }

    #[test]
    fn frame_has_twelve_points() {
        let f = BoundingFrame::new();
        assert_eq!(f.vertices().len(), 12);
        assert_eq!(f.edges().len(), 12);
        assert_eq!(BoundingFrame::initial_points().len(), 12);
    }

    #[test]
    fn encroachment_examples() {
        let mut f = BoundingFrame::new();
        let mut mids = Vec::new();
        assert_eq!(f.handle_encroachment(pt(0.5, 0.5), &mut mids), Encroachment::Accept);
        assert!(mids.is_empty());

        let e = f.encroached_edge(pt(0.5, 0.01)).unwrap();
        assert_eq!(e.side, SquareSide::Bottom);
        assert!((e.a.x - 1.0 / 3.0).abs() < 1e-15 && (e.b.x - 2.0 / 3.0).abs() < 1e-15);

        assert_eq!(f.handle_encroachment(pt(0.5, 0.01), &mut mids), Encroachment::RejectAndSplit);
        assert_eq!(mids[0], pt(0.5, 0.0));
        // after splitting until clear, the candidate encroaches nothing
        assert!(f.encroached_edge(pt(0.5, 0.01)).is_none());
        // on a breakpoint the candidate is outside both neighboring disks
        assert!(f.encroached_edge(pt(0.5, 0.001)).is_none() || mids.len() > 1);
    }

    #[test]
    fn outside_points_are_rejected() {
        let f = BoundingFrame::new();
        let e = f.encroached_edge(pt(0.1, -5.0)).unwrap();
        assert_eq!(e.side, SquareSide::Bottom);
        let e = f.encroached_edge(pt(-1.0, -1.0)).unwrap();
        assert!(e.side == SquareSide::Bottom || e.side == SquareSide::Left);
        assert!(f.encroached_edge(pt(2.0, 0.5)).is_some());
    }
}
