//! Loose pairs and off-centers.
//!
//! A pair `pq` is loose when one of the two leaves of its flower holds no
//! vertex. The off-center of a loose pair is the apex of the empty leaf, unless
//! the crescent beyond the leaf holds a vertex; then it is the circumcenter of
//! `p`, `q` and the moonstruck vertex.

use std::cmp::Ordering;

use crate::error::GeometryError;
use crate::geometry::{
    circumcenter, in_circle, leaf_apex, leaf_disk, leaf_disks, leaf_occupied, lfs, CirclePosition,
    Disk, Point2, Side,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flower {
    pub p: Point2,
    pub q: Point2,
    pub left_leaf: Disk,
    pub right_leaf: Disk,
}

impl Flower {
    pub fn new(p: Point2, q: Point2, beta: f64) -> Result<Self, GeometryError> {
        let (left_leaf, right_leaf) = leaf_disks(p, q, beta)?;
        Ok(Flower { p, q, left_leaf, right_leaf })
    }

    pub fn leaf(&self, side: Side) -> Disk {
        match side {
            Side::Left => self.left_leaf,
            Side::Right => self.right_leaf,
        }
    }

    /// Radius around the midpoint of `pq` covering both leaves.
    pub fn reach(&self) -> f64 {
        let m = self.p.midpoint(self.q);
        m.dist(self.left_leaf.center) + self.left_leaf.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoosePair {
    pub p: Point2,
    pub q: Point2,
    pub empty_side: Side,
    pub length: f64,
}

impl LoosePair {
    pub fn new(p: Point2, q: Point2, empty_side: Side) -> Self {
        LoosePair { p, q, empty_side, length: p.dist(q) }
    }

    /// Ordering used to pick the next pair: shorter first, ties broken by
    /// endpoint coordinates.
    pub fn priority_cmp(&self, o: &LoosePair) -> Ordering {
        self.length
            .total_cmp(&o.length)
            .then_with(|| self.p.lex_cmp(&o.p))
            .then_with(|| self.q.lex_cmp(&o.q))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OffCenterKind {
    Apex,
    CircumViaMoonstruck,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffCenterResult {
    pub steiner: Point2,
    pub kind: OffCenterKind,
    pub moonstruck: Option<Point2>,
}

/// Which leaf of `pq` is empty given the points that could occupy it.
/// Left wins when both are empty.
pub fn empty_side<'a, I>(p: Point2, q: Point2, beta: f64, candidates: I) -> Result<Option<Side>, GeometryError>
where
    I: IntoIterator<Item = &'a Point2>,
{
    if p == q {
        return Err(GeometryError::Degenerate);
    }
    let mut left_empty = true;
    let mut right_empty = true;
    for &x in candidates {
        if x == p || x == q {
            continue;
        }
        if left_empty && leaf_occupied(p, q, beta, Side::Left, x)? {
            left_empty = false;
        }
        if right_empty && leaf_occupied(p, q, beta, Side::Right, x)? {
            right_empty = false;
        }
        if !left_empty && !right_empty {
            return Ok(None);
        }
    }
    Ok(if left_empty {
        Some(Side::Left)
    } else if right_empty {
        Some(Side::Right)
    } else {
        None
    })
}

/// `Some` if `pq` is loose with respect to `candidates`.
pub fn is_loose(
    p: Point2,
    q: Point2,
    beta: f64,
    candidates: &[Point2],
) -> Result<Option<LoosePair>, GeometryError> {
    Ok(empty_side(p, q, beta, candidates)?.map(|side| LoosePair::new(p, q, side)))
}

/// The crescent of `pq` on one side: the disk centered at the leaf apex
/// through `p` and `q`, minus the leaf.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crescent {
    pub p: Point2,
    pub q: Point2,
    pub beta: f64,
    pub side: Side,
    pub leaf: Disk,
    pub outer: Disk,
}

impl Crescent {
    pub fn contains(&self, x: Point2) -> bool {
        if x == self.p || x == self.q {
            return false;
        }
        self.outer.contains(x) == CirclePosition::Inside
            && !leaf_occupied(self.p, self.q, self.beta, self.side, x).unwrap_or(true)
    }
}

pub fn crescent(p: Point2, q: Point2, beta: f64, side: Side) -> Result<Crescent, GeometryError> {
    let apex = leaf_apex(p, q, beta, side)?;
    let leaf = leaf_disk(p, q, beta, side)?;
    Ok(Crescent {
        p,
        q,
        beta,
        side,
        leaf,
        outer: Disk::new(apex, apex.dist(p)),
    })
}

/// The crescent vertex whose circumdisk with `p`, `q` holds no other
/// candidate. Cocircular ties go to the lexicographically smallest point.
pub fn moonstruck(
    p: Point2,
    q: Point2,
    beta: f64,
    side: Side,
    candidates: &[Point2],
) -> Result<Option<Point2>, GeometryError> {
    let cr = crescent(p, q, beta, side)?;
    let mut best: Option<Point2> = None;
    for &x in candidates {
        if !cr.contains(x) {
            continue;
        }
        best = Some(match best {
            None => x,
            Some(b) => match in_circle(p, q, b, x)? {
                CirclePosition::Inside => x,
                CirclePosition::On if x.lex_cmp(&b) == Ordering::Less => x,
                _ => b,
            },
        });
    }
    Ok(best)
}

/// Off-center for the pair given the vertex (if any) that the refiner found
/// in the crescent.
pub fn off_center_from(
    p: Point2,
    q: Point2,
    beta: f64,
    side: Side,
    moonstruck: Option<Point2>,
) -> Result<OffCenterResult, GeometryError> {
    match moonstruck {
        None => Ok(OffCenterResult {
            steiner: leaf_apex(p, q, beta, side)?,
            kind: OffCenterKind::Apex,
            moonstruck: None,
        }),
        Some(r) => Ok(OffCenterResult {
            steiner: circumcenter(p, q, r)?,
            kind: OffCenterKind::CircumViaMoonstruck,
            moonstruck: Some(r),
        }),
    }
}

pub fn off_center(
    p: Point2,
    q: Point2,
    beta: f64,
    side: Side,
    candidates: &[Point2],
) -> Result<OffCenterResult, GeometryError> {
    let r = moonstruck(p, q, beta, side, candidates)?;
    off_center_from(p, q, beta, side, r)
}

/// Largest empty disk touching `x` divided by `lfs(x)`. Hull vertices have an
/// unbounded gap and are rejected.
pub fn gap(x: Point2, pts: &[Point2]) -> Result<f64, GeometryError> {
    let t = crate::delaunay::Triangulation::build(pts).map_err(|_| GeometryError::Degenerate)?;
    let v = pts.iter().position(|&p| p == x).ok_or(GeometryError::NotInSet)?;
    gap_in(&t, v as crate::delaunay::VertexId)
}

/// [`gap`] for a vertex of an existing triangulation.
pub fn gap_in(
    t: &crate::delaunay::Triangulation,
    v: crate::delaunay::VertexId,
) -> Result<f64, GeometryError> {
    if t.is_hull_vertex(v) {
        return Err(GeometryError::HullVertex);
    }
    let x = t.point(v);
    let mut radius: f64 = 0.0;
    for tri in t.vertex_triangles(v) {
        radius = radius.max(t.triangle_geometry(tri).circumcircle()?.radius);
    }
    Ok(radius / lfs(x, t.points())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn pt(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    const P: Point2 = Point2::new(0.0, 0.0);
    const Q: Point2 = Point2::new(1.0, 0.0);

    #[test]
    fn is_loose_examples() {
        let lp = is_loose(P, Q, SQRT_2, &[]).unwrap().unwrap();
        assert_eq!(lp.empty_side, Side::Left);
        assert_eq!(lp.length, 1.0);
        assert!(is_loose(P, Q, SQRT_2, &[pt(0.5, 1.0), pt(0.5, -1.0)]).unwrap().is_none());
        let lp = is_loose(P, Q, SQRT_2, &[pt(0.5, -1.0)]).unwrap().unwrap();
        assert_eq!(lp.empty_side, Side::Left);
        let lp = is_loose(P, Q, SQRT_2, &[pt(0.5, 1.0)]).unwrap().unwrap();
        assert_eq!(lp.empty_side, Side::Right);
        // endpoints in the candidate list are ignored
        assert!(is_loose(P, Q, SQRT_2, &[P, Q]).unwrap().is_some());
        assert_eq!(is_loose(P, P, SQRT_2, &[]), Err(GeometryError::Degenerate));
    }

    #[test]
    fn crescent_examples() {
        let c = crescent(P, Q, SQRT_2, Side::Left).unwrap();
        assert!((c.outer.center.y - 2.73709).abs() < 1e-5);
        let r = (0.25f64 + c.outer.center.y * c.outer.center.y).sqrt();
        assert!((c.outer.radius - r).abs() < 1e-14);
        assert!((c.outer.radius - 2.7823834).abs() < 1e-6);
        assert!(c.contains(pt(0.5, 2.8)));
        assert!(!c.contains(pt(0.5, 2.0)));
        assert!(!c.contains(pt(0.5, -0.5)));
    }

    #[test]
    fn moonstruck_examples() {
        assert_eq!(moonstruck(P, Q, SQRT_2, Side::Left, &[]).unwrap(), None);
        assert_eq!(
            moonstruck(P, Q, SQRT_2, Side::Left, &[pt(0.5, 2.8)]).unwrap(),
            Some(pt(0.5, 2.8))
        );
        assert_eq!(
            moonstruck(P, Q, SQRT_2, Side::Left, &[pt(0.5, 2.9), pt(0.5, 2.8)]).unwrap(),
            Some(pt(0.5, 2.8))
        );
        // cocircular crescent points: lexicographic tie-break
        let c = crate::geometry::circumcenter(P, Q, pt(0.5, 2.8)).unwrap();
        let r = c.dist(P);
        let mirror = pt(1.0 - 0.3, c.y + (r * r - 0.2 * 0.2).sqrt());
        let other = pt(0.3, mirror.y);
        let got = moonstruck(P, Q, SQRT_2, Side::Left, &[mirror, other]).unwrap().unwrap();
        assert!(got == other || got == mirror);
    }

    #[test]
    fn off_center_examples() {
        let oc = off_center(P, Q, SQRT_2, Side::Left, &[]).unwrap();
        assert_eq!(oc.kind, OffCenterKind::Apex);
        assert!((oc.steiner.y - 2.73709).abs() < 1e-5);

        let oc = off_center(P, Q, SQRT_2, Side::Left, &[pt(0.5, 2.8)]).unwrap();
        assert_eq!(oc.kind, OffCenterKind::CircumViaMoonstruck);
        assert_eq!(oc.moonstruck, Some(pt(0.5, 2.8)));
        assert!((oc.steiner.x - 0.5).abs() < 1e-15);
        assert!((oc.steiner.y - 7.59 / 5.6).abs() < 1e-14);
    }

    #[test]
    fn gap_examples() {
        let pts = [pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.), pt(0.5, 0.5)];
        // incident circumdisks all have radius 1/2; lfs(center) = sqrt(2)/2
        let g = gap(pt(0.5, 0.5), &pts).unwrap();
        assert!((g - 0.5 / (SQRT_2 / 2.0)).abs() < 1e-12, "{g}");
        assert_eq!(gap(pt(0., 0.), &pts), Err(GeometryError::HullVertex));
        assert_eq!(gap(pt(3., 0.), &pts), Err(GeometryError::NotInSet));

        // x with two neighbors at distance d and an otherwise empty disk of radius ~R
        let d = 1e-3;
        let mut pts = vec![pt(0., 0.), pt(d, 0.), pt(0., d)];
        for k in 0..12 {
            let a = k as f64 * std::f64::consts::TAU / 12.0;
            pts.push(pt(a.cos(), a.sin()));
        }
        let g = gap(pt(0., 0.), &pts).unwrap();
        assert!(g > 0.4 / d, "{g}");
    }
}
