//! Planar primitives: exact orientation and in-circle decisions, circumcircles,
//! radius-edge ratios and the leaf (flower petal) constructions used by the
//! loose-pair machinery.

use std::cmp::Ordering;
use std::fmt;

use crate::error::GeometryError;

/// Relative band (on the normalized in-circle value) inside which a point is
/// treated as lying on a leaf boundary.
pub const LEAF_BAND: f64 = 1e-12;

/// A point in the plane with finite coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Point2 { x, y })
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    #[inline]
    pub fn dist2(self, o: Point2) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(self, o: Point2) -> f64 {
        self.dist2(o).sqrt()
    }

    #[inline]
    pub fn midpoint(self, o: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }

    /// Bit pattern key identifying the point exactly. `-0.0` and `0.0` map to
    /// the same key.
    #[inline]
    pub fn key(self) -> (u64, u64) {
        (
            (self.x + 0.0).to_bits(),
            (self.y + 0.0).to_bits(),
        )
    }

    /// Lexicographic (x, then y) total order.
    pub fn lex_cmp(&self, o: &Point2) -> Ordering {
        self.x
            .total_cmp(&o.x)
            .then_with(|| self.y.total_cmp(&o.y))
    }

    #[inline]
    fn coord(self) -> robust::Coord<f64> {
        robust::Coord { x: self.x, y: self.y }
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    LeftTurn,
    RightTurn,
    Collinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CirclePosition {
    Inside,
    On,
    Outside,
}

/// Side of a directed segment `pq`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    #[inline]
    fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// Raw adaptive-precision orientation determinant. Its sign is exact.
#[inline]
pub fn orient2d(p: Point2, q: Point2, r: Point2) -> f64 {
    robust::orient2d(p.coord(), q.coord(), r.coord())
}

/// Raw adaptive-precision in-circle determinant; positive when `d` is inside
/// the circle through counter-clockwise `a, b, c`. Its sign is exact.
#[inline]
pub fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    robust::incircle(a.coord(), b.coord(), c.coord(), d.coord())
}

pub fn orientation(p: Point2, q: Point2, r: Point2) -> Orientation {
    let det = orient2d(p, q, r);
    if det > 0.0 {
        Orientation::LeftTurn
    } else if det < 0.0 {
        Orientation::RightTurn
    } else {
        Orientation::Collinear
    }
}

/// Position of `d` relative to the circumcircle of `a, b, c` (either orientation).
pub fn in_circle(
    a: Point2,
    b: Point2,
    c: Point2,
    d: Point2,
) -> Result<CirclePosition, GeometryError> {
    let o = orient2d(a, b, c);
    if o == 0.0 {
        return Err(GeometryError::Degenerate);
    }
    let det = if o > 0.0 {
        incircle(a, b, c, d)
    } else {
        incircle(a, c, b, d)
    };
    Ok(if det > 0.0 {
        CirclePosition::Inside
    } else if det < 0.0 {
        CirclePosition::Outside
    } else {
        CirclePosition::On
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub center: Point2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point2, radius: f64) -> Self {
        debug_assert!(radius >= 0.0);
        Disk { center, radius }
    }

    /// Floating point membership; only used for constructed disks whose
    /// defining points are not available.
    pub fn contains(&self, p: Point2) -> CirclePosition {
        let d2 = self.center.dist2(p);
        let r2 = self.radius * self.radius;
        match d2.partial_cmp(&r2) {
            Some(Ordering::Less) => CirclePosition::Inside,
            Some(Ordering::Equal) => CirclePosition::On,
            _ => CirclePosition::Outside,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub a: Point2,
    pub b: Point2,
    pub c: Point2,
}

impl Triangle {
    pub const fn new(a: Point2, b: Point2, c: Point2) -> Self {
        Triangle { a, b, c }
    }

    pub fn is_degenerate(&self) -> bool {
        orient2d(self.a, self.b, self.c) == 0.0
    }

    pub fn circumcircle(&self) -> Result<Disk, GeometryError> {
        let center = circumcenter(self.a, self.b, self.c)?;
        Ok(Disk::new(center, center.dist(self.a)))
    }

    pub fn shortest_edge(&self) -> f64 {
        self.a
            .dist(self.b)
            .min(self.b.dist(self.c))
            .min(self.c.dist(self.a))
    }

    pub fn radius_edge_ratio(&self) -> Result<f64, GeometryError> {
        Ok(self.circumcircle()?.radius / self.shortest_edge())
    }

    /// Smallest interior angle in radians.
    pub fn min_angle(&self) -> Result<f64, GeometryError> {
        if self.is_degenerate() {
            return Err(GeometryError::Degenerate);
        }
        let ab = self.a.dist(self.b);
        let bc = self.b.dist(self.c);
        let ca = self.c.dist(self.a);
        // the smallest angle faces the shortest side
        let (opp, s1, s2) = if ab <= bc && ab <= ca {
            (ab, bc, ca)
        } else if bc <= ca {
            (bc, ca, ab)
        } else {
            (ca, ab, bc)
        };
        let cos = ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0);
        Ok(cos.acos())
    }
}

/// Circumcenter of three non-collinear points.
pub fn circumcenter(a: Point2, b: Point2, c: Point2) -> Result<Point2, GeometryError> {
    let o = orient2d(a, b, c);
    if o == 0.0 {
        return Err(GeometryError::Degenerate);
    }
    let bx = b.x - a.x;
    let by = b.y - a.y;
    let cx = c.x - a.x;
    let cy = c.y - a.y;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    // `o` is twice the signed area, computed adaptively.
    let inv = 0.5 / o;
    let ux = (cy * b2 - by * c2) * inv;
    let uy = (bx * c2 - cx * b2) * inv;
    Ok(Point2::new(a.x + ux, a.y + uy))
}

/// Smallest angle (radians) that a triangle with radius-edge ratio `beta` may have.
pub fn alpha_for_beta(beta: f64) -> f64 {
    (1.0 / (2.0 * beta)).asin()
}

/// Radius-edge bound corresponding to a minimum angle in degrees.
pub fn beta_for_min_angle_deg(deg: f64) -> f64 {
    1.0 / (2.0 * deg.to_radians().sin())
}

fn check_leaf_args(p: Point2, q: Point2, beta: f64) -> Result<(), GeometryError> {
    if p == q {
        return Err(GeometryError::Degenerate);
    }
    if !(beta >= 0.5) {
        return Err(GeometryError::BetaTooSmall(beta));
    }
    Ok(())
}

/// Unit normal pointing to the left of `p -> q`, and `|pq|`.
#[inline]
fn left_normal(p: Point2, q: Point2) -> (f64, f64, f64) {
    let dx = q.x - p.x;
    let dy = q.y - p.y;
    let len = (dx * dx + dy * dy).sqrt();
    (-dy / len, dx / len, len)
}

fn leaf_center(p: Point2, q: Point2, beta: f64, side: Side) -> (Point2, f64) {
    let (nx, ny, len) = left_normal(p, q);
    let off = len * (beta * beta - 0.25).max(0.0).sqrt() * side.sign();
    let m = p.midpoint(q);
    (Point2::new(m.x + nx * off, m.y + ny * off), beta * len)
}

/// The two leaves of the flower of `pq`: the disks of radius `beta * |pq|`
/// through `p` and `q`, centered left and right of `p -> q`.
pub fn leaf_disks(p: Point2, q: Point2, beta: f64) -> Result<(Disk, Disk), GeometryError> {
    check_leaf_args(p, q, beta)?;
    let (cl, r) = leaf_center(p, q, beta, Side::Left);
    let (cr, _) = leaf_center(p, q, beta, Side::Right);
    Ok((Disk::new(cl, r), Disk::new(cr, r)))
}

pub fn leaf_disk(p: Point2, q: Point2, beta: f64, side: Side) -> Result<Disk, GeometryError> {
    check_leaf_args(p, q, beta)?;
    let (c, r) = leaf_center(p, q, beta, side);
    Ok(Disk::new(c, r))
}

/// Apex of the leaf relative to `p`.
fn leaf_apex_local(p: Point2, q: Point2, beta: f64, side: Side) -> Point2 {
    let (nx, ny, len) = left_normal(p, q);
    let off = len * ((beta * beta - 0.25).max(0.0).sqrt() + beta) * side.sign();
    Point2::new(0.5 * (q.x - p.x) + nx * off, 0.5 * (q.y - p.y) + ny * off)
}

/// The point of the leaf boundary furthest from segment `pq`. The triangle
/// `p, q, apex` has the leaf as its circumcircle.
///
/// For short edges the rounded apex can land measurably outside its own
/// leaf; it is then pulled toward the midpoint of `pq` until it is not.
pub fn leaf_apex(p: Point2, q: Point2, beta: f64, side: Side) -> Result<Point2, GeometryError> {
    check_leaf_args(p, q, beta)?;
    let a = leaf_apex_local(p, q, beta, side);
    let apex = Point2::new(p.x + a.x, p.y + a.y);
    let m = p.midpoint(q);
    let mut c = apex;
    let mut t = f64::EPSILON;
    while leaf_position(p, q, beta, side, c)? == CirclePosition::Outside {
        if t > 1e-6 {
            return Err(GeometryError::Degenerate);
        }
        c = Point2::new(apex.x + (m.x - apex.x) * t, apex.y + (m.y - apex.y) * t);
        t *= 2.0;
    }
    Ok(c)
}

/// Position of `x` relative to the leaf of `pq` on `side`.
///
/// The decision is an exact in-circle test against `p`, `q` and the
/// constructed apex, all taken relative to `p` so that short edges keep full
/// relative precision. The normalized determinant `1 - |x-o|^2 / R^2` is
/// compared against [`LEAF_BAND`]; values inside the band report `On`.
/// `p` and `q` themselves always report `On`.
pub fn leaf_position(
    p: Point2,
    q: Point2,
    beta: f64,
    side: Side,
    x: Point2,
) -> Result<CirclePosition, GeometryError> {
    check_leaf_args(p, q, beta)?;
    if x == p || x == q {
        return Ok(CirclePosition::On);
    }
    let apex = leaf_apex_local(p, q, beta, side);
    let rel = |u: Point2| Point2::new(u.x - p.x, u.y - p.y);
    let (a, b) = match side {
        Side::Left => (Point2::new(0.0, 0.0), rel(q)),
        Side::Right => (rel(q), Point2::new(0.0, 0.0)),
    };
    let o = orient2d(a, b, apex);
    if o <= 0.0 {
        // apex collapsed onto the line; only possible for overflow-sized input
        return Err(GeometryError::Degenerate);
    }
    let det = incircle(a, b, apex, rel(x));
    let r = beta * p.dist(q);
    let normalized = det / (o * r * r);
    Ok(if normalized > LEAF_BAND {
        CirclePosition::Inside
    } else if normalized < -LEAF_BAND {
        CirclePosition::Outside
    } else {
        CirclePosition::On
    })
}

/// True if `x` occupies the leaf: strictly inside, or within the boundary band.
#[inline]
pub fn leaf_occupied(
    p: Point2,
    q: Point2,
    beta: f64,
    side: Side,
    x: Point2,
) -> Result<bool, GeometryError> {
    Ok(leaf_position(p, q, beta, side, x)? != CirclePosition::Outside)
}

/// Disk having segment `pq` as its diameter.
pub fn diametral_disk(p: Point2, q: Point2) -> Result<Disk, GeometryError> {
    if p == q {
        return Err(GeometryError::Degenerate);
    }
    Ok(Disk::new(p.midpoint(q), 0.5 * p.dist(q)))
}

/// `x` encroaches `pq` when it lies strictly inside the diametral disk, i.e.
/// the angle `p x q` is obtuse.
pub fn encroaches(x: Point2, p: Point2, q: Point2) -> Result<bool, GeometryError> {
    if p == q {
        return Err(GeometryError::Degenerate);
    }
    let dot = (p.x - x.x) * (q.x - x.x) + (p.y - x.y) * (q.y - x.y);
    Ok(dot < 0.0)
}

/// Local feature size of `x` with respect to a point set: the distance to the
/// second nearest point of `pts` other than `x`.
pub fn lfs<'a, I>(x: Point2, pts: I) -> Result<f64, GeometryError>
where
    I: IntoIterator<Item = &'a Point2>,
{
    let mut best = [f64::INFINITY; 2];
    let mut seen = 0usize;
    for &p in pts {
        if p == x {
            continue;
        }
        seen += 1;
        let d = x.dist2(p);
        if d < best[0] {
            best[1] = best[0];
            best[0] = d;
        } else if d < best[1] {
            best[1] = d;
        }
    }
    if seen < 2 {
        return Err(GeometryError::TooFewPoints);
    }
    Ok(best[1].sqrt())
}

/// Distance from `x` to the nearest point of `pts` other than `x`.
pub fn nearest_distance<'a, I>(x: Point2, pts: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a Point2>,
{
    pts.into_iter()
        .filter(|&&p| p != x)
        .map(|&p| x.dist2(p))
        .min_by(f64::total_cmp)
        .map(f64::sqrt)
}
