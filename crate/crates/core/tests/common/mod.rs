#![allow(dead_code)]

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use offcenter_mesh::geometry::{CirclePosition, Orientation};
use offcenter_mesh::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn sign(v: &BigRational) -> i8 {
    if v.is_zero() {
        0
    } else if v.is_positive() {
        1
    } else {
        -1
    }
}

pub fn orient_exact(p: Point2, a: Point2, b: Point2) -> i8 {
    let (px, py) = (q(p.x), q(p.y));
    let det = (q(a.x) - &px) * (q(b.y) - &py) - (q(a.y) - &py) * (q(b.x) - &px);
    sign(&det)
}

/// Sign of the in-circle determinant; positive when `d` is inside the circle
/// through counter-clockwise `a, b, c`.
pub fn incircle_exact(a: Point2, b: Point2, c: Point2, d: Point2) -> i8 {
    let (dx, dy) = (q(d.x), q(d.y));
    let row = |p: Point2| {
        let x = q(p.x) - &dx;
        let y = q(p.y) - &dy;
        let l = &x * &x + &y * &y;
        (x, y, l)
    };
    let (ax, ay, al) = row(a);
    let (bx, by, bl) = row(b);
    let (cx, cy, cl) = row(c);
    let det = &ax * (&by * &cl - &bl * &cy) - &ay * (&bx * &cl - &bl * &cx) + &al * (&bx * &cy - &by * &cx);
    sign(&det)
}

pub fn orientation_exact(p: Point2, a: Point2, b: Point2) -> Orientation {
    match orient_exact(p, a, b) {
        1 => Orientation::LeftTurn,
        -1 => Orientation::RightTurn,
        _ => Orientation::Collinear,
    }
}

/// `None` when `a, b, c` are collinear.
pub fn in_circle_exact(a: Point2, b: Point2, c: Point2, d: Point2) -> Option<CirclePosition> {
    let o = orient_exact(a, b, c);
    if o == 0 {
        return None;
    }
    Some(match o * incircle_exact(a, b, c, d) {
        1 => CirclePosition::Inside,
        -1 => CirclePosition::Outside,
        _ => CirclePosition::On,
    })
}

fn nudge(x: f64, ulps: i64) -> f64 {
    let mut v = x;
    for _ in 0..ulps.unsigned_abs() {
        v = if ulps > 0 { v.next_up() } else { v.next_down() };
    }
    v
}

fn nudged(p: Point2, rng: &mut ChaCha8Rng) -> Point2 {
    Point2::new(nudge(p.x, rng.gen_range(-3..=3)), nudge(p.y, rng.gen_range(-3..=3)))
}

fn scale(rng: &mut ChaCha8Rng) -> f64 {
    2f64.powi(rng.gen_range(-30..=30))
}

/// Four near-degenerate points: near-collinear triples, near-cocircular
/// quadruples, lattice points and ulp-sized offsets.
pub fn adversarial(rng: &mut ChaCha8Rng) -> [Point2; 4] {
    let s = scale(rng);
    let off = Point2::new(rng.gen_range(-1.0..1.0) * s * 10.0, rng.gen_range(-1.0..1.0) * s * 10.0);
    let shift = |p: Point2| Point2::new(p.x * s + off.x, p.y * s + off.y);
    match rng.gen_range(0..5) {
        0 => {
            // points on a line, rounded and nudged
            let a = shift(Point2::new(rng.gen(), rng.gen()));
            let b = shift(Point2::new(rng.gen(), rng.gen()));
            let mut pts = [a, b, a, b];
            for p in pts.iter_mut().skip(2) {
                let t: f64 = rng.gen_range(-2.0..3.0);
                *p = nudged(Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)), rng);
            }
            pts
        }
        1 => {
            // integer points on a circle of radius 5
            const C: [(f64, f64); 12] =
                [(5., 0.), (4., 3.), (3., 4.), (0., 5.), (-3., 4.), (-4., 3.), (-5., 0.), (-4., -3.), (-3., -4.), (0., -5.), (3., -4.), (4., -3.)];
            let mut pts = [Point2::default(); 4];
            for p in pts.iter_mut() {
                let (x, y) = C[rng.gen_range(0..C.len())];
                let base = shift(Point2::new(x, y));
                *p = if rng.gen_bool(0.5) { nudged(base, rng) } else { base };
            }
            pts
        }
        2 => {
            // rounded points of a random circle
            let c = Point2::new(rng.gen(), rng.gen());
            let r: f64 = rng.gen_range(0.01..1.0);
            let mut pts = [Point2::default(); 4];
            for p in pts.iter_mut() {
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                *p = shift(Point2::new(c.x + r * t.cos(), c.y + r * t.sin()));
            }
            pts
        }
        3 => {
            // a small lattice
            let mut pts = [Point2::default(); 4];
            for p in pts.iter_mut() {
                *p = shift(Point2::new(rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64));
            }
            pts
        }
        _ => {
            // clusters of ulp-separated points
            let a = shift(Point2::new(rng.gen(), rng.gen()));
            [a, nudged(a, rng), nudged(a, rng), nudged(Point2::new(rng.gen(), rng.gen()), rng)]
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Count disagreements of the kernel with the exact oracle on `count`
/// adversarial quadruples.
pub fn oracle_disagreements(count: usize, seed: u64) -> usize {
    use offcenter_mesh::geometry::{in_circle, orientation};
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..count {
        let [a, b, c, d] = adversarial(&mut r);
        if orientation(a, b, c) != orientation_exact(a, b, c) {
            bad += 1;
        }
        if in_circle(a, b, c, d).ok() != in_circle_exact(a, b, c, d) {
            bad += 1;
        }
    }
    bad
}
