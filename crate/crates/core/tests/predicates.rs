mod common;

use common::*;
use offcenter_mesh::geometry::{in_circle, orientation, CirclePosition, Orientation};
use offcenter_mesh::Point2;
use proptest::prelude::*;

#[test]
fn near_collinear_example_agrees_with_oracle() {
    let (a, b, c) = (Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.5, -1e-18));
    assert_eq!(orientation_exact(a, b, c), Orientation::RightTurn);
    assert_eq!(orientation(a, b, c), Orientation::RightTurn);
}

#[test]
fn exact_cocircle_is_on() {
    let pts = [(5.0, 0.0), (0.0, 5.0), (-3.0, 4.0), (4.0, -3.0)].map(|(x, y)| Point2::new(x, y));
    assert_eq!(in_circle_exact(pts[0], pts[1], pts[2], pts[3]), Some(CirclePosition::On));
    assert_eq!(in_circle(pts[0], pts[1], pts[2], pts[3]), Ok(CirclePosition::On));
}

#[test]
fn adversarial_sample_agrees() {
    assert_eq!(oracle_disagreements(20_000, 7), 0);
}

#[test]
fn adversarial_cases_are_near_degenerate() {
    // the generator must actually hit zeros and sign flips
    let mut r = rng(3);
    let (mut collinear, mut on) = (0, 0);
    for _ in 0..5000 {
        let [a, b, c, d] = adversarial(&mut r);
        collinear += (orient_exact(a, b, c) == 0) as usize;
        on += (in_circle_exact(a, b, c, d) == Some(CirclePosition::On)) as usize;
    }
    assert!(collinear > 100, "{collinear}");
    assert!(on > 50, "{on}");
}

proptest! {
    #[test]
    fn random_points_agree(c in prop::array::uniform8(-1e6f64..1e6)) {
        let p = |i: usize| Point2::new(c[2 * i], c[2 * i + 1]);
        prop_assert_eq!(orientation(p(0), p(1), p(2)), orientation_exact(p(0), p(1), p(2)));
        prop_assert_eq!(in_circle(p(0), p(1), p(2), p(3)).ok(), in_circle_exact(p(0), p(1), p(2), p(3)));
    }

    #[test]
    fn midpoint_perturbation_agrees(ax in -10.0f64..10.0, ay in -10.0f64..10.0, bx in -10.0f64..10.0, by in -10.0f64..10.0, k in -4i32..=4) {
        let (a, b) = (Point2::new(ax, ay), Point2::new(bx, by));
        let m = a.midpoint(b);
        let mut y = m.y;
        for _ in 0..k.unsigned_abs() {
            y = if k > 0 { y.next_up() } else { y.next_down() };
        }
        let c = Point2::new(m.x, y);
        prop_assert_eq!(orientation(a, b, c), orientation_exact(a, b, c));
    }
}
