//! Uniform bucket grid for exhaustive disk queries.
//!
//! Used by the brute-force oracles: a disk query returns every point whose
//! distance to the center is at most the radius, identical to a full scan.

use crate::geometry::Point2;

#[derive(Clone, Debug)]
pub struct PointGrid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<u32>,
    items: Vec<u32>,
}

impl PointGrid {
    pub fn new(pts: &[Point2]) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in pts {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        if pts.is_empty() {
            (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-300);
        let per_side = ((pts.len() as f64).sqrt().ceil() as usize).clamp(1, 4096);
        let cell = span / per_side as f64 * (1.0 + 1e-9);
        let nx = (((x1 - x0) / cell) as usize + 1).min(per_side + 1);
        let ny = (((y1 - y0) / cell) as usize + 1).min(per_side + 1);
        let mut counts = vec![0u32; nx * ny + 1];
        let cell_of = |p: &Point2| -> usize {
            let ix = (((p.x - x0) / cell) as usize).min(nx - 1);
            let iy = (((p.y - y0) / cell) as usize).min(ny - 1);
            iy * nx + ix
        };
        for p in pts {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; pts.len()];
        for (i, p) in pts.iter().enumerate() {
            let c = cell_of(p);
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        PointGrid { x0, y0, cell, nx, ny, start: counts, items }
    }

    /// Indices of points within `radius` of `center` (closed disk).
    pub fn within(&self, pts: &[Point2], center: Point2, radius: f64, out: &mut Vec<u32>) {
        out.clear();
        let r2 = radius * radius;
        let clamp = |v: f64, n: usize| -> usize {
            if v <= 0.0 {
                0
            } else {
                (v as usize).min(n - 1)
            }
        };
        let ix0 = clamp((center.x - radius - self.x0) / self.cell, self.nx);
        let ix1 = clamp((center.x + radius - self.x0) / self.cell, self.nx);
        let iy0 = clamp((center.y - radius - self.y0) / self.cell, self.ny);
        let iy1 = clamp((center.y + radius - self.y0) / self.cell, self.ny);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let c = iy * self.nx + ix;
                for &i in &self.items[self.start[c] as usize..self.start[c + 1] as usize] {
                    if pts[i as usize].dist2(center) <= r2 {
                        out.push(i);
                    }
                }
            }
        }
    }
}

impl PointGrid {
    /// Distance from `x` to its `k`-th nearest point of `pts`, skipping points
    /// equal to `x`. `None` when fewer than `k` such points exist.
    pub fn kth_nearest(&self, pts: &[Point2], x: Point2, k: usize) -> Option<f64> {
        if k == 0 {
            return Some(0.0);
        }
        let span = self.cell * (self.nx.max(self.ny) as f64);
        let far = span + x.dist(Point2::new(self.x0, self.y0)) * 2.0 + self.cell;
        let mut r = self.cell;
        let mut buf = Vec::new();
        loop {
            self.within(pts, x, r, &mut buf);
            let mut d: Vec<f64> = buf
                .iter()
                .map(|&i| pts[i as usize])
                .filter(|&p| p != x)
                .map(|p| p.dist2(x))
                .collect();
            if d.len() >= k {
                d.select_nth_unstable_by(k - 1, f64::total_cmp);
                return Some(d[k - 1].sqrt());
            }
            if r > far {
                return None;
            }
            r *= 2.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point2> = (0..500)
            .map(|_| Point2::new(rng.gen::<f64>().powi(3), rng.gen()))
            .collect();
        let grid = PointGrid::new(&pts);
        let mut out = Vec::new();
        for _ in 0..200 {
            let c = Point2::new(rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2));
            let r = rng.gen_range(0.0..0.5);
            grid.within(&pts, c, r, &mut out);
            out.sort();
            let expect: Vec<u32> = (0..pts.len() as u32)
                .filter(|&i| pts[i as usize].dist2(c) <= r * r)
                .collect();
            assert_eq!(out, expect);
        }
    }

    #[test]
    fn kth_nearest_matches_lfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point2> = (0..300).map(|_| Point2::new(rng.gen(), rng.gen::<f64>() * 0.1)).collect();
        let grid = PointGrid::new(&pts);
        for &x in pts.iter().take(50) {
            let want = crate::geometry::lfs(x, &pts).unwrap();
            assert_eq!(grid.kth_nearest(&pts, x, 2), Some(want));
        }
        let two = &pts[..2];
        assert_eq!(PointGrid::new(two).kth_nearest(two, two[0], 2), None);
    }
}
