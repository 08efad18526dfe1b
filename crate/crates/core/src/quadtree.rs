//! Balanced quadtree over the unit square.
//!
//! A leaf holding a point is split while the 3x3 block of same-size cells
//! around it holds at least two points; the tree is then 2:1 balanced across
//! edges and corners. Cells are half-open: a cell owns its lower x and y
//! edges, and points on `x = 1` or `y = 1` belong to the last cell.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::QuadtreeError;
use crate::geometry::Point2;
use crate::index::PointGrid;

pub type NodeId = u32;
pub const NO_NODE: NodeId = u32::MAX;

/// Deepest level a tree may reach.
pub const MAX_DEPTH: u32 = 60;

/// Neighbor directions, counter-clockwise from east.
pub const DIRECTIONS: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Bounds tying a point's feature size to the size of its cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadtreeParams {
    pub c_low: f64,
    pub c_up: f64,
}

impl Default for QuadtreeParams {
    fn default() -> Self {
        QuadtreeParams { c_low: 0.5, c_up: 6.0 * SQRT_2 }
    }
}

impl QuadtreeParams {
    pub fn validate(&self) -> Result<(), QuadtreeError> {
        if !(self.c_low > 0.0 && self.c_up.is_finite() && self.c_up >= 2.0 * self.c_low) {
            return Err(QuadtreeError::Params(format!(
                "need 0 < c_low and c_up >= 2 c_low, got c_low={} c_up={}",
                self.c_low, self.c_up
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct QuadtreeNode {
    pub depth: u32,
    pub ix: u64,
    pub iy: u64,
    pub parent: NodeId,
    /// Children ordered (0,0), (1,0), (0,1), (1,1).
    pub children: Option<[NodeId; 4]>,
    /// Per direction of [`DIRECTIONS`]: the same-level neighbor, or the
    /// deepest coarser node covering that cell, or `NO_NODE` at the border.
    pub neighbors: [NodeId; 8],
    pub points: Vec<u32>,
}

impl QuadtreeNode {
    pub fn size(&self) -> f64 {
        cell_size(self.depth)
    }

    pub fn corner(&self) -> Point2 {
        let s = self.size();
        Point2::new(self.ix as f64 * s, self.iy as f64 * s)
    }

    pub fn center(&self) -> Point2 {
        let s = self.size();
        Point2::new((self.ix as f64 + 0.5) * s, (self.iy as f64 + 0.5) * s)
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn contains(&self, p: Point2) -> bool {
        cell_index(p, self.depth) == (self.ix, self.iy)
    }

    /// Distance between this cell and `o` as closed squares.
    pub fn box_distance(&self, o: &QuadtreeNode) -> f64 {
        let (a, sa) = (self.corner(), self.size());
        let (b, sb) = (o.corner(), o.size());
        let dx = (b.x - (a.x + sa)).max(a.x - (b.x + sb)).max(0.0);
        let dy = (b.y - (a.y + sa)).max(a.y - (b.y + sb)).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }
}

pub fn cell_size(depth: u32) -> f64 {
    (-(depth as i32) as f64).exp2()
}

/// Index of the depth-`depth` cell owning `p`.
pub fn cell_index(p: Point2, depth: u32) -> (u64, u64) {
    let n = 1u64 << depth;
    let scale = n as f64;
    let f = |v: f64| -> u64 {
        let i = (v * scale).floor();
        if i <= 0.0 {
            0
        } else {
            (i as u64).min(n - 1)
        }
    };
    (f(p.x), f(p.y))
}

#[derive(Clone, Debug)]
pub struct Quadtree {
    nodes: Vec<QuadtreeNode>,
    levels: Vec<FxHashMap<(u64, u64), NodeId>>,
    params: QuadtreeParams,
}

/// Summary of a feature-size sandwich audit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SandwichReport {
    pub checked: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// Extremes of feature size divided by cell size.
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl Quadtree {
    /// Build over `pts`, storing each point index in the leaf that owns it.
    pub fn build(pts: &[Point2], params: QuadtreeParams) -> Result<Self, QuadtreeError> {
        params.validate()?;
        let mut seen = FxHashSet::default();
        for &p in pts {
            if !(p.x.is_finite() && p.y.is_finite() && (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)) {
                return Err(QuadtreeError::OutsideSquare(p));
            }
            if !seen.insert(p.key()) {
                return Err(QuadtreeError::Duplicate(p));
            }
        }
        let mut t = Quadtree { nodes: Vec::new(), levels: Vec::new(), params };
        let root = t.push_node(0, 0, 0, NO_NODE);
        t.nodes[root as usize].points = (0..pts.len() as u32).collect();

        let grid = PointGrid::new(pts);
        let mut near = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let (depth, ix, iy, has_points) = {
                let n = &t.nodes[id as usize];
                (n.depth, n.ix, n.iy, !n.points.is_empty())
            };
            if !has_points || !crowded(pts, &grid, depth, ix, iy, &mut near) {
                continue;
            }
            if depth >= MAX_DEPTH {
                return Err(QuadtreeError::TooDeep(MAX_DEPTH));
            }
            stack.extend(t.split(id, pts));
        }
        t.balance(pts);
        t.link_neighbors();
        Ok(t)
    }

    fn push_node(&mut self, depth: u32, ix: u64, iy: u64, parent: NodeId) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(QuadtreeNode {
            depth,
            ix,
            iy,
            parent,
            children: None,
            neighbors: [NO_NODE; 8],
            points: Vec::new(),
        });
        if self.levels.len() <= depth as usize {
            self.levels.resize_with(depth as usize + 1, FxHashMap::default);
        }
        self.levels[depth as usize].insert((ix, iy), id);
        id
    }

    fn split(&mut self, id: NodeId, pts: &[Point2]) -> [NodeId; 4] {
        let (depth, ix, iy) = {
            let n = &self.nodes[id as usize];
            (n.depth, n.ix, n.iy)
        };
        let mut kids = [NO_NODE; 4];
        for (k, kid) in kids.iter_mut().enumerate() {
            let (dx, dy) = ((k & 1) as u64, (k >> 1) as u64);
            *kid = self.push_node(depth + 1, 2 * ix + dx, 2 * iy + dy, id);
        }
        let moved = std::mem::take(&mut self.nodes[id as usize].points);
        for i in moved {
            let (cx, cy) = cell_index(pts[i as usize], depth + 1);
            let k = ((cx - 2 * ix) + 2 * (cy - 2 * iy)) as usize;
            self.nodes[kids[k] as usize].points.push(i);
        }
        self.nodes[id as usize].children = Some(kids);
        kids
    }

    /// Split leaves until no two leaves touching at an edge or corner differ
    /// in depth by more than one.
    fn balance(&mut self, pts: &[Point2]) {
        let mut by_level: Vec<Vec<NodeId>> = vec![Vec::new(); self.levels.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            if n.is_leaf() {
                by_level[n.depth as usize].push(id as NodeId);
            }
        }
        let mut k = by_level.len();
        while k > 2 {
            k -= 1;
            let leaves = std::mem::take(&mut by_level[k]);
            for id in leaves {
                let (ix, iy) = (self.nodes[id as usize].ix, self.nodes[id as usize].iy);
                for (dx, dy) in DIRECTIONS {
                    let Some((jx, jy)) = offset(ix, iy, dx, dy, k as u32) else { continue };
                    loop {
                        let cover = self.covering(k as u32, jx, jy);
                        let d = self.nodes[cover as usize].depth as usize;
                        if d + 1 >= k {
                            break;
                        }
                        for c in self.split(cover, pts) {
                            by_level[d + 1].push(c);
                        }
                    }
                }
            }
        }
    }

    fn link_neighbors(&mut self) {
        for id in 0..self.nodes.len() {
            let (depth, ix, iy) = {
                let n = &self.nodes[id];
                (n.depth, n.ix, n.iy)
            };
            let mut links = [NO_NODE; 8];
            for (slot, (dx, dy)) in links.iter_mut().zip(DIRECTIONS) {
                if let Some((jx, jy)) = offset(ix, iy, dx, dy, depth) {
                    *slot = self.covering(depth, jx, jy);
                }
            }
            self.nodes[id].neighbors = links;
        }
    }

    /// Deepest existing node at depth at most `depth` covering cell `(ix, iy)`
    /// of level `depth`.
    fn covering(&self, depth: u32, ix: u64, iy: u64) -> NodeId {
        let mut d = depth.min(self.levels.len() as u32 - 1);
        let (mut x, mut y) = (ix >> (depth - d), iy >> (depth - d));
        loop {
            if let Some(&id) = self.levels[d as usize].get(&(x, y)) {
                return id;
            }
            d -= 1;
            x >>= 1;
            y >>= 1;
        }
    }

    pub fn params(&self) -> QuadtreeParams {
        self.params
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &QuadtreeNode {
        &self.nodes[id as usize]
    }

    pub fn nodes(&self) -> &[QuadtreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Depth of the deepest node.
    pub fn depth(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as NodeId).filter(|&i| self.nodes[i as usize].is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Nodes of one level.
    pub fn level(&self, depth: u32) -> impl Iterator<Item = NodeId> + '_ {
        self.levels.get(depth as usize).into_iter().flat_map(|m| m.values().copied())
    }

    pub fn node_at(&self, depth: u32, ix: u64, iy: u64) -> Option<NodeId> {
        self.levels.get(depth as usize)?.get(&(ix, iy)).copied()
    }

    /// Deepest node containing `p` whose depth is at most `max_depth`.
    pub fn locate(&self, p: Point2, max_depth: u32) -> NodeId {
        let d = max_depth.min(self.depth());
        let (ix, iy) = cell_index(p, d);
        self.covering(d, ix, iy)
    }

    /// The distinct nodes linked as neighbors of `id`.
    pub fn touching(&self, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.nodes[id as usize].neighbors.iter().copied().filter(|&n| n != NO_NODE).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Nodes at depths `depth(id) - levels_up ..= depth(id)` whose cells come
    /// strictly closer than `radius_in_sizes * size(id)` to the cell of `id`,
    /// excluding `id` itself.
    pub fn neighbors_within(&self, id: NodeId, radius_in_sizes: f64, levels_up: u32) -> Vec<NodeId> {
        let mut out = Vec::new();
        self.for_each_within(id, radius_in_sizes, levels_up, |n| {
            if n != id {
                out.push(n)
            }
        });
        out
    }

    /// Visit each node of [`Quadtree::neighbors_within`], including `id`.
    pub fn for_each_within(&self, id: NodeId, radius_in_sizes: f64, levels_up: u32, mut f: impl FnMut(NodeId)) {
        let node = &self.nodes[id as usize];
        let s = node.size();
        let r = radius_in_sizes * s;
        let c = node.corner();
        let top = node.depth.saturating_sub(levels_up);
        for d in (top..=node.depth).rev() {
            let sd = cell_size(d);
            let n = 1u64 << d;
            let lo = |v: f64| (((v - r) / sd).floor().max(0.0) as u64).min(n - 1);
            let hi = |v: f64| (((v + s + r) / sd).floor().max(0.0) as u64).min(n - 1);
            let Some(level) = self.levels.get(d as usize) else { continue };
            for jy in lo(c.y)..=hi(c.y) {
                for jx in lo(c.x)..=hi(c.x) {
                    if let Some(&m) = level.get(&(jx, jy)) {
                        if node.box_distance(&self.nodes[m as usize]) < r {
                            f(m);
                        }
                    }
                }
            }
        }
    }

    /// Store point `id` at `r`: the deepest node containing `r`, no deeper
    /// than `min_level`, whose size `s` satisfies `c_low s <= d <= c_up s`.
    pub fn insert_point(&mut self, id: u32, r: Point2, min_level: u32, d: f64) -> Result<NodeId, QuadtreeError> {
        let node = self.qualifying_cell(r, min_level, d)?;
        self.nodes[node as usize].points.push(id);
        Ok(node)
    }

    pub(crate) fn points_of(&mut self, id: NodeId) -> &mut Vec<u32> {
        &mut self.nodes[id as usize].points
    }

    /// The cell [`Quadtree::insert_point`] would choose, without storing.
    pub fn qualifying_cell(&self, r: Point2, min_level: u32, d: f64) -> Result<NodeId, QuadtreeError> {
        let start = self.locate(r, min_level);
        let mut cur = start;
        loop {
            let s = self.nodes[cur as usize].size();
            if d < self.params.c_low * s {
                return Err(QuadtreeError::NoQualifyingCell { d, start });
            }
            if d <= self.params.c_up * s {
                return Ok(cur);
            }
            let up = self.nodes[cur as usize].parent;
            if up == NO_NODE {
                return Err(QuadtreeError::NoQualifyingCell { d, start });
            }
            cur = up;
        }
    }

    /// True when leaves sharing an edge or corner differ in depth by at most one.
    pub fn is_balanced(&self) -> bool {
        self.nodes.iter().filter(|n| n.is_leaf()).all(|n| {
            DIRECTIONS.iter().all(|&(dx, dy)| {
                let Some((jx, jy)) = offset(n.ix, n.iy, dx, dy, n.depth) else { return true };
                // the deepest leaf touching this side
                let cover = self.covering(n.depth, jx, jy);
                let c = &self.nodes[cover as usize];
                if c.depth + 1 < n.depth {
                    return false;
                }
                if !c.is_leaf() {
                    return self.deepest_touching(cover, n) <= n.depth + 1;
                }
                true
            })
        })
    }

    fn deepest_touching(&self, id: NodeId, leaf: &QuadtreeNode) -> u32 {
        let n = &self.nodes[id as usize];
        if leaf.box_distance(n) > 0.0 {
            return 0;
        }
        match n.children {
            None => n.depth,
            Some(kids) => kids.iter().map(|&k| self.deepest_touching(k, leaf)).max().unwrap_or(0),
        }
    }

    /// One line per node in preorder: depth, corner x, corner y, size, and
    /// number of stored points.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![self.root()];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id as usize];
            let c = n.corner();
            let _ = writeln!(out, "{} {} {} {} {}", n.depth, c.x, c.y, n.size(), n.points.len());
            if let Some(kids) = n.children {
                stack.extend(kids.iter().rev());
            }
        }
        out
    }

    /// Check `c_low s <= f(p) <= c_up s` for every point stored in a leaf,
    /// where `feature(p)` is the caller's feature size of point `p`.
    pub fn sandwich(&self, mut feature: impl FnMut(u32) -> Option<f64>) -> SandwichReport {
        let mut rep = SandwichReport { min_ratio: f64::INFINITY, max_ratio: 0.0, ..Default::default() };
        for n in self.nodes.iter().filter(|n| n.is_leaf()) {
            let s = n.size();
            for &i in &n.points {
                let Some(f) = feature(i) else { continue };
                rep.checked += 1;
                let ratio = f / s;
                rep.min_ratio = rep.min_ratio.min(ratio);
                rep.max_ratio = rep.max_ratio.max(ratio);
                if ratio < self.params.c_low {
                    rep.lower_violations += 1;
                }
                if ratio > self.params.c_up {
                    rep.upper_violations += 1;
                }
            }
        }
        rep
    }
}

fn offset(ix: u64, iy: u64, dx: i64, dy: i64, depth: u32) -> Option<(u64, u64)> {
    let n = 1i128 << depth;
    let (x, y) = (ix as i128 + dx as i128, iy as i128 + dy as i128);
    if x < 0 || y < 0 || x >= n || y >= n {
        None
    } else {
        Some((x as u64, y as u64))
    }
}

/// The 3x3 block of depth-`depth` cells around `(ix, iy)` holds two or more points.
fn crowded(pts: &[Point2], grid: &PointGrid, depth: u32, ix: u64, iy: u64, near: &mut Vec<u32>) -> bool {
    let s = cell_size(depth);
    let center = Point2::new((ix as f64 + 0.5) * s, (iy as f64 + 0.5) * s);
    grid.within(pts, center, 1.5 * SQRT_2 * s * (1.0 + 1e-9), near);
    let mut count = 0;
    for &i in near.iter() {
        let (jx, jy) = cell_index(pts[i as usize], depth);
        if jx.abs_diff(ix) <= 1 && jy.abs_diff(iy) <= 1 {
            count += 1;
            if count >= 2 {
                return true;
            }
        }
    }
    false
}
