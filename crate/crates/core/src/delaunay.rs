//! Incremental Delaunay triangulation.
//!
//! Bowyer-Watson insertion over a triangulation closed with a ghost vertex:
//! every convex hull edge carries a ghost triangle, so points on or beyond
//! the hull are handled by the same cavity routine. Point location walks from
//! the most recently created triangle.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::TriangulationError;
use crate::geometry::{incircle, orient2d, Point2, Triangle};

pub type VertexId = u32;
pub type TriId = u32;

/// The vertex at infinity.
pub const GHOST: VertexId = u32::MAX;
const NONE: TriId = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(VertexId),
    /// The point already exists; nothing changed.
    Duplicate(VertexId),
}

impl InsertOutcome {
    pub fn vertex(self) -> VertexId {
        match self {
            InsertOutcome::Inserted(v) | InsertOutcome::Duplicate(v) => v,
        }
    }
}

/// A Delaunay edge `a -> b` with the apex of the triangle on each side.
/// `GHOST` marks a hull side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeApexes {
    pub left: VertexId,
    pub right: VertexId,
}

#[derive(Clone, Debug, Default)]
pub struct Triangulation {
    points: Vec<Point2>,
    // vertices counter-clockwise; a ghost vertex is always stored last
    tris: Vec<[VertexId; 3]>,
    // adj[t][i] is the triangle across the edge opposite vertex i
    adj: Vec<[TriId; 3]>,
    alive: Vec<bool>,
    free: Vec<TriId>,
    vert_tri: Vec<TriId>,
    last: TriId,
    // scratch
    mark: Vec<u32>,
    epoch: u32,
    walk_rot: usize,
}

#[inline]
fn is_ghost(t: &[VertexId; 3]) -> bool {
    t[2] == GHOST
}

#[inline]
fn edge_of(t: &[VertexId; 3], i: usize) -> (VertexId, VertexId) {
    (t[(i + 1) % 3], t[(i + 2) % 3])
}

/// Rotate so that a ghost vertex (if any) sits at index 2.
#[inline]
fn normalize(t: [VertexId; 3]) -> [VertexId; 3] {
    if t[0] == GHOST {
        [t[1], t[2], t[0]]
    } else if t[1] == GHOST {
        [t[2], t[0], t[1]]
    } else {
        t
    }
}

impl Triangulation {
    /// Delaunay triangulation of `pts`. Vertex ids follow input order.
    pub fn build(pts: &[Point2]) -> Result<Self, TriangulationError> {
        if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(TriangulationError::NonFinite);
        }
        if pts.len() < 3 {
            return Err(TriangulationError::TooFewPoints);
        }
        let mut seen = FxHashSet::default();
        for p in pts {
            if !seen.insert(p.key()) {
                return Err(TriangulationError::Duplicate(*p));
            }
        }

        let order = spatial_order(pts);
        let a = order[0];
        let b = order[1];
        let c = order[2..]
            .iter()
            .copied()
            .find(|&c| orient2d(pts[a], pts[b], pts[c]) != 0.0)
            .ok_or(TriangulationError::AllCollinear)?;

        let mut t = Triangulation {
            points: pts.to_vec(),
            vert_tri: vec![NONE; pts.len()],
            ..Default::default()
        };
        t.init_triangle(a as VertexId, b as VertexId, c as VertexId);
        for &i in &order {
            if i == a || i == b || i == c {
                continue;
            }
            match t.insert_vertex(i as VertexId, true)? {
                InsertOutcome::Inserted(_) => {}
                InsertOutcome::Duplicate(_) => unreachable!("duplicates rejected above"),
            }
        }
        Ok(t)
    }

    fn init_triangle(&mut self, a: VertexId, b: VertexId, c: VertexId) {
        let (b, c) = if orient2d(self.points[a as usize], self.points[b as usize], self.points[c as usize]) > 0.0 {
            (b, c)
        } else {
            (c, b)
        };
        let new = [
            self.alloc([a, b, c]),
            self.alloc([c, b, GHOST]),
            self.alloc([a, c, GHOST]),
            self.alloc([b, a, GHOST]),
        ];
        self.link_among(&new);
        self.last = new[0];
    }

    fn alloc(&mut self, v: [VertexId; 3]) -> TriId {
        let v = normalize(v);
        let id = if let Some(id) = self.free.pop() {
            self.tris[id as usize] = v;
            self.adj[id as usize] = [NONE; 3];
            self.alive[id as usize] = true;
            id
        } else {
            self.tris.push(v);
            self.adj.push([NONE; 3]);
            self.alive.push(true);
            self.mark.push(0);
            (self.tris.len() - 1) as TriId
        };
        for &x in &v {
            if x != GHOST {
                self.vert_tri[x as usize] = id;
            }
        }
        id
    }

    /// Link unset adjacencies among `new` triangles by matching directed edges.
    fn link_among(&mut self, new: &[TriId]) {
        let mut open: FxHashMap<(VertexId, VertexId), (TriId, usize)> = FxHashMap::default();
        for &t in new {
            for i in 0..3 {
                if self.adj[t as usize][i] != NONE {
                    continue;
                }
                let (a, b) = edge_of(&self.tris[t as usize], i);
                if let Some((u, j)) = open.remove(&(b, a)) {
                    self.adj[t as usize][i] = u;
                    self.adj[u as usize][j] = t;
                } else {
                    open.insert((a, b), (t, i));
                }
            }
        }
        debug_assert!(open.is_empty(), "unmatched edges while linking");
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn point(&self, v: VertexId) -> Point2 {
        self.points[v as usize]
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    /// Real (finite) triangles as counter-clockwise vertex triples.
    pub fn triangles(&self) -> impl Iterator<Item = [VertexId; 3]> + '_ {
        self.tris
            .iter()
            .zip(&self.alive)
            .filter(|(t, &alive)| alive && !is_ghost(t))
            .map(|(t, _)| *t)
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles().count()
    }

    pub fn triangle_geometry(&self, t: [VertexId; 3]) -> Triangle {
        Triangle::new(self.point(t[0]), self.point(t[1]), self.point(t[2]))
    }

    /// Undirected finite edges, each reported once with `a < b`.
    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::new();
        for (t, &alive) in self.tris.iter().zip(&self.alive) {
            if !alive {
                continue;
            }
            for i in 0..3 {
                let (a, b) = edge_of(t, i);
                if a == GHOST || b == GHOST {
                    continue;
                }
                // each finite edge appears as (a,b) in one triangle and (b,a) in the other
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Hull vertices in counter-clockwise order.
    pub fn hull(&self) -> Vec<VertexId> {
        let start = match self
            .tris
            .iter()
            .zip(&self.alive)
            .position(|(t, &alive)| alive && is_ghost(t))
        {
            Some(s) => s as TriId,
            None => return Vec::new(),
        };
        // ghost (a, b, G): hull runs b -> a counter-clockwise
        let mut out = Vec::new();
        let mut t = start;
        loop {
            let v = self.tris[t as usize];
            out.push(v[1]);
            // next ghost shares the edge (a, G); it is opposite vertex b
            t = self.adj[t as usize][1];
            if t == start {
                break;
            }
        }
        out
    }

    /// Apexes on each side of the directed Delaunay edge `a -> b`, if it exists.
    pub fn edge_apexes(&self, a: VertexId, b: VertexId) -> Option<EdgeApexes> {
        let (t, i) = self.find_edge(a, b)?;
        let left = self.tris[t as usize][i];
        let n = self.adj[t as usize][i];
        let nv = self.tris[n as usize];
        let right = (0..3)
            .map(|k| nv[k])
            .find(|&x| x != a && x != b)
            .expect("neighbor triangle has an apex");
        Some(EdgeApexes { left, right })
    }

    /// Triangle left of `a -> b` and the index of its apex.
    fn find_edge(&self, a: VertexId, b: VertexId) -> Option<(TriId, usize)> {
        if a == GHOST || (a as usize) >= self.points.len() || a == b {
            return None;
        }
        let start = self.vert_tri[a as usize];
        if start == NONE {
            return None;
        }
        let mut t = start;
        loop {
            let v = self.tris[t as usize];
            let k = v.iter().position(|&x| x == a)?;
            if v[(k + 1) % 3] == b {
                return Some((t, (k + 2) % 3));
            }
            // rotate clockwise around a: cross the edge (a, v[k+1]) opposite v[k+2]
            t = self.adj[t as usize][(k + 2) % 3];
            if t == start {
                return None;
            }
        }
    }

    /// Finite neighbors of vertex `a`.
    pub fn vertex_neighbors(&self, a: VertexId) -> Vec<VertexId> {
        let mut out = Vec::new();
        let start = self.vert_tri[a as usize];
        if start == NONE {
            return out;
        }
        let mut t = start;
        loop {
            let v = self.tris[t as usize];
            let k = v.iter().position(|&x| x == a).expect("vertex in its triangle");
            let nb = v[(k + 1) % 3];
            if nb != GHOST {
                out.push(nb);
            }
            t = self.adj[t as usize][(k + 2) % 3];
            if t == start {
                break;
            }
        }
        out
    }

    /// Finite triangles incident to `a`.
    pub fn vertex_triangles(&self, a: VertexId) -> Vec<[VertexId; 3]> {
        let mut out = Vec::new();
        let start = self.vert_tri[a as usize];
        if start == NONE {
            return out;
        }
        let mut t = start;
        loop {
            let v = self.tris[t as usize];
            let k = v.iter().position(|&x| x == a).expect("vertex in its triangle");
            if !is_ghost(&v) {
                out.push(v);
            }
            t = self.adj[t as usize][(k + 2) % 3];
            if t == start {
                break;
            }
        }
        out
    }

    pub fn is_hull_vertex(&self, a: VertexId) -> bool {
        let start = self.vert_tri[a as usize];
        if start == NONE {
            return false;
        }
        let mut t = start;
        loop {
            let v = self.tris[t as usize];
            if is_ghost(&v) {
                return true;
            }
            let k = v.iter().position(|&x| x == a).expect("vertex in its triangle");
            t = self.adj[t as usize][(k + 2) % 3];
            if t == start {
                return false;
            }
        }
    }

    /// Insert a point strictly inside or on the boundary of the current hull.
    pub fn insert(&mut self, p: Point2) -> Result<InsertOutcome, TriangulationError> {
        self.insert_point(p, false)
    }

    /// Insert a point anywhere, growing the hull if needed.
    pub fn insert_extending(&mut self, p: Point2) -> Result<InsertOutcome, TriangulationError> {
        self.insert_point(p, true)
    }

    fn insert_point(
        &mut self,
        p: Point2,
        allow_outside: bool,
    ) -> Result<InsertOutcome, TriangulationError> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(TriangulationError::NonFinite);
        }
        let v = self.points.len() as VertexId;
        self.points.push(p);
        self.vert_tri.push(NONE);
        match self.insert_vertex(v, allow_outside) {
            Ok(InsertOutcome::Inserted(v)) => Ok(InsertOutcome::Inserted(v)),
            other => {
                self.points.pop();
                self.vert_tri.pop();
                other
            }
        }
    }

    #[inline]
    fn conflicts(&self, t: TriId, p: Point2) -> bool {
        let v = self.tris[t as usize];
        if is_ghost(&v) {
            let a = self.points[v[0] as usize];
            let b = self.points[v[1] as usize];
            let o = orient2d(a, b, p);
            if o > 0.0 {
                return true;
            }
            if o < 0.0 {
                return false;
            }
            // on the hull line: conflicts only strictly inside the hull edge
            if a.x != b.x {
                p.x > a.x.min(b.x) && p.x < a.x.max(b.x)
            } else {
                p.y > a.y.min(b.y) && p.y < a.y.max(b.y)
            }
        } else {
            incircle(
                self.points[v[0] as usize],
                self.points[v[1] as usize],
                self.points[v[2] as usize],
                p,
            ) > 0.0
        }
    }

    /// Walk toward `p`. Returns a finite triangle whose closure contains `p`,
    /// or a ghost triangle whose hull edge sees `p`.
    fn locate(&mut self, p: Point2) -> TriId {
        let mut t = self.last;
        if !self.alive[t as usize] {
            t = self
                .alive
                .iter()
                .position(|&a| a)
                .expect("triangulation has live triangles") as TriId;
        }
        if is_ghost(&self.tris[t as usize]) {
            t = self.adj[t as usize][2];
        }
        let limit = 4 * self.tris.len() + 16;
        let mut steps = 0;
        'walk: loop {
            let v = self.tris[t as usize];
            if is_ghost(&v) {
                return t;
            }
            self.walk_rot = (self.walk_rot + 1) % 3;
            for k in 0..3 {
                let i = (k + self.walk_rot) % 3;
                let (a, b) = edge_of(&v, i);
                if orient2d(self.points[a as usize], self.points[b as usize], p) < 0.0 {
                    t = self.adj[t as usize][i];
                    steps += 1;
                    if steps > limit {
                        break 'walk;
                    }
                    continue 'walk;
                }
            }
            return t;
        }
        // fallback scan; a visibility walk on a Delaunay triangulation does not cycle
        self.locate_scan(p)
    }

    fn locate_scan(&self, p: Point2) -> TriId {
        let mut ghost_hit = NONE;
        for (i, v) in self.tris.iter().enumerate() {
            if !self.alive[i] {
                continue;
            }
            if is_ghost(v) {
                if ghost_hit == NONE && self.conflicts(i as TriId, p) {
                    ghost_hit = i as TriId;
                }
                continue;
            }
            let inside = (0..3).all(|e| {
                let (a, b) = edge_of(v, e);
                orient2d(self.points[a as usize], self.points[b as usize], p) >= 0.0
            });
            if inside {
                return i as TriId;
            }
        }
        ghost_hit
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(2);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 2;
        }
        self.epoch
    }

    fn insert_vertex(
        &mut self,
        v: VertexId,
        allow_outside: bool,
    ) -> Result<InsertOutcome, TriangulationError> {
        let p = self.points[v as usize];
        let start = self.locate(p);
        let sv = self.tris[start as usize];
        if is_ghost(&sv) {
            let a = self.points[sv[0] as usize];
            let b = self.points[sv[1] as usize];
            if orient2d(a, b, p) > 0.0 && !allow_outside {
                return Err(TriangulationError::OutsideHull(p));
            }
            if !self.conflicts(start, p) {
                // collinear with a hull edge but not strictly inside it
                if let Some(&d) = sv[..2].iter().find(|&&x| self.points[x as usize] == p) {
                    return Ok(InsertOutcome::Duplicate(d));
                }
                if !allow_outside {
                    return Err(TriangulationError::OutsideHull(p));
                }
                let s = self.locate_scan(p);
                if s == NONE {
                    return Err(TriangulationError::OutsideHull(p));
                }
                return self.dig_cavity(v, s);
            }
        } else if let Some(&d) = sv.iter().find(|&&x| self.points[x as usize] == p) {
            return Ok(InsertOutcome::Duplicate(d));
        }
        self.dig_cavity(v, start)
    }

    fn dig_cavity(&mut self, v: VertexId, start: TriId) -> Result<InsertOutcome, TriangulationError> {
        let p = self.points[v as usize];
        let in_mark = self.next_epoch();
        let out_mark = in_mark + 1;
        let mut cavity = vec![start];
        self.mark[start as usize] = in_mark;
        let mut boundary: Vec<(VertexId, VertexId, TriId)> = Vec::new();
        let mut k = 0;
        while k < cavity.len() {
            let t = cavity[k];
            k += 1;
            for i in 0..3 {
                let n = self.adj[t as usize][i];
                let m = self.mark[n as usize];
                if m == in_mark {
                    continue;
                }
                if m != out_mark {
                    if self.conflicts(n, p) {
                        self.mark[n as usize] = in_mark;
                        cavity.push(n);
                        continue;
                    }
                    self.mark[n as usize] = out_mark;
                }
                let (a, b) = edge_of(&self.tris[t as usize], i);
                boundary.push((a, b, n));
            }
        }

        for &t in &cavity {
            self.alive[t as usize] = false;
            self.free.push(t);
        }
        let mut new = Vec::with_capacity(boundary.len());
        for &(a, b, n) in &boundary {
            let t = self.alloc([a, b, v]);
            // hook up the outside neighbor across (a, b)
            let tv = self.tris[t as usize];
            let i = (0..3).find(|&i| edge_of(&tv, i) == (a, b)).expect("edge present");
            self.adj[t as usize][i] = n;
            let nv = self.tris[n as usize];
            let j = (0..3).find(|&j| edge_of(&nv, j) == (b, a)).expect("twin edge present");
            self.adj[n as usize][j] = t;
            new.push(t);
        }
        self.link_among(&new);
        // keep the walk start on a finite triangle when possible
        self.last = new
            .iter()
            .copied()
            .find(|&t| !is_ghost(&self.tris[t as usize]))
            .unwrap_or(new[0]);
        for &t in &new {
            for &x in &self.tris[t as usize] {
                if x != GHOST {
                    self.vert_tri[x as usize] = t;
                }
            }
        }
        Ok(InsertOutcome::Inserted(v))
    }

    /// Every finite edge satisfies the empty-circle condition against the apex
    /// across it (exact predicate).
    pub fn is_locally_delaunay(&self) -> bool {
        for (t, v) in self.tris.iter().enumerate() {
            if !self.alive[t] || is_ghost(v) {
                continue;
            }
            for i in 0..3 {
                let n = self.adj[t][i];
                let nv = self.tris[n as usize];
                if is_ghost(&nv) {
                    continue;
                }
                let (a, b) = edge_of(v, i);
                let apex = nv.iter().copied().find(|&x| x != a && x != b).unwrap();
                if incircle(
                    self.point(v[0]),
                    self.point(v[1]),
                    self.point(v[2]),
                    self.point(apex),
                ) > 0.0
                {
                    return false;
                }
            }
        }
        true
    }

    /// Structural consistency: symmetric adjacency, ccw finite triangles,
    /// and Euler's relation `V - E + F = 1` for the triangulated hull.
    pub fn check_topology(&self) -> Result<(), String> {
        for (t, v) in self.tris.iter().enumerate() {
            if !self.alive[t] {
                continue;
            }
            if !is_ghost(v) && orient2d(self.point(v[0]), self.point(v[1]), self.point(v[2])) <= 0.0 {
                return Err(format!("triangle {t} is not counter-clockwise"));
            }
            for i in 0..3 {
                let n = self.adj[t][i];
                if n == NONE || !self.alive[n as usize] {
                    return Err(format!("triangle {t} has a dangling neighbor"));
                }
                let (a, b) = edge_of(v, i);
                let nv = self.tris[n as usize];
                let back = (0..3).find(|&j| edge_of(&nv, j) == (b, a));
                match back {
                    Some(j) if self.adj[n as usize][j] == t as TriId => {}
                    _ => return Err(format!("adjacency {t} -> {n} is not symmetric")),
                }
            }
        }
        let used: FxHashSet<VertexId> = self.triangles().flatten().collect();
        let vcount = used.len() as i64;
        let ecount = self.edges().len() as i64;
        let fcount = self.triangle_count() as i64;
        if vcount - ecount + fcount != 1 {
            return Err(format!("Euler relation fails: V={vcount} E={ecount} F={fcount}"));
        }
        Ok(())
    }

    /// Smallest angle over all finite triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        self.triangles()
            .filter_map(|t| self.triangle_geometry(t).min_angle().ok())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_radius_edge(&self) -> f64 {
        self.triangles()
            .filter_map(|t| self.triangle_geometry(t).radius_edge_ratio().ok())
            .fold(0.0, f64::max)
    }

    /// Triangles with radius-edge ratio above `beta`, shortest smallest edge first.
    pub fn bad_triangles(&self, beta: f64) -> Vec<Triangle> {
        let mut bad: Vec<(f64, Triangle)> = self
            .triangles()
            .map(|t| self.triangle_geometry(t))
            .filter(|tri| tri.radius_edge_ratio().is_ok_and(|r| r > beta))
            .map(|tri| (tri.shortest_edge(), tri))
            .collect();
        bad.sort_by(|a, b| a.0.total_cmp(&b.0));
        bad.into_iter().map(|(_, t)| t).collect()
    }
}

impl Triangulation {
    /// Empty leaf side of the Delaunay edge `a -> b`, decided from the two
    /// apexes across it. Only these apexes can occupy a leaf of a Delaunay
    /// edge: each leaf lies inside the union of the two empty circumdisks
    /// once neither apex occupies it. The exterior side of a hull edge is
    /// outside the domain and never counts as empty.
    pub fn edge_loose_side(
        &self,
        a: VertexId,
        b: VertexId,
        beta: f64,
    ) -> Option<crate::geometry::Side> {
        use crate::geometry::{leaf_occupied, Side};
        let ap = self.edge_apexes(a, b)?;
        let (p, q) = (self.point(a), self.point(b));
        let empty = |side: Side, own: VertexId| {
            own != GHOST
                && [ap.left, ap.right].iter().all(|&x| {
                    x == GHOST || !leaf_occupied(p, q, beta, side, self.point(x)).unwrap_or(true)
                })
        };
        if empty(Side::Left, ap.left) {
            Some(Side::Left)
        } else if empty(Side::Right, ap.right) {
            Some(Side::Right)
        } else {
            None
        }
    }

    /// All loose pairs, by exhaustive leaf-emptiness tests of every Delaunay
    /// edge against every vertex that can reach its flower. Hull edges are
    /// tested on their interior side only.
    pub fn loose_pairs(&self, beta: f64) -> Vec<crate::loose::LoosePair> {
        use crate::geometry::{leaf_occupied, Side};
        let grid = crate::index::PointGrid::new(&self.points);
        let mut near = Vec::new();
        let mut out = Vec::new();
        for (a, b) in self.edges() {
            let (mut a, mut b) = (a, b);
            if self.point(b).lex_cmp(&self.point(a)) == std::cmp::Ordering::Less {
                std::mem::swap(&mut a, &mut b);
            }
            let (p, q) = (self.point(a), self.point(b));
            let Some(ap) = self.edge_apexes(a, b) else { continue };
            let flower = match crate::loose::Flower::new(p, q, beta) {
                Ok(f) => f,
                Err(_) => continue,
            };
            grid.within(&self.points, p.midpoint(q), flower.reach() * (1.0 + 1e-9), &mut near);
            let empty = |side: Side| {
                near.iter().all(|&i| {
                    let x = self.points[i as usize];
                    x == p || x == q || !leaf_occupied(p, q, beta, side, x).unwrap_or(true)
                })
            };
            let side = if ap.left != GHOST && empty(Side::Left) {
                Some(Side::Left)
            } else if ap.right != GHOST && empty(Side::Right) {
                Some(Side::Right)
            } else {
                None
            };
            if let Some(side) = side {
                out.push(crate::loose::LoosePair::new(p, q, side));
            }
        }
        out.sort_by(|a, b| a.priority_cmp(b));
        out
    }
}

/// Hilbert-curve order of the points; makes walking point location cheap.
pub(crate) fn spatial_order(pts: &[Point2]) -> Vec<usize> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    const ORDER: u32 = 16;
    let n = (1u32 << ORDER) as f64 - 1.0;
    let mut keyed: Vec<(u64, usize)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let xi = (((p.x - x0) / span) * n) as u32;
            let yi = (((p.y - y0) / span) * n) as u32;
            (hilbert_index(ORDER, xi, yi), i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

fn hilbert_index(order: u32, mut x: u32, mut y: u32) -> u64 {
    let mut d: u64 = 0;
    let mut s = 1u32 << (order - 1);
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += (s as u64) * (s as u64) * ((3 * rx) ^ ry) as u64;
        if ry == 0 {
            if rx == 1 {
                x = s.wrapping_sub(1).wrapping_sub(x) & ((s << 1) - 1);
                y = s.wrapping_sub(1).wrapping_sub(y) & ((s << 1) - 1);
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn brute_force_empty(t: &Triangulation) -> bool {
        t.triangles().all(|tri| {
            let (a, b, c) = (t.point(tri[0]), t.point(tri[1]), t.point(tri[2]));
            t.points().iter().all(|&d| incircle(a, b, c, d) <= 0.0)
        })
    }

    fn tri_set(t: &Triangulation) -> Vec<[VertexId; 3]> {
        let mut v: Vec<[VertexId; 3]> = t
            .triangles()
            .map(|mut tri| {
                let k = (0..3).min_by_key(|&i| tri[i]).unwrap();
                tri.rotate_left(k);
                tri
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn single_triangle() {
        let t = Triangulation::build(&[pt(0., 0.), pt(1., 0.), pt(0., 1.)]).unwrap();
        assert_eq!(t.triangle_count(), 1);
        assert_eq!(t.edges().len(), 3);
        assert_eq!(t.hull().len(), 3);
        t.check_topology().unwrap();
    }

    #[test]
    fn unit_square_corners() {
        let t = Triangulation::build(&[pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)]).unwrap();
        assert_eq!(t.triangle_count(), 2);
        for tri in t.triangles() {
            let g = t.triangle_geometry(tri);
            for &p in t.points() {
                assert!(incircle(g.a, g.b, g.c, p) == 0.0);
            }
        }
        let again = Triangulation::build(&[pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)]).unwrap();
        assert_eq!(tri_set(&t), tri_set(&again));
    }

    #[test]
    fn build_errors() {
        assert_eq!(
            Triangulation::build(&[pt(0., 0.), pt(1., 1.), pt(2., 2.)]).unwrap_err(),
            TriangulationError::AllCollinear
        );
        assert_eq!(
            Triangulation::build(&[pt(0., 0.), pt(1., 0.)]).unwrap_err(),
            TriangulationError::TooFewPoints
        );
        assert!(matches!(
            Triangulation::build(&[pt(0., 0.), pt(1., 0.), pt(0., 1.), pt(1., 0.)]),
            Err(TriangulationError::Duplicate(_))
        ));
    }

    #[test]
    fn insert_centroid_and_edge() {
        let mut t = Triangulation::build(&[pt(0., 0.), pt(1., 0.), pt(0., 1.)]).unwrap();
        t.insert(pt(0.25, 0.25)).unwrap();
        assert_eq!(t.triangle_count(), 3);
        t.check_topology().unwrap();

        let mut t = Triangulation::build(&[pt(0., 0.), pt(2., 0.), pt(2., 2.), pt(0., 2.1)]).unwrap();
        assert_eq!(t.triangle_count(), 2);
        // the shared diagonal; whichever diagonal exists, its midpoint lies on it
        let (a, b) = t.edges().into_iter().find(|&(a, b)| {
            let (p, q) = (t.point(a), t.point(b));
            (p.x - q.x).abs() > 0.0 && (p.y - q.y).abs() > 0.0
        }).unwrap();
        let m = t.point(a).midpoint(t.point(b));
        t.insert(m).unwrap();
        assert_eq!(t.triangle_count(), 4);
        t.check_topology().unwrap();
        let rebuilt = Triangulation::build(t.points()).unwrap();
        assert_eq!(tri_set(&t), tri_set(&rebuilt));
    }

    #[test]
    fn insert_on_hull_edge_and_outside() {
        let mut t = Triangulation::build(&[pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)]).unwrap();
        t.insert(pt(0.5, 0.)).unwrap();
        t.check_topology().unwrap();
        assert_eq!(t.hull().len(), 5);
        assert!(matches!(t.insert(pt(2., 2.)), Err(TriangulationError::OutsideHull(_))));
        assert!(matches!(t.insert(pt(1.5, 0.)), Err(TriangulationError::OutsideHull(_))));
        assert_eq!(t.insert(pt(0.5, 0.)).unwrap(), InsertOutcome::Duplicate(4));
        assert_eq!(t.insert(pt(1., 1.)).unwrap(), InsertOutcome::Duplicate(2));
        assert_eq!(t.num_vertices(), 5);
    }

    #[test]
    fn random_build_is_delaunay() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point2> = (0..1000).map(|_| pt(rng.gen(), rng.gen())).collect();
        let t = Triangulation::build(&pts).unwrap();
        t.check_topology().unwrap();
        assert!(t.is_locally_delaunay());
        assert!(brute_force_empty(&t));
    }

    #[test]
    fn grid_with_cocircular_points() {
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                pts.push(pt(i as f64, j as f64));
            }
        }
        let t = Triangulation::build(&pts).unwrap();
        t.check_topology().unwrap();
        assert_eq!(t.triangle_count(), 2 * 11 * 11);
        assert!(brute_force_empty(&t));
    }

    #[test]
    fn insert_sequences_match_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(4..40);
            let pts: Vec<Point2> = (0..n).map(|_| pt(rng.gen(), rng.gen())).collect();
            let mut t = Triangulation::build(&pts[..3]).unwrap();
            for &p in &pts[3..] {
                t.insert_extending(p).unwrap();
            }
            t.check_topology().unwrap();
            let rebuilt = Triangulation::build(&pts).unwrap();
            assert_eq!(tri_set(&t), tri_set(&rebuilt));
        }
    }

    #[test]
    fn bad_triangles_example() {
        let t = Triangulation::build(&[pt(0., 0.), pt(1., 0.), pt(0.5, 0.05)]).unwrap();
        let bad = t.bad_triangles(std::f64::consts::SQRT_2);
        assert_eq!(bad.len(), 1);
        // circumcenter (0.5, -2.475): R = 2.52494..., shortest side |(0.5, 0.05)|
        let disk = bad[0].circumcircle().unwrap();
        assert!((disk.radius - (0.25f64 + 2.475 * 2.475).sqrt()).abs() < 1e-12);
        let r = bad[0].radius_edge_ratio().unwrap();
        assert!((r - 5.0249378).abs() < 1e-6, "{r}");

        let s3 = 3f64.sqrt() / 2.0;
        let mut pts = Vec::new();
        for j in 0..6 {
            for i in 0..6 {
                let off = if j % 2 == 0 { 0.0 } else { 0.5 };
                pts.push(pt(i as f64 + off, j as f64 * s3));
            }
        }
        let t = Triangulation::build(&pts).unwrap();
        assert!(t.bad_triangles(std::f64::consts::SQRT_2).is_empty());
    }

    #[test]
    fn collinear_prefix_then_offline_point() {
        let mut pts: Vec<Point2> = (0..10).map(|i| pt(i as f64, 0.0)).collect();
        pts.push(pt(4.5, 3.0));
        let t = Triangulation::build(&pts).unwrap();
        t.check_topology().unwrap();
        assert_eq!(t.triangle_count(), 9);
        assert!(brute_force_empty(&t));
    }
}
