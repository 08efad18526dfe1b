//! Loose pair removal: repeatedly take the shortest loose pair and insert its
//! off-center. A circumcenter mode (shortest bad triangle first) is provided
//! for comparison.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::delaunay::{Triangulation, VertexId, GHOST};
use crate::error::RefineError;
use crate::frame::{normalize_input, Transform};
use crate::geometry::{beta_for_min_angle_deg, circumcenter, Point2, Side};
use crate::loose::{crescent, off_center_from};
use crate::mesh::{MeshState, Placement, RefinedMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InsertionMode {
    #[default]
    OffCenter,
    Circumcenter,
}

impl std::str::FromStr for InsertionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off_center" | "off-center" | "offcenter" => Ok(InsertionMode::OffCenter),
            "circumcenter" => Ok(InsertionMode::Circumcenter),
            _ => Err(format!("unknown insertion mode `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinerConfig {
    pub beta: f64,
    pub mode: InsertionMode,
    /// Stop after this many insertions. Required when `beta < sqrt(2)`.
    pub max_insertions: Option<usize>,
}

impl RefinerConfig {
    pub fn new(beta: f64) -> Self {
        RefinerConfig { beta, mode: InsertionMode::OffCenter, max_insertions: None }
    }

    pub fn from_min_angle_deg(deg: f64) -> Self {
        Self::new(beta_for_min_angle_deg(deg))
    }

    pub fn with_mode(mut self, mode: InsertionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_max_insertions(mut self, cap: usize) -> Self {
        self.max_insertions = Some(cap);
        self
    }

    /// Termination is proven for this beta.
    pub fn guaranteed(&self) -> bool {
        self.beta >= SQRT_2 * (1.0 - 1e-12)
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        if !self.beta.is_finite() || self.beta <= 0.5 {
            return Err(RefineError::Config(format!("beta must be a finite number above 1/2, got {}", self.beta)));
        }
        if !self.guaranteed() && self.max_insertions.is_none() {
            return Err(RefineError::BetaRequiresCap(self.beta));
        }
        Ok(())
    }

    pub(crate) fn cap_reached(&self, state: &MeshState) -> bool {
        self.max_insertions.is_some_and(|c| state.stats.insertions() >= c)
    }
}

/// Normalize `raw`, refine, and keep the transform for output.
pub fn refine_raw(raw: &[Point2], cfg: &RefinerConfig) -> Result<RefinedMesh, RefineError> {
    let (pts, t) = normalize_input(raw)?;
    let mut m = refine(&pts, cfg)?;
    m.transform = t;
    Ok(m)
}

/// Refine points already normalized into `[1/3, 2/3]^2`.
pub fn refine(input: &[Point2], cfg: &RefinerConfig) -> Result<RefinedMesh, RefineError> {
    cfg.validate()?;
    let t0 = std::time::Instant::now();
    log::info!("baseline refine: {} points, beta {}, mode {:?}", input.len(), cfg.beta, cfg.mode);
    let mut state = MeshState::new(input)?;
    match cfg.mode {
        InsertionMode::OffCenter => {
            let mut q = PairQueue::default();
            q.seed_all(&state.tri, cfg.beta);
            remove_loose_pairs(&mut state, cfg, &mut q, None)?;
        }
        InsertionMode::Circumcenter => circumcenter_loop(&mut state, cfg)?,
    }
    state.stats.work_time = t0.elapsed();
    log::info!(
        "baseline done: {} steiner, {} boundary splits, {:?}",
        state.stats.steiner_count,
        state.stats.boundary_split_count,
        state.stats.work_time
    );
    Ok(state.finish(Transform::identity()))
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct PairEntry {
    pub length: f64,
    pub p: Point2,
    pub q: Point2,
    pub a: VertexId,
    pub b: VertexId,
}

impl PartialEq for PairEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for PairEntry {}
impl PartialOrd for PairEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for PairEntry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.length
            .total_cmp(&o.length)
            .then_with(|| self.p.lex_cmp(&o.p))
            .then_with(|| self.q.lex_cmp(&o.q))
    }
}

/// Candidate loose pairs, shortest first. Entries are revalidated on pop.
#[derive(Default)]
pub(crate) struct PairQueue {
    heap: BinaryHeap<Reverse<PairEntry>>,
}

impl PairQueue {
    pub fn push_edge(&mut self, tri: &Triangulation, beta: f64, a: VertexId, b: VertexId) {
        if a == GHOST || b == GHOST {
            return;
        }
        let (mut a, mut b) = (a, b);
        let (mut p, mut q) = (tri.point(a), tri.point(b));
        if q.lex_cmp(&p) == Ordering::Less {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut p, &mut q);
        }
        if tri.edge_loose_side(a, b, beta).is_some() {
            self.heap.push(Reverse(PairEntry { length: p.dist(q), p, q, a, b }));
        }
    }

    pub fn seed_all(&mut self, tri: &Triangulation, beta: f64) {
        for (a, b) in tri.edges() {
            self.push_edge(tri, beta, a, b);
        }
    }

    /// Queue every edge of the triangles around `v`.
    pub fn push_star(&mut self, tri: &Triangulation, beta: f64, v: VertexId) {
        for t in tri.vertex_triangles(v) {
            for k in 0..3 {
                self.push_edge(tri, beta, t[k], t[(k + 1) % 3]);
            }
        }
    }

    /// Shortest entry that is still a loose Delaunay edge, with its empty side.
    pub fn pop_valid(&mut self, tri: &Triangulation, beta: f64) -> Option<(PairEntry, Side)> {
        while let Some(Reverse(e)) = self.heap.pop() {
            if let Some(side) = tri.edge_loose_side(e.a, e.b, beta) {
                return Some((e, side));
            }
        }
        None
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Off-center of the loose Delaunay edge `a -> b` with empty `side`. The
/// only vertex that can be moonstruck is the Delaunay apex on that side.
pub(crate) fn edge_off_center(
    tri: &Triangulation,
    a: VertexId,
    b: VertexId,
    side: Side,
    beta: f64,
) -> Result<(Point2, Option<VertexId>), RefineError> {
    let (p, q) = (tri.point(a), tri.point(b));
    let ap = tri.edge_apexes(a, b).ok_or(crate::error::GeometryError::Degenerate)?;
    let r = match side {
        Side::Left => ap.left,
        Side::Right => ap.right,
    };
    let moon = if r != GHOST && crescent(p, q, beta, side)?.contains(tri.point(r)) { Some(r) } else { None };
    let oc = off_center_from(p, q, beta, side, moon.map(|r| tri.point(r)))?;
    Ok((oc.steiner, moon))
}

/// Observer for pair pops; used by instrumentation.
pub(crate) trait PopObserver {
    fn popped(&mut self, e: &PairEntry, steiner: Point2, moonstruck: Option<VertexId>);
}

/// Run shortest-loose-pair-first until the queue drains or the cap hits.
pub(crate) fn remove_loose_pairs(
    state: &mut MeshState,
    cfg: &RefinerConfig,
    queue: &mut PairQueue,
    mut observer: Option<&mut dyn PopObserver>,
) -> Result<(), RefineError> {
    let beta = cfg.beta;
    let mut last_len = 0.0f64;
    let mut split_since_last = true;
    loop {
        if cfg.cap_reached(state) {
            state.stats.capped = !queue.is_empty() && queue.pop_valid(&state.tri, beta).is_some();
            return Ok(());
        }
        let Some((e, side)) = queue.pop_valid(&state.tri, beta) else {
            return Ok(());
        };
        if !split_since_last && e.length < last_len * (1.0 - 1e-12) {
            state.stats.monotone_violations += 1;
        }
        last_len = e.length;
        split_since_last = false;
        let (c, moon) = edge_off_center(&state.tri, e.a, e.b, side, beta)?;
        if let Some(obs) = observer.as_deref_mut() {
            obs.popped(&e, c, moon);
        }
        log::trace!("pair {} {} length {:.6e} -> off-center {c}", e.p, e.q, e.length);
        match state.place(c)? {
            Placement::Inserted(v) => queue.push_star(&state.tri, beta, v),
            Placement::Rejected(mids) => {
                split_since_last = true;
                for v in mids {
                    queue.push_star(&state.tri, beta, v);
                }
                queue.push_edge(&state.tri, beta, e.a, e.b);
            }
            Placement::Duplicate => {}
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct TriEntry {
    shortest: f64,
    v: [VertexId; 3],
    key: [Point2; 3],
}

impl PartialEq for TriEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for TriEntry {}
impl PartialOrd for TriEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for TriEntry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.shortest.total_cmp(&o.shortest).then_with(|| {
            self.key
                .iter()
                .zip(&o.key)
                .map(|(a, b)| a.lex_cmp(b))
                .find(|c| c.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

fn push_if_bad(heap: &mut BinaryHeap<Reverse<TriEntry>>, tri: &Triangulation, beta: f64, v: [VertexId; 3]) {
    let g = tri.triangle_geometry(v);
    if g.radius_edge_ratio().is_ok_and(|r| r > beta) {
        let mut key = [g.a, g.b, g.c];
        key.sort_by(|a, b| a.lex_cmp(b));
        heap.push(Reverse(TriEntry { shortest: g.shortest_edge(), v, key }));
    }
}

fn circumcenter_loop(state: &mut MeshState, cfg: &RefinerConfig) -> Result<(), RefineError> {
    let beta = cfg.beta;
    let mut heap = BinaryHeap::new();
    for t in state.tri.triangles() {
        push_if_bad(&mut heap, &state.tri, beta, t);
    }
    while let Some(Reverse(e)) = heap.pop() {
        let [a, b, c] = e.v;
        if state.tri.edge_apexes(a, b).map(|ap| ap.left) != Some(c) {
            continue;
        }
        if cfg.cap_reached(state) {
            state.stats.capped = true;
            return Ok(());
        }
        let cc = circumcenter(e.key[0], e.key[1], e.key[2])?;
        match state.place(cc)? {
            Placement::Inserted(v) => {
                for t in state.tri.vertex_triangles(v) {
                    push_if_bad(&mut heap, &state.tri, beta, t);
                }
            }
            Placement::Rejected(mids) => {
                for v in mids {
                    for t in state.tri.vertex_triangles(v) {
                        push_if_bad(&mut heap, &state.tri, beta, t);
                    }
                }
                push_if_bad(&mut heap, &state.tri, beta, e.v);
            }
            Placement::Duplicate => {}
        }
    }
    Ok(())
}
