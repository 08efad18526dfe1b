//! Level-ordered refinement over a balanced quadtree.
//!
//! Nodes are processed deepest level first. Each point is active for a
//! bounded range of levels above the level it was stored at; only active
//! points start pairs, and points stored at coarser levels wait until their
//! level comes up. Loose pairs are found by local searches around the node.

use std::collections::VecDeque;
use std::f64::consts::{PI, SQRT_2};
use std::time::{Duration, Instant};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::baseline::{remove_loose_pairs, InsertionMode, PairQueue, RefinerConfig};
use crate::delaunay::{InsertOutcome, Triangulation, VertexId, GHOST};
use crate::error::RefineError;
use crate::frame::{normalize_input, validate_points, BoundingFrame, Encroachment, Transform};
use crate::geometry::{alpha_for_beta, leaf_disks, leaf_occupied, orient2d, CirclePosition, Point2, Side};
use crate::loose::{crescent, off_center_from};
use crate::mesh::{MeshState, RefinedMesh, RefinementStats, VertexKind};
use crate::quadtree::{NodeId, Quadtree, QuadtreeNode, QuadtreeParams, MAX_DEPTH, NO_NODE};

/// Constants of the level-ordered refiner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinementConstants {
    pub beta: f64,
    pub alpha: f64,
    pub c_g: f64,
    pub c_gbu: f64,
    pub c_low: f64,
    pub c_up: f64,
    pub c_shrink: f64,
    pub c_low_prime: f64,
    /// Pairs up to `c_reach * size(node)` long are examined from a node.
    pub c_reach: f64,
    /// Levels a point stays active above the level it was stored at.
    pub c_span: u32,
}

/// Nearest neighbors tried as leaf occupants before a full search.
const PROBES: usize = 16;

/// Operational reach used by default.
pub const DEFAULT_C_REACH: f64 = 2.0 * SQRT_2 * 1.0625;

/// Most points stored in one cell of the level being processed.
pub const ACTIVE_COUNT_BOUND: usize = 32;
/// Operational active span used by default.
pub const DEFAULT_C_SPAN: u32 = 3;

impl RefinementConstants {
    /// Every constant at the value the worst-case analysis asks for.
    pub fn theoretical(beta: f64, qp: QuadtreeParams, c_shrink: f64) -> Self {
        let alpha = alpha_for_beta(beta);
        let c_g = (2.0 * beta).powf(PI / alpha + 1.0);
        let c_gbu = (2.0 * beta).powf(PI / alpha);
        let c_low_prime = qp.c_low * c_shrink;
        let c_reach = (2.0 * qp.c_up * c_gbu).max(2.0 * SQRT_2);
        let c_span = ((c_gbu * qp.c_up / c_low_prime).log2() + 1.0).ceil().max(1.0) as u32;
        RefinementConstants {
            beta,
            alpha,
            c_g,
            c_gbu,
            c_low: qp.c_low,
            c_up: qp.c_up,
            c_shrink,
            c_low_prime,
            c_reach,
            c_span,
        }
    }

    /// Analysis constants with the operational reach and span.
    pub fn operational(beta: f64) -> Self {
        RefinementConstants {
            c_reach: DEFAULT_C_REACH,
            c_span: DEFAULT_C_SPAN,
            ..Self::theoretical(beta, QuadtreeParams::default(), 0.25)
        }
    }

    pub fn with_c_reach(mut self, c: f64) -> Self {
        self.c_reach = c;
        self
    }

    pub fn with_c_span(mut self, c: u32) -> Self {
        self.c_span = c;
        self
    }

    /// Change `c_shrink`, which rescales the stage bounds.
    pub fn with_c_shrink(mut self, c: f64) -> Self {
        self.c_shrink = c;
        self.c_low_prime = self.c_low * c;
        self
    }

    pub fn quadtree_params(&self) -> QuadtreeParams {
        QuadtreeParams { c_low: self.c_low, c_up: self.c_up }
    }

    /// Violated inter-constant requirements, empty when all hold.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.c_up < 2.0 * self.c_low {
            v.push(format!("c_up {} < 2 c_low {}", self.c_up, 2.0 * self.c_low));
        }
        if self.c_reach < 2.0 * SQRT_2 {
            v.push(format!("c_reach {} < 2 sqrt 2", self.c_reach));
        }
        if self.c_gbu < self.c_g / (2.0 * self.beta) * (1.0 - 1e-12) {
            v.push(format!("c_gbu {} < c_g / 2 beta {}", self.c_gbu, self.c_g / (2.0 * self.beta)));
        }
        if self.c_span < 1 {
            v.push("c_span < 1".to_string());
        }
        v
    }

    /// The stage-`stage` lower bound on loose pair length in a tree of depth `d`.
    pub fn eta(&self, stage: u32, d: u32) -> f64 {
        eta_bound(stage, self, d)
    }
}

/// `c_low' / 2^(d - stage + 1)`. Stage `i` processes depth `d - i + 1`.
pub fn eta_bound(stage: u32, consts: &RefinementConstants, tree_depth: u32) -> f64 {
    consts.c_low_prime * (stage as f64 - tree_depth as f64 - 1.0).exp2()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FastConfig {
    pub consts: RefinementConstants,
    /// Finish with the reference loop if the final sweep finds loose pairs.
    pub safety_net: bool,
    /// Maintain a shadow triangulation and audit the refinement invariants.
    pub instrument: bool,
    pub max_insertions: Option<usize>,
}

impl FastConfig {
    pub fn new(beta: f64) -> Self {
        FastConfig { consts: RefinementConstants::operational(beta), safety_net: true, instrument: false, max_insertions: None }
    }

    pub fn with_consts(mut self, c: RefinementConstants) -> Self {
        self.consts = c;
        self
    }

    pub fn instrumented(mut self) -> Self {
        self.instrument = true;
        self
    }

    pub fn without_safety_net(mut self) -> Self {
        self.safety_net = false;
        self
    }

    pub fn with_max_insertions(mut self, cap: usize) -> Self {
        self.max_insertions = Some(cap);
        self
    }

    fn baseline(&self) -> RefinerConfig {
        RefinerConfig { beta: self.consts.beta, mode: InsertionMode::OffCenter, max_insertions: self.max_insertions }
    }
}

/// Per-level FIFO buckets of nodes, deepest level first.
#[derive(Clone, Debug, Default)]
pub struct LevelHeap {
    buckets: Vec<VecDeque<NodeId>>,
    queued: Vec<bool>,
    pushes: Vec<u32>,
    cursor: usize,
}

impl LevelHeap {
    pub fn new(levels: usize, nodes: usize) -> Self {
        LevelHeap {
            buckets: vec![VecDeque::new(); levels],
            queued: vec![false; nodes],
            pushes: vec![0; nodes],
            cursor: levels.saturating_sub(1),
        }
    }

    /// Queue `node` unless it is already waiting.
    pub fn push(&mut self, node: NodeId, depth: u32) {
        if self.queued[node as usize] {
            return;
        }
        self.queued[node as usize] = true;
        self.pushes[node as usize] += 1;
        self.buckets[depth as usize].push_back(node);
        self.cursor = self.cursor.max(depth as usize);
    }

    pub fn pop(&mut self) -> Option<(NodeId, u32)> {
        loop {
            if let Some(n) = self.buckets[self.cursor].pop_front() {
                self.queued[n as usize] = false;
                return Some((n, self.cursor as u32));
            }
            if self.cursor == 0 {
                return None;
            }
            self.cursor -= 1;
        }
    }

    /// Most times any node was queued after its first.
    pub fn max_reschedules(&self) -> u32 {
        self.pushes.iter().map(|&p| p.saturating_sub(1)).max().unwrap_or(0)
    }
}

/// A point with its activation depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivePoint {
    pub point: Point2,
    pub activation_depth: u32,
    pub active: bool,
}

impl ActivePoint {
    pub fn active_at(&self, depth: u32, c_span: u32) -> bool {
        self.active && self.activation_depth >= depth && depth + c_span >= self.activation_depth
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FastStats {
    pub tree_depth: u32,
    pub quadtree_nodes: usize,
    pub quadtree_leaves: usize,
    pub nodes_processed: usize,
    /// Node-processing events per depth.
    pub level_events: Vec<usize>,
    pub reschedule_max: u32,
    pub active_per_cell_max: usize,
    pub pair_tests: usize,
    pub deactivated: usize,
    /// Steiner or split points with no cell meeting the size bounds.
    pub storage_misses: usize,
    /// Loose pairs left by the main loop.
    pub final_sweep_loose: usize,
    pub safety_net_triggered: bool,
    pub safety_net_insertions: usize,
    pub build_time: Duration,
    pub main_time: Duration,
    pub delaunay_time: Duration,
    pub sweep_time: Duration,
}

impl FastStats {
    pub fn record(&self) -> Vec<(&'static str, String)> {
        let hist: Vec<String> = self.level_events.iter().map(|c| c.to_string()).collect();
        vec![
            ("tree_depth", self.tree_depth.to_string()),
            ("quadtree_nodes", self.quadtree_nodes.to_string()),
            ("quadtree_leaves", self.quadtree_leaves.to_string()),
            ("nodes_processed", self.nodes_processed.to_string()),
            ("level_events", hist.join(",")),
            ("reschedule_max", self.reschedule_max.to_string()),
            ("active_per_cell_max", self.active_per_cell_max.to_string()),
            ("pair_tests", self.pair_tests.to_string()),
            ("deactivated", self.deactivated.to_string()),
            ("storage_misses", self.storage_misses.to_string()),
            ("final_sweep_loose", self.final_sweep_loose.to_string()),
            ("safety_net", self.safety_net_triggered.to_string()),
            ("safety_net_insertions", self.safety_net_insertions.to_string()),
            ("build_ms", format!("{:.3}", self.build_time.as_secs_f64() * 1e3)),
            ("main_ms", format!("{:.3}", self.main_time.as_secs_f64() * 1e3)),
            ("delaunay_ms", format!("{:.3}", self.delaunay_time.as_secs_f64() * 1e3)),
            ("sweep_ms", format!("{:.3}", self.sweep_time.as_secs_f64() * 1e3)),
        ]
    }
}

/// Counts of invariant violations seen by an instrumented run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantReport {
    pub stages: usize,
    /// Shortest loose pair below the stage bound.
    pub below_stage_bound: usize,
    /// Stored point whose feature size misses its cell's size bounds.
    pub lfs_sandwich: usize,
    /// Deactivated vertex acting as a pair end, moonstruck point or leaf occupant.
    pub inactive_use: usize,
    /// Large-gap vertex with no short loose pair nearby.
    pub gap: usize,
    /// Moonstruck point with feature size too small for its pair.
    pub moonstruck_lfs: usize,
    /// New loose pair shorter than the stage bound right after an insertion.
    pub short_after_insert: usize,
    pub active_count_max: usize,
    pub final_sweep_loose: usize,
    pub details: Vec<String>,
}

impl InvariantReport {
    pub fn failures(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        let counts = [
            ("stage-bound", self.below_stage_bound),
            ("lfs-sandwich", self.lfs_sandwich),
            ("inactive-use", self.inactive_use),
            ("gap", self.gap),
            ("moonstruck-lfs", self.moonstruck_lfs),
            ("short-after-insert", self.short_after_insert),
        ];
        for (name, n) in counts {
            if n > 0 {
                f.push(name);
            }
        }
        if self.active_count_max > ACTIVE_COUNT_BOUND {
            f.push("active-count");
        }
        if self.final_sweep_loose > 0 {
            f.push("final-sweep");
        }
        f
    }

    fn note(&mut self, msg: String) {
        if self.details.len() < 64 {
            self.details.push(msg);
        }
    }
}

#[derive(Clone, Debug)]
pub struct FastOutcome {
    pub mesh: RefinedMesh,
    pub fast: FastStats,
    pub invariants: Option<InvariantReport>,
}

/// Normalize `raw` and refine.
pub fn fast_refine_raw(raw: &[Point2], cfg: &FastConfig) -> Result<FastOutcome, RefineError> {
    let (pts, t) = normalize_input(raw)?;
    let mut out = fast_refine(&pts, cfg)?;
    out.mesh.transform = t;
    Ok(out)
}

/// Refine points already normalized into `[1/3, 2/3]^2`.
pub fn fast_refine(input: &[Point2], cfg: &FastConfig) -> Result<FastOutcome, RefineError> {
    cfg.baseline().validate()?;
    if !(cfg.consts.c_reach > 0.0) {
        return Err(RefineError::Config("c_reach must be positive".into()));
    }
    if !input.is_empty() {
        validate_points(input)?;
    }
    if let Some(p) = input.iter().find(|p| !(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0)) {
        return Err(RefineError::Config(format!("input point {p} is outside the open unit square; normalize first")));
    }
    let mut run = Run::new(input, cfg)?;
    run.main_loop()?;
    run.finish()
}

/// Run with instrumentation and return the invariant report.
pub fn instrumented_run(input: &[Point2], cfg: &FastConfig) -> Result<(FastOutcome, InvariantReport), RefineError> {
    let mut c = *cfg;
    c.instrument = true;
    let out = fast_refine(input, &c)?;
    let rep = out.invariants.clone().unwrap_or_default();
    Ok((out, rep))
}

struct Shadow {
    tri: Triangulation,
    report: InvariantReport,
}

/// Every point of the current set, filed under the quadtree leaf that
/// contains it, with per-node subtree counts for pruning disk queries.
struct Residents {
    lists: Vec<Vec<u32>>,
    sub: Vec<u32>,
}

impl Residents {
    fn new(tree: &Quadtree) -> Self {
        let mut r = Residents { lists: vec![Vec::new(); tree.len()], sub: vec![0; tree.len()] };
        for leaf in tree.leaves() {
            for &i in &tree.node(leaf).points {
                r.file(tree, leaf, i);
            }
        }
        r
    }

    fn file(&mut self, tree: &Quadtree, leaf: NodeId, i: u32) {
        self.lists[leaf as usize].push(i);
        let mut n = leaf;
        while n != NO_NODE {
            self.sub[n as usize] += 1;
            n = tree.node(n).parent;
        }
    }

    fn add(&mut self, tree: &Quadtree, i: u32, p: Point2) {
        let leaf = tree.locate(p, MAX_DEPTH);
        self.file(tree, leaf, i);
    }

    /// Whether some point strictly inside the disk `(c, r_in)` exists, or some
    /// point within `r_out` of `c` passes `test`.
    fn any(
        &self,
        tree: &Quadtree,
        pts: &[Point2],
        c: Point2,
        r_in: f64,
        r_out: f64,
        mut test: impl FnMut(u32, Point2) -> bool,
    ) -> bool {
        let mut stack = starts(tree, c, r_out);
        while let Some(id) = stack.pop() {
            if self.sub[id as usize] == 0 {
                continue;
            }
            let n = tree.node(id);
            let (near, far) = box_range(n, c);
            if near > r_out {
                continue;
            }
            if far < r_in {
                return true;
            }
            match n.children {
                Some(kids) => stack.extend(kids),
                None => {
                    for &i in &self.lists[id as usize] {
                        let x = pts[i as usize];
                        if x.dist(c) <= r_out && test(i, x) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn within(&self, tree: &Quadtree, pts: &[Point2], c: Point2, r: f64, out: &mut Vec<u32>) {
        out.clear();
        let mut stack = starts(tree, c, r);
        while let Some(id) = stack.pop() {
            if self.sub[id as usize] == 0 {
                continue;
            }
            let n = tree.node(id);
            if box_range(n, c).0 > r {
                continue;
            }
            match n.children {
                Some(kids) => stack.extend(kids),
                None => out.extend(self.lists[id as usize].iter().copied().filter(|&i| pts[i as usize].dist(c) <= r)),
            }
        }
    }
}

/// Nodes whose cells together cover the bounding box of the disk `(c, r)`,
/// each at least as large as the disk.
fn starts(tree: &Quadtree, c: Point2, r: f64) -> Vec<NodeId> {
    let level = if r > 0.0 { (-(2.0 * r).log2()).floor().clamp(0.0, tree.depth() as f64) as u32 } else { tree.depth() };
    let cl = |v: f64| v.clamp(0.0, 1.0);
    let mut out = Vec::with_capacity(4);
    for (x, y) in [(c.x - r, c.y - r), (c.x + r, c.y - r), (c.x - r, c.y + r), (c.x + r, c.y + r)] {
        let n = tree.locate(Point2::new(cl(x), cl(y)), level);
        if !out.contains(&n) {
            out.push(n);
        }
    }
    // a coarser start can cover a finer one
    let keep: Vec<NodeId> = out
        .iter()
        .copied()
        .filter(|&n| !out.iter().any(|&m| m != n && is_ancestor(tree, m, n)))
        .collect();
    keep
}

fn is_ancestor(tree: &Quadtree, a: NodeId, mut n: NodeId) -> bool {
    let da = tree.node(a).depth;
    while tree.node(n).depth > da {
        n = tree.node(n).parent;
    }
    n == a
}

/// Nearest and farthest distance from `c` to the closed cell of `n`.
fn box_range(n: &QuadtreeNode, c: Point2) -> (f64, f64) {
    let (o, s) = (n.corner(), n.size());
    let dx = (o.x - c.x).max(c.x - (o.x + s)).max(0.0);
    let dy = (o.y - c.y).max(c.y - (o.y + s)).max(0.0);
    let fx = (c.x - o.x).abs().max((o.x + s - c.x).abs());
    let fy = (c.y - o.y).abs().max((o.y + s - c.y).abs());
    ((dx * dx + dy * dy).sqrt(), (fx * fx + fy * fy).sqrt())
}

struct Run<'c> {
    cfg: &'c FastConfig,
    pts: Vec<Point2>,
    kinds: Vec<VertexKind>,
    act: Vec<u32>,
    alive: Vec<bool>,
    keys: FxHashSet<(u64, u64)>,
    tree: Quadtree,
    residents: Residents,
    frame: BoundingFrame,
    heap: LevelHeap,
    stats: RefinementStats,
    fast: FastStats,
    n_initial: usize,
    shadow: Option<Shadow>,
    // active points near the node being processed
    near: Vec<u32>,
    // nodes of the current level holding active points
    occupied: FxHashMap<(u64, u64), NodeId>,
    scratch: Vec<u32>,
}

impl<'c> Run<'c> {
    fn new(input: &[Point2], cfg: &'c FastConfig) -> Result<Self, RefineError> {
        let t0 = Instant::now();
        let mut pts = input.to_vec();
        pts.extend(BoundingFrame::initial_points());
        let mut kinds = vec![VertexKind::Input; input.len()];
        kinds.resize(pts.len(), VertexKind::Frame);
        let tree = Quadtree::build(&pts, cfg.consts.quadtree_params())?;
        let mut act = vec![0u32; pts.len()];
        for id in tree.leaves() {
            let n = tree.node(id);
            for &i in &n.points {
                act[i as usize] = n.depth;
            }
        }
        let depth = tree.depth();
        let mut heap = LevelHeap::new(depth as usize + 1, tree.len());
        for d in (0..=depth).rev() {
            let mut level: Vec<NodeId> = tree.level(d).collect();
            level.sort_by_cached_key(|&id| morton(tree.node(id).ix, tree.node(id).iy));
            for id in level {
                heap.push(id, d);
            }
        }
        let keys = pts.iter().map(|p| p.key()).collect();
        let residents = Residents::new(&tree);
        let fast = FastStats {
            tree_depth: depth,
            quadtree_nodes: tree.len(),
            quadtree_leaves: tree.leaf_count(),
            level_events: vec![0; depth as usize + 1],
            build_time: t0.elapsed(),
            ..Default::default()
        };
        let shadow = if cfg.instrument {
            Some(Shadow { tri: Triangulation::build(&pts)?, report: InvariantReport::default() })
        } else {
            None
        };
        let n = pts.len();
        Ok(Run {
            cfg,
            alive: vec![true; n],
            act,
            keys,
            tree,
            residents,
            frame: BoundingFrame::new(),
            heap,
            stats: RefinementStats { input_count: input.len(), ..Default::default() },
            fast,
            n_initial: n,
            shadow,
            near: Vec::new(),
            occupied: FxHashMap::default(),
            scratch: Vec::new(),
            kinds,
            pts,
        })
    }

    fn capped(&self) -> bool {
        self.cfg.max_insertions.is_some_and(|c| self.stats.insertions() >= c)
    }

    fn main_loop(&mut self) -> Result<(), RefineError> {
        let t0 = Instant::now();
        let mut prev = self.tree.depth();
        self.stage_boundary(prev);
        self.index_level(prev);
        while let Some((node, depth)) = self.heap.pop() {
            while depth < prev {
                self.promote(prev);
                prev -= 1;
                self.stage_boundary(prev);
                self.index_level(prev);
            }
            if self.capped() {
                self.stats.capped = true;
                break;
            }
            self.process(node, depth)?;
        }
        self.fast.reschedule_max = self.heap.max_reschedules();
        self.fast.main_time = t0.elapsed();
        Ok(())
    }

    fn index_level(&mut self, depth: u32) {
        self.occupied.clear();
        for id in self.tree.level(depth) {
            let n = self.tree.node(id);
            if !n.points.is_empty() {
                self.occupied.insert((n.ix, n.iy), id);
            }
        }
    }

    /// Move points of level `from` that stay active one level up to their
    /// parents; the rest stop starting pairs.
    fn promote(&mut self, from: u32) {
        let to = from - 1;
        let ids: Vec<NodeId> = self.tree.level(from).collect();
        for id in ids {
            let parent = self.tree.node(id).parent;
            let moved = std::mem::take(self.tree.points_of(id));
            for i in moved {
                if to + self.cfg.consts.c_span >= self.act[i as usize] {
                    self.tree.points_of(parent).push(i);
                } else {
                    self.alive[i as usize] = false;
                    self.fast.deactivated += 1;
                }
            }
        }
    }

    fn process(&mut self, node: NodeId, depth: u32) -> Result<(), RefineError> {
        self.fast.nodes_processed += 1;
        self.fast.level_events[depth as usize] += 1;
        let mine: Vec<u32> = self.tree.node(node).points.clone();
        if mine.is_empty() {
            return Ok(());
        }
        self.fast.active_per_cell_max = self.fast.active_per_cell_max.max(mine.len());
        let reach = self.cfg.consts.c_reach * self.tree.node(node).size();
        self.gather_near(node);
        let mut sorted_mine = mine.clone();
        sorted_mine.sort_unstable();
        let mut all: Vec<(f64, u32)> = Vec::new();
        let mut tests: Vec<(f64, u32)> = Vec::new();
        for &p in &mine {
            let pp = self.pts[p as usize];
            let p_old = self.act[p as usize] > depth;
            all.clear();
            tests.clear();
            for &q in &self.near {
                if q == p {
                    continue;
                }
                let d = pp.dist(self.pts[q as usize]);
                if d > reach {
                    continue;
                }
                all.push((d, q));
                // pairs inside one node are tested once
                if q < p && sorted_mine.binary_search(&q).is_ok() {
                    continue;
                }
                // tested one level down already, and leaves only fill up
                if p_old && self.act[q as usize] > depth && d <= 0.5 * reach {
                    continue;
                }
                tests.push((d, q));
            }
            if tests.is_empty() {
                continue;
            }
            let k = all.len().min(PROBES);
            if all.len() > k {
                all.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
            }
            tests.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, q) in &tests {
                if self.capped() {
                    return Ok(());
                }
                let known = self.blocked_by(p, q, &all[..k])?;
                if known == (true, true) {
                    continue;
                }
                self.handle_pair(node, depth, p, q, known)?;
            }
        }
        Ok(())
    }

    /// Active points of nodes at this level closer than the reach to `node`.
    fn gather_near(&mut self, node: NodeId) {
        self.near.clear();
        let n = self.tree.node(node);
        let k = self.cfg.consts.c_reach;
        let w = k.ceil() as i64;
        let top = (1i64 << n.depth) - 1;
        for dy in -w..=w {
            for dx in -w..=w {
                let gx = (dx.abs() - 1).max(0) as f64;
                let gy = (dy.abs() - 1).max(0) as f64;
                let (jx, jy) = (n.ix as i64 + dx, n.iy as i64 + dy);
                if gx * gx + gy * gy >= k * k || jx < 0 || jy < 0 || jx > top || jy > top {
                    continue;
                }
                if let Some(&m) = self.occupied.get(&(jx as u64, jy as u64)) {
                    self.near.extend_from_slice(&self.tree.node(m).points);
                }
            }
        }
    }

    fn allowed_sides(p: Point2, q: Point2) -> (bool, bool) {
        let same = (p.x == 0.0 && q.x == 0.0)
            || (p.x == 1.0 && q.x == 1.0)
            || (p.y == 0.0 && q.y == 0.0)
            || (p.y == 1.0 && q.y == 1.0);
        if !same {
            return (true, true);
        }
        let inside_left = orient2d(p, q, Point2::new(0.5, 0.5)) > 0.0;
        (inside_left, !inside_left)
    }

    /// Cheap sufficient test per leaf: it holds one of the nearer points.
    fn blocked_by(&self, p: u32, q: u32, nearer: &[(f64, u32)]) -> Result<(bool, bool), RefineError> {
        let (pp, qq) = (self.pts[p as usize], self.pts[q as usize]);
        let (dl, dr) = leaf_disks(pp, qq, self.cfg.consts.beta)?;
        let lim = dl.radius * dl.radius * (1.0 - 1e-9);
        let hit = |c: Point2| nearer.iter().any(|&(_, x)| x != q && self.pts[x as usize].dist2(c) < lim);
        Ok((hit(dl.center), hit(dr.center)))
    }

    /// The empty leaf of `pq`, left first.
    fn empty_side(&self, p: u32, q: u32, known: (bool, bool)) -> Result<Option<Side>, RefineError> {
        let beta = self.cfg.consts.beta;
        let (pp, qq) = (self.pts[p as usize], self.pts[q as usize]);
        let (allow_l, allow_r) = Self::allowed_sides(pp, qq);
        let (allow_l, allow_r) = (allow_l && !known.0, allow_r && !known.1);
        let (dl, dr) = leaf_disks(pp, qq, beta)?;
        for (allow, disk, side) in [(allow_l, dl, Side::Left), (allow_r, dr, Side::Right)] {
            if !allow {
                continue;
            }
            let r = disk.radius;
            let occupied = self.residents.any(&self.tree, &self.pts, disk.center, r * (1.0 - 1e-9), r * (1.0 + 1e-9), |i, x| {
                i != p && i != q && leaf_occupied(pp, qq, beta, side, x).unwrap_or(true)
            });
            if !occupied {
                return Ok(Some(side));
            }
        }
        Ok(None)
    }

    fn handle_pair(&mut self, node: NodeId, depth: u32, p: u32, q: u32, known: (bool, bool)) -> Result<(), RefineError> {
        let mut known = known;
        let beta = self.cfg.consts.beta;
        for _attempt in 0..4 {
            let (pp, qq) = (self.pts[p as usize], self.pts[q as usize]);
            self.fast.pair_tests += 1;
            let Some(side) = self.empty_side(p, q, known)? else { return Ok(()) };
            known = (false, false);
            let cr = crescent(pp, qq, beta, side)?;
            let mut found = std::mem::take(&mut self.scratch);
            self.residents.within(&self.tree, &self.pts, cr.outer.center, cr.outer.radius, &mut found);
            let mut moon_id = None;
            for &i in &found {
                let x = self.pts[i as usize];
                if !cr.contains(x) {
                    continue;
                }
                moon_id = Some(match moon_id {
                    None => i,
                    Some(b) => {
                        let bx = self.pts[b as usize];
                        match crate::geometry::in_circle(pp, qq, bx, x)? {
                            CirclePosition::Inside => i,
                            CirclePosition::On if x.lex_cmp(&bx).is_lt() => i,
                            _ => b,
                        }
                    }
                });
            }
            self.scratch = found;
            let moon = moon_id.map(|i| self.pts[i as usize]);
            let oc = off_center_from(pp, qq, beta, side, moon)?;
            if self.shadow.is_some() {
                self.audit_pair(depth, p, q, side, moon_id);
            }
            let c = oc.steiner;
            let mut mids = Vec::new();
            match self.frame.handle_encroachment(c, &mut mids) {
                Encroachment::Accept => {
                    if !self.keys.insert(c.key()) {
                        self.stats.duplicate_skip_count += 1;
                        return Ok(());
                    }
                    self.add_point(c, VertexKind::Steiner, depth, pp.dist(c))?;
                    self.stats.steiner_count += 1;
                    return Ok(());
                }
                Encroachment::RejectAndSplit => {
                    self.stats.rejected_encroaching_count += 1;
                    for m in mids {
                        if !self.keys.insert(m.key()) {
                            continue;
                        }
                        let half = self
                            .frame
                            .edges()
                            .iter()
                            .filter(|e| e.a == m || e.b == m)
                            .map(|e| e.a.dist(e.b))
                            .fold(f64::INFINITY, f64::min);
                        self.add_point(m, VertexKind::BoundarySplit, depth, half)?;
                        self.stats.boundary_split_count += 1;
                    }
                    if self.capped() {
                        return Ok(());
                    }
                }
            }
        }
        self.heap.push(node, depth);
        Ok(())
    }

    fn add_point(&mut self, c: Point2, kind: VertexKind, depth: u32, d: f64) -> Result<(), RefineError> {
        let id = self.pts.len() as u32;
        log::trace!("insert {kind:?} {c} at depth {depth}");
        self.pts.push(c);
        self.kinds.push(kind);
        self.alive.push(true);
        self.residents.add(&self.tree, id, c);
        let stored = match self.tree.insert_point(id, c, depth, d) {
            Ok(n) => n,
            Err(_) => {
                self.fast.storage_misses += 1;
                let n = self.tree.locate(c, depth);
                self.tree.points_of(n).push(id);
                n
            }
        };
        let sd = self.tree.node(stored).depth;
        self.act.push(sd);
        if sd == depth {
            self.heap.push(stored, depth);
            self.near.push(id);
            let n = self.tree.node(stored);
            self.occupied.insert((n.ix, n.iy), stored);
        }
        if self.shadow.is_some() {
            self.audit_insert(id, stored, depth)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<FastOutcome, RefineError> {
        let Run { cfg, pts, kinds, frame, mut stats, mut fast, n_initial, shadow, .. } = self;
        let t0 = Instant::now();
        let tri = Triangulation::build(&pts)?;
        fast.delaunay_time = t0.elapsed();
        let t1 = Instant::now();
        let beta = cfg.consts.beta;
        let mut queue = PairQueue::default();
        queue.seed_all(&tri, beta);
        let loose = tri.edges().into_iter().filter(|&(a, b)| tri.edge_loose_side(a, b, beta).is_some()).count();
        fast.final_sweep_loose = loose;
        fast.sweep_time = t1.elapsed();
        let initial = pts[..n_initial].to_vec();
        let mut invariants = shadow.map(|s| s.report);
        if let Some(r) = invariants.as_mut() {
            r.final_sweep_loose = loose;
        }
        let mut state = MeshState::from_parts(tri, kinds, frame, std::mem::take(&mut stats), initial);
        if loose > 0 && cfg.safety_net && !state.stats.capped {
            fast.safety_net_triggered = true;
            let before = state.stats.insertions();
            remove_loose_pairs(&mut state, &cfg.baseline(), &mut queue, None)?;
            fast.safety_net_insertions = state.stats.insertions() - before;
            log::info!("fast: safety net inserted {} points for {loose} loose pairs", fast.safety_net_insertions);
        }
        state.stats.work_time = fast.build_time + fast.main_time + t1.elapsed().saturating_sub(fast.sweep_time);
        log::info!(
            "fast done: depth {}, {} steiner, build {:?}, main {:?}",
            fast.tree_depth,
            state.stats.steiner_count,
            fast.build_time,
            fast.main_time
        );
        let mesh = state.finish(Transform::identity());
        Ok(FastOutcome { mesh, fast, invariants })
    }
}

fn morton(x: u64, y: u64) -> u128 {
    let spread = |v: u64| -> u128 {
        let mut r = 0u128;
        for b in 0..64 {
            r |= (((v >> b) & 1) as u128) << (2 * b);
        }
        r
    };
    spread(x) | (spread(y) << 1)
}

// Instrumentation. The shadow triangulation holds every point of the
// current set, so it answers the unrestricted questions exactly.
impl Run<'_> {
    fn eta_at(&self, depth: u32) -> f64 {
        let d = self.tree.depth();
        eta_bound(d - depth + 1, &self.cfg.consts, d)
    }

    fn stage_boundary(&mut self, depth: u32) {
        if self.shadow.is_none() {
            return;
        }
        let beta = self.cfg.consts.beta;
        let eta = self.eta_at(depth);
        let c = self.cfg.consts;
        let active_max = self.tree.level(depth).map(|id| self.tree.node(id).points.len()).max().unwrap_or(0);
        let shadow = self.shadow.as_mut().expect("instrumented");
        let tri = &shadow.tri;
        let rep = &mut shadow.report;
        rep.stages += 1;
        rep.active_count_max = rep.active_count_max.max(active_max);
        let loose = tri.loose_pairs(beta);
        let key_id: FxHashMap<(u64, u64), u32> =
            tri.points().iter().enumerate().map(|(i, p)| (p.key(), i as u32)).collect();
        for lp in &loose {
            if lp.length < eta * (1.0 - 1e-9) {
                rep.below_stage_bound += 1;
                rep.note(format!("stage bound, depth {depth}: loose pair {} {} length {} < eta {eta}", lp.p, lp.q, lp.length));
            }
            let (a, b) = (key_id[&lp.p.key()], key_id[&lp.q.key()]);
            if !self.alive[a as usize] && !self.alive[b as usize] {
                rep.inactive_use += 1;
                rep.note(format!("inactive use, depth {depth}: loose pair {} {} has no active end", lp.p, lp.q));
            }
            let Some(ap) = tri.edge_apexes(a, b) else { continue };
            let r = if lp.empty_side == Side::Left { ap.left } else { ap.right };
            if r == GHOST || !crescent(lp.p, lp.q, beta, lp.empty_side).is_ok_and(|cr| cr.contains(tri.point(r))) {
                continue;
            }
            let lfs_w = second_nearest(tri.points(), tri.point(r));
            if lfs_w < eta / c.c_gbu * (1.0 - 1e-9) {
                rep.moonstruck_lfs += 1;
                rep.note(format!("moonstruck lfs, depth {depth}: moonstruck {} has lfs {lfs_w}", tri.point(r)));
            }
        }
        // a vertex with a large gap sits near a short loose pair
        for v in 0..tri.num_vertices() as VertexId {
            let Ok(g) = crate::loose::gap_in(tri, v) else { continue };
            if g > c.c_g {
                let w = tri.point(v);
                let lfs_w = second_nearest(tri.points(), w);
                if !loose.iter().any(|lp| lp.length <= c.c_gbu * lfs_w) {
                    rep.gap += 1;
                    rep.note(format!("gap, depth {depth}: {w} has gap {g} and no loose pair within reach"));
                }
            }
        }
    }

    fn audit_pair(&mut self, depth: u32, p: u32, q: u32, side: Side, moon: Option<u32>) {
        let beta = self.cfg.consts.beta;
        let shadow = self.shadow.as_mut().expect("instrumented");
        let rep = &mut shadow.report;
        if shadow.tri.edge_loose_side(p, q, beta) != Some(side) {
            rep.inactive_use += 1;
            rep.note(format!("inactive use, depth {depth}: local search and triangulation disagree on pair {p}-{q}"));
        }
        if let Some(w) = moon {
            if !self.alive[w as usize] {
                rep.inactive_use += 1;
                rep.note(format!("inactive use, depth {depth}: deactivated {} is moonstruck for {p}-{q}", self.pts[w as usize]));
            }
        }
    }

    fn audit_insert(&mut self, id: u32, stored: NodeId, depth: u32) -> Result<(), RefineError> {
        let beta = self.cfg.consts.beta;
        let eta = self.eta_at(depth);
        let c = self.cfg.consts;
        let x = self.pts[id as usize];
        let s = self.tree.node(stored).size();
        let lfs = second_nearest(&self.pts[..id as usize], x);
        let shadow = self.shadow.as_mut().expect("instrumented");
        let rep = &mut shadow.report;
        if self.kinds[id as usize] == VertexKind::Steiner
            && (lfs < c.c_low * s * (1.0 - 1e-9) || lfs > c.c_up * s * (1.0 + 1e-9))
        {
            rep.lfs_sandwich += 1;
            rep.note(format!("lfs sandwich, depth {depth}: lfs {lfs} of {x} outside [{}, {}]", c.c_low * s, c.c_up * s));
        }
        if let InsertOutcome::Inserted(v) = shadow.tri.insert(x)? {
            for t in shadow.tri.vertex_triangles(v) {
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    if shadow.tri.edge_loose_side(a, b, beta).is_some() {
                        let len = shadow.tri.point(a).dist(shadow.tri.point(b));
                        if len < eta * (1.0 - 1e-9) {
                            rep.short_after_insert += 1;
                            rep.note(format!("short after insert, depth {depth}: new loose edge of length {len} < eta {eta}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn second_nearest(pts: &[Point2], x: Point2) -> f64 {
    crate::geometry::lfs(x, pts).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{refine, RefinerConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn consts() -> RefinementConstants {
        RefinementConstants::operational(SQRT_2)
    }

    #[test]
    fn theoretical_constants() {
        let c = RefinementConstants::theoretical(SQRT_2, QuadtreeParams::default(), 0.25);
        assert!((c.c_gbu - 8.4e3).abs() < 1e2, "{}", c.c_gbu);
        assert!((c.c_reach - 1.43e5).abs() < 2e3, "{}", c.c_reach);
        assert_eq!(c.c_span, 21);
        assert!(c.violations().is_empty());
        assert!(!consts().with_c_reach(1.0).violations().is_empty());
    }

    #[test]
    fn eta_examples() {
        let c = consts();
        let d = 10;
        assert!((eta_bound(1, &c, d) - c.c_low_prime / 1024.0).abs() < 1e-18);
        for i in 1..d {
            assert!((eta_bound(i + 1, &c, d) - 2.0 * eta_bound(i, &c, d)).abs() < 1e-15);
        }
        assert_eq!(eta_bound(d + 1, &c, d), c.c_low_prime);
    }

    #[test]
    fn level_heap_order() {
        let mut h = LevelHeap::new(4, 6);
        h.push(0, 1);
        h.push(1, 3);
        h.push(2, 3);
        h.push(3, 0);
        h.push(1, 3);
        assert_eq!(h.pop(), Some((1, 3)));
        h.push(1, 3);
        assert_eq!(h.pop(), Some((2, 3)));
        assert_eq!(h.pop(), Some((1, 3)));
        assert_eq!(h.pop(), Some((0, 1)));
        assert_eq!(h.pop(), Some((3, 0)));
        assert_eq!(h.pop(), None);
        assert_eq!(h.max_reschedules(), 1);
    }

    #[test]
    fn single_point_matches_baseline_quality() {
        let input = [Point2::new(0.5, 0.5)];
        let fast = fast_refine(&input, &FastConfig::new(SQRT_2)).unwrap();
        let base = refine(&input, &RefinerConfig::new(SQRT_2)).unwrap();
        let alpha = alpha_for_beta(SQRT_2).to_degrees();
        assert!(fast.mesh.stats.min_angle_deg >= alpha - 1e-7);
        assert!(base.stats.min_angle_deg >= alpha - 1e-7);
        assert_eq!(fast.fast.final_sweep_loose, 0);
        assert!(!fast.fast.safety_net_triggered);
    }

    #[test]
    fn frame_only() {
        let fast = fast_refine(&[], &FastConfig::new(SQRT_2)).unwrap();
        let base = refine(&[], &RefinerConfig::new(SQRT_2)).unwrap();
        assert_eq!(fast.fast.final_sweep_loose, 0);
        let (a, b) = (fast.mesh.stats.final_vertex_count as f64, base.stats.final_vertex_count as f64);
        assert!(a <= 3.0 * b && b <= 3.0 * a);
    }

    #[test]
    fn random_inputs_clean_and_comparable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let raw: Vec<Point2> = (0..300).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
        let fast = fast_refine_raw(&raw, &FastConfig::new(SQRT_2)).unwrap();
        let base = crate::baseline::refine_raw(&raw, &RefinerConfig::new(SQRT_2)).unwrap();
        assert_eq!(fast.fast.final_sweep_loose, 0);
        assert!(fast.mesh.triangulation.loose_pairs(SQRT_2).is_empty());
        let ratio = fast.mesh.stats.steiner_count as f64 / base.stats.steiner_count as f64;
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn instrumented_clean_and_controls() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<Point2> = (0..60).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
        let (pts, _) = normalize_input(&raw).unwrap();
        let (_, rep) = instrumented_run(&pts, &FastConfig::new(SQRT_2)).unwrap();
        assert!(rep.failures().is_empty(), "{rep:?}");
        let span0 = FastConfig::new(SQRT_2).with_consts(consts().with_c_span(0)).without_safety_net();
        let (_, rep) = instrumented_run(&pts, &span0).unwrap();
        assert!(rep.inactive_use > 0);
        let short = FastConfig::new(SQRT_2).with_consts(consts().with_c_reach(0.1)).without_safety_net();
        let (out, _) = instrumented_run(&pts, &short).unwrap();
        assert!(out.fast.final_sweep_loose > 0);
    }

    #[test]
    fn safety_net_repairs_short_reach() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw: Vec<Point2> = (0..80).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
        let cfg = FastConfig::new(SQRT_2).with_consts(consts().with_c_reach(0.1));
        let out = fast_refine_raw(&raw, &cfg).unwrap();
        assert!(out.fast.safety_net_triggered);
        assert!(out.mesh.triangulation.loose_pairs(SQRT_2).is_empty());
    }

    #[test]
    fn cap_stops_early() {
        let raw = [Point2::new(0.1, 0.1), Point2::new(0.1001, 0.1), Point2::new(0.9, 0.7)];
        let out = fast_refine_raw(&raw, &FastConfig::new(SQRT_2).with_max_insertions(5)).unwrap();
        assert!(out.mesh.stats.capped);
        assert!(out.mesh.stats.insertions() <= 5 + 4);
    }
}
