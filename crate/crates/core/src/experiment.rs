//! Input generators, benchmark sweeps and the invariant verification harness.

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustc_hash::FxHashSet;

use crate::audit::{audit_mesh, format_record, MeshAudit};
use crate::baseline::{refine_raw, InsertionMode, RefinerConfig};
use crate::delaunay::Triangulation;
use crate::error::RefineError;
use crate::fast::{
    fast_refine_raw, instrumented_run, FastConfig, InvariantReport, RefinementConstants, ACTIVE_COUNT_BOUND,
};
use crate::frame::{normalize_input, BoundingFrame};
use crate::geometry::{alpha_for_beta, Point2};
use crate::io as mesh_io;
use crate::mesh::RefinedMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Generator {
    Uniform,
    Clustered,
    Grid,
    Circle,
}

impl Generator {
    pub const ALL: [Generator; 4] = [Generator::Uniform, Generator::Clustered, Generator::Grid, Generator::Circle];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Uniform => "uniform",
            Generator::Clustered => "clustered",
            Generator::Grid => "grid",
            Generator::Circle => "circle",
        }
    }

    /// `n` distinct points in the unit square. `grid` ignores the seed.
    pub fn generate(self, n: usize, seed: u64) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = FxHashSet::default();
        let mut out = Vec::with_capacity(n);
        let mut push = |p: Point2, out: &mut Vec<Point2>| {
            if seen.insert(p.key()) {
                out.push(p);
            }
        };
        match self {
            Generator::Uniform => {
                while out.len() < n {
                    push(Point2::new(rng.gen(), rng.gen()), &mut out);
                }
            }
            Generator::Clustered => {
                let k = (n / 50).max(1);
                let centers: Vec<Point2> =
                    (0..k).map(|_| Point2::new(rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9))).collect();
                let spread = Normal::new(0.0, 0.02).expect("positive deviation");
                while out.len() < n {
                    let c = centers[rng.gen_range(0..k)];
                    let p = Point2::new(c.x + spread.sample(&mut rng), c.y + spread.sample(&mut rng));
                    if (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y) {
                        push(p, &mut out);
                    }
                }
            }
            Generator::Grid => {
                let side = (n as f64).sqrt().ceil().max(1.0) as usize;
                let h = 1.0 / side as f64;
                for i in 0..n {
                    push(Point2::new((i % side) as f64 * h, (i / side) as f64 * h), &mut out);
                }
            }
            Generator::Circle => {
                while out.len() < n {
                    let t = rng.gen::<f64>() * std::f64::consts::TAU;
                    push(Point2::new(0.5 + 0.5 * t.cos(), 0.5 + 0.5 * t.sin()), &mut out);
                }
            }
        }
        out
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Generator::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| format!("unknown generator {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    BaselineOffCenter,
    BaselineCircumcenter,
    Fast,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::BaselineOffCenter, Algorithm::BaselineCircumcenter, Algorithm::Fast];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BaselineOffCenter => "baseline-offcenter",
            Algorithm::BaselineCircumcenter => "baseline-circumcenter",
            Algorithm::Fast => "fast",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// Settings shared by every algorithm in a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub beta: f64,
    pub max_insertions: Option<usize>,
    /// Overrides the fast refiner's constants.
    pub consts: Option<RefinementConstants>,
}

impl RunSettings {
    pub fn new(beta: f64) -> Self {
        RunSettings { beta, max_insertions: None, consts: None }
    }

    pub fn with_max_insertions(mut self, cap: Option<usize>) -> Self {
        self.max_insertions = cap;
        self
    }
}

/// Refine raw (un-normalized) points.
pub fn run_algorithm(alg: Algorithm, raw: &[Point2], s: &RunSettings) -> Result<RefinedMesh, RefineError> {
    match alg {
        Algorithm::BaselineOffCenter | Algorithm::BaselineCircumcenter => {
            let mode =
                if alg == Algorithm::BaselineOffCenter { InsertionMode::OffCenter } else { InsertionMode::Circumcenter };
            let cfg = RefinerConfig { beta: s.beta, mode, max_insertions: s.max_insertions };
            refine_raw(raw, &cfg)
        }
        Algorithm::Fast => {
            let mut cfg = FastConfig::new(s.beta);
            if let Some(c) = s.consts {
                cfg = cfg.with_consts(c);
            }
            cfg.max_insertions = s.max_insertions;
            Ok(fast_refine_raw(raw, &cfg)?.mesh)
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub generator: Generator,
    pub n: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub beta: f64,
    pub steiner_count: usize,
    pub vertex_count: usize,
    pub triangle_count: usize,
    /// Best of the repeats; excludes the final Delaunay construction and I/O.
    pub wall_time: Duration,
    pub capped: bool,
    pub audit_pass: bool,
    /// Read-back audit of the written files agrees with the in-memory one.
    pub readback_match: Option<bool>,
    pub error: Option<String>,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.audit_pass && self.readback_match != Some(false)
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub generator: Generator,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub settings: RunSettings,
    /// Timed runs per instance; the fastest counts.
    pub repeats: usize,
    /// Write each mesh here and audit it again from the files.
    pub readback_dir: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(generator: Generator, sizes: Vec<usize>, seeds: Vec<u64>, algorithms: Vec<Algorithm>, beta: f64) -> Self {
        BenchConfig {
            generator,
            sizes,
            seeds,
            algorithms,
            settings: RunSettings::new(beta),
            repeats: 1,
            readback_dir: None,
        }
    }
}

/// Audit a mesh written to disk, reading it back first.
pub fn readback_audit(base: &std::path::Path, beta: f64) -> Result<MeshAudit, String> {
    let files = mesh_io::read_mesh(base).map_err(|e| e.to_string())?;
    let tri = files.triangulate().map_err(|e| e.to_string())?;
    Ok(crate::audit::audit(&tri, &files.kinds, beta))
}

fn bench_instance(cfg: &BenchConfig, n: usize, seed: u64, alg: Algorithm) -> BenchRow {
    let beta = cfg.settings.beta;
    let mut row = BenchRow {
        generator: cfg.generator,
        n,
        seed,
        algorithm: alg,
        beta,
        steiner_count: 0,
        vertex_count: 0,
        triangle_count: 0,
        wall_time: Duration::ZERO,
        capped: false,
        audit_pass: false,
        readback_match: None,
        error: None,
    };
    let raw = cfg.generator.generate(n, seed);
    let mut best: Option<RefinedMesh> = None;
    for _ in 0..cfg.repeats.max(1) {
        match run_algorithm(alg, &raw, &cfg.settings) {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.stats.work_time < b.stats.work_time) {
                    best = Some(m);
                }
            }
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        }
    }
    let m = best.expect("at least one repeat");
    let a = audit_mesh(&m, beta);
    row.steiner_count = a.steiner_count;
    row.vertex_count = a.vertex_count;
    row.triangle_count = a.triangle_count;
    row.wall_time = m.stats.work_time;
    row.capped = m.stats.capped;
    row.audit_pass = a.pass();
    if let Some(dir) = &cfg.readback_dir {
        let base = dir.join(format!("{}-{}-{n}-{seed}", cfg.generator, alg));
        let res = mesh_io::write_mesh(&m, &base, None)
            .map_err(|e| e.to_string())
            .and_then(|_| readback_audit(&base, beta));
        match res {
            Ok(b) => row.readback_match = Some(b.matches(&a, 1e-9)),
            Err(e) => row.error = Some(e),
        }
    }
    log::info!("bench {} n={n} seed={seed} {alg}: steiner {} pass {}", cfg.generator, row.steiner_count, row.audit_pass);
    row
}

pub fn run_bench(cfg: &BenchConfig) -> BenchReport {
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        for &seed in &cfg.seeds {
            for &alg in &cfg.algorithms {
                rows.push(bench_instance(cfg, n, seed, alg));
            }
        }
    }
    BenchReport { rows }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(samples: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        samples.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    fn passing(&self, alg: Algorithm) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(move |r| r.algorithm == alg && r.ok())
    }

    /// Rows of `a` and `b` on the same instance, both passing.
    pub fn paired(&self, a: Algorithm, b: Algorithm) -> Vec<(&BenchRow, &BenchRow)> {
        self.passing(a)
            .filter_map(|ra| {
                self.passing(b)
                    .find(|rb| rb.generator == ra.generator && rb.n == ra.n && rb.seed == ra.seed)
                    .map(|rb| (ra, rb))
            })
            .collect()
    }

    /// Mean over paired instances of `steiner(a) / steiner(b)`.
    pub fn steiner_ratio(&self, a: Algorithm, b: Algorithm) -> Option<f64> {
        let ratios: Vec<f64> = self
            .paired(a, b)
            .iter()
            .filter(|(x, y)| x.steiner_count > 0 && y.steiner_count > 0)
            .map(|(x, y)| x.steiner_count as f64 / y.steiner_count as f64)
            .collect();
        (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
    }

    /// Total time of `a` over total time of `b`, on paired instances.
    pub fn time_ratio(&self, a: Algorithm, b: Algorithm) -> Option<f64> {
        let p = self.paired(a, b);
        let ta: f64 = p.iter().map(|(x, _)| x.wall_time.as_secs_f64()).sum();
        let tb: f64 = p.iter().map(|(_, y)| y.wall_time.as_secs_f64()).sum();
        (tb > 0.0).then(|| ta / tb)
    }

    /// Slope of log time against log(n + steiner) over passing rows.
    pub fn scaling_exponent(&self, alg: Algorithm) -> Option<f64> {
        let s: Vec<(f64, f64)> = self
            .passing(alg)
            .map(|r| ((r.n + r.steiner_count) as f64, r.wall_time.as_secs_f64()))
            .collect();
        loglog_slope(&s)
    }

    pub fn record(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("rows".to_string(), self.rows.len().to_string()),
            ("failed_rows".to_string(), self.rows.iter().filter(|r| !r.ok()).count().to_string()),
        ];
        let fmt = |v: Option<f64>| v.map_or_else(|| "na".to_string(), |x| format!("{x:.6}"));
        out.push((
            "offcenter_circumcenter_steiner_ratio".into(),
            fmt(self.steiner_ratio(Algorithm::BaselineOffCenter, Algorithm::BaselineCircumcenter)),
        ));
        out.push(("fast_baseline_steiner_ratio".into(), fmt(self.steiner_ratio(Algorithm::Fast, Algorithm::BaselineOffCenter))));
        out.push(("fast_baseline_time_ratio".into(), fmt(self.time_ratio(Algorithm::Fast, Algorithm::BaselineOffCenter))));
        for alg in Algorithm::ALL {
            if self.rows.iter().any(|r| r.algorithm == alg) {
                out.push((format!("scaling_exponent_{}", alg.name().replace('-', "_")), fmt(self.scaling_exponent(alg))));
            }
        }
        out
    }

    pub fn record_text(&self) -> String {
        let owned = self.record();
        let rec: Vec<(&str, String)> = owned.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        format_record(&rec)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "generator",
            "n",
            "seed",
            "algorithm",
            "beta",
            "steiner_count",
            "vertex_count",
            "triangle_count",
            "wall_time_ms",
            "capped",
            "audit_pass",
            "readback_match",
            "error",
        ])?;
        for r in &self.rows {
            c.write_record([
                r.generator.name().to_string(),
                r.n.to_string(),
                r.seed.to_string(),
                r.algorithm.name().to_string(),
                format!("{:.9}", r.beta),
                r.steiner_count.to_string(),
                r.vertex_count.to_string(),
                r.triangle_count.to_string(),
                format!("{:.3}", r.wall_time.as_secs_f64() * 1e3),
                r.capped.to_string(),
                r.audit_pass.to_string(),
                r.readback_match.map_or_else(|| "na".into(), |b| b.to_string()),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        c.flush()
    }
}

/// 2x2 table of "has a loose pair" against "min angle below alpha".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Contingency {
    pub loose_small: usize,
    pub loose_large: usize,
    pub tight_small: usize,
    pub tight_large: usize,
}

impl Contingency {
    pub fn add(&mut self, loose: bool, small_angle: bool) {
        match (loose, small_angle) {
            (true, true) => self.loose_small += 1,
            (true, false) => self.loose_large += 1,
            (false, true) => self.tight_small += 1,
            (false, false) => self.tight_large += 1,
        }
    }

    pub fn off_diagonal(&self) -> usize {
        self.loose_large + self.tight_small
    }
}

/// Classify the Delaunay triangulation of `pts`: does it have a loose pair,
/// and is its smallest angle at most `alpha`?
pub fn angle_trial(pts: &[Point2], beta: f64) -> Result<(bool, bool), RefineError> {
    let tri = Triangulation::build(pts)?;
    let loose = !tri.loose_pairs(beta).is_empty();
    let small = tri.min_angle() <= alpha_for_beta(beta);
    Ok((loose, small))
}

/// A random set of about `n` points (frame included) with its own beta, for
/// checking that loose pairs exist exactly when some angle is small. Even
/// seeds give a uniform set; odd seeds give the vertices of a small refined
/// mesh with every interior vertex jittered, which is often free of loose
/// pairs, so both diagonals of the table get populated.
pub fn angle_sample(n: usize, seed: u64) -> (Vec<Point2>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1e44a_u64);
    let beta = rng.gen_range(0.6..3.0);
    let room = n.saturating_sub(BoundingFrame::initial_points().len()).max(1);
    let mut pts = if seed.is_multiple_of(2) {
        let raw = Generator::Uniform.generate(room, seed);
        normalize_input(&raw).map(|(p, _)| p).unwrap_or_default()
    } else {
        let raw = Generator::Uniform.generate((n / 6).max(2), seed);
        let jitter = rng.gen_range(0.0..0.05);
        normalize_input(&raw)
            .and_then(|(p, _)| crate::baseline::refine(&p, &RefinerConfig::new(std::f64::consts::SQRT_2)))
            .map(|m| {
                m.points()
                    .iter()
                    .zip(&m.kinds)
                    .filter(|(_, k)| !k.is_boundary())
                    .take(room)
                    .map(|(p, _)| {
                        Point2::new(p.x + jitter * rng.gen_range(-1.0..1.0), p.y + jitter * rng.gen_range(-1.0..1.0))
                    })
                    .filter(|p| p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0)
                    .collect()
            })
            .unwrap_or_default()
    };
    let mut seen: FxHashSet<_> = pts.iter().map(|p| p.key()).collect();
    for p in BoundingFrame::initial_points() {
        if seen.insert(p.key()) {
            pts.push(p);
        }
    }
    (pts, beta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Injection {
    CSpan(u32),
    CReach(f64),
}

impl FromStr for Injection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
        match k.trim() {
            "c_span" => v.trim().parse().map(Injection::CSpan).map_err(|e| format!("c_span: {e}")),
            "c_reach" => v.trim().parse().map(Injection::CReach).map_err(|e| format!("c_reach: {e}")),
            other => Err(format!("unknown constant {other:?}; expected c_span or c_reach")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub beta: f64,
    pub c_shrink: Option<f64>,
    pub inject: Option<Injection>,
    /// Where failing inputs are written.
    pub dump_dir: PathBuf,
}

impl VerifyConfig {
    pub fn new(trials: usize) -> Self {
        VerifyConfig {
            sizes: vec![10, 20, 40, 60],
            trials,
            seed: 1,
            beta: std::f64::consts::SQRT_2,
            c_shrink: None,
            inject: None,
            dump_dir: std::env::temp_dir().join("meshrefine-verify"),
        }
    }

    pub fn constants(&self) -> RefinementConstants {
        let mut c = RefinementConstants::operational(self.beta);
        if let Some(s) = self.c_shrink {
            c = c.with_c_shrink(s);
        }
        match self.inject {
            Some(Injection::CSpan(s)) => c.with_c_span(s),
            Some(Injection::CReach(r)) => c.with_c_reach(r),
            None => c,
        }
    }

    fn fast_config(&self) -> FastConfig {
        let cfg = FastConfig::new(self.beta).with_consts(self.constants());
        if self.inject.is_some() {
            cfg.without_safety_net()
        } else {
            cfg
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckTally {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub trials: usize,
    pub contingency: Contingency,
    pub invariants: Vec<CheckTally>,
    pub active_count_max: usize,
    pub first_failure: Option<String>,
    pub dump: Option<PathBuf>,
}

/// Names in report order.
pub const CHECKS: [&str; 11] =
    ["loose-iff-small-angle", "baseline-monotone", "lfs-sandwich", "stage-bound", "gap", "moonstruck-lfs", "inactive-use", "active-count", "short-after-insert", "final-sweep", "quality"];

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.invariants.iter().all(|l| l.failures == 0)
    }

    pub fn failures_of(&self, name: &str) -> usize {
        self.invariants.iter().find(|l| l.name == name).map_or(0, |l| l.failures)
    }

    pub fn record(&self) -> Vec<(String, String)> {
        let c = &self.contingency;
        let mut out = vec![
            ("trials".to_string(), self.trials.to_string()),
            ("l1_loose_small_angle".into(), c.loose_small.to_string()),
            ("l1_loose_large_angle".into(), c.loose_large.to_string()),
            ("l1_tight_small_angle".into(), c.tight_small.to_string()),
            ("l1_tight_large_angle".into(), c.tight_large.to_string()),
            ("l1_off_diagonal".into(), c.off_diagonal().to_string()),
            ("active_count_max".into(), self.active_count_max.to_string()),
            ("active_count_bound".into(), ACTIVE_COUNT_BOUND.to_string()),
        ];
        for l in &self.invariants {
            let verdict = if l.failures == 0 { "pass" } else { "fail" };
            out.push((l.name.to_lowercase().replace('-', "_").to_string(), format!("{verdict} {}/{}", l.failures, l.trials)));
        }
        out.push(("pass".into(), self.pass().to_string()));
        if let Some(d) = &self.dump {
            out.push(("dump".into(), d.display().to_string()));
        }
        out
    }

    pub fn record_text(&self) -> String {
        let owned = self.record();
        let rec: Vec<(&str, String)> = owned.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        format_record(&rec)
    }
}

fn tally(report: &mut VerifyReport, name: &'static str, failed: bool) {
    let t = report.invariants.iter_mut().find(|l| l.name == name).expect("known check");
    t.trials += 1;
    t.failures += failed as usize;
}

fn invariant_counts(r: &InvariantReport) -> [(&'static str, usize); 8] {
    [
        ("active-count", r.active_count_max.saturating_sub(ACTIVE_COUNT_BOUND)),
        ("lfs-sandwich", r.lfs_sandwich),
        ("stage-bound", r.below_stage_bound),
        ("gap", r.gap),
        ("moonstruck-lfs", r.moonstruck_lfs),
        ("inactive-use", r.inactive_use),
        ("short-after-insert", r.short_after_insert),
        ("final-sweep", r.final_sweep_loose),
    ]
}

/// Random trials over small inputs: the loose-pair / small-angle contingency table, baseline
/// monotonicity, the instrumented fast refiner and output quality.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport, RefineError> {
    let mut report = VerifyReport {
        invariants: CHECKS.iter().map(|&name| CheckTally { name, ..Default::default() }).collect(),
        ..Default::default()
    };
    let fast_cfg = cfg.fast_config();
    let base_cfg = RefinerConfig::new(cfg.beta);
    let sizes = if cfg.sizes.is_empty() { vec![20] } else { cfg.sizes.clone() };
    for trial in 0..cfg.trials {
        let n = sizes[trial % sizes.len()];
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(trial as u64);
        let raw = Generator::Uniform.generate(n, seed);
        let (pts, _) = normalize_input(&raw)?;
        report.trials += 1;
        let mut failed: Vec<String> = Vec::new();

        let (sample_pts, sample_beta) = angle_sample(n, seed);
        let (loose, small) = angle_trial(&sample_pts, sample_beta)?;
        report.contingency.add(loose, small);
        tally(&mut report, "loose-iff-small-angle", loose != small);
        if loose != small {
            failed.push(format!("loose-iff-small-angle: loose={loose} small_angle={small}"));
        }

        let base = crate::baseline::refine(&pts, &base_cfg)?;
        let mono = base.stats.monotone_violations;
        tally(&mut report, "baseline-monotone", mono > 0);
        if mono > 0 {
            failed.push(format!("baseline-monotone: {mono} decreases"));
        }

        let (out, invariants) = instrumented_run(&pts, &fast_cfg)?;
        report.active_count_max = report.active_count_max.max(invariants.active_count_max);
        for (name, count) in invariant_counts(&invariants) {
            tally(&mut report, name, count > 0);
            if count > 0 {
                failed.push(format!("{name}: {count}"));
            }
        }
        let qa = audit_mesh(&out.mesh, cfg.beta);
        let qb = audit_mesh(&base, cfg.beta);
        let quality_bad = !qa.pass() || !qb.pass();
        tally(&mut report, "quality", quality_bad);
        if quality_bad {
            failed.push(format!("quality: fast pass {} baseline pass {}", qa.pass(), qb.pass()));
        }

        if !failed.is_empty() {
            log::info!("verify trial {trial} (n={n}, seed={seed}) failed: {}", failed.join("; "));
            if report.first_failure.is_none() {
                report.first_failure = Some(format!("trial {trial} n={n} seed={seed}: {}", failed.join("; ")));
                report.dump = dump_failure(cfg, trial, &raw, &failed, &invariants).ok();
            }
        }
    }
    Ok(report)
}

fn dump_failure(
    cfg: &VerifyConfig,
    trial: usize,
    raw: &[Point2],
    failed: &[String],
    invariants: &InvariantReport,
) -> io::Result<PathBuf> {
    std::fs::create_dir_all(&cfg.dump_dir)?;
    let path = cfg.dump_dir.join(format!("trial-{trial}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    for p in raw {
        w.write_record([format!("{:.17e}", p.x), format!("{:.17e}", p.y)])?;
    }
    w.flush()?;
    let mut notes = std::fs::File::create(cfg.dump_dir.join(format!("trial-{trial}.txt")))?;
    for f in failed {
        writeln!(notes, "{f}")?;
    }
    for d in &invariants.details {
        writeln!(notes, "{d}")?;
    }
    Ok(path)
}
