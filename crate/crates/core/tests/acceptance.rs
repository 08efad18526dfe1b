//! End-to-end acceptance checks. Runs without the libtest harness: the
//! checks run one after another, so timings do not share the machine with
//! other test threads, and the report is never captured.

mod common;

use std::f64::consts::SQRT_2;
use std::time::{Duration, Instant};

use offcenter_mesh::experiment::{
    angle_sample, angle_trial, run_algorithm, run_bench, Algorithm, BenchConfig, Contingency, Generator, RunSettings,
};
use offcenter_mesh::fast::{instrumented_run, FastConfig, RefinementConstants, ACTIVE_COUNT_BOUND};
use offcenter_mesh::geometry::{alpha_for_beta, beta_for_min_angle_deg, leaf_apex, leaf_occupied, Side, Triangle};
use offcenter_mesh::loose::Flower;
use offcenter_mesh::{normalize_input, Point2, RefinedMesh, Triangulation};
use rand::Rng;
use rustc_hash::FxHashSet;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Loose Delaunay edges found by testing every edge against every vertex.
/// A hull edge only counts its interior leaf.
fn brute_loose_pairs(tri: &Triangulation, beta: f64) -> usize {
    let pts = tri.points();
    let hull = tri.hull();
    let ccw: FxHashSet<(u32, u32)> =
        (0..hull.len()).map(|i| (hull[i], hull[(i + 1) % hull.len()])).collect();
    let mut count = 0;
    for (a, b) in tri.edges() {
        let (p, q) = (tri.point(a), tri.point(b));
        let reach = Flower::new(p, q, beta).unwrap().reach() * (1.0 + 1e-9);
        let m = p.midpoint(q);
        let sides: &[Side] = if ccw.contains(&(a, b)) {
            &[Side::Left]
        } else if ccw.contains(&(b, a)) {
            &[Side::Right]
        } else {
            &[Side::Left, Side::Right]
        };
        let empty = |side: Side| {
            pts.iter()
                .filter(|x| **x != p && **x != q && x.dist(m) <= reach)
                .all(|x| !leaf_occupied(p, q, beta, side, *x).unwrap())
        };
        if sides.iter().any(|&s| empty(s)) {
            count += 1;
        }
    }
    count
}

fn steiner(m: &RefinedMesh) -> usize {
    m.stats.steiner_count + m.stats.boundary_split_count
}

struct QualityRuns {
    /// (baseline, fast) per instance.
    pairs: Vec<(RefinedMesh, RefinedMesh)>,
    elapsed: Duration,
}

fn quality_runs() -> QualityRuns {
    let gens = [Generator::Uniform, Generator::Clustered, Generator::Grid];
    let sizes = [10, 100, 1000];
    let settings = RunSettings::new(SQRT_2);
    let t = Instant::now();
    let pairs = (0..100)
        .map(|i| {
            let raw = gens[i % 3].generate(sizes[(i / 3) % 3], i as u64);
            let b = run_algorithm(Algorithm::BaselineOffCenter, &raw, &settings).unwrap();
            let f = run_algorithm(Algorithm::Fast, &raw, &settings).unwrap();
            (b, f)
        })
        .collect();
    QualityRuns { pairs, elapsed: t.elapsed() }
}

fn quality_guarantee(runs: &QualityRuns) -> Outcome {
    let alpha = (1.0 / (2.0 * SQRT_2)).asin();
    let t = Instant::now();
    let mut worst = f64::INFINITY;
    let mut loose = 0;
    for (b, f) in &runs.pairs {
        for m in [b, f] {
            worst = worst.min(m.triangulation.min_angle());
            loose += brute_loose_pairs(&m.triangulation, SQRT_2);
        }
    }
    let elapsed = runs.elapsed + t.elapsed();
    outcome(
        worst >= alpha - 1e-9 && loose == 0 && elapsed < Duration::from_secs(120),
        format!(
            "200 meshes, min angle {:.6} deg (bound {:.6}), loose pairs {loose}, {:.1}s",
            worst.to_degrees(),
            alpha.to_degrees(),
            elapsed.as_secs_f64()
        ),
    )
}

fn loose_iff_small_angle() -> Outcome {
    let mut table = Contingency::default();
    let mut largest = 0;
    for i in 0..500u64 {
        let (pts, beta) = angle_sample(8 + (i as usize % 53), 7_000 + i);
        largest = largest.max(pts.len());
        let (loose, small) = angle_trial(&pts, beta).unwrap();
        table.add(loose, small);
    }
    outcome(
        table.off_diagonal() == 0 && largest <= 60,
        format!(
            "500 sets (n <= {largest}), table [{} {}; {} {}], off-diagonal {}",
            table.loose_small,
            table.loose_large,
            table.tight_small,
            table.tight_large,
            table.off_diagonal()
        ),
    )
}

fn apex_ratio() -> Outcome {
    let mut rng = common::rng(31);
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    while samples < 10_000 {
        let p = Point2::new(rng.gen(), rng.gen());
        let q = Point2::new(rng.gen(), rng.gen());
        if p == q {
            continue;
        }
        let beta = rng.gen_range(1.0..3.0);
        let side = if rng.gen() { Side::Left } else { Side::Right };
        let c = leaf_apex(p, q, beta, side).unwrap();
        let r = Triangle::new(p, q, c).radius_edge_ratio().unwrap();
        worst = worst.max((r - beta).abs());
        samples += 1;
    }
    outcome(worst <= 1e-9, format!("10000 samples, max |ratio - beta| {worst:.3e}"))
}

fn monotone(runs: &QualityRuns) -> Outcome {
    let pops: usize = runs.pairs.iter().map(|(b, _)| b.stats.insertions()).sum();
    let bad: usize = runs.pairs.iter().map(|(b, _)| b.stats.monotone_violations).sum();
    outcome(bad == 0, format!("100 baseline runs, {pops} insertions, {bad} decreases beyond 1e-12"))
}

fn fast_invariants() -> Outcome {
    let gens = Generator::ALL;
    let sizes = [10, 50, 100, 200, 400];
    let mut failing = Vec::new();
    let mut largest = 0;
    let mut active = 0;
    for i in 0..50usize {
        let raw = gens[i % gens.len()].generate(sizes[(i / gens.len()) % sizes.len()], 100 + i as u64);
        let (pts, _) = normalize_input(&raw).unwrap();
        let (out, rep) = instrumented_run(&pts, &FastConfig::new(SQRT_2)).unwrap();
        largest = largest.max(out.mesh.points().len());
        active = active.max(rep.active_count_max);
        if !rep.failures().is_empty() {
            failing.push(format!("run {i}: {:?}", rep.failures()));
        }
    }
    let consts = RefinementConstants::operational(SQRT_2);
    let controls: Vec<(usize, usize)> = (0..5u64)
        .map(|s| {
            let (pts, _) = normalize_input(&Generator::Uniform.generate(60, 900 + s)).unwrap();
            let span0 = FastConfig::new(SQRT_2).with_consts(consts.with_c_span(0)).without_safety_net();
            let short = FastConfig::new(SQRT_2).with_consts(consts.with_c_reach(0.5)).without_safety_net();
            let (_, a) = instrumented_run(&pts, &span0).unwrap();
            let (b, _) = instrumented_run(&pts, &short).unwrap();
            (a.inactive_use, b.fast.final_sweep_loose)
        })
        .collect();
    let l9_hits = controls.iter().filter(|c| c.0 > 0).count();
    let sweep_hits = controls.iter().filter(|c| c.1 > 0).count();
    outcome(
        failing.is_empty() && largest <= 2000 && l9_hits == 5 && sweep_hits == 5,
        format!(
            "50 runs (|F| <= {largest}), failing {failing:?}, active max {active} (bound {ACTIVE_COUNT_BOUND}); \
             c_span=0 tripped inactive-use {l9_hits}/5, c_reach=0.5 tripped final sweep {sweep_hits}/5"
        ),
    )
}

fn size_comparable(runs: &QualityRuns) -> Outcome {
    let ratios: Vec<f64> = runs.pairs.iter().map(|(b, f)| steiner(f).max(1) as f64 / steiner(b).max(1) as f64).collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    outcome(
        lo >= 1.0 / 3.0 && hi <= 3.0,
        format!("100 pairs, fast/baseline Steiner ratio in [{lo:.3}, {hi:.3}], mean {mean:.3}"),
    )
}

fn insertion_strategy() -> Outcome {
    let beta = beta_for_min_angle_deg(30.0);
    let t = Instant::now();
    let mut cfg = BenchConfig::new(
        Generator::Uniform,
        vec![200],
        (1..=20).collect(),
        vec![Algorithm::BaselineOffCenter, Algorithm::BaselineCircumcenter],
        beta,
    );
    cfg.settings = cfg.settings.with_max_insertions(Some(40_000));
    let report = run_bench(&cfg);
    let elapsed = t.elapsed();
    let mean = |alg: Algorithm| {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.algorithm == alg).collect();
        rows.iter().map(|r| r.steiner_count as f64).sum::<f64>() / rows.len() as f64
    };
    let (off, circ) = (mean(Algorithm::BaselineOffCenter), mean(Algorithm::BaselineCircumcenter));
    let clean = report.rows.iter().all(|r| r.ok() && !r.capped);
    outcome(
        clean && off < circ && elapsed < Duration::from_secs(60),
        format!(
            "20 instances at 30 deg, mean Steiner off-center {off:.1} vs circumcenter {circ:.1}, ratio {:.3} \
             (airfoil figure 0.60), min angle {:.3} deg, {:.1}s",
            off / circ,
            alpha_for_beta(beta).to_degrees(),
            elapsed.as_secs_f64()
        ),
    )
}

fn scaling() -> Outcome {
    let mut cfg = BenchConfig::new(
        Generator::Uniform,
        vec![100, 1_000, 10_000, 100_000],
        vec![1],
        vec![Algorithm::BaselineOffCenter, Algorithm::Fast],
        SQRT_2,
    );
    cfg.repeats = 3;
    let report = run_bench(&cfg);
    let ok = report.rows.iter().all(|r| r.ok());
    let fast = report.scaling_exponent(Algorithm::Fast).unwrap_or(f64::NAN);
    let base = report.scaling_exponent(Algorithm::BaselineOffCenter).unwrap_or(f64::NAN);
    outcome(ok && fast <= 1.2 && base > fast, format!("exponent fast {fast:.3}, baseline {base:.3}"))
}

fn robustness() -> Outcome {
    let bad = common::oracle_disagreements(100_000, 2024);
    outcome(bad == 0, format!("100000 adversarial inputs, {bad} disagreements with the exact oracle"))
}

fn main() {
    let runs = quality_runs();
    let results = [
        ("1 quality guarantee", quality_guarantee(&runs)),
        ("2 loose pair iff small angle", loose_iff_small_angle()),
        ("3 apex radius-edge ratio", apex_ratio()),
        ("4 baseline monotone", monotone(&runs)),
        ("5 fast refiner invariants", fast_invariants()),
        ("6 size comparability", size_comparable(&runs)),
        ("7 off-center vs circumcenter", insertion_strategy()),
        ("8 scaling", scaling()),
        ("9 predicate robustness", robustness()),
    ];
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
