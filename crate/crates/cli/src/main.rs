use std::f64::consts::SQRT_2;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use offcenter_mesh::audit::{audit, audit_mesh, format_record};
use offcenter_mesh::experiment::{
    run_algorithm, run_bench, run_verify, Algorithm, BenchConfig, Generator, Injection, RunSettings, VerifyConfig,
};
use offcenter_mesh::geometry::beta_for_min_angle_deg;
use offcenter_mesh::{fast_refine_raw, io as mesh_io, normalize_input, BoundingFrame, FastConfig, Quadtree, RefinementConstants};

#[derive(Parser)]
#[command(name = "meshrefine", version, about = "Quality Delaunay refinement of planar point sets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Refine a point set and write .node/.ele (and optionally .svg).
    Refine(RefineArgs),
    /// Run a generator/size/seed/algorithm sweep.
    Bench(BenchArgs),
    /// Randomized invariant checks on small inputs.
    Verify(VerifyArgs),
    /// Audit a mesh read back from .node/.ele.
    Audit(AuditArgs),
    /// Render a mesh from .node/.ele as SVG.
    Render(RenderArgs),
    /// Write a generated point set (.node, or .csv by extension).
    Generate(GenerateArgs),
    /// Print the balanced quadtree built over a point set.
    Quadtree(QuadtreeArgs),
}

#[derive(Args, Clone, Copy)]
struct Quality {
    /// Radius-edge bound.
    #[arg(long, conflicts_with = "min_angle")]
    beta: Option<f64>,
    /// Minimum angle in degrees; converted to beta = 1 / (2 sin angle).
    #[arg(long)]
    min_angle: Option<f64>,
}

impl Quality {
    fn beta(&self) -> f64 {
        match (self.beta, self.min_angle) {
            (Some(b), _) => b,
            (None, Some(a)) => beta_for_min_angle_deg(a),
            (None, None) => SQRT_2,
        }
    }

    /// Below sqrt 2 termination is not guaranteed; insist on a cap.
    fn check_cap(&self, cap: Option<usize>) -> f64 {
        let beta = self.beta();
        if !(beta.is_finite() && beta > 0.5) {
            usage(ErrorKind::InvalidValue, format!("beta must be above 1/2, got {beta}"));
        }
        if beta < SQRT_2 * (1.0 - 1e-12) && cap.is_none() {
            usage(
                ErrorKind::MissingRequiredArgument,
                format!("beta {beta:.6} is below sqrt(2); this regime is experimental and needs --max-insertions"),
            );
        }
        beta
    }
}

fn usage(kind: ErrorKind, msg: String) -> ! {
    Cli::command().error(kind, msg).exit()
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "baseline-offcenter")]
    algorithm: Algorithm,
    #[command(flatten)]
    quality: Quality,
    /// Output base path; .node, .ele and .svg are appended.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_insertions: Option<usize>,
    /// Shrink factor in the fast refiner's stage bounds.
    #[arg(long)]
    c_shrink: Option<f64>,
    #[arg(long)]
    c_reach: Option<f64>,
    #[arg(long)]
    c_span: Option<u32>,
    /// Also write an SVG rendering.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "uniform")]
    generator: Generator,
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "baseline-offcenter,fast")]
    algorithms: Vec<Algorithm>,
    #[command(flatten)]
    quality: Quality,
    #[arg(long)]
    max_insertions: Option<usize>,
    /// Timed runs per instance; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Write the per-run table here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the key=value report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write every mesh here and audit it again from the files.
    #[arg(long)]
    readback_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,60")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    quality: Quality,
    #[arg(long)]
    c_shrink: Option<f64>,
    /// Override a constant, e.g. c_span=0 or c_reach=1.
    #[arg(long)]
    inject: Option<Injection>,
    /// Failing inputs are written here.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Base path of the .node/.ele pair.
    #[arg(long)]
    mesh: PathBuf,
    #[command(flatten)]
    quality: Quality,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    quality: Quality,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "uniform")]
    generator: Generator,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QuadtreeArgs {
    #[arg(long)]
    input: PathBuf,
}

fn init_logging() {
    let level = match std::env::var("MESH_LOG").as_deref() {
        Ok("info") => log::LevelFilter::Info,
        Ok("trace") => log::LevelFilter::Trace,
        Ok("off") | Err(_) => log::LevelFilter::Off,
        Ok(other) => {
            eprintln!("MESH_LOG={other} not understood; use off, info or trace");
            log::LevelFilter::Off
        }
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn print_record(rec: &[(&str, String)]) -> Result<()> {
    io::stdout().write_all(format_record(rec).as_bytes())?;
    Ok(())
}

fn cmd_refine(a: RefineArgs) -> Result<bool> {
    let beta = a.quality.check_cap(a.max_insertions);
    let raw = mesh_io::read_points_path(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let settings = RunSettings::new(beta).with_max_insertions(a.max_insertions);
    let mesh = if a.algorithm == Algorithm::Fast {
        let mut c = RefinementConstants::operational(beta);
        if let Some(s) = a.c_shrink {
            c = c.with_c_shrink(s);
        }
        if let Some(r) = a.c_reach {
            c = c.with_c_reach(r);
        }
        if let Some(s) = a.c_span {
            c = c.with_c_span(s);
        }
        let mut cfg = FastConfig::new(beta).with_consts(c);
        cfg.max_insertions = a.max_insertions;
        let out = fast_refine_raw(&raw, &cfg)?;
        print_record(&out.fast.record())?;
        out.mesh
    } else {
        run_algorithm(a.algorithm, &raw, &settings)?
    };
    let written = mesh_io::write_mesh(&mesh, &a.out, a.svg.then_some(beta))
        .with_context(|| format!("writing {}", a.out.display()))?;
    print_record(&mesh.stats.record())?;
    let au = audit_mesh(&mesh, beta);
    print_record(&au.record())?;
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(au.pass())
}

fn cmd_bench(a: BenchArgs) -> Result<bool> {
    let beta = a.quality.check_cap(a.max_insertions);
    let mut cfg = BenchConfig::new(a.generator, a.sizes, a.seeds, a.algorithms, beta);
    cfg.settings = cfg.settings.with_max_insertions(a.max_insertions);
    cfg.repeats = a.repeats;
    if let Some(d) = &a.readback_dir {
        fs::create_dir_all(d)?;
    }
    cfg.readback_dir = a.readback_dir;
    let report = run_bench(&cfg);
    if let Some(p) = &a.csv {
        report.write_csv(BufWriter::new(fs::File::create(p)?))?;
    }
    let text = report.record_text();
    match &a.report {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    for r in report.rows.iter().filter(|r| !r.ok()) {
        eprintln!(
            "run failed: {} n={} seed={} {}: {}",
            r.generator,
            r.n,
            r.seed,
            r.algorithm,
            r.error.as_deref().unwrap_or("audit failed")
        );
    }
    Ok(true)
}

fn cmd_verify(a: VerifyArgs) -> Result<bool> {
    let mut cfg = VerifyConfig::new(a.trials);
    cfg.sizes = a.sizes;
    cfg.seed = a.seed;
    cfg.beta = a.quality.check_cap(None);
    cfg.c_shrink = a.c_shrink;
    cfg.inject = a.inject;
    if let Some(d) = a.dump_dir {
        cfg.dump_dir = d;
    }
    if cfg.sizes.iter().any(|&n| n > 60) {
        eprintln!("note: sizes above 60 make the brute-force checks slow");
    }
    let report = run_verify(&cfg)?;
    io::stdout().write_all(report.record_text().as_bytes())?;
    if let Some(f) = &report.first_failure {
        eprintln!("first failure: {f}");
        if let Some(d) = &report.dump {
            eprintln!("state dump: {}", d.display());
        }
    }
    Ok(report.pass())
}

fn cmd_audit(a: AuditArgs) -> Result<bool> {
    let beta = a.quality.beta();
    let files = mesh_io::read_mesh(&a.mesh)?;
    let tri = files.triangulate()?;
    if tri.triangle_count() != files.triangles.len() {
        eprintln!(
            "note: .ele has {} triangles, the Delaunay triangulation of the vertices has {}",
            files.triangles.len(),
            tri.triangle_count()
        );
    }
    let au = audit(&tri, &files.kinds, beta);
    print_record(&au.record())?;
    Ok(au.pass())
}

fn cmd_render(a: RenderArgs) -> Result<bool> {
    let files = mesh_io::read_mesh(&a.mesh)?;
    let tri = files.triangulate()?;
    mesh_io::write_svg(BufWriter::new(fs::File::create(&a.out)?), &tri, &files.kinds, a.quality.beta())?;
    Ok(true)
}

fn cmd_generate(a: GenerateArgs) -> Result<bool> {
    let pts = a.generator.generate(a.n, a.seed);
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    if a.out.extension().is_some_and(|e| e == "csv") {
        for p in &pts {
            writeln!(w, "{:.16e},{:.16e}", p.x, p.y)?;
        }
    } else {
        writeln!(w, "{} 2 0 0", pts.len())?;
        for (i, p) in pts.iter().enumerate() {
            writeln!(w, "{} {:.16e} {:.16e}", i + 1, p.x, p.y)?;
        }
    }
    w.flush()?;
    Ok(true)
}

fn cmd_quadtree(a: QuadtreeArgs) -> Result<bool> {
    let raw = mesh_io::read_points_path(&a.input)?;
    if raw.is_empty() {
        bail!("{}: no points", a.input.display());
    }
    let (mut pts, _) = normalize_input(&raw)?;
    pts.extend(BoundingFrame::initial_points());
    let tree = Quadtree::build(&pts, RefinementConstants::operational(SQRT_2).quadtree_params())?;
    io::stdout().write_all(tree.debug_dump().as_bytes())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let res = match cli.cmd {
        Cmd::Refine(a) => cmd_refine(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Audit(a) => cmd_audit(a),
        Cmd::Render(a) => cmd_render(a),
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Quadtree(a) => cmd_quadtree(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
