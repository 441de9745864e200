#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use config::{ConfigError, ScenarioConfig};
use lipsmooth::envelope::{inf_conv_bruteforce, inf_conv_quadratic_with};
use lipsmooth::glue::{build_glued, dgz_perturb, verify_approx, DgzSettings};
use lipsmooth::unity::uniform_bump;
use lipsmooth::{ApproxRequest, ApproxSettings, Execution, GridField, Point, Region, TangentGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "lipsmooth", version, about = "Smooth Lipschitz approximation on model manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smooth approximation of a Lipschitz function with a verification report.
    Approx(Common),
    /// A uniform bump and its measured gradient.
    Bump(Common),
    /// Bump-perturbation search for a strong sample minimum.
    Dgz(Common),
    /// Envelope timings, fast path against brute force.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides run.out (default: ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Config(String),
    Pipeline(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<lipsmooth::Error> for Failure {
    fn from(e: lipsmooth::Error) -> Self {
        Failure::Pipeline(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Pipeline(format!("i/o: {e}"))
    }
}

struct Context {
    cfg: ScenarioConfig,
    seed: u64,
    out: PathBuf,
}

impl Context {
    fn new(c: &Common) -> Result<Self, Failure> {
        let cfg = ScenarioConfig::load(&c.config)?;
        let seed = c.seed.unwrap_or(cfg.run.seed);
        let out = c.out.clone().or_else(|| cfg.run.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out)?;
        Ok(Context { cfg, seed, out })
    }

    fn settings(&self) -> ApproxSettings {
        let run = &self.cfg.run;
        let mut s = ApproxSettings { resolution: run.resolution, cover_samples: run.cover_samples, max_radius: run.max_radius, ..Default::default() };
        s.value_oscillation = run.value_oscillation;
        if let Some(m) = run.coverage_margin {
            s.coverage_margin = m;
        }
        s.verify.seed = self.seed;
        if let Some(n) = run.verification_samples {
            s.verify.samples = n;
        }
        if let Some(n) = run.local_pairs {
            s.verify.local_pairs = n;
        }
        if let Some(n) = run.global_pairs {
            s.verify.global_pairs = n;
        }
        s
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let path = self.out.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Pipeline(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn fields_dir(&self) -> Result<PathBuf, Failure> {
        let dir = self.out.join("fields");
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn write_samples(path: &Path, points: &[Point], columns: &[&str], values: &[Vec<f64>]) -> Result<(), Failure> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let coords = points.first().map_or(0, |p| p.len());
    let mut header: Vec<String> = (0..coords).map(|k| format!("x{k}")).collect();
    header.extend(columns.iter().map(|c| c.to_string()));
    writeln!(w, "{}", header.join(","))?;
    for (i, p) in points.iter().enumerate() {
        let mut row: Vec<String> = p.as_slice().iter().map(|v| format!("{v:?}")).collect();
        row.extend(values.iter().map(|col| format!("{:?}", col[i])));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn run_approx(ctx: &Context) -> Result<bool, Failure> {
    let cfg = &ctx.cfg;
    let req = ApproxRequest {
        model: cfg.model()?,
        f: cfg.function()?,
        eps: cfg.tolerance()?,
        r: cfg.slack()?,
        region: cfg.region()?,
        settings: ctx.settings(),
    };
    let g = build_glued(&req)?;
    for b in &g.budgets {
        log::info!(
            "chart {}: delta {:.4}, budget {:.3e}, error {:.3e}, lipschitz {:.6} <= {:.6}",
            b.chart,
            b.delta,
            b.tolerance,
            b.sup_error,
            b.lipschitz_estimate,
            b.lipschitz_bound
        );
    }
    let report = verify_approx(&req, &g)?;
    ctx.write_json("report.json", &report)?;

    let dir = ctx.fields_dir()?;
    let pts = req.region.sample_lattice(&req.model, cfg.run.visual_samples)?;
    let f: Vec<f64> = pts.iter().map(|p| req.f.eval(&req.model, p)).collect();
    let gv: Vec<f64> = pts.iter().map(|p| g.eval(p).unwrap_or(f64::NAN)).collect();
    write_samples(&dir.join("input.csv"), &pts, &["f"], &[f])?;
    write_samples(&dir.join("glued.csv"), &pts, &["g"], &[gv])?;
    log::info!(
        "{} charts, sup error {:.4e}, lipschitz estimate {:.6} (bound {:.6}), pass {}",
        report.charts,
        report.sup_error,
        report.lipschitz_estimate,
        report.lipschitz_bound,
        report.pass.all
    );
    Ok(report.pass.all)
}

#[derive(Serialize)]
struct BumpReport {
    schema: u32,
    center: Point,
    delta: f64,
    radius_constant: f64,
    eps: f64,
    charts: usize,
    peak: f64,
    gradient_estimate: f64,
    gradient_bound: f64,
    support_violations: usize,
    pass: bool,
}

fn run_bump(ctx: &Context) -> Result<bool, Failure> {
    let cfg = &ctx.cfg;
    let spec = cfg.bump.as_ref().ok_or_else(|| ConfigError("missing [bump] block".into()))?;
    let model = cfg.model()?;
    let center = Point::new(&spec.center);
    model.check_point(&center)?;
    let b = uniform_bump(&model, center, spec.delta, spec.radius_constant, spec.eps, &ctx.settings())?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let ball = Region::Ball { center, radius: 1.05 * spec.delta };
    let pts = ball.sample_random(&model, spec.samples, &mut rng)?;
    let mut grad: f64 = 0.0;
    let mut violations = 0;
    for p in &pts {
        let q = Region::Ball { center: *p, radius: 0.02 * spec.delta }.sample_random(&model, 1, &mut rng)?[0];
        let (bp, bq) = (b.eval(p), b.eval(&q));
        let d = model.distance(p, &q);
        if d > 1e-12 {
            grad = grad.max((bp - bq).abs() / d);
        }
        if model.distance(p, &center) >= spec.delta && bp != 0.0 {
            violations += 1;
        }
    }
    for pair in pts.chunks(2).filter(|c| c.len() == 2) {
        let d = model.distance(&pair[0], &pair[1]);
        if d > 1e-12 {
            grad = grad.max((b.eval(&pair[0]) - b.eval(&pair[1])).abs() / d);
        }
    }
    let peak = b.eval(&center);
    let bound = spec.radius_constant / spec.delta;
    let pass = peak >= 1.0 - 1e-9 && violations == 0 && grad <= bound;
    let report = BumpReport {
        schema: 1,
        center,
        delta: spec.delta,
        radius_constant: spec.radius_constant,
        eps: b.eps,
        charts: b.g.charts(),
        peak,
        gradient_estimate: grad,
        gradient_bound: bound,
        support_violations: violations,
        pass,
    };
    ctx.write_json("report.json", &report)?;
    let dir = ctx.fields_dir()?;
    let vis = ball.sample_lattice(&model, cfg.run.visual_samples)?;
    let values: Vec<f64> = vis.iter().map(|p| b.eval(p)).collect();
    write_samples(&dir.join("bump.csv"), &vis, &["b"], &[values])?;
    log::info!("bump peak {peak}, gradient estimate {grad:.4} (bound {bound:.4})");
    Ok(pass)
}

#[derive(Serialize)]
struct DgzReport {
    schema: u32,
    delta: f64,
    samples: usize,
    #[serde(flatten)]
    result: lipsmooth::glue::DgzResult,
    pass: bool,
}

fn run_dgz(ctx: &Context) -> Result<bool, Failure> {
    let cfg = &ctx.cfg;
    let spec = cfg.dgz.as_ref().ok_or_else(|| ConfigError("missing [dgz] block".into()))?;
    let model = cfg.model()?;
    let f = cfg.function()?;
    let region = cfg.region()?;
    let samples = region.sample_lattice(&model, spec.samples)?;
    let mut s = DgzSettings::default();
    if let Some(v) = spec.eta {
        s.eta = v;
    }
    if let Some(v) = spec.max_iter {
        s.max_iter = v;
    }
    if let Some(v) = spec.radius0 {
        s.radius0 = v;
    }
    if let Some(v) = spec.radius_constant {
        s.radius_constant = v;
    }
    s.approx.resolution = cfg.run.resolution.or(s.approx.resolution);
    let eval = |p: &Point| f.eval(&model, p);
    let result = dgz_perturb(&model, &eval, &samples, spec.delta, &s)?;
    let pass = result.margin > 0.0 && result.phi_sup < spec.delta && result.phi_lipschitz < spec.delta;
    let dir = ctx.fields_dir()?;
    let fv: Vec<f64> = samples.iter().map(&eval).collect();
    write_samples(&dir.join("perturbed.csv"), &samples, &["f", "f_minus_phi"], &[fv, result.values.clone()])?;
    log::info!("minimiser {:?}, margin {:.3e}, {} bumps", result.minimizer.as_slice(), result.margin, result.bumps.len());
    ctx.write_json("report.json", &DgzReport { schema: 1, delta: spec.delta, samples: samples.len(), result, pass })?;
    Ok(pass)
}

#[derive(Serialize)]
struct BenchReport {
    nodes: usize,
    dim: usize,
    ns_per_node_fast: f64,
    ns_per_node_bruteforce: f64,
    bruteforce_nodes: usize,
}

fn random_field(nodes: usize, dim: usize, seed: u64) -> Result<GridField, Failure> {
    let per_axis = ((nodes as f64).powf(1.0 / dim as f64).round() as usize).max(2);
    let g = TangentGrid::new(&vec![per_axis; dim], &vec![1.0 / per_axis as f64; dim], &vec![0.0; dim])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(GridField::new(g, vals)?)
}

fn best_time(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        f();
        best = best.min(t.elapsed().as_secs_f64());
    }
    best
}

fn run_bench(ctx: &Context) -> Result<bool, Failure> {
    let cfg = &ctx.cfg;
    let spec = cfg.bench.as_ref().ok_or_else(|| ConfigError("missing [bench] block".into()))?;
    if !(1..=3).contains(&spec.dim) {
        return Err(Failure::Config(format!("bench.dim must be 1, 2 or 3, got {}", spec.dim)));
    }
    let exec = Execution::default();
    let fast = random_field(spec.nodes, spec.dim, ctx.seed)?;
    let t_fast = best_time(spec.reps, || {
        std::hint::black_box(inf_conv_quadratic_with(exec, &fast, 0.01).unwrap());
    });
    let brute = random_field(spec.bruteforce_nodes.min(spec.nodes), spec.dim, ctx.seed)?;
    let t_brute = best_time(1, || {
        std::hint::black_box(inf_conv_bruteforce(exec, &brute, 0.01).unwrap());
    });
    let report = BenchReport {
        nodes: fast.grid.len(),
        dim: spec.dim,
        ns_per_node_fast: t_fast * 1e9 / fast.grid.len() as f64,
        ns_per_node_bruteforce: t_brute * 1e9 / brute.grid.len() as f64,
        bruteforce_nodes: brute.grid.len(),
    };
    ctx.write_json("bench.json", &report)?;
    log::info!("fast {:.2} ns/node, brute force {:.2} ns/node", report.ns_per_node_fast, report.ns_per_node_bruteforce);
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&Context) -> Result<bool, Failure>) = match &cli.command {
        Command::Approx(c) => (c, run_approx),
        Command::Bump(c) => (c, run_bump),
        Command::Dgz(c) => (c, run_dgz),
        Command::Bench(c) => (c, run_bench),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = Context::new(common).and_then(|ctx| run(&ctx));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed; see the report");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
