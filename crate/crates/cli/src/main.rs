//! `cat0`: command-line driver for the threading, hull, Frechet-mean and convergence tools.
//!
//! Reports go to stdout as JSON, progress lines to stderr. Exit codes: 0 success,
//! 1 invariant or test failure, 2 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cat0_core::config;
use cat0_core::convergence::{increasing_hull_convergence, ConvergenceParams};
use cat0_core::frechet::{
    certify_in_hull, euclidean_mean, inductive_mean, threading_search_mean, FrechetProblem, Schedule, SearchParams,
};
use cat0_core::geometry::check_space;
use cat0_core::threading::{
    convex_hull_cloud, estimate_degree, euclidean_hull_distance, iterate_threading, thread_algebra_check, ThreadingReport,
};
use cat0_core::{GeoError, PointCloud, SpaceDescriptor, ThreadingParams};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "cat0", version, about = "Threading, convex hulls and Frechet means in CAT(0) model spaces")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = "CAT0_THREADS")]
    threads: Option<usize>,
    /// Record wall time per iteration (reports are then no longer byte-reproducible).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ThreadingArgs {
    /// Grid points per geodesic segment, endpoints included.
    #[arg(long, env = "CAT0_GRID", default_value_t = config::DEFAULT_GRID_K)]
    grid: usize,
    /// Maximum cloud size after each threading step.
    #[arg(long, env = "CAT0_CAP", default_value_t = config::DEFAULT_CAP)]
    cap: usize,
    /// Points closer than this are merged.
    #[arg(long, env = "CAT0_DEDUP_EPS", default_value_t = config::DEFAULT_DEDUP_EPS)]
    dedup_eps: f64,
    /// Candidate budget per step; larger inputs are thinned first.
    #[arg(long, env = "CAT0_MAX_CANDIDATES", default_value_t = config::DEFAULT_MAX_CANDIDATES)]
    max_candidates: usize,
    #[arg(long, env = "CAT0_SEED", default_value_t = 0)]
    seed: u64,
}

impl ThreadingArgs {
    fn params(&self, timings: bool) -> ThreadingParams {
        ThreadingParams {
            grid_k: self.grid,
            cap: self.cap,
            dedup_eps: self.dedup_eps,
            seed: self.seed,
            max_candidates: self.max_candidates,
            record_timings: timings,
        }
    }
}

#[derive(Args, Clone)]
struct StabilityArgs {
    /// Stabilization tolerance on consecutive Hausdorff gaps.
    #[arg(long, env = "CAT0_EPS", default_value_t = config::DEFAULT_EPS)]
    eps: f64,
    /// Maximum number of threading steps.
    #[arg(long, env = "CAT0_N_MAX", default_value_t = config::DEFAULT_N_MAX)]
    n_max: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Closed,
    Inductive,
    Search,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Cycle,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized metric, geodesic and CAT(0) checks on a space.
    Check {
        /// `euclidean:<d>`, `biquadrant` or `product(<spec>,<spec>)`.
        #[arg(long)]
        space: String,
        #[arg(long, default_value_t = config::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, env = "CAT0_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Iterated threading of a point set.
    Thread {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        iters: usize,
        #[command(flatten)]
        threading: ThreadingArgs,
        /// Write the final cloud here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-iteration table here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Threading-degree estimate of a point set.
    Degree {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        stability: StabilityArgs,
        #[command(flatten)]
        threading: ThreadingArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Convex-hull cloud by iterated threading until stabilization.
    Hull {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        stability: StabilityArgs,
        #[command(flatten)]
        threading: ThreadingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Frechet mean (p = 2) with a hull-membership certificate.
    Mean {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Search)]
        method: Method,
        /// Steps of the inductive scheme.
        #[arg(long, default_value_t = 100_000)]
        iters: usize,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Random)]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = config::DEFAULT_REFINE_STEPS)]
        refine_steps: usize,
        #[command(flatten)]
        stability: StabilityArgs,
        #[command(flatten)]
        threading: ThreadingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frechet median (p = 1) by threading search, with a hull-membership certificate.
    Median {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = config::DEFAULT_REFINE_STEPS)]
        refine_steps: usize,
        #[command(flatten)]
        stability: StabilityArgs,
        #[command(flatten)]
        threading: ThreadingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hulls of growing subsets of a target cloud and their distance to it.
    Converge {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[command(flatten)]
        stability: StabilityArgs,
        #[command(flatten)]
        threading: ThreadingArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Intersection, union and monotonicity laws of threading on two point sets.
    Algebra {
        #[arg(long)]
        s1: PathBuf,
        #[arg(long)]
        s2: PathBuf,
        /// Random segment samples per threaded set.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, env = "CAT0_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, env = "CAT0_DEDUP_EPS", default_value_t = config::DEFAULT_DEDUP_EPS)]
        dedup_eps: f64,
    },
}

enum Failure {
    /// Bad input: exit 2.
    Input(String),
}

impl From<GeoError> for Failure {
    fn from(e: GeoError) -> Self {
        Failure::Input(e.to_string())
    }
}

/// Outcome of a command that ran to completion.
struct Report {
    body: Value,
    passed: bool,
}

impl Report {
    fn ok(body: Value) -> Self {
        Report { body, passed: true }
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_cloud(path: &Path, dedup_eps: f64) -> Result<PointCloud, Failure> {
    PointCloud::from_json(&read_json(path)?, dedup_eps).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_problem(path: &Path, p: u32) -> Result<FrechetProblem, Failure> {
    let raw = FrechetProblem::from_json(&read_json(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(FrechetProblem::new(raw.space().clone(), raw.points().to_vec(), Some(raw.weights().to_vec()), p)?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    write(path, &(serde_json::to_string_pretty(v).expect("json serializes") + "\n"))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn progress(label: &str, report: &ThreadingReport) {
    for r in &report.records {
        let time = r.millis.map(|m| format!(" {m}ms")).unwrap_or_default();
        eprintln!("{label}: n={} size={} gap={:.6} resolution={:.6}{time}", r.n, r.size, r.gap, r.resolution);
    }
}

fn search_params(stability: &StabilityArgs, threading: &ThreadingArgs, refine_steps: usize, timings: bool) -> SearchParams {
    SearchParams { eps: stability.eps, n_max: stability.n_max, refine_steps, threading: threading.params(timings) }
}

fn run(cli: Cli) -> Result<Report, Failure> {
    let timings = cli.timings;
    match cli.command {
        Command::Check { space, trials, seed, tol } => {
            let space: SpaceDescriptor = space.parse()?;
            let r = check_space(&space, trials, seed, tol)?;
            Ok(Report { passed: r.passed, body: to_value(&r) })
        }
        Command::Thread { input, iters, threading, out, csv } => {
            let params = threading.params(timings);
            let cloud = read_cloud(&input, params.dedup_eps)?;
            let (result, report) = iterate_threading(&cloud, iters, &params)?;
            progress("thread", &report);
            if let Some(path) = out {
                write_json(&path, &result.to_json())?;
            }
            if let Some(path) = csv {
                write(&path, &report.to_csv())?;
            }
            Ok(Report::ok(to_value(&report)))
        }
        Command::Degree { input, stability, threading, csv } => {
            let params = threading.params(timings);
            let cloud = read_cloud(&input, params.dedup_eps)?;
            let est = estimate_degree(&cloud, stability.eps, stability.n_max, &params)?;
            progress("degree", &est.report);
            if let Some(path) = csv {
                write(&path, &est.report.to_csv())?;
            }
            Ok(Report::ok(to_value(&est)))
        }
        Command::Hull { input, stability, threading, out, csv } => {
            let params = threading.params(timings);
            let cloud = read_cloud(&input, params.dedup_eps)?;
            let (hull, report) = convex_hull_cloud(&cloud, stability.eps, stability.n_max, &params)?;
            progress("hull", &report);
            let mut body = json!({ "size": hull.len(), "report": to_value(&report) });
            if let SpaceDescriptor::Euclidean { .. } = cloud.space() {
                let outside = hull
                    .points()
                    .iter()
                    .map(|z| euclidean_hull_distance(cloud.points(), z))
                    .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))?;
                body["max_distance_outside_hull"] = json!(outside);
            }
            if let Some(path) = out {
                write_json(&path, &hull.to_json())?;
            }
            if let Some(path) = csv {
                write(&path, &report.to_csv())?;
            }
            Ok(Report::ok(body))
        }
        Command::Mean { input, method, iters, schedule, refine_steps, stability, threading, out } => {
            let problem = read_problem(&input, 2)?;
            let search = search_params(&stability, &threading, refine_steps, timings);
            let body = match method {
                Method::Search => threading_search_mean(&problem, &search)?.to_json(),
                Method::Closed => {
                    let m = euclidean_mean(&problem)?;
                    let cert = certify_in_hull(&problem, &m, &search)?;
                    json!({
                        "method": "closed-form-mean",
                        "minimizer": m.to_json(),
                        "objective": problem.objective(&m)?,
                        "iterations": 0,
                        "certificate": to_value(&cert),
                    })
                }
                Method::Inductive => {
                    let schedule = match schedule {
                        ScheduleArg::Cycle => Schedule::Cycle,
                        ScheduleArg::Random => Schedule::Random,
                    };
                    let mut r = inductive_mean(&problem, iters, schedule, threading.seed)?;
                    r.certificate = Some(certify_in_hull(&problem, &r.minimizer, &search)?);
                    r.to_json()
                }
            };
            finish_solver(body, out)
        }
        Command::Median { input, refine_steps, stability, threading, out } => {
            let problem = read_problem(&input, 1)?;
            let search = search_params(&stability, &threading, refine_steps, timings);
            finish_solver(threading_search_mean(&problem, &search)?.to_json(), out)
        }
        Command::Converge { target, steps, stability, threading, csv } => {
            let params = threading.params(timings);
            let cloud = read_cloud(&target, params.dedup_eps)?;
            let cp = ConvergenceParams {
                n_steps: steps,
                eps: stability.eps,
                n_max: stability.n_max,
                threading: params,
                ..Default::default()
            };
            let r = increasing_hull_convergence(&cloud, &cp, threading.seed)?;
            for s in &r.steps {
                eprintln!("converge: n={} hull={} gap={:.6} limit_gap={:.6}", s.n, s.hull_size, s.gap, s.limit_gap);
            }
            if let Some(path) = csv {
                write(&path, &r.to_csv())?;
            }
            Ok(Report { passed: r.passed && r.monotone_after_first, body: to_value(&r) })
        }
        Command::Algebra { s1, s2, samples, seed, tol, dedup_eps } => {
            let (a, b) = (read_cloud(&s1, dedup_eps)?, read_cloud(&s2, dedup_eps)?);
            let v = thread_algebra_check(&a, &b, samples, seed, tol)?;
            Ok(Report { passed: v.passed, body: to_value(&v) })
        }
    }
}

fn finish_solver(body: Value, out: Option<PathBuf>) -> Result<Report, Failure> {
    if let Some(path) = out {
        write_json(&path, &body)?;
    }
    let passed = body.pointer("/certificate/passed").and_then(Value::as_bool).unwrap_or(true);
    Ok(Report { body, passed })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.body).expect("json serializes"));
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
