//! `maxode` command-line front end.
//!
//! Exit codes:
//!
//! | code | outcome |
//! |------|---------|
//! | 0 | success |
//! | 1 | verification failure or other error |
//! | 2 | parse or schema error in the problem file, or bad arguments |
//! | 3 | I/O error |
//! | 4 | Picard iteration did not converge |
//! | 5 | non-finite value or evaluation failure during integration |
//! | 6 | `--require-horizon` given and no existence result covers the interval |

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxode::catalog::{guarantee, GuaranteeOptions};
use maxode::expr::DEFAULT_LATTICE;
use maxode::horizon::{existence_horizon, horizon_for, ContractionData};
use maxode::integrate::{euler_max, heun_max, IntegrateError};
use maxode::picard::{solve_picard, PicardConfig, PicardError};
use maxode::verify::{self, VerifyOptions};
use maxode::{Grid, ProblemError, ProblemSpec};

use report::{GridInfo, Manifest, SolveReport};

#[derive(Parser)]
#[command(name = "maxode", version, about = "Initial value problems with running-maximum terms")]
struct Cli {
    /// Directory for CSV, JSON and manifest outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Seed for the randomized corpora of `verify`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Slack added to discrete bound checks (default 10 h).
    #[arg(long, global = true)]
    epsilon_grid: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a problem file and echo canonical expressions.
    ParseCheck { path: PathBuf },
    /// Integrate a problem and write the trajectory and a report.
    Solve {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "heun")]
        method: Method,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        picard: PicardArgs,
        /// Fail with exit code 6 unless an existence result covers [0, tend].
        #[arg(long)]
        require_horizon: bool,
        /// Ball radius for the general contraction horizon.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Bound constant for the coupled quadratic system (searched when absent).
        #[arg(long)]
        c0: Option<f64>,
    },
    /// Estimate the contraction horizon of a problem.
    Horizon {
        path: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Lattice points per sampled dimension.
        #[arg(long, default_value_t = DEFAULT_LATTICE)]
        samples: usize,
        /// Use this sup bound instead of the estimate.
        #[arg(long)]
        m_bound: Option<f64>,
        /// Use this Lipschitz constant of f instead of the estimate.
        #[arg(long)]
        lf: Option<f64>,
        /// Use this Lipschitz constant of the functionals instead of the estimate.
        #[arg(long)]
        lg: Option<f64>,
    },
    /// Run the general Picard iteration and report deltas against the contraction bound.
    Picard {
        path: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        picard: PicardArgs,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Run the bundled verification suite.
    Verify {
        /// Only criteria whose key or tags contain this string.
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Euler,
    Heun,
    Picard,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Heun => "heun",
            Method::Picard => "picard",
        }
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// End time; clamped to the problem horizon.
    #[arg(long)]
    tend: Option<f64>,
}

#[derive(Args)]
struct PicardArgs {
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl std::fmt::Display) -> Failure {
        Failure { code, message: message.to_string() }
    }
}

impl From<ProblemError> for Failure {
    fn from(e: ProblemError) -> Failure {
        Failure::new(if e.is_io() { 3 } else { 2 }, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::new(3, e)
    }
}

fn integrate_code(e: &IntegrateError) -> u8 {
    match e {
        IntegrateError::Picard(p) => picard_code(p),
        IntegrateError::Eval { .. } | IntegrateError::NonFinite { .. } => 5,
        _ => 1,
    }
}

fn picard_code(e: &PicardError) -> u8 {
    match e {
        PicardError::Eval { .. } | PicardError::NonFinite { .. } => 5,
        PicardError::Config(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::ParseCheck { path } => parse_check(path),
        Command::Solve { path, method, grid, picard, require_horizon, alpha, c0 } => {
            let spec = ProblemSpec::load(path)?;
            let grid = make_grid(&spec, grid)?;
            let opts = GuaranteeOptions { alpha: *alpha, c0: *c0 };
            solve(cli, path, &spec, *method, grid, picard, *require_horizon, opts)
        }
        Command::Horizon { path, alpha, samples, m_bound, lf, lg } => {
            let spec = ProblemSpec::load(path)?;
            horizon(cli, path, &spec, *alpha, *samples, [*m_bound, *lf, *lg])
        }
        Command::Picard { path, grid, picard, alpha } => {
            let spec = ProblemSpec::load(path)?;
            let grid = make_grid(&spec, grid)?;
            picard_cmd(cli, path, &spec, grid, picard, *alpha)
        }
        Command::Verify { filter } => {
            let opts = VerifyOptions { eps_grid: cli.epsilon_grid, seed: cli.seed, filter: filter.clone() };
            let results = verify::run(&opts);
            if results.is_empty() {
                return Err(Failure::new(2, format!("no criterion matches filter {:?}", filter.as_deref().unwrap_or(""))));
            }
            for r in &results {
                println!("{}", r.line());
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

fn parse_check(path: &Path) -> Result<u8, Failure> {
    let spec = ProblemSpec::load(path)?;
    for (i, e) in spec.rhs().iter().enumerate() {
        println!("f[{i}] = {e}");
    }
    for (j, e) in spec.maxima().iter().enumerate() {
        println!("maxima[{j}] = {e}");
    }
    println!("m = {}, x0 = {:?}, T = {}", spec.dim(), spec.x0(), spec.horizon());
    println!("ok");
    Ok(0)
}

fn make_grid(spec: &ProblemSpec, args: &GridArgs) -> Result<Grid, Failure> {
    let t = spec.horizon();
    let t_end = match args.tend {
        Some(v) if v <= 0.0 || !v.is_finite() => return Err(Failure::new(2, format!("--tend must be positive, got {v}"))),
        Some(v) if v > t => {
            eprintln!("warning: --tend {v} exceeds the problem horizon {t}; clamped to {t}");
            t
        }
        Some(v) => v,
        None => t,
    };
    Grid::over(t_end, args.steps).map_err(|e| Failure::new(2, e))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "problem".into())
}

fn write_trajectory(path: &Path, spec: &ProblemSpec, traj: &maxode::Trajectory) -> Result<(), Failure> {
    let file = std::fs::File::create(path).map_err(|e| Failure::new(3, format!("{}: {e}", path.display())))?;
    maxode::trajectory::write_csv(std::io::BufWriter::new(file), spec, traj).map_err(|e| Failure::new(3, e))
}

#[allow(clippy::too_many_arguments)]
fn solve(
    cli: &Cli,
    path: &Path,
    spec: &ProblemSpec,
    method: Method,
    grid: Grid,
    pargs: &PicardArgs,
    require_horizon: bool,
    opts: GuaranteeOptions,
) -> Result<u8, Failure> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let base = format!("{}.{}", stem(path), method.name());
    let mut manifest = Manifest::new("solve", path, spec, Some(method.name()), GridInfo::of(&grid));
    let verdict = guarantee(spec, grid.end(), opts);
    let mut report = SolveReport::new(method.name(), &grid);
    match &verdict {
        Ok(g) => report.guarantee = Some(g.clone()),
        Err(e) => report.guarantee_error = Some(e.to_string()),
    }

    let mut code = 0;
    if require_horizon {
        let covered = verdict.as_ref().map(|g| g.ok).unwrap_or(false);
        if !covered {
            let reason = match &verdict {
                Ok(g) => g.reason.clone(),
                Err(e) => e.to_string(),
            };
            eprintln!("error: no existence result covers [0, {}]: {reason}", grid.end());
            code = 6;
        }
    }

    if code == 0 {
        let outcome = match method {
            Method::Euler => euler_max(spec, &grid).map_err(|e| (integrate_code(&e), e.to_string())),
            Method::Heun => heun_max(spec, &grid).map_err(|e| (integrate_code(&e), e.to_string())),
            Method::Picard => {
                let mut cfg = PicardConfig::new(grid, pargs.tol, pargs.max_iter);
                cfg.eps_grid = cli.epsilon_grid;
                match solve_picard(spec, &cfg) {
                    Ok((traj, rep)) => {
                        if !rep.converged {
                            code = 4;
                        }
                        report.picard = Some(rep);
                        Ok(traj)
                    }
                    Err(e) => Err((picard_code(&e), e.to_string())),
                }
            }
        };
        match outcome {
            Ok(traj) => {
                let csv = cli.out_dir.join(format!("{base}.csv"));
                write_trajectory(&csv, spec, &traj)?;
                report.set_final(spec, &traj);
                manifest.outputs.push(csv.display().to_string());
            }
            Err((c, msg)) => {
                eprintln!("error: {msg}");
                report.error = Some(msg);
                code = c;
            }
        }
    }
    if code == 4 {
        eprintln!("error: Picard iteration did not reach tol {} in {} iterations", pargs.tol, pargs.max_iter);
    }
    report.status = status_name(code);
    let json = cli.out_dir.join(format!("{base}.json"));
    report::write_json(&json, &report)?;
    manifest.outputs.push(json.display().to_string());
    manifest.finish(&cli.out_dir, code)?;
    Ok(code)
}

fn status_name(code: u8) -> &'static str {
    match code {
        0 => "ok",
        4 => "not_converged",
        5 => "non_finite",
        6 => "horizon_not_covered",
        _ => "error",
    }
}

fn horizon(cli: &Cli, path: &Path, spec: &ProblemSpec, alpha: f64, samples: usize, overrides: [Option<f64>; 3]) -> Result<u8, Failure> {
    let manual = overrides.iter().all(Option::is_some);
    let data = if manual {
        ContractionData {
            alpha,
            t_ref: spec.horizon(),
            m_bound: overrides[0].unwrap_or_default(),
            l_f: overrides[1].unwrap_or_default(),
            l_g: overrides[2].unwrap_or_default(),
            dim: spec.dim(),
        }
    } else {
        let mut d = ContractionData::estimate(spec, alpha, spec.horizon(), samples).map_err(|e| Failure::new(1, e))?;
        d.m_bound = overrides[0].unwrap_or(d.m_bound);
        d.l_f = overrides[1].unwrap_or(d.l_f);
        d.l_g = overrides[2].unwrap_or(d.l_g);
        d
    };
    let res = existence_horizon(&data).map_err(|e| Failure::new(2, e))?;
    let out = report::HorizonReport { result: res, constants: data, estimated: !manual };
    println!("{}", report::to_json(&out.result));

    std::fs::create_dir_all(&cli.out_dir)?;
    let json = cli.out_dir.join(format!("{}.horizon.json", stem(path)));
    report::write_json(&json, &out)?;
    let mut manifest = Manifest::new("horizon", path, spec, None, None);
    manifest.outputs.push(json.display().to_string());
    manifest.finish(&cli.out_dir, 0)?;
    Ok(0)
}

fn picard_cmd(cli: &Cli, path: &Path, spec: &ProblemSpec, grid: Grid, pargs: &PicardArgs, alpha: f64) -> Result<u8, Failure> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let mut cfg = PicardConfig::new(grid, pargs.tol, pargs.max_iter);
    cfg.eps_grid = cli.epsilon_grid;
    // The contraction factor applies only inside the estimated horizon.
    let contraction = horizon_for(spec, alpha)
        .ok()
        .filter(|(_, r)| grid.end() <= r.t_sup)
        .map(|(d, _)| grid.end() * d.lipschitz_rate());
    if let Some(q) = contraction {
        cfg = cfg.with_contraction(q);
    }
    let base = format!("{}.picard", stem(path));
    let mut manifest = Manifest::new("picard", path, spec, Some("picard"), GridInfo::of(&grid));
    let (code, out) = match solve_picard(spec, &cfg) {
        Ok((traj, rep)) => {
            let csv = cli.out_dir.join(format!("{base}.csv"));
            write_trajectory(&csv, spec, &traj)?;
            manifest.outputs.push(csv.display().to_string());
            let code = if rep.converged { 0 } else { 4 };
            if code == 4 {
                eprintln!("error: Picard iteration did not reach tol {} in {} iterations", pargs.tol, pargs.max_iter);
            }
            (code, report::PicardOutput { report: Some(rep), contraction_factor: contraction, error: None })
        }
        Err(e) => {
            eprintln!("error: {e}");
            (picard_code(&e), report::PicardOutput { report: None, contraction_factor: contraction, error: Some(e.to_string()) })
        }
    };
    let json = cli.out_dir.join(format!("{base}.json"));
    report::write_json(&json, &out)?;
    manifest.outputs.push(json.display().to_string());
    manifest.finish(&cli.out_dir, code)?;
    Ok(code)
}
