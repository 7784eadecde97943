use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use betadelta_core::bounds::{exact_bounds_on_support, gaussian_beta_interval};
use betadelta_core::duality::log_grid;
use betadelta_core::experiment::{aggregate, run_trial, run_trial_on, TrialReport, TrialStatus};
use betadelta_core::lpn::{solve_lpn, LpnTolerances};
use betadelta_core::problem::{generate_problem, ProblemParams};
use betadelta_core::qp::{beta_max, Lasso, QpConfig};
use betadelta_core::SensingProblem;

use crate::error::{CliError, EXIT_OK, EXIT_USAGE};
use crate::format::{load_problem, write_problem};
use crate::report;

#[derive(Debug, Parser)]
#[command(
    name = "betadelta",
    version,
    about = "Sparse recovery under a noise bound: solvers, bounds on beta and the recovery experiment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random problem and write it to a text file
    Generate(GenerateArgs),
    /// Solve the penalized problem at one beta
    SolveQp(SolveQpArgs),
    /// Solve the noise-constrained l1 problem
    SolveLpn(SolveLpnArgs),
    /// Print the bounds on beta
    Bounds(BoundsArgs),
    /// One trial: constrained solve, beta sweep and dual scan, written as CSV
    Sweep(SweepArgs),
    /// Many seeded trials, per-trial and averaged CSV
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 24)]
    pub k: usize,
    /// Standard deviation of the entries of A
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Noise variance [default: 0.0225]
    #[arg(long, conflicts_with = "sigma_w")]
    pub sigma_w_sq: Option<f64>,
    /// Noise standard deviation
    #[arg(long)]
    pub sigma_w: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub const DEFAULT_SIGMA_W_SQ: f64 = 0.0225;

impl ProblemArgs {
    pub fn sigma_w(&self) -> Result<f64, CliError> {
        let sw = match (self.sigma_w, self.sigma_w_sq) {
            (Some(sw), _) => sw,
            (None, Some(sq)) if sq >= 0.0 => sq.sqrt(),
            (None, Some(_)) => {
                return Err(CliError::Usage("--sigma-w-sq must be nonnegative".into()))
            }
            (None, None) => DEFAULT_SIGMA_W_SQ.sqrt(),
        };
        if !(sw >= 0.0) || !sw.is_finite() {
            return Err(CliError::Usage(
                "--sigma-w must be finite and nonnegative".into(),
            ));
        }
        Ok(sw)
    }

    pub fn params(&self) -> Result<ProblemParams, CliError> {
        let p = ProblemParams {
            n: self.n,
            m: self.m,
            k: self.k,
            sigma: self.sigma,
            sigma_w: self.sigma_w()?,
        };
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 100)]
    pub grid_points: usize,
    /// Lowest grid beta as a multiple of ||A^T b||_inf
    #[arg(long, default_value_t = 1e-4)]
    pub grid_min_factor: f64,
    /// Highest grid beta as a multiple of ||A^T b||_inf
    #[arg(long, default_value_t = 1.0)]
    pub grid_max_factor: f64,
}

impl GridArgs {
    fn validate(&self) -> Result<(), CliError> {
        if self.grid_points < 2 {
            return Err(CliError::Usage("--grid-points must be at least 2".into()));
        }
        if !(self.grid_min_factor > 0.0
            && self.grid_min_factor < self.grid_max_factor
            && self.grid_max_factor.is_finite())
        {
            return Err(CliError::Usage(
                "need 0 < --grid-min-factor < --grid-max-factor".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self, beta_max: f64) -> Result<Vec<f64>, CliError> {
        self.validate()?;
        if !(beta_max > 0.0) {
            return Err(CliError::Usage("A^T b is zero; no beta grid".into()));
        }
        Ok(log_grid(
            self.grid_min_factor * beta_max,
            self.grid_max_factor * beta_max,
            self.grid_points,
        )?)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "problem.txt")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SolveQpArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Read the problem from a file instead of generating it
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub beta: f64,
    /// Write the solution, one value per line
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SolveLpnArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Noise bound; defaults to the problem's
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Noise bound; defaults to sqrt(m) sigma_w
    #[arg(long)]
    pub delta: Option<f64>,
    /// Also solve a problem and print the bounds on its recovered support
    #[arg(long)]
    pub exact: bool,
    /// Problem file for --exact; generated from the flags otherwise
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV path; the sidecar goes next to it with extension .meta
    #[arg(long, default_value = "sweep.csv")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Worker threads; 0 uses all cores
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory
    #[arg(long, default_value = "experiment")]
    pub output: PathBuf,
}

fn check_delta(delta: Option<f64>) -> Result<Option<f64>, CliError> {
    match delta {
        Some(d) if !(d >= 0.0) || !d.is_finite() => Err(CliError::Usage(
            "--delta must be finite and nonnegative".into(),
        )),
        d => Ok(d),
    }
}

fn obtain_problem(args: &ProblemArgs, input: Option<&Path>) -> Result<SensingProblem, CliError> {
    match input {
        Some(path) => load_problem(path),
        None => Ok(generate_problem(&args.params()?, args.seed)?),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| format!("{v:.6}"))
}

fn summary(r: &TrialReport) -> String {
    format!(
        "seed={} status={} beta_star={} beta_best={} bounds_exact=[{}, {}] bounds_gauss=[{}, {}] lpn_l1={:.6} gap={}",
        r.seed,
        report::status_name(&r.status),
        fmt_opt(r.beta_star),
        fmt_opt(r.beta_best),
        fmt_opt(r.bounds_exact.map(|b| b.lower)),
        fmt_opt(r.bounds_exact.map(|b| b.upper)),
        fmt_opt(r.bounds_gaussian.map(|b| b.0)),
        fmt_opt(r.bounds_gaussian.map(|b| b.1)),
        r.lpn_l1,
        fmt_opt(r.duality_gap),
    )
}

fn write_vector(path: &Path, x: &[f64]) -> Result<(), CliError> {
    let text: String = x.iter().map(|v| crate::format::real(*v) + "\n").collect();
    report::write(path, &text)
}

/// Seed of trial `i` in an experiment with master seed `seed`.
pub fn trial_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => {
            let p = obtain_problem(&a.problem, None)?;
            write_problem(&a.output, &p)?;
            println!(
                "wrote {} m={} n={} delta={} seed={}",
                a.output.display(),
                p.m(),
                p.n(),
                p.delta,
                p.seed
            );
        }
        Command::SolveQp(a) => {
            if !(a.beta > 0.0) || !a.beta.is_finite() {
                return Err(CliError::Usage("--beta must be positive".into()));
            }
            let p = obtain_problem(&a.problem, a.input.as_deref())?;
            let lasso = Lasso::new(&p.a, &p.b)?;
            let s = lasso.solve(&QpConfig::new(a.beta), None)?;
            if let Some(out) = &a.output {
                write_vector(out, &s.solution.x)?;
            }
            println!(
                "beta={} k={} residual={:.6} l1={:.6} objective={:.6} kkt={:.3e} converged={}",
                a.beta,
                s.solution.k,
                s.solution.residual_norm,
                s.solution.l1_norm(),
                s.objective,
                s.kkt,
                s.solution.converged
            );
            if !s.solution.converged {
                return Err(CliError::NotConverged(format!(
                    "kkt residual {:.3e} at beta {}",
                    s.kkt, a.beta
                )));
            }
        }
        Command::SolveLpn(a) => {
            let delta = check_delta(a.delta)?;
            let p = obtain_problem(&a.problem, a.input.as_deref())?;
            let delta = delta.unwrap_or(p.delta);
            let r = solve_lpn(&p.a, &p.b, delta, &LpnTolerances::default())?;
            if let Some(out) = &a.output {
                write_vector(out, &r.solution.x)?;
            }
            println!(
                "delta={} beta_star={} k={} l1={:.6} residual={:.6} boundary_gap={:.3e} kkt={:.3e}",
                delta,
                r.beta_star,
                r.solution.k,
                r.l1_norm(),
                r.solution.residual_norm,
                r.boundary_gap,
                r.kkt
            );
        }
        Command::Bounds(a) => {
            let delta = check_delta(a.delta)?;
            let sigma_w = a.problem.sigma_w()?;
            let (m, k) = (a.problem.m, a.problem.k);
            if k == 0 || k > m {
                return Err(CliError::Usage("need 1 <= k <= m".into()));
            }
            let delta = delta.unwrap_or_else(|| (m as f64).sqrt() * sigma_w);
            let (lo, hi) = gaussian_beta_interval(m, k, a.problem.sigma, delta)?;
            println!("gaussian lower={lo} upper={hi}");
            if a.exact || a.input.is_some() {
                let p = obtain_problem(&a.problem, a.input.as_deref())?;
                let delta = a.delta.unwrap_or(p.delta);
                let r = solve_lpn(&p.a, &p.b, delta, &LpnTolerances::default())?;
                let b = exact_bounds_on_support(&p.a, &r.solution.support, delta)?;
                println!(
                    "exact lower={} upper={} support={} beta_star={}",
                    b.lower, b.upper, b.k, r.beta_star
                );
            }
        }
        Command::Sweep(a) => {
            let p = obtain_problem(&a.problem, a.input.as_deref())?;
            let grid = a.grid.grid(beta_max(&p.a, &p.b))?;
            let r = run_trial_on(&p, &grid)?;
            report::write(&a.output, &report::trial_csv(&r))?;
            report::write(&report::meta_path(&a.output), &report::trial_meta(&r))?;
            println!("{}", summary(&r));
            status_result(&r.status)?;
        }
        Command::Experiment(a) => experiment(&a)?,
    }
    Ok(())
}

fn status_result(s: &TrialStatus) -> Result<(), CliError> {
    match s {
        TrialStatus::Trivial => Err(CliError::Trivial(
            "||b|| <= delta, the constrained minimizer is zero".into(),
        )),
        TrialStatus::LpnFailed(e) => Err(CliError::NotConverged(e.to_string())),
        _ => Ok(()),
    }
}

fn experiment(a: &ExperimentArgs) -> Result<(), CliError> {
    let params = a.problem.params()?;
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    a.grid.validate()?;
    // One absolute grid for all trials so curves can be averaged pointwise.
    let first = generate_problem(&params, trial_seed(a.problem.seed, 0))?;
    let grid = a.grid.grid(beta_max(&first.a, &first.b))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let reports: Vec<TrialReport> = pool.install(|| {
        (0..a.trials)
            .into_par_iter()
            .map(|i| run_trial(&params, &grid, trial_seed(a.problem.seed, i)))
            .collect::<Result<_, _>>()
    })?;

    std::fs::create_dir_all(&a.output).map_err(|e| CliError::io(&a.output, e))?;
    for (i, r) in reports.iter().enumerate() {
        let csv = a.output.join(format!("trial_{i:04}.csv"));
        report::write(&csv, &report::trial_csv(r))?;
        report::write(&report::meta_path(&csv), &report::trial_meta(r))?;
    }
    let agg = aggregate(&reports)?;
    let csv = a.output.join("aggregate.csv");
    report::write(&csv, &report::aggregate_csv(&agg))?;
    report::write(
        &report::meta_path(&csv),
        &report::aggregate_meta(&agg, a.problem.seed),
    )?;

    let count = |f: fn(&TrialStatus) -> bool| reports.iter().filter(|r| f(&r.status)).count();
    let failed = count(|s| matches!(s, TrialStatus::LpnFailed(_)));
    let trivial = count(|s| matches!(s, TrialStatus::Trivial));
    println!(
        "trials={} mean_beta_star={:.6} mean_beta_best={:.6} bounds_exact=[{:.6}, {:.6}] coverage={:.3} mean_gap={:.3e} trivial={} not_converged={}",
        agg.trial_count,
        agg.mean_beta_star,
        agg.mean_beta_best,
        agg.mean_bound_lower_exact,
        agg.mean_bound_upper_exact,
        agg.bounds_coverage_rate,
        mean(reports.iter().filter_map(|r| r.duality_gap)),
        trivial,
        failed
    );
    if failed > 0 {
        return Err(CliError::NotConverged(format!(
            "{failed} of {} trials",
            agg.trial_count
        )));
    }
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

/// Parses `argv` and runs it; returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
