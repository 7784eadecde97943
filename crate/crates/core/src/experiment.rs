//! One seeded trial of the recovery experiment, and averaging over trials.
//!
//! A trial generates a problem, solves the constrained problem at
//! `delta² = m sigma_w²`, sweeps the penalized problem over a `beta` grid,
//! evaluates the dual function on that grid, compares reconstruction errors,
//! and checks the best grid `beta` against the support-conditioned bounds.

use alloc::vec::Vec;

use crate::bounds::{exact_bounds_on_support, gaussian_beta_interval, BetaBounds};
use crate::duality::{scan_dual_with, solve_on_grid};
use crate::error::{Error, Result};
use crate::linalg::{norm2, sub};
use crate::lpn::{solve_lpn_with, LpnKind, LpnTolerances};
use crate::problem::{generate_problem, ProblemParams, SensingProblem};
use crate::qp::Lasso;

/// `||x* - x̂||_2 / ||x*||_2`.
pub fn normalized_error(x_true: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(Error::Dimension("x_true and x_hat lengths differ"));
    }
    let scale = norm2(x_true);
    if scale == 0.0 {
        return Err(Error::InvalidArgument("ground truth is zero"));
    }
    Ok(norm2(&sub(x_true, x_hat)) / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    /// The constrained problem was solved on its boundary.
    Solved,
    /// `delta = 0`; the constrained solution comes from a vanishing `beta`.
    Noiseless,
    /// `||b|| <= delta`; the constrained minimizer is zero.
    Trivial,
    /// The constrained solve failed; the penalized sweep is still reported.
    LpnFailed(Error),
}

#[derive(Debug, Clone)]
pub struct TrialReport {
    pub seed: u64,
    pub params: ProblemParams,
    pub delta: f64,
    pub status: TrialStatus,
    pub betas: Vec<f64>,
    pub x_true: Vec<f64>,
    pub x_lpn: Vec<f64>,
    pub lpn_l1: f64,
    /// `NaN` when the ground truth is zero.
    pub lpn_error: f64,
    pub beta_star: Option<f64>,
    pub boundary_gap: Option<f64>,
    pub qp_errors: Vec<f64>,
    pub qp_residuals: Vec<f64>,
    pub qp_k: Vec<usize>,
    pub qp_kkt: Vec<f64>,
    pub qp_converged: Vec<bool>,
    pub g_values: Vec<Option<f64>>,
    pub beta_best: Option<f64>,
    /// `lpn_l1 - max g` when the constrained problem was solved.
    pub duality_gap: Option<f64>,
    pub boundary_hit: bool,
    /// Exact-eigen bounds on the constrained solution's support.
    pub bounds_exact: Option<BetaBounds>,
    /// Gaussian asymptotic interval with the signal sparsity `k`.
    pub bounds_gaussian: Option<(f64, f64)>,
    pub best_in_bounds: bool,
}

impl TrialReport {
    /// Index of the grid point closest to `beta_star` in `log beta`.
    pub fn grid_index_near_beta_star(&self) -> Option<usize> {
        let target = libm::log(self.beta_star?);
        self.betas
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| {
                (libm::log(**x) - target)
                    .abs()
                    .total_cmp(&(libm::log(**y) - target).abs())
            })
            .map(|(i, _)| i)
    }

    pub fn max_g(&self) -> Option<f64> {
        self.g_values.iter().flatten().copied().reduce(f64::max)
    }
}

/// Runs one trial. Trivial and failed constrained solves are recorded in
/// the report's status; only generation errors and weak-duality violations
/// abort.
pub fn run_trial(params: &ProblemParams, grid: &[f64], seed: u64) -> Result<TrialReport> {
    let problem = generate_problem(params, seed)?;
    evaluate(&problem, params, grid)
}

/// [`run_trial`] on an existing problem. `k` is taken as the number of
/// nonzeros of the ground truth, or 0 without one.
pub fn run_trial_on(problem: &SensingProblem, grid: &[f64]) -> Result<TrialReport> {
    let params = ProblemParams {
        n: problem.n(),
        m: problem.m(),
        k: problem
            .x_true
            .as_ref()
            .map_or(0, |x| x.iter().filter(|v| **v != 0.0).count()),
        sigma: problem.sigma,
        sigma_w: problem.sigma_w,
    };
    evaluate(problem, &params, grid)
}

fn evaluate(problem: &SensingProblem, params: &ProblemParams, grid: &[f64]) -> Result<TrialReport> {
    let seed = problem.seed;
    let (a, b, delta) = (&problem.a, problem.b.as_slice(), problem.delta);
    let x_true = problem.x_true.clone().unwrap_or_default();
    let lasso = Lasso::new(a, b)?;
    let error_of = |x: &[f64]| normalized_error(&x_true, x).unwrap_or(f64::NAN);

    let lpn = solve_lpn_with(&lasso, delta, &LpnTolerances::default());
    let (status, lpn) = match lpn {
        Ok(r) => {
            let s = if r.kind == LpnKind::Noiseless {
                TrialStatus::Noiseless
            } else {
                TrialStatus::Solved
            };
            (s, Some(r))
        }
        Err(Error::TrivialCase { .. }) => (TrialStatus::Trivial, None),
        Err(e @ (Error::NotConverged { .. } | Error::RootBracket { .. })) => {
            (TrialStatus::LpnFailed(e), None)
        }
        Err(e) => return Err(e),
    };

    let mut report = TrialReport {
        seed,
        params: *params,
        delta,
        status,
        betas: grid.to_vec(),
        x_lpn: alloc::vec![0.0; params.n],
        lpn_l1: 0.0,
        lpn_error: error_of(&alloc::vec![0.0; params.n]),
        beta_star: None,
        boundary_gap: None,
        qp_errors: Vec::new(),
        qp_residuals: Vec::new(),
        qp_k: Vec::new(),
        qp_kkt: Vec::new(),
        qp_converged: Vec::new(),
        g_values: Vec::new(),
        beta_best: None,
        duality_gap: None,
        boundary_hit: false,
        bounds_exact: None,
        bounds_gaussian: if params.k >= 1 {
            gaussian_beta_interval(params.m, params.k, params.sigma, delta).ok()
        } else {
            None
        },
        best_in_bounds: false,
        x_true: x_true.clone(),
    };

    match lpn {
        Some(lpn) => {
            report.x_lpn = lpn.solution.x.clone();
            report.lpn_l1 = lpn.l1_norm();
            report.lpn_error = error_of(&lpn.solution.x);
            report.beta_star = Some(lpn.beta_star);
            report.boundary_gap = Some(lpn.boundary_gap);
            let support = lpn.solution.support.clone();
            let scan = scan_dual_with(&lasso, delta, grid, lpn)?;
            for p in &scan.points {
                report.qp_errors.push(error_of(&p.solution.x));
                report.qp_residuals.push(p.solution.residual_norm);
                report.qp_k.push(p.solution.k);
                report.qp_kkt.push(p.kkt);
                report.qp_converged.push(p.solution.converged);
            }
            report.g_values = scan.g_values.clone();
            report.beta_best = Some(scan.beta_best);
            report.duality_gap = Some(scan.gap);
            report.boundary_hit = scan.boundary_hit;
            if !support.is_empty() && support.len() <= params.m {
                report.bounds_exact = exact_bounds_on_support(a, &support, delta).ok();
            }
            report.best_in_bounds = report
                .bounds_exact
                .is_some_and(|bnd| bnd.contains(scan.beta_best));
        }
        None => {
            let solves = solve_on_grid(&lasso, grid)?;
            let mut best: Option<(usize, f64)> = None;
            for (i, s) in solves.iter().enumerate() {
                let g = s
                    .solution
                    .converged
                    .then(|| crate::duality::dual_from_objective(s.objective, s.beta, delta));
                if let Some(g) = g {
                    if best.is_none_or(|(_, bg)| g > bg) {
                        best = Some((i, g));
                    }
                }
                report.g_values.push(g);
                report.qp_errors.push(error_of(&s.solution.x));
                report.qp_residuals.push(s.solution.residual_norm);
                report.qp_k.push(s.solution.k);
                report.qp_kkt.push(s.kkt);
                report.qp_converged.push(s.solution.converged);
            }
            report.beta_best = best.map(|(i, _)| grid[i]);
        }
    }
    Ok(report)
}

/// Pointwise means over trials that share parameters and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub trial_count: usize,
    pub params: ProblemParams,
    pub delta: f64,
    pub betas: Vec<f64>,
    /// Mean over the trials where `g` is available; `None` if none are.
    pub mean_g_curve: Vec<Option<f64>>,
    pub mean_qp_error_curve: Vec<f64>,
    pub mean_qp_residual_curve: Vec<f64>,
    pub mean_qp_k_curve: Vec<f64>,
    pub mean_lpn_l1: f64,
    pub mean_lpn_error: f64,
    pub bounds_coverage_rate: f64,
    pub mean_beta_best: f64,
    pub mean_beta_star: f64,
    pub mean_bound_lower_exact: f64,
    pub mean_bound_upper_exact: f64,
    pub bounds_gaussian: Option<(f64, f64)>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn aggregate(reports: &[TrialReport]) -> Result<AggregateReport> {
    let first = reports.first().ok_or(Error::Empty)?;
    if reports
        .iter()
        .any(|r| r.params != first.params || r.betas != first.betas || r.delta != first.delta)
    {
        return Err(Error::MixedGrid);
    }
    let points = first.betas.len();
    let curve = |f: &dyn Fn(&TrialReport, usize) -> Option<f64>| -> Vec<Option<f64>> {
        (0..points)
            .map(|i| {
                let m = mean(reports.iter().filter_map(|r| f(r, i)));
                (!m.is_nan()).then_some(m)
            })
            .collect()
    };
    let dense = |c: Vec<Option<f64>>| c.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();

    let covered = reports.iter().filter(|r| r.best_in_bounds).count();
    Ok(AggregateReport {
        trial_count: reports.len(),
        params: first.params,
        delta: first.delta,
        betas: first.betas.clone(),
        mean_g_curve: curve(&|r, i| r.g_values.get(i).copied().flatten()),
        mean_qp_error_curve: dense(curve(&|r, i| {
            r.qp_errors.get(i).copied().filter(|v| !v.is_nan())
        })),
        mean_qp_residual_curve: dense(curve(&|r, i| r.qp_residuals.get(i).copied())),
        mean_qp_k_curve: dense(curve(&|r, i| r.qp_k.get(i).map(|&k| k as f64))),
        mean_lpn_l1: mean(reports.iter().map(|r| r.lpn_l1)),
        mean_lpn_error: mean(reports.iter().map(|r| r.lpn_error).filter(|v| !v.is_nan())),
        bounds_coverage_rate: covered as f64 / reports.len() as f64,
        mean_beta_best: mean(reports.iter().filter_map(|r| r.beta_best)),
        mean_beta_star: mean(reports.iter().filter_map(|r| r.beta_star)),
        mean_bound_lower_exact: mean(
            reports
                .iter()
                .filter_map(|r| r.bounds_exact.map(|b| b.lower)),
        ),
        mean_bound_upper_exact: mean(
            reports
                .iter()
                .filter_map(|r| r.bounds_exact.map(|b| b.upper)),
        ),
        bounds_gaussian: first.bounds_gaussian,
    })
}
