//! The noise-constrained problem
//!
//! ```text
//! min ||u||_1   subject to ||A u - b||_2 <= delta
//! ```
//!
//! solved through the penalized problem: the residual `r(beta)` of the
//! penalized minimizer is continuous and nondecreasing in `beta`, so the
//! constrained minimizer is the penalized one at the `beta` where
//! `r(beta) = delta`. That `beta` is returned alongside the solution.
//!
//! The root is bracketed by walking down from `beta_max = ||Aᵀb||_inf`
//! (where the minimizer is zero and `r = ||b||`) with warm starts, then
//! refined by secant steps on `(beta², r²)`, safeguarded by bisection on
//! `log beta`. Between support changes `r²` is affine in `beta²`, so the
//! secant step is exact once both bracket ends share a sign pattern.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{norm2, DenseMatrix};
use crate::qp::{Lasso, QpConfig, QpSolve, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::solution::SparseSolution;

/// Smallest `beta` searched, relative to `beta_max`.
pub const BETA_FLOOR: f64 = 1e-12;
/// `beta` used for `delta = 0`, relative to `beta_max`.
pub const NOISELESS_BETA: f64 = 1e-10;
const DESCENT_FACTOR: f64 = 0.5;
const NOISELESS_FACTOR: f64 = 0.25;
const SMALL_BETA_KKT_SCALE: f64 = 1e-3;
const KKT_ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpnTolerances {
    /// Allowed `| ||Ax - b|| - delta |`, relative to `delta`.
    pub boundary_tol: f64,
    /// Agreement between the returned solution and a fresh penalized solve
    /// at `beta_star`, as a multiple of `1 + ||x||_2`.
    pub solution_tol: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    pub max_root_iter: usize,
}

impl Default for LpnTolerances {
    fn default() -> Self {
        Self {
            boundary_tol: 1e-5,
            solution_tol: 1e-6,
            qp_tol: DEFAULT_TOL,
            qp_max_iter: DEFAULT_MAX_ITER,
            max_root_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpnKind {
    /// `delta > 0`: the solution sits on `||Ax - b|| = delta`.
    Boundary,
    /// `delta = 0`: a penalized solve at `NOISELESS_BETA * beta_max`.
    Noiseless,
}

/// Bracket state recorded before each refinement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketStep {
    pub beta_low: f64,
    pub residual_low: f64,
    pub beta_high: f64,
    pub residual_high: f64,
}

#[derive(Debug, Clone)]
pub struct LpnResult {
    pub solution: SparseSolution,
    /// The `beta` whose penalized minimizer is `solution`.
    pub beta_star: f64,
    /// `||Ax - b||_2 - delta`.
    pub boundary_gap: f64,
    pub bracket: (f64, f64),
    pub kind: LpnKind,
    /// KKT residual of `solution` for the penalized problem at `beta_star`.
    pub kkt: f64,
    /// Number of penalized solves performed.
    pub qp_solves: usize,
    pub bracket_trace: Vec<BracketStep>,
}

impl LpnResult {
    pub fn l1_norm(&self) -> f64 {
        self.solution.l1_norm()
    }
}

struct Point {
    beta: f64,
    solve: QpSolve,
}

impl Point {
    fn residual(&self) -> f64 {
        self.solve.solution.residual_norm
    }
}

struct Search<'l, 'a> {
    lasso: &'l Lasso<'a>,
    tol: LpnTolerances,
    solves: usize,
}

impl Search<'_, '_> {
    fn at(&mut self, beta: f64, warm: Option<&[f64]>) -> Result<Point> {
        let p = self.attempt(beta, warm)?;
        if !p.solve.solution.converged {
            return Err(Error::NotConverged {
                beta,
                kkt: p.solve.kkt,
            });
        }
        Ok(p)
    }

    /// Like [`Search::at`] but returns unconverged solves too.
    fn attempt(&mut self, beta: f64, warm: Option<&[f64]>) -> Result<Point> {
        // an absolute tolerance above beta itself would certify nothing;
        // below roundoff in Aᵀr nothing can be certified either
        let tol = self
            .tol
            .qp_tol
            .min(SMALL_BETA_KKT_SCALE * beta)
            .max(KKT_ROUNDOFF_FLOOR * self.lasso.beta_max());
        let config = QpConfig::new(beta)
            .with_tol(tol)
            .with_max_iter(self.tol.qp_max_iter);
        let solve = self.lasso.solve(&config, warm)?;
        self.solves += 1;
        Ok(Point { beta, solve })
    }
}

/// Solves the noise-constrained problem on `(a, b)` with bound `delta`.
///
/// Errors with [`Error::TrivialCase`] when `||b|| <= delta` (then `x = 0` is
/// the minimizer) and [`Error::RootBracket`] when even
/// `BETA_FLOOR * beta_max` leaves a residual above `delta`.
pub fn solve_lpn(a: &DenseMatrix, b: &[f64], delta: f64, tol: &LpnTolerances) -> Result<LpnResult> {
    let lasso = Lasso::new(a, b)?;
    solve_lpn_with(&lasso, delta, tol)
}

pub fn solve_lpn_with(lasso: &Lasso<'_>, delta: f64, tol: &LpnTolerances) -> Result<LpnResult> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(
            "delta must be finite and nonnegative",
        ));
    }
    let b_norm = norm2(lasso.observation());
    if b_norm <= delta {
        return Err(Error::TrivialCase { b_norm, delta });
    }
    let beta_max = lasso.beta_max();
    let mut search = Search {
        lasso,
        tol: *tol,
        solves: 0,
    };
    if beta_max == 0.0 {
        // b is orthogonal to range(A): every minimizer is zero
        return Err(Error::RootBracket {
            delta,
            beta: 0.0,
            min_residual: b_norm,
        });
    }
    if delta == 0.0 {
        return noiseless(&mut search, beta_max);
    }

    let floor = BETA_FLOOR * beta_max;
    let accept = 0.5 * tol.boundary_tol * delta;
    let mut high = search.at(beta_max, None)?;
    let mut beta = beta_max;
    let low = loop {
        beta = (beta * DESCENT_FACTOR).max(floor);
        let p = search.at(beta, Some(&high.solve.solution.x))?;
        if (p.residual() - delta).abs() <= accept {
            return Ok(finish(
                search,
                p,
                delta,
                (beta, beta),
                LpnKind::Boundary,
                Vec::new(),
            ));
        }
        if p.residual() < delta {
            break p;
        }
        if beta <= floor {
            return Err(Error::RootBracket {
                delta,
                beta,
                min_residual: p.residual(),
            });
        }
        high = p;
    };
    refine(search, low, high, delta, accept)
}

fn refine(
    mut search: Search<'_, '_>,
    mut low: Point,
    mut high: Point,
    delta: f64,
    accept: f64,
) -> Result<LpnResult> {
    let mut trace = Vec::new();
    let mut force_bisect = false;
    let d2 = delta * delta;
    for _ in 0..search.tol.max_root_iter {
        trace.push(BracketStep {
            beta_low: low.beta,
            residual_low: low.residual(),
            beta_high: high.beta,
            residual_high: high.residual(),
        });
        let width = libm::log(high.beta / low.beta);
        let (bl2, bh2) = (low.beta * low.beta, high.beta * high.beta);
        let (rl2, rh2) = (
            low.residual() * low.residual(),
            high.residual() * high.residual(),
        );
        let secant = if rh2 > rl2 {
            libm::sqrt(bl2 + (d2 - rl2) * (bh2 - bl2) / (rh2 - rl2))
        } else {
            f64::NAN
        };
        let candidate = if !force_bisect && secant > low.beta && secant < high.beta {
            secant
        } else {
            libm::sqrt(low.beta * high.beta)
        };
        if !(candidate > low.beta && candidate < high.beta) {
            // bracket collapsed to adjacent floats
            let best = if (low.residual() - delta).abs() <= (high.residual() - delta).abs() {
                low
            } else {
                high
            };
            let bracket = (best.beta, best.beta);
            return Ok(finish(
                search,
                best,
                delta,
                bracket,
                LpnKind::Boundary,
                trace,
            ));
        }
        let warm = if libm::log(candidate / low.beta) < 0.5 * width {
            &low.solve.solution.x
        } else {
            &high.solve.solution.x
        };
        let p = search.at(candidate, Some(warm))?;
        if (p.residual() - delta).abs() <= accept {
            let bracket = (low.beta, high.beta);
            return Ok(finish(search, p, delta, bracket, LpnKind::Boundary, trace));
        }
        if p.residual() < delta {
            low = p;
        } else {
            high = p;
        }
        force_bisect = libm::log(high.beta / low.beta) > 0.5 * width;
    }
    let best = if (low.residual() - delta).abs() <= (high.residual() - delta).abs() {
        low
    } else {
        high
    };
    let bracket = (best.beta, best.beta);
    Ok(finish(
        search,
        best,
        delta,
        bracket,
        LpnKind::Boundary,
        trace,
    ))
}

fn noiseless(search: &mut Search<'_, '_>, beta_max: f64) -> Result<LpnResult> {
    let target = NOISELESS_BETA * beta_max;
    // intermediate points only supply warm starts; only the last must converge
    let mut p = search.attempt(beta_max, None)?;
    let mut beta = beta_max;
    while beta > target {
        beta = (beta * NOISELESS_FACTOR).max(target);
        p = if beta > target {
            search.attempt(beta, Some(&p.solve.solution.x))?
        } else {
            search.at(beta, Some(&p.solve.solution.x))?
        };
    }
    let solves = search.solves;
    let mut r = finish_parts(p, 0.0, (target, target), LpnKind::Noiseless, Vec::new());
    r.qp_solves = solves;
    Ok(r)
}

fn finish(
    search: Search<'_, '_>,
    p: Point,
    delta: f64,
    bracket: (f64, f64),
    kind: LpnKind,
    trace: Vec<BracketStep>,
) -> LpnResult {
    let mut r = finish_parts(p, delta, bracket, kind, trace);
    r.qp_solves = search.solves;
    r
}

fn finish_parts(
    p: Point,
    delta: f64,
    bracket: (f64, f64),
    kind: LpnKind,
    trace: Vec<BracketStep>,
) -> LpnResult {
    let gap = p.residual() - delta;
    LpnResult {
        beta_star: p.beta,
        boundary_gap: gap,
        bracket,
        kind,
        kkt: p.solve.kkt,
        qp_solves: 0,
        bracket_trace: trace,
        solution: p.solve.solution,
    }
}

/// Residual of the penalized minimizer at `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualAtBeta {
    pub residual: f64,
    pub converged: bool,
}

/// `||A x(beta) - b||_2` where `x(beta)` minimizes the penalized problem.
pub fn residual_at_beta(a: &DenseMatrix, b: &[f64], beta: f64) -> Result<ResidualAtBeta> {
    let s = Lasso::new(a, b)?.solve(&QpConfig::new(beta), None)?;
    Ok(ResidualAtBeta {
        residual: s.solution.residual_norm,
        converged: s.solution.converged,
    })
}
