//! The Lagrange dual of the noise-constrained problem, evaluated through the
//! penalized problem.
//!
//! With multiplier `lambda >= 0`,
//!
//! ```text
//! g(lambda) = inf_u ||u||_1 + lambda (||Au - b||² - delta²)
//!           = 2 lambda inf_u { 1/2 ||Au - b||² + ||u||_1 / (2 lambda) } - lambda delta²
//! ```
//!
//! so a penalized solve at `beta = 1/(2 lambda)` yields
//! `g(beta) = (P(beta) - delta²/2) / beta` where `P` is the optimal penalized
//! objective. Weak duality gives `g(beta) <= ||x̂||_1` for the constrained
//! minimizer `x̂`, with equality at the `beta` whose penalized minimizer is
//! `x̂`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::lpn::{solve_lpn_with, LpnResult, LpnTolerances};
use crate::qp::{Lasso, QpConfig, QpSolve};
use crate::solution::{residual_norm, SparseSolution};

pub const DEFAULT_GRID_POINTS: usize = 100;
pub const DEFAULT_GRID_MIN_FACTOR: f64 = 1e-4;
pub const DEFAULT_GRID_MAX_FACTOR: f64 = 1.0;

/// `points` values spaced evenly in `log beta` from `low` to `high`, both
/// included.
pub fn log_grid(low: f64, high: f64, points: usize) -> Result<Vec<f64>> {
    if !(low > 0.0) || !high.is_finite() || points == 0 {
        return Err(Error::InvalidArgument(
            "grid needs 0 < low and at least one point",
        ));
    }
    if points == 1 {
        return Ok(alloc::vec![low]);
    }
    if !(high > low) {
        return Err(Error::InvalidArgument("grid needs low < high"));
    }
    let (l0, l1) = (libm::log(low), libm::log(high));
    let step = (l1 - l0) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points)
        .map(|i| libm::exp(l0 + step * i as f64))
        .collect();
    grid[0] = low;
    grid[points - 1] = high;
    Ok(grid)
}

/// The default grid for an instance: `DEFAULT_GRID_POINTS` log-spaced points
/// over `[1e-4, 1] * ||Aᵀb||_inf`.
pub fn default_grid(beta_max: f64) -> Result<Vec<f64>> {
    log_grid(
        DEFAULT_GRID_MIN_FACTOR * beta_max,
        DEFAULT_GRID_MAX_FACTOR * beta_max,
        DEFAULT_GRID_POINTS,
    )
}

/// `g(beta)` from the optimal penalized objective.
#[inline]
pub fn dual_from_objective(objective: f64, beta: f64, delta: f64) -> f64 {
    (objective - 0.5 * delta * delta) / beta
}

#[derive(Debug, Clone)]
pub struct DualValue {
    pub g: f64,
    pub converged: bool,
    pub solve: QpSolve,
}

/// `g(beta)` for the constrained problem with bound `delta`.
pub fn dual_value(a: &DenseMatrix, b: &[f64], delta: f64, beta: f64) -> Result<DualValue> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument("delta must be nonnegative"));
    }
    let solve = Lasso::new(a, b)?.solve(&QpConfig::new(beta), None)?;
    Ok(DualValue {
        g: dual_from_objective(solve.objective, beta, delta),
        converged: solve.solution.converged,
        solve,
    })
}

/// One grid point of a dual scan.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub beta: f64,
    /// `None` when the penalized solve did not converge.
    pub g: Option<f64>,
    pub kkt: f64,
    pub solution: SparseSolution,
}

#[derive(Debug, Clone)]
pub struct DualScan {
    /// Ascending.
    pub betas: Vec<f64>,
    pub g_values: Vec<Option<f64>>,
    /// `||x̂||_1` of the constrained minimizer.
    pub primal_l1: f64,
    pub beta_best: f64,
    pub best_index: usize,
    /// `primal_l1 - max g`.
    pub gap: f64,
    /// Whether the maximizing grid point is the first or last one, in which
    /// case the true maximizer may lie outside the grid.
    pub boundary_hit: bool,
    pub points: Vec<GridPoint>,
    pub lpn: LpnResult,
}

impl DualScan {
    /// `1e-4 (1 + ||x̂||_1)`.
    pub fn duality_slack(&self) -> f64 {
        duality_slack(self.primal_l1)
    }

    pub fn max_g(&self) -> f64 {
        self.primal_l1 - self.gap
    }

    pub fn missing(&self) -> usize {
        self.g_values.iter().filter(|g| g.is_none()).count()
    }

    /// Width (in `beta`) of the grid cell around the best point: the larger
    /// of the distances to its neighbours.
    pub fn cell_width_at_best(&self) -> f64 {
        let i = self.best_index;
        let left = if i > 0 {
            self.betas[i] - self.betas[i - 1]
        } else {
            0.0
        };
        let right = if i + 1 < self.betas.len() {
            self.betas[i + 1] - self.betas[i]
        } else {
            0.0
        };
        left.max(right)
    }
}

pub fn duality_slack(primal_l1: f64) -> f64 {
    1e-4 * (1.0 + primal_l1)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("beta grid is empty"));
    }
    if !(grid[0] > 0.0) || grid.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument(
            "beta grid must be positive and finite",
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "beta grid must be strictly ascending",
        ));
    }
    Ok(())
}

/// Penalized solves over `grid`, run from the largest `beta` down with warm
/// starts and returned in grid order.
pub fn solve_on_grid(lasso: &Lasso<'_>, grid: &[f64]) -> Result<Vec<QpSolve>> {
    check_grid(grid)?;
    let mut out: Vec<QpSolve> = Vec::with_capacity(grid.len());
    let mut warm: Option<Vec<f64>> = None;
    for &beta in grid.iter().rev() {
        let s = lasso.solve(&QpConfig::new(beta), warm.as_deref())?;
        // a failed solve is a poor starting point for its neighbour
        warm = if s.solution.converged {
            Some(s.solution.x.clone())
        } else {
            None
        };
        out.push(s);
    }
    out.reverse();
    Ok(out)
}

/// Evaluates `g` on `grid`, solves the constrained problem for the primal
/// reference, and picks the maximizing grid point.
pub fn scan_dual(a: &DenseMatrix, b: &[f64], delta: f64, grid: &[f64]) -> Result<DualScan> {
    let lasso = Lasso::new(a, b)?;
    check_grid(grid)?;
    let lpn = solve_lpn_with(&lasso, delta, &LpnTolerances::default())?;
    scan_dual_with(&lasso, delta, grid, lpn)
}

/// [`scan_dual`] with the constrained solution already in hand.
pub fn scan_dual_with(
    lasso: &Lasso<'_>,
    delta: f64,
    grid: &[f64],
    lpn: LpnResult,
) -> Result<DualScan> {
    let solves = solve_on_grid(lasso, grid)?;
    let primal_l1 = lpn.l1_norm();
    let slack = duality_slack(primal_l1);

    let points: Vec<GridPoint> = solves
        .into_iter()
        .map(|s| GridPoint {
            beta: s.beta,
            g: s.solution
                .converged
                .then(|| dual_from_objective(s.objective, s.beta, delta)),
            kkt: s.kkt,
            solution: s.solution,
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if let Some(g) = p.g {
            if g > primal_l1 + slack {
                return Err(Error::WeakDuality {
                    beta: p.beta,
                    g,
                    primal: primal_l1,
                });
            }
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
    }
    let Some((best_index, max_g)) = best else {
        let worst = points.iter().fold(0.0_f64, |w, p| w.max(p.kkt));
        return Err(Error::NotConverged {
            beta: grid[0],
            kkt: worst,
        });
    };

    Ok(DualScan {
        betas: grid.to_vec(),
        g_values: points.iter().map(|p| p.g).collect(),
        primal_l1,
        beta_best: grid[best_index],
        best_index,
        gap: primal_l1 - max_g,
        boundary_hit: grid.len() > 1 && (best_index == 0 || best_index == grid.len() - 1),
        points,
        lpn,
    })
}

/// `||Ax - b||_2 - delta`; zero for a nonzero constrained minimizer.
pub fn check_boundary(a: &DenseMatrix, b: &[f64], delta: f64, x: &[f64]) -> f64 {
    residual_norm(a, b, x) - delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    #[test]
    fn grid_shape() {
        let g = log_grid(1e-3, 10.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!((g[0], g[4]), (1e-3, 10.0));
        assert_relative_eq!(g[1], 1e-2, max_relative = 1e-12);
        assert!(log_grid(0.0, 1.0, 3).is_err());
        assert!(log_grid(2.0, 1.0, 3).is_err());
        assert_eq!(log_grid(2.0, 2.0, 1).unwrap(), alloc::vec![2.0]);
        assert_eq!(default_grid(3.0).unwrap().len(), DEFAULT_GRID_POINTS);
    }

    #[test]
    fn dual_at_zero_solution() {
        let a = DenseMatrix::identity(2);
        let b = [3.0, 4.0];
        let beta = 10.0;
        let d = dual_value(&a, &b, 1.0, beta).unwrap();
        assert_relative_eq!(d.g, (25.0 - 1.0) / (2.0 * beta), epsilon = 1e-14);
        let far = dual_value(&a, &b, 1.0, 1e12).unwrap();
        assert!(far.g.abs() < 1e-10);
    }

    #[test]
    fn strong_duality_on_identity() {
        let a = DenseMatrix::identity(2);
        let d = dual_value(&a, &[3.0, 4.0], 1.0, FRAC_1_SQRT_2).unwrap();
        assert_relative_eq!(d.g, 7.0 - SQRT_2, epsilon = 1e-9);
    }

    #[test]
    fn scan_identity() {
        let a = DenseMatrix::identity(2);
        let grid = log_grid(1e-3, 10.0, 80).unwrap();
        let scan = scan_dual(&a, &[3.0, 4.0], 1.0, &grid).unwrap();
        assert_relative_eq!(scan.primal_l1, 7.0 - SQRT_2, epsilon = 1e-5);
        assert!((scan.beta_best - FRAC_1_SQRT_2).abs() <= scan.cell_width_at_best());
        assert!(scan.gap <= 1e-3 * scan.primal_l1);
        assert!(scan.gap >= -scan.duality_slack());
        assert!(!scan.boundary_hit);
        for g in scan.g_values.iter().flatten() {
            assert!(*g <= scan.primal_l1 + scan.duality_slack());
        }
    }

    #[test]
    fn scan_rejects_trivial_and_bad_grids() {
        let a = DenseMatrix::identity(2);
        assert!(matches!(
            scan_dual(&a, &[3.0, 4.0], 5.0, &[1.0, 2.0]),
            Err(Error::TrivialCase { .. })
        ));
        assert!(scan_dual(&a, &[3.0, 4.0], 1.0, &[]).is_err());
        assert!(scan_dual(&a, &[3.0, 4.0], 1.0, &[2.0, 1.0]).is_err());
        assert!(scan_dual(&a, &[3.0, 4.0], 1.0, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn boundary_check() {
        let a = DenseMatrix::identity(2);
        let b = [3.0, 4.0];
        assert_relative_eq!(
            check_boundary(&a, &b, 1.0, &[0.0, 0.0]),
            4.0,
            epsilon = 1e-15
        );
        let x = [3.0 - FRAC_1_SQRT_2, 4.0 - FRAC_1_SQRT_2];
        assert!(check_boundary(&a, &b, 1.0, &x).abs() < 1e-14);
        // penalized solution away from the best beta leaves the boundary
        let off = crate::qp::solve_qp(&a, &b, &QpConfig::new(2.0)).unwrap();
        assert!(check_boundary(&a, &b, 1.0, &off.x) > 1.0);
    }
}
