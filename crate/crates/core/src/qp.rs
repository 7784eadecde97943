//! The l1-penalized least-squares problem
//!
//! ```text
//! min_u  1/2 ||A u - b||_2^2 + beta ||u||_1
//! ```
//!
//! solved by accelerated proximal gradient with a monotone safeguard: a
//! candidate that raises the objective is rejected and the momentum is
//! restarted from the last accepted iterate. Every few iterations the KKT
//! residual is evaluated; once the sign pattern of the iterate stops changing
//! the reduced optimality system `ĀᵀĀ x̄ = Āᵀb - beta sgn(x̄)` is solved
//! directly and accepted if it certifies.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, gram, norm1, norm2, norm_inf, solve_spd, spectral_norm_sq, DenseMatrix};
use crate::solution::SparseSolution;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const POWER_ITERATIONS: usize = 50;
const POWER_RTOL: f64 = 1e-10;
const CHECK_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `1/L` with `L` from power iteration on `AᵀA`; doubles `L` if the
    /// sufficient-decrease test ever fails.
    FixedFromSpectralNorm,
    /// Starts from the largest squared column norm (a lower bound on `L`)
    /// and doubles on failure.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpConfig {
    pub beta: f64,
    /// Bound on the KKT residual, in units of `Aᵀ(b - Ax)`.
    pub tol: f64,
    pub max_iter: usize,
    pub step_rule: StepRule,
}

impl QpConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            step_rule: StepRule::FixedFromSpectralNorm,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_step_rule(mut self, step_rule: StepRule) -> Self {
        self.step_rule = step_rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be positive and finite"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// `sign(v) max(|v| - tau, 0)`.
#[inline]
pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// `1/2 ||A x - b||² + beta ||x||_1`.
pub fn qp_objective(a: &DenseMatrix, b: &[f64], x: &[f64], beta: f64) -> f64 {
    let r = crate::solution::residual(a, b, x);
    0.5 * dot(&r, &r) + beta * norm1(x)
}

fn kkt_from_gradient(x: &[f64], corr: &[f64], beta: f64) -> f64 {
    x.iter().zip(corr).fold(0.0, |worst: f64, (&xi, &gi)| {
        let v = if xi != 0.0 {
            (gi - beta * xi.signum()).abs()
        } else {
            (gi.abs() - beta).max(0.0)
        };
        worst.max(v)
    })
}

/// Worst violation of the optimality conditions of the penalized problem at
/// `x`, with `g = Aᵀ(b - Ax)`:
///
/// * `|g_i - beta sgn(x_i)|` where `x_i != 0`,
/// * `(|g_j| - beta)_+` where `x_j = 0`.
///
/// Zero exactly at a minimizer.
pub fn kkt_residual(a: &DenseMatrix, b: &[f64], x: &[f64], beta: f64) -> f64 {
    let r: Vec<f64> = b.iter().zip(a.mul_vec(x)).map(|(bi, ai)| bi - ai).collect();
    kkt_from_gradient(x, &a.tr_mul_vec(&r), beta)
}

/// Outcome of one penalized solve.
#[derive(Debug, Clone)]
pub struct QpSolve {
    pub solution: SparseSolution,
    pub beta: f64,
    pub kkt: f64,
    pub objective: f64,
    /// Whether the final iterate came from the reduced-system solve.
    pub polished: bool,
}

/// A penalized least-squares instance with the `beta`-independent
/// quantities (`Aᵀb`, the Lipschitz estimate) computed once, so that
/// sweeps over `beta` only pay for the iterations.
#[derive(Debug, Clone)]
pub struct Lasso<'a> {
    a: &'a DenseMatrix,
    b: &'a [f64],
    atb: Vec<f64>,
    lipschitz: f64,
    max_col_norm_sq: f64,
}

impl<'a> Lasso<'a> {
    pub fn new(a: &'a DenseMatrix, b: &'a [f64]) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::Dimension("b must have one entry per row of A"));
        }
        if b.iter().any(|v| !v.is_finite()) || a.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("qp inputs"));
        }
        let atb = a.tr_mul_vec(b);
        let lipschitz = spectral_norm_sq(a, POWER_ITERATIONS, POWER_RTOL);
        let max_col_norm_sq = (0..a.cols())
            .map(|j| {
                (0..a.rows())
                    .map(|i| a.get(i, j) * a.get(i, j))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        Ok(Self {
            a,
            b,
            atb,
            lipschitz,
            max_col_norm_sq,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        self.a
    }

    pub fn observation(&self) -> &[f64] {
        self.b
    }

    /// `||Aᵀb||_inf`: the smallest `beta` whose minimizer is `x = 0`.
    pub fn beta_max(&self) -> f64 {
        norm_inf(&self.atb)
    }

    pub fn lipschitz_estimate(&self) -> f64 {
        self.lipschitz
    }

    pub fn solve(&self, config: &QpConfig, warm_start: Option<&[f64]>) -> Result<QpSolve> {
        self.run(config, warm_start, None)
    }

    /// Like [`Lasso::solve`], also recording the objective after every
    /// iteration (starting with the initial point).
    pub fn solve_traced(
        &self,
        config: &QpConfig,
        warm_start: Option<&[f64]>,
        trace: &mut Vec<f64>,
    ) -> Result<QpSolve> {
        self.run(config, warm_start, Some(trace))
    }

    fn run(
        &self,
        config: &QpConfig,
        warm_start: Option<&[f64]>,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<QpSolve> {
        config.validate()?;
        let (a, b, beta) = (self.a, self.b, config.beta);
        let n = a.cols();

        let mut x = match warm_start {
            Some(w) if w.len() != n => return Err(Error::Dimension("warm start length")),
            Some(w) if w.iter().any(|v| !v.is_finite()) => {
                return Err(Error::NonFinite("warm start"))
            }
            Some(w) => w.to_vec(),
            None => vec![0.0; n],
        };
        let mut ax = a.mul_vec(&x);
        let mut fx = self.objective_from(&ax, &x, beta);
        if let Some(t) = trace.as_deref_mut() {
            t.push(fx);
        }

        let mut kkt = self.kkt_at(&x, &ax, beta);
        if kkt <= config.tol {
            return Ok(self.finish(x, 0, true, kkt, fx, beta, false));
        }
        // zero is cheap to certify and a good fallback when the warm start is poor
        if warm_start.is_some() && self.beta_max() <= beta {
            let zero = vec![0.0; n];
            let f0 = 0.5 * dot(b, b);
            if f0 <= fx {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(f0);
                }
                return Ok(self.finish(zero, 0, true, 0.0, f0, beta, false));
            }
        }

        let mut lip = match config.step_rule {
            StepRule::FixedFromSpectralNorm => self.lipschitz,
            StepRule::Backtracking => self.max_col_norm_sq,
        };
        if !(lip > 0.0) {
            // A = 0: x = 0 is optimal and was certified above unless b is
            // nonzero, in which case every x has the same smooth part.
            lip = 1.0;
        }

        let mut y = x.clone();
        let mut ay = ax.clone();
        let mut t = 1.0_f64;
        let mut grad = vec![0.0; n];
        let mut ry = vec![0.0; a.rows()];
        let mut z = vec![0.0; n];
        let mut az = vec![0.0; a.rows()];
        let mut last_pattern: Option<Vec<(usize, bool)>> = None;

        for iter in 1..=config.max_iter {
            for ((r, ayi), bi) in ry.iter_mut().zip(&ay).zip(b) {
                *r = ayi - bi;
            }
            let fy = 0.5 * dot(&ry, &ry);
            a.tr_mul_vec_into(&ry, &mut grad);

            let fz_smooth = loop {
                let step = 1.0 / lip;
                for ((zi, yi), gi) in z.iter_mut().zip(&y).zip(&grad) {
                    *zi = soft_threshold(yi - step * gi, beta * step);
                }
                a.mul_vec_into(&z, &mut az);
                let fz: f64 = az.iter().zip(b).map(|(p, q)| 0.5 * (p - q) * (p - q)).sum();
                let mut lin = 0.0;
                let mut quad = 0.0;
                for ((zi, yi), gi) in z.iter().zip(&y).zip(&grad) {
                    let d = zi - yi;
                    lin += gi * d;
                    quad += d * d;
                }
                let model = fy + lin + 0.5 * lip * quad;
                if fz <= model + 1e-12 * fy.max(1.0) || !lip.is_finite() {
                    break fz;
                }
                lip *= 2.0;
            };
            let fz = fz_smooth + beta * norm1(&z);

            if fz <= fx {
                let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
                let momentum = (t - 1.0) / t_next;
                for i in 0..n {
                    y[i] = z[i] + momentum * (z[i] - x[i]);
                }
                for i in 0..ay.len() {
                    ay[i] = az[i] + momentum * (az[i] - ax[i]);
                }
                core::mem::swap(&mut x, &mut z);
                core::mem::swap(&mut ax, &mut az);
                fx = fz;
                t = t_next;
            } else {
                t = 1.0;
                y.copy_from_slice(&x);
                ay.copy_from_slice(&ax);
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(fx);
            }

            if iter % CHECK_EVERY == 0 || iter == config.max_iter {
                // refresh A x to keep the linear recursions from drifting
                a.mul_vec_into(&x, &mut ax);
                kkt = self.kkt_at(&x, &ax, beta);
                if kkt <= config.tol {
                    return Ok(self.finish(x, iter, true, kkt, fx, beta, false));
                }
                let pattern: Vec<(usize, bool)> = x
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v > 0.0))
                    .collect();
                if last_pattern.as_ref() == Some(&pattern) {
                    if let Some(xp) = self.reduced_solve(&pattern, beta) {
                        let axp = a.mul_vec(&xp);
                        let kp = self.kkt_at(&xp, &axp, beta);
                        if kp <= config.tol {
                            let fp = self.objective_from(&axp, &xp, beta);
                            if let Some(tr) = trace.as_deref_mut() {
                                tr.push(fp.min(fx));
                            }
                            return Ok(self.finish(xp, iter, true, kp, fp, beta, true));
                        }
                    }
                }
                last_pattern = Some(pattern);
            }
        }

        a.mul_vec_into(&x, &mut ax);
        kkt = self.kkt_at(&x, &ax, beta);
        let converged = kkt <= config.tol;
        Ok(self.finish(x, config.max_iter, converged, kkt, fx, beta, false))
    }

    /// Solves the optimality system restricted to a sign pattern; `None` when
    /// the pattern is too large, the reduced Gram matrix is singular, or the
    /// solution flips a sign.
    fn reduced_solve(&self, pattern: &[(usize, bool)], beta: f64) -> Option<Vec<f64>> {
        let n = self.a.cols();
        if pattern.is_empty() {
            return Some(vec![0.0; n]);
        }
        if pattern.len() > self.a.rows() {
            return None;
        }
        let cols: Vec<usize> = pattern.iter().map(|(i, _)| *i).collect();
        let abar = self.a.select_columns(&cols);
        let rhs: Vec<f64> = pattern
            .iter()
            .map(|&(i, pos)| self.atb[i] - if pos { beta } else { -beta })
            .collect();
        let xbar = solve_spd(&gram(&abar), &rhs).ok()?;
        if xbar
            .iter()
            .zip(pattern)
            .any(|(v, (_, pos))| if *pos { !(*v > 0.0) } else { !(*v < 0.0) })
        {
            return None;
        }
        let mut x = vec![0.0; n];
        for (v, (i, _)) in xbar.into_iter().zip(pattern) {
            x[*i] = v;
        }
        Some(x)
    }

    fn objective_from(&self, ax: &[f64], x: &[f64], beta: f64) -> f64 {
        let r: f64 = ax.iter().zip(self.b).map(|(p, q)| (p - q) * (p - q)).sum();
        0.5 * r + beta * norm1(x)
    }

    fn kkt_at(&self, x: &[f64], ax: &[f64], beta: f64) -> f64 {
        let r: Vec<f64> = self.b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect();
        kkt_from_gradient(x, &self.a.tr_mul_vec(&r), beta)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        x: Vec<f64>,
        iterations: usize,
        converged: bool,
        kkt: f64,
        objective: f64,
        beta: f64,
        polished: bool,
    ) -> QpSolve {
        QpSolve {
            solution: SparseSolution::new(x, self.a, self.b, iterations, converged),
            beta,
            kkt,
            objective,
            polished,
        }
    }
}

/// Solves the penalized problem from a zero start.
pub fn solve_qp(a: &DenseMatrix, b: &[f64], config: &QpConfig) -> Result<SparseSolution> {
    Lasso::new(a, b)?.solve(config, None).map(|s| s.solution)
}

/// `||Aᵀb||_inf`.
pub fn beta_max(a: &DenseMatrix, b: &[f64]) -> f64 {
    norm_inf(&a.tr_mul_vec(b))
}

/// Least-squares residual norm `min_u ||A u - b||_2` for full column rank `A`.
pub fn least_squares_residual(a: &DenseMatrix, b: &[f64]) -> Result<f64> {
    let u = solve_spd(&gram(a), &a.tr_mul_vec(b))?;
    Ok(norm2(&crate::solution::residual(a, b, &u)))
}
