//! Relations between the penalty weight `beta` and the noise bound `delta`.
//!
//! At a common minimizer of the constrained and penalized problems with
//! support matrix `Ā` (`m × k`) the optimality condition
//! `Āᵀ(b - Āx̄) = beta sgn(x̄)` and `||b - Āx̄|| = delta` give
//!
//! ```text
//! sqrt(lambda_min / m) delta  <=  beta  <=  sqrt(lambda_max / k) delta
//! ```
//!
//! where `lambda_max` and `lambda_min` are the extreme nonzero eigenvalues of
//! `ĀĀᵀ`. The upper bound is rigorous. The lower bound assumes the residual
//! spreads its energy evenly over the eigenbasis of `ĀĀᵀ` (white noise), see
//! [`residual_eigen_coefficients`]. For i.i.d. Gaussian `A` the eigenvalues
//! are replaced by their asymptotic values `m sigma² (1 ± sqrt(k/m))²`.
//!
//! When `ĀᵀĀ` is invertible the same two conditions determine `beta`
//! exactly, see [`beta_equality`].

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    dot, gram, norm2, solve_spd, symmetric_eigen, symmetric_eigenvalues, DenseMatrix,
};
use crate::solution::{residual, SignVector};

/// An eigenvalue counts as nonzero when it exceeds `RANK_TOL * lambda_max`.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsMethod {
    /// Eigenvalues of the actual support matrix.
    ExactEigen,
    /// Asymptotic eigenvalues of a Gaussian support matrix.
    GaussianAsymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBounds {
    pub lower: f64,
    pub upper: f64,
    pub lambda_max: f64,
    pub lambda_min_nonzero: f64,
    pub k: usize,
    pub m: usize,
    pub delta: f64,
    pub method: BoundsMethod,
}

impl BetaBounds {
    pub fn contains(&self, beta: f64) -> bool {
        self.lower <= beta && beta <= self.upper
    }
}

/// `sqrt(lambda_max / k) delta`.
pub fn beta_upper(lambda_max: f64, k: usize, delta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "upper bound needs a nonempty support (k >= 1)",
        ));
    }
    if !(lambda_max >= 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidArgument(
            "lambda_max and delta must be nonnegative",
        ));
    }
    Ok(libm::sqrt(lambda_max / k as f64) * delta)
}

/// `sqrt(lambda_min / m) delta`.
pub fn beta_lower(lambda_min_nonzero: f64, m: usize, delta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("lower bound needs m >= 1"));
    }
    if !(lambda_min_nonzero >= 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidArgument(
            "lambda_min and delta must be nonnegative",
        ));
    }
    Ok(libm::sqrt(lambda_min_nonzero / m as f64) * delta)
}

/// Bounds from the spectrum of the support matrix `Ā` (`m × k`).
///
/// The nonzero spectrum of `ĀĀᵀ` is read off the `k × k` Gram matrix
/// `ĀᵀĀ`, which shares it.
pub fn exact_bounds(abar: &DenseMatrix, delta: f64) -> Result<BetaBounds> {
    let (m, k) = (abar.rows(), abar.cols());
    if k == 0 || k > m {
        return Err(Error::Dimension("support matrix needs 1 <= k <= m"));
    }
    let ev = symmetric_eigenvalues(&gram(abar))?;
    let lambda_max = ev[0];
    if !(lambda_max > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let lambda_min_nonzero = ev
        .iter()
        .rev()
        .copied()
        .find(|&l| l > RANK_TOL * lambda_max)
        .unwrap_or(lambda_max);
    Ok(BetaBounds {
        lower: beta_lower(lambda_min_nonzero, m, delta)?,
        upper: beta_upper(lambda_max, k, delta)?,
        lambda_max,
        lambda_min_nonzero,
        k,
        m,
        delta,
        method: BoundsMethod::ExactEigen,
    })
}

/// [`exact_bounds`] on the columns of `a` listed in `support`.
pub fn exact_bounds_on_support(
    a: &DenseMatrix,
    support: &[usize],
    delta: f64,
) -> Result<BetaBounds> {
    exact_bounds(&a.select_columns(support), delta)
}

/// Asymptotic `(lambda_min, lambda_max)` of `ĀĀᵀ` for an `m × k` Gaussian
/// `Ā` with entry variance `sigma²` and `gamma = k/m`.
pub fn gaussian_eigen_estimates(m: usize, sigma: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument("gamma must lie in (0, 1]"));
    }
    let scale = m as f64 * sigma * sigma;
    let root = libm::sqrt(gamma);
    Ok((
        scale * (1.0 - root) * (1.0 - root),
        scale * (1.0 + root) * (1.0 + root),
    ))
}

/// `((1 - sqrt(g)) sigma delta, (1 + sqrt(g)) sigma delta / sqrt(g))` with
/// `g = k/m`, computed by feeding [`gaussian_eigen_estimates`] to
/// [`beta_lower`] and [`beta_upper`].
pub fn gaussian_beta_interval(m: usize, k: usize, sigma: f64, delta: f64) -> Result<(f64, f64)> {
    let b = gaussian_bounds(m, k, sigma, delta)?;
    Ok((b.lower, b.upper))
}

pub fn gaussian_bounds(m: usize, k: usize, sigma: f64, delta: f64) -> Result<BetaBounds> {
    if k == 0 || k > m {
        return Err(Error::InvalidArgument("need 1 <= k <= m"));
    }
    let (lambda_min, lambda_max) = gaussian_eigen_estimates(m, sigma, k as f64 / m as f64)?;
    Ok(BetaBounds {
        lower: beta_lower(lambda_min, m, delta)?,
        upper: beta_upper(lambda_max, k, delta)?,
        lambda_max,
        lambda_min_nonzero: lambda_min,
        k,
        m,
        delta,
        method: BoundsMethod::GaussianAsymptotic,
    })
}

/// Result of the closed-form `beta` on a known support and sign pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityRelation {
    pub beta: f64,
    /// `x̄ = (ĀᵀĀ)⁻¹(Āᵀb - beta c)`.
    pub x_bar: Vec<f64>,
    /// Whether `sgn(x̄) = c`; when false the assumed pattern is not the
    /// pattern of the minimizer at this `beta`.
    pub signs_consistent: bool,
}

/// The `beta` for which the penalized minimizer with support `Ā` and signs
/// `c` has residual exactly `delta`:
///
/// ```text
/// beta² = (delta² - ||b||² + bᵀĀ(ĀᵀĀ)⁻¹Āᵀb) / (cᵀ(ĀᵀĀ)⁻¹c)
/// ```
///
/// The numerator is evaluated as `delta² - ||b - Ā p||²` with
/// `p = (ĀᵀĀ)⁻¹Āᵀb`, the same quantity without the cancellation.
pub fn beta_equality(
    abar: &DenseMatrix,
    b: &[f64],
    c: &SignVector,
    delta: f64,
) -> Result<EqualityRelation> {
    if c.len() != abar.cols() {
        return Err(Error::Dimension(
            "sign vector length must equal support size",
        ));
    }
    if b.len() != abar.rows() {
        return Err(Error::Dimension(
            "b must have one entry per row of the support matrix",
        ));
    }
    let g = gram(abar);
    let p = solve_spd(&g, &abar.tr_mul_vec(b))?;
    let cf = c.to_f64();
    let q = solve_spd(&g, &cf)?;
    let fit = residual(abar, b, &p);
    let numerator = delta * delta - dot(&fit, &fit);
    let denominator = dot(&cf, &q);
    let numerator = if numerator < 0.0 {
        if numerator >= -1e-12 * (dot(b, b) + delta * delta) {
            0.0
        } else {
            return Err(Error::InfeasibleSupport(numerator));
        }
    } else {
        numerator
    };
    let beta = libm::sqrt(numerator / denominator);
    let x_bar: Vec<f64> = p.iter().zip(&q).map(|(pi, qi)| pi - beta * qi).collect();
    let signs_consistent =
        x_bar
            .iter()
            .zip(c.values())
            .all(|(x, &s)| if s > 0 { *x > 0.0 } else { *x < 0.0 });
    Ok(EqualityRelation {
        beta,
        x_bar,
        signs_consistent,
    })
}

/// Coefficients `alpha` of `residual = sum_i alpha_i e_i` in an orthonormal
/// eigenbasis `e_1..e_m` of `ĀĀᵀ`, ordered by descending eigenvalue.
///
/// The eigenvectors for nonzero eigenvalues are `Ā v_i / sqrt(mu_i)` from the
/// `k × k` problem `ĀᵀĀ v_i = mu_i v_i`; the null space of `ĀĀᵀ` is completed
/// with Householder reflections. Null-space coefficients depend on that basis
/// choice; their squares sum to the energy of the residual outside the range
/// of `Ā`.
pub fn residual_eigen_coefficients(abar: &DenseMatrix, residual: &[f64]) -> Result<Vec<f64>> {
    let m = abar.rows();
    if residual.len() != m {
        return Err(Error::Dimension("residual must have one entry per row"));
    }
    let eig = symmetric_eigen(&gram(abar))?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let rank = eig
        .values
        .iter()
        .take_while(|&&l| top > 0.0 && l > RANK_TOL * top)
        .count();

    // orthonormal range basis, stored column-major for the reflections below
    let mut basis: Vec<Vec<f64>> = (0..rank)
        .map(|i| {
            let v = eig.vectors.column(i);
            let scale = 1.0 / libm::sqrt(eig.values[i]);
            abar.mul_vec(&v).into_iter().map(|x| x * scale).collect()
        })
        .collect();
    let mut alpha: Vec<f64> = basis.iter().map(|e| dot(e, residual)).collect();

    let mut rotated = residual.to_vec();
    for j in 0..rank {
        let col = &basis[j];
        let Some(v) = householder(&col[j..]) else {
            continue;
        };
        reflect(&v, &mut rotated[j..]);
        for other in basis.iter_mut().skip(j + 1) {
            reflect(&v, &mut other[j..]);
        }
    }
    alpha.extend_from_slice(&rotated[rank..]);
    debug_assert_eq!(alpha.len(), m);
    Ok(alpha)
}

/// Unit vector `v` with `(I - 2vvᵀ)x = ∓||x|| e_1`, or `None` for `x = 0`.
fn householder(x: &[f64]) -> Option<Vec<f64>> {
    let norm = norm2(x);
    if norm == 0.0 {
        return None;
    }
    let mut v = x.to_vec();
    v[0] += if x[0] >= 0.0 { norm } else { -norm };
    let vn = norm2(&v);
    for vi in v.iter_mut() {
        *vi /= vn;
    }
    Some(v)
}

fn reflect(v: &[f64], x: &mut [f64]) {
    let s = 2.0 * dot(v, x);
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

/// `(b - Āx̄)ᵀ ĀĀᵀ (b - Āx̄) = ||Āᵀ(b - Āx̄)||²`, which equals `beta² k` at a
/// penalized minimizer with support size `k`.
pub fn residual_energy_in_range(abar: &DenseMatrix, b: &[f64], x_bar: &[f64]) -> f64 {
    let r: Vec<f64> = residual(abar, b, x_bar).into_iter().map(|v| -v).collect();
    let g = abar.tr_mul_vec(&r);
    dot(&g, &g)
}

/// The `m × m` matrix `ĀĀᵀ`.
pub fn outer_gram(abar: &DenseMatrix) -> DenseMatrix {
    gram(&abar.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn upper_bound_examples() {
        assert_relative_eq!(beta_upper(221.98, 24, 1.5).unwrap(), 4.562, epsilon = 5e-4);
        assert_eq!(beta_upper(5.0, 3, 0.0).unwrap(), 0.0);
        assert_relative_eq!(beta_upper(7.0, 7, 2.5).unwrap(), 2.5, epsilon = 1e-15);
        assert!(beta_upper(1.0, 0, 1.0).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        assert_relative_eq!(beta_lower(26.02, 100, 1.5).unwrap(), 0.7651, epsilon = 5e-5);
        assert_eq!(beta_lower(3.0, 10, 0.0).unwrap(), 0.0);
        assert_relative_eq!(beta_lower(100.0, 100, 1.7).unwrap(), 1.7, epsilon = 1e-15);
        assert!(beta_lower(1.0, 0, 1.0).is_err());
    }

    #[test]
    fn gaussian_estimates_at_reference_sizes() {
        let (lmin, lmax) = gaussian_eigen_estimates(100, 1.0, 0.24).unwrap();
        // 100 (1 ∓ 0.489898)²
        assert_relative_eq!(lmin, 26.0204, epsilon = 1e-3);
        assert_relative_eq!(lmax, 221.9796, epsilon = 1e-3);
        let (lmin, lmax) = gaussian_eigen_estimates(50, 2.0, 1.0).unwrap();
        assert_eq!(lmin, 0.0);
        assert_relative_eq!(lmax, 4.0 * 50.0 * 4.0, epsilon = 1e-12);
        let (lmin, lmax) = gaussian_eigen_estimates(10, 1.0, 1e-12).unwrap();
        assert_relative_eq!(lmin, 10.0, epsilon = 1e-4);
        assert_relative_eq!(lmax, 10.0, epsilon = 1e-4);
        assert!(gaussian_eigen_estimates(10, 1.0, 0.0).is_err());
        assert!(gaussian_eigen_estimates(10, 1.0, 1.5).is_err());
    }

    #[test]
    fn gaussian_interval_examples() {
        let (lo, hi) = gaussian_beta_interval(100, 24, 1.0, 1.5).unwrap();
        assert_relative_eq!(lo, 0.7651, epsilon = 1e-4);
        assert_relative_eq!(hi, 4.562, epsilon = 5e-4);
        assert_eq!(
            gaussian_beta_interval(100, 24, 1.0, 0.0).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(gaussian_beta_interval(40, 40, 1.3, 2.0).unwrap().0, 0.0);
        assert!(gaussian_beta_interval(10, 11, 1.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_interval_closed_form() {
        for &(m, k, sigma, delta) in &[(100, 24, 1.0, 1.5), (100, 24, 1.0, 4.5), (60, 7, 0.3, 2.0)]
        {
            let (lo, hi) = gaussian_beta_interval(m, k, sigma, delta).unwrap();
            let g: f64 = k as f64 / m as f64;
            assert_relative_eq!(lo, (1.0 - g.sqrt()) * sigma * delta, max_relative = 1e-13);
            assert_relative_eq!(
                hi,
                (1.0 + g.sqrt()) * sigma * delta / g.sqrt(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn exact_bounds_scaled_orthonormal() {
        // columns e1, e2 of R^4 scaled by s
        let s = 3.0;
        let abar = DenseMatrix::from_fn(4, 2, |i, j| if i == j { s } else { 0.0 });
        let b = exact_bounds(&abar, 2.0).unwrap();
        assert_relative_eq!(b.lambda_max, 9.0, epsilon = 1e-12);
        assert_relative_eq!(b.lambda_min_nonzero, 9.0, epsilon = 1e-12);
        assert_relative_eq!(b.lower, s * 2.0 / 2.0, epsilon = 1e-12);
        assert_relative_eq!(b.upper, s * 2.0 / libm::sqrt(2.0), epsilon = 1e-12);
        assert_eq!(b.method, BoundsMethod::ExactEigen);
    }

    #[test]
    fn exact_bounds_single_column() {
        let abar = DenseMatrix::from_rows(&[&[0.6], &[0.8], &[0.0]]).unwrap();
        let b = exact_bounds(&abar, 1.2).unwrap();
        assert_relative_eq!(b.lower, 1.2 / libm::sqrt(3.0), epsilon = 1e-12);
        assert_relative_eq!(b.upper, 1.2, epsilon = 1e-12);
    }

    #[test]
    fn exact_bounds_errors() {
        assert!(matches!(
            exact_bounds(&DenseMatrix::zeros(3, 2), 1.0),
            Err(Error::ZeroSpectrum)
        ));
        assert!(exact_bounds(&DenseMatrix::zeros(3, 0), 1.0).is_err());
        assert!(exact_bounds(&DenseMatrix::identity(2).select_columns(&[0, 1, 0]), 1.0).is_err());
    }

    #[test]
    fn equality_identity_case() {
        let abar = DenseMatrix::identity(2);
        let c = SignVector::new(vec![1, 1]).unwrap();
        let eq = beta_equality(&abar, &[3.0, 4.0], &c, 1.0).unwrap();
        assert_relative_eq!(eq.beta, FRAC_1_SQRT_2, epsilon = 1e-14);
        assert_relative_eq!(eq.x_bar[0], 3.0 - FRAC_1_SQRT_2, epsilon = 1e-14);
        assert!(eq.signs_consistent);
    }

    #[test]
    fn equality_orthonormal_reduction() {
        // orthonormal columns of a 3x2 matrix
        let r = FRAC_1_SQRT_2;
        let abar = DenseMatrix::from_rows(&[&[r, 0.0], &[r, 0.0], &[0.0, 1.0]]).unwrap();
        let b = [2.0, 1.0, -3.0];
        let c = SignVector::new(vec![1, -1]).unwrap();
        let delta = 1.5;
        let atb = abar.tr_mul_vec(&b);
        let want = libm::sqrt((delta * delta - dot(&b, &b) + dot(&atb, &atb)) / 2.0);
        let eq = beta_equality(&abar, &b, &c, delta).unwrap();
        assert_relative_eq!(eq.beta, want, max_relative = 1e-13);
    }

    #[test]
    fn equality_exact_fit() {
        let abar = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0], &[1.0, 1.0]]).unwrap();
        let b = abar.mul_vec(&[0.5, -1.5]);
        let c = SignVector::new(vec![1, -1]).unwrap();
        let eq = beta_equality(&abar, &b, &c, 0.0).unwrap();
        assert_eq!(eq.beta, 0.0);
    }

    #[test]
    fn equality_reports_infeasible_and_sign_mismatch() {
        let abar = DenseMatrix::from_rows(&[&[1.0], &[0.0]]).unwrap();
        let c = SignVector::new(vec![1]).unwrap();
        // residual outside the span is 2 > delta
        assert!(matches!(
            beta_equality(&abar, &[1.0, 2.0], &c, 1.0),
            Err(Error::InfeasibleSupport(_))
        ));
        // delta so large that x̄ flips sign
        let eq = beta_equality(&abar, &[1.0, 0.0], &c, 3.0).unwrap();
        assert!(!eq.signs_consistent);
        assert!(matches!(
            beta_equality(&DenseMatrix::zeros(2, 1), &[1.0, 0.0], &c, 3.0),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn coefficients_zero_and_eigenvector() {
        let abar = crate::problem::generate_gaussian_matrix(6, 2, 1.0, 4).unwrap();
        let alpha = residual_eigen_coefficients(&abar, &[0.0; 6]).unwrap();
        assert!(alpha.iter().all(|a| *a == 0.0));

        let full = symmetric_eigen(&outer_gram(&abar)).unwrap();
        let e1 = full.vectors.column(0);
        let alpha = residual_eigen_coefficients(&abar, &e1).unwrap();
        assert_relative_eq!(alpha[0].abs(), 1.0, epsilon = 1e-12);
        assert!(alpha[1..].iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn coefficients_parseval() {
        let abar = crate::problem::generate_gaussian_matrix(30, 8, 1.0, 9).unwrap();
        let r: Vec<f64> = (0..30).map(|i| libm::sin(i as f64 * 1.7)).collect();
        let alpha = residual_eigen_coefficients(&abar, &r).unwrap();
        assert_eq!(alpha.len(), 30);
        assert_relative_eq!(dot(&alpha, &alpha), dot(&r, &r), max_relative = 1e-12);
        // range coefficients reproduce rᵀĀĀᵀr through the eigenvalues
        let ev = symmetric_eigenvalues(&gram(&abar)).unwrap();
        let weighted: f64 = ev.iter().zip(&alpha).map(|(l, a)| l * a * a).sum();
        let g = abar.tr_mul_vec(&r);
        assert_relative_eq!(weighted, dot(&g, &g), max_relative = 1e-10);
    }

    #[test]
    fn coefficients_match_full_eigenbasis_on_range() {
        let abar = crate::problem::generate_gaussian_matrix(9, 3, 1.0, 2).unwrap();
        let r: Vec<f64> = (0..9).map(|i| (i as f64) - 4.0).collect();
        let alpha = residual_eigen_coefficients(&abar, &r).unwrap();
        let full = symmetric_eigen(&outer_gram(&abar)).unwrap();
        for i in 0..3 {
            let direct = dot(&full.vectors.column(i), &r);
            assert_relative_eq!(alpha[i].abs(), direct.abs(), max_relative = 1e-9);
        }
    }
}
