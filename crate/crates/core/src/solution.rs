use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf, DenseMatrix};

/// An entry counts as nonzero when `|x_i| > SUPPORT_THRESHOLD * ||x||_inf`.
pub const SUPPORT_THRESHOLD: f64 = 1e-5;

/// Indices `i` with `|x_i|` above the relative support threshold, ascending.
pub fn detect_support(x: &[f64]) -> Vec<usize> {
    let cut = SUPPORT_THRESHOLD * norm_inf(x);
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > cut)
        .map(|(i, _)| i)
        .collect()
}

/// A recovered vector together with its support and solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub x: Vec<f64>,
    pub support: Vec<usize>,
    pub k: usize,
    /// `||A x - b||_2`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SparseSolution {
    pub fn new(
        x: Vec<f64>,
        a: &DenseMatrix,
        b: &[f64],
        iterations: usize,
        converged: bool,
    ) -> Self {
        let support = detect_support(&x);
        let residual_norm = residual_norm(a, b, &x);
        Self {
            k: support.len(),
            x,
            support,
            residual_norm,
            iterations,
            converged,
        }
    }

    pub fn zero(a: &DenseMatrix, b: &[f64]) -> Self {
        Self::new(alloc::vec![0.0; a.cols()], a, b, 0, true)
    }

    pub fn is_zero(&self) -> bool {
        self.k == 0
    }

    /// The nonzero components `x̄`, in support order.
    pub fn reduced(&self) -> Vec<f64> {
        self.support.iter().map(|&i| self.x[i]).collect()
    }

    /// `sgn(x̄)`.
    pub fn signs(&self) -> SignVector {
        SignVector::of(&self.reduced())
    }

    /// `Ā`: the columns of `a` on the support.
    pub fn restricted_matrix(&self, a: &DenseMatrix) -> DenseMatrix {
        a.select_columns(&self.support)
    }

    pub fn l1_norm(&self) -> f64 {
        crate::linalg::norm1(&self.x)
    }
}

pub fn residual(a: &DenseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    r
}

/// `||A x - b||_2`.
pub fn residual_norm(a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
    norm2(&residual(a, b, x))
}

/// A vector of ±1, the sign pattern `c = sgn(x̄)` of a reduced solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|v| *v != 1 && *v != -1) {
            return Err(Error::InvalidArgument("sign entries must be +1 or -1"));
        }
        Ok(Self(values))
    }

    /// Signs of `v`; zero entries map to +1.
    pub fn of(v: &[f64]) -> Self {
        Self(v.iter().map(|x| if *x < 0.0 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| f64::from(s)).collect()
    }

    /// `||c||_2² = k`.
    pub fn norm_sq(&self) -> f64 {
        self.0.len() as f64
    }
}
