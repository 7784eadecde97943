//! Small dense linear algebra: row-major matrices, Gram products, a cyclic
//! Jacobi eigensolver, Cholesky solves and a power-iteration norm estimate.
//!
//! Matrices in this crate are at most a few hundred on a side, so none of the
//! kernels block for cache or vectorize explicitly.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted by the eigensolver.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Jacobi stops once the off-diagonal Frobenius norm falls below this
/// multiple of the diagonal norm.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Cholesky rejects pivots below this multiple of the largest diagonal entry.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-12;

/// A dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting a wrong length or
    /// any non-finite entry.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension("entries.len() != rows * cols"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a diagonal matrix.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "mul_vec: length mismatch");
        assert_eq!(out.len(), self.rows, "mul_vec: output length mismatch");
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = dot(row, x);
        }
        if self.cols == 0 {
            out.fill(0.0);
        }
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.tr_mul_vec_into(y, &mut out);
        out
    }

    pub fn tr_mul_vec_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows, "tr_mul_vec: length mismatch");
        assert_eq!(out.len(), self.cols, "tr_mul_vec: output length mismatch");
        out.fill(0.0);
        if self.cols == 0 {
            return;
        }
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if *yi != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += yi * a;
                }
            }
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension("matmul: inner dimensions differ"));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(l);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        Ok(out)
    }

    /// The submatrix made of the listed columns, in the order given.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self::from_fn(self.rows, columns.len(), |i, j| self.get(i, columns[j]))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Largest absolute difference between `M(i, j)` and `M(j, i)`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

#[inline]
pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[inline]
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// `a - b`, elementwise.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// The `k × k` Gram matrix `MᵀM` of an `m × k` matrix. Symmetric by
/// construction: only the upper triangle is computed.
pub fn gram(m: &DenseMatrix) -> DenseMatrix {
    let k = m.cols();
    let mut g = DenseMatrix::zeros(k, k);
    for r in 0..m.rows() {
        let row = m.row(r);
        for i in 0..k {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..k {
                g.data[i * k + j] += ri * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            g.data[i * k + j] = g.data[j * k + i];
        }
    }
    g
}

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DenseMatrix,
    pub sweeps: usize,
}

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension("eigen: matrix must be square"));
    }
    let scale = norm_inf(m.as_slice()).max(1.0);
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps every off-diagonal pair with a plane rotation until the
/// off-diagonal Frobenius norm drops below `JACOBI_TOL` times the diagonal
/// norm. Eigenvalues within `1e-10` (relative to the largest magnitude) below
/// zero are clamped to zero.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<SymmetricEigen> {
    check_symmetric(m)?;
    let n = m.rows();
    let mut a = m.clone();
    // symmetrize exactly so rotations keep both triangles in step
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let mut v = DenseMatrix::identity(n);
    let mut sweeps = 0;

    loop {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = a.get(i, j);
                if i == j {
                    diag += x * x;
                } else {
                    off += x * x;
                }
            }
        }
        if off == 0.0 || libm::sqrt(off) < JACOBI_TOL * libm::sqrt(diag) {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            break;
        }
        sweeps += 1;

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let scale = (0..n).fold(0.0_f64, |acc, i| acc.max(a.get(i, i).abs()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    let values = order
        .iter()
        .map(|&i| {
            let lam = a.get(i, i);
            if lam < 0.0 && lam >= -1e-10 * scale.max(1.0) {
                0.0
            } else {
                lam
            }
        })
        .collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

fn rotate(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    // A <- A J (columns p, q)
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    // A <- Jᵀ A (rows p, q)
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    symmetric_eigen(m).map(|e| e.values)
}

/// Cholesky factor `L` of a symmetric positive-definite matrix, `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("cholesky: matrix must be square"));
        }
        let n = m.rows();
        let max_diag = (0..n).fold(0.0_f64, |acc, i| acc.max(m.get(i, i)));
        let floor = CHOLESKY_PIVOT_TOL * max_diag;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let lj = &l.data[j * n..j * n + j];
            let d = m.get(j, j) - dot(lj, lj);
            if !(d > floor) || d <= 0.0 {
                return Err(Error::Singular {
                    column: j,
                    pivot: d,
                });
            }
            let ljj = libm::sqrt(d);
            l.data[j * n + j] = ljj;
            for i in (j + 1)..n {
                let s = m.get(i, j) - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
                l.data[i * n + j] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(v.len(), n, "cholesky solve: length mismatch");
        let l = &self.l;
        let mut y = v.to_vec();
        for i in 0..n {
            let s = dot(&l.data[i * n..i * n + i], &y[..i]);
            y[i] = (y[i] - s) / l.data[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l.data[k * n + i] * y[k];
            }
            y[i] = s / l.data[i * n + i];
        }
        y
    }
}

/// Solves `M x = v` for symmetric positive-definite `M` by Cholesky, with one
/// step of iterative refinement.
pub fn solve_spd(m: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != m.rows() {
        return Err(Error::Dimension("solve_spd: rhs length"));
    }
    let chol = Cholesky::factor(m)?;
    let mut x = chol.solve(v);
    let r = sub(v, &m.mul_vec(&x));
    let dx = chol.solve(&r);
    for (xi, d) in x.iter_mut().zip(&dx) {
        *xi += d;
    }
    Ok(x)
}

/// Estimates `λ_max(AᵀA) = ||A||₂²` by power iteration from a fixed start
/// vector. Stops after `max_iter` steps or once the relative change of the
/// estimate drops below `rtol`. The estimate approaches from below.
pub fn spectral_norm_sq(a: &DenseMatrix, max_iter: usize, rtol: f64) -> f64 {
    let n = a.cols();
    if n == 0 || a.rows() == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / libm::sqrt(n as f64); n];
    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        a.mul_vec_into(&v, &mut av);
        a.tr_mul_vec_into(&av, &mut w);
        let next = norm2(&w);
        if next == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / next;
        }
        let done = (next - lambda).abs() <= rtol * next;
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lcg_matrix(rows: usize, cols: usize, mut state: u64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn from_row_major_validates() {
        assert!(DenseMatrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
        assert!(matches!(
            DenseMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(DenseMatrix::from_row_major(1, 2, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn gram_examples() {
        assert_eq!(gram(&DenseMatrix::identity(2)), DenseMatrix::identity(2));
        let col = DenseMatrix::from_rows(&[&[3.0], &[4.0]]).unwrap();
        assert_eq!(gram(&col).as_slice(), &[25.0]);
    }

    #[test]
    fn gram_matches_triple_loop() {
        let m = lcg_matrix(3, 2, 11);
        let g = gram(&m);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for r in 0..3 {
                    s += m.get(r, i) * m.get(r, j);
                }
                assert_relative_eq!(g.get(i, j), s, max_relative = 1e-15);
            }
        }
        assert_eq!(g.asymmetry(), 0.0);
    }

    #[test]
    fn eigenvalues_of_identity_and_2x2() {
        assert_eq!(
            symmetric_eigenvalues(&DenseMatrix::identity(4)).unwrap(),
            vec![1.0; 4]
        );
        let m = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let ev = symmetric_eigenvalues(&m).unwrap();
        assert_relative_eq!(ev[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(ev[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn eigenvalues_trace_and_determinant() {
        let g = gram(&lcg_matrix(4, 2, 5));
        let ev = symmetric_eigenvalues(&g).unwrap();
        let det = g.get(0, 0) * g.get(1, 1) - g.get(0, 1) * g.get(1, 0);
        assert_relative_eq!(ev[0] + ev[1], g.trace(), max_relative = 1e-12);
        assert_relative_eq!(ev[0] * ev[1], det, max_relative = 1e-10);
        assert!(ev[0] >= ev[1]);
    }

    #[test]
    fn eigenvectors_reconstruct() {
        let g = gram(&lcg_matrix(7, 5, 9));
        let e = symmetric_eigen(&g).unwrap();
        let vt = e.vectors.transpose();
        let rebuilt = e
            .vectors
            .matmul(&DenseMatrix::diagonal(&e.values))
            .unwrap()
            .matmul(&vt)
            .unwrap();
        for (x, y) in rebuilt.as_slice().iter().zip(g.as_slice()) {
            assert!((x - y).abs() < 1e-12 * g.frobenius_norm());
        }
        let vtv = vt.matmul(&e.vectors).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv.get(i, j) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn eigen_rejects_asymmetric() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(
            symmetric_eigenvalues(&m),
            Err(Error::NotSymmetric(_))
        ));
        let rect = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            symmetric_eigenvalues(&rect),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn psd_eigenvalues_are_clamped() {
        // rank-1 gram of a 3x1 column: two exact zeros
        let col = DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0]]).unwrap();
        let ev = symmetric_eigenvalues(&gram(&col)).unwrap();
        assert_relative_eq!(ev[0], 14.0, max_relative = 1e-14);
        assert!(ev[1..].iter().all(|&v| (0.0..1e-12).contains(&v)));
    }

    #[test]
    fn spd_solves() {
        let x = solve_spd(&DenseMatrix::identity(3), &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
        let d = DenseMatrix::diagonal(&[4.0, 9.0]);
        let x = solve_spd(&d, &[8.0, 27.0]).unwrap();
        assert_relative_eq!(x[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(x[1], 3.0, max_relative = 1e-15);
    }

    #[test]
    fn spd_random_residual() {
        let b = lcg_matrix(8, 5, 23);
        let mut m = gram(&b);
        for i in 0..5 {
            m.set(i, i, m.get(i, i) + 0.1);
        }
        let v = [1.0, 0.5, -0.25, 2.0, -1.0];
        let x = solve_spd(&m, &v).unwrap();
        let back = m.mul_vec(&x);
        assert!(norm2(&sub(&back, &v)) <= 1e-8 * norm2(&v));
    }

    #[test]
    fn spd_rejects_singular_and_indefinite() {
        let singular = DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        assert!(matches!(
            solve_spd(&singular, &[1.0, 1.0]),
            Err(Error::Singular { column: 1, .. })
        ));
        let indefinite = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(solve_spd(&indefinite, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn power_iteration_matches_jacobi() {
        let a = lcg_matrix(6, 9, 77);
        let est = spectral_norm_sq(&a, 500, 1e-14);
        let top = symmetric_eigenvalues(&gram(&a)).unwrap()[0];
        assert_relative_eq!(est, top, max_relative = 1e-8);
    }

    #[test]
    fn transposed_product() {
        let a = lcg_matrix(3, 4, 3);
        let y = [1.0, -1.0, 2.0];
        let direct = a.transpose().mul_vec(&y);
        let fused = a.tr_mul_vec(&y);
        for (p, q) in direct.iter().zip(&fused) {
            assert_relative_eq!(p, q, max_relative = 1e-14);
        }
    }
}
