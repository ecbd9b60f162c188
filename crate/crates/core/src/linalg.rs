//! Small dense linear algebra: row-major matrices, a symmetric
//! eigensolver (Householder tridiagonalization followed by implicit QL),
//! and Cholesky factorization.
//!
//! Matrices here are at most a few thousand rows (sample pools, projected
//! embedding spaces, kernel Gram matrices), so plain `Vec` storage is enough.

#![allow(clippy::needless_range_loop)]

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("symmetric eigensolver did not converge")]
    NoConvergence,
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Real"))]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() })
    }

    pub fn to_rows(&self) -> Vec<Vec<F>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[F]>::to_vec).collect()
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[F]) -> Result<Vec<F>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::Dimension(format!("{} columns vs vector {}", self.cols, v.len())));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn trace(&self) -> F {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn sum(&self) -> F {
        self.data.iter().copied().sum()
    }

    pub fn max_asymmetry(&self) -> F {
        let mut worst = F::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: F) -> bool {
        self.is_square() && self.max_asymmetry() <= tol
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * F::half())
    }

    pub fn add_diagonal(&mut self, value: F) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<F> Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> IndexMut<(usize, usize)> for Matrix<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<F> {
    /// Eigenvalues in ascending order.
    pub values: Vec<F>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix<F>,
}

impl<F: Real> SymmetricEigen<F> {
    pub fn vector(&self, k: usize) -> Vec<F> {
        self.vectors.column(k)
    }
}

/// Eigenvalues and eigenvectors of a symmetric matrix.
///
/// Only the lower triangle is read. Eigenvalues come back sorted ascending.
pub fn symmetric_eigen<F: Real>(a: &Matrix<F>) -> Result<SymmetricEigen<F>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Dimension("eigendecomposition needs a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.rows();
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: Matrix::zeros(0, 0) });
    }
    let mut v: Vec<Vec<F>> = (0..n).map(|i| (0..n).map(|j| a[(i.max(j), i.min(j))]).collect()).collect();
    let mut d = vec![F::zero(); n];
    let mut e = vec![F::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    implicit_ql(&mut v, &mut d, &mut e)?;
    let vectors = Matrix::from_fn(n, n, |i, j| v[i][j]);
    Ok(SymmetricEigen { values: d, vectors })
}

/// Eigenvalues only; same algorithm, ascending order.
pub fn symmetric_eigenvalues<F: Real>(a: &Matrix<F>) -> Result<Vec<F>, LinalgError> {
    symmetric_eigen(a).map(|e| e.values)
}

// Householder reduction to tridiagonal form (EISPACK tred2 lineage).
fn tridiagonalize<F: Real>(v: &mut [Vec<F>], d: &mut [F], e: &mut [F]) {
    let n = d.len();
    let zero = F::zero();
    d[..n].copy_from_slice(&v[n - 1][..n]);
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = zero;
                v[j][i] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = F::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = zero;
    }
    v[n - 1][n - 1] = F::one();
    e[0] = zero;
}

// Symmetric tridiagonal QL with implicit shifts (EISPACK tql2 lineage).
fn implicit_ql<F: Real>(v: &mut [Vec<F>], d: &mut [F], e: &mut [F]) -> Result<(), LinalgError> {
    let n = d.len();
    let zero = F::zero();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = F::epsilon();
    let max_iter = 60 * n.max(1);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(LinalgError::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (F::two() * e[l]);
                let mut r = p.hypot(F::one());
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = F::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    // Selection sort keeps the eigenvector permutation in lockstep.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in v.iter_mut() {
                row.swap(i, k);
            }
        }
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Real"))]
pub struct Cholesky<F> {
    lower: Matrix<F>,
}

impl<F: Real> Cholesky<F> {
    pub fn new(a: &Matrix<F>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Dimension("Cholesky needs a square matrix".into()));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if diag <= F::zero() || !diag.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: j, pivot: diag.to_f64().unwrap_or(f64::NAN) });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Matrix<F> {
        &self.lower
    }

    /// Solves `L y = b`.
    pub fn forward_solve(&self, b: &[F]) -> Result<Vec<F>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::Dimension(format!("rhs length {} vs {}", b.len(), n)));
        }
        let mut y = vec![F::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[(i, k)] * y[k];
            }
            y[i] = s / self.lower[(i, i)];
        }
        Ok(y)
    }

    /// `bᵀ A⁻¹ b`, computed as `‖L⁻¹ b‖²`.
    pub fn inverse_quadratic_form(&self, b: &[F]) -> Result<F, LinalgError> {
        let y = self.forward_solve(b)?;
        Ok(dot(&y, &y))
    }

    pub fn log_determinant(&self) -> F {
        F::two() * (0..self.dim()).map(|i| self.lower[(i, i)].ln()).sum::<F>()
    }
}

/// Sample mean of row vectors.
pub fn mean_vector<F: Real>(rows: &[&[F]]) -> Vec<F> {
    let d = rows.first().map_or(0, |r| r.len());
    let n = F::from_count(rows.len().max(1));
    let mut mu = vec![F::zero(); d];
    for r in rows {
        for (m, &x) in mu.iter_mut().zip(r.iter()) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    mu
}

/// Unbiased sample covariance (denominator `n - 1`) about `mean`.
pub fn sample_covariance<F: Real>(rows: &[&[F]], mean: &[F]) -> Matrix<F> {
    let d = mean.len();
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![F::zero(); d];
    for r in rows {
        for k in 0..d {
            centered[k] = r[k] - mean[k];
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == F::zero() {
                continue;
            }
            for j in 0..=i {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = F::from_count(rows.len().saturating_sub(1).max(1));
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &SymmetricEigen<f64>) -> Matrix<f64> {
        let n = e.values.len();
        Matrix::from_fn(n, n, |i, j| (0..n).map(|k| e.vectors[(i, k)] * e.values[k] * e.vectors[(j, k)]).sum())
    }

    #[test]
    fn eigen_of_complete_graph_laplacian() {
        // 3I - J has spectrum (0, 3, 3).
        let a = Matrix::from_fn(3, 3, |i, j| if i == j { 2.0f64 } else { -1.0 });
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0]).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        assert!((e.values[2] - 3.0).abs() < 1e-12);
        let back = reconstruct(&e);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_handles_diagonal_and_singleton() {
        let a = Matrix::from_rows(&[vec![5.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values, vec![-1.0, 5.0]);
        let one = Matrix::from_rows(&[vec![7.0f32]]).unwrap();
        assert_eq!(symmetric_eigenvalues(&one).unwrap(), vec![7.0]);
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let a = Matrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let e = symmetric_eigen(&a).unwrap();
        let vt_v = e.vectors.transpose().matmul(&e.vectors).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vt_v[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_solves_quadratic_form() {
        let a = Matrix::from_rows(&[vec![4.0f64, 2.0], vec![2.0, 3.0]]).unwrap();
        let c = Cholesky::new(&a).unwrap();
        // inverse is [[3, -2], [-2, 4]] / 8
        let q = c.inverse_quadratic_form(&[1.0, 1.0]).unwrap();
        assert!((q - 3.0 / 8.0).abs() < 1e-14);
        assert!((c.log_determinant() - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::new(&a), Err(LinalgError::NotPositiveDefinite { row: 1, .. })));
    }

    #[test]
    fn covariance_of_line() {
        let pts = [vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 4.0]];
        let rows: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let mu = mean_vector(&rows);
        assert_eq!(mu, vec![1.0, 2.0]);
        let cov = sample_covariance(&rows, &mu);
        assert_eq!(cov.to_rows(), vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
    }
}
