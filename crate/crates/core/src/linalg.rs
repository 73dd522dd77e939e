//! Small dense linear algebra.
//!
//! Matrices of size m x m (m up to a few thousand) are factored here with
//! a hand-rolled Cholesky so pivots can be monitored. Large dense work
//! (N x N oracles, eigendecompositions) is delegated to `faer`.

use faer::linalg::matmul::matmul;
use faer::prelude::*;
use faer::{Accum, Mat, MatRef, Side};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite
/// matrix, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the row-major `n x n` matrix `a` (only the lower triangle is
    /// read). Fails at the first pivot that is not above `rel_tol` times the
    /// corresponding original diagonal entry.
    pub fn factor(a: &[f64], n: usize, rel_tol: f64) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let s = a[i * n + j] - dot(ri, rj);
                if i == j {
                    if !(s > rel_tol * a[i * n + i].abs()) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Squared diagonal of the factor, i.e. the LDL^T pivots.
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.l[i * self.n + i].powi(2)).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let s = y[i] - dot(&self.l[i * n..i * n + i], &y[..i]);
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let s = y[i] - dot(&self.l[i * n..i * n + i], &y[..i]);
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solves `L^T x = b` for the upper factor only.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Row-major lower factor.
    pub fn lower(&self) -> &[f64] {
        &self.l
    }
}

/// Cholesky factor of a positive *semi*-definite matrix. Pivots within
/// `tol * max_diag` of zero produce a zero column; pivots below `-tol *
/// max_diag` are an error.
pub fn cholesky_psd(a: &[f64], n: usize, tol: f64) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let d = a[j * n + j] - dot(&l[j * n..j * n + j], &l[j * n..j * n + j]);
        if d < -tol * scale {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        if d <= tol * scale {
            continue;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let s = a[i * n + j] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Symmetric solve with Jacobi scaling, pivot monitoring and one step of
/// iterative refinement. `gram` is row-major m x m.
#[derive(Debug, Clone)]
pub struct ScaledSolve {
    scale: Vec<f64>,
    chol: Cholesky,
    condition: f64,
}

impl ScaledSolve {
    pub fn new(gram: &[f64], m: usize, max_condition: f64) -> Result<Self> {
        let scale: Vec<f64> = (0..m)
            .map(|s| {
                let d = gram[s * m + s];
                if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }
            })
            .collect();
        if let Some(col) = scale.iter().position(|&d| d == 0.0) {
            return Err(Error::SingularDesign { condition: f64::INFINITY, limit: max_condition, column: col });
        }
        let mut a = vec![0.0; m * m];
        for s in 0..m {
            for t in 0..m {
                a[s * m + t] = gram[s * m + t] * scale[s] * scale[t];
            }
        }
        let condition = condition_number(&a, m);
        let chol = match Cholesky::factor(&a, m, 0.0) {
            Ok(c) => c,
            Err(Error::NotPositiveDefinite { pivot }) => {
                return Err(Error::SingularDesign { condition: f64::INFINITY, limit: max_condition, column: pivot });
            }
            Err(e) => return Err(e),
        };
        if !(condition <= max_condition) {
            let column = smallest_pivot(&chol);
            return Err(Error::SingularDesign { condition, limit: max_condition, column });
        }
        Ok(Self { scale, chol, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, gram: &[f64], b: &[f64]) -> Vec<f64> {
        let m = self.scale.len();
        let solve_scaled = |rhs: &[f64]| {
            let scaled: Vec<f64> = rhs.iter().zip(&self.scale).map(|(x, d)| x * d).collect();
            let y = self.chol.solve(&scaled);
            y.iter().zip(&self.scale).map(|(x, d)| x * d).collect::<Vec<f64>>()
        };
        let mut x = solve_scaled(b);
        let r: Vec<f64> = (0..m).map(|s| b[s] - dot(&gram[s * m..(s + 1) * m], &x)).collect();
        let dx = solve_scaled(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        x
    }
}

fn smallest_pivot(chol: &Cholesky) -> usize {
    chol.pivots()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// 2-norm condition number of a symmetric row-major matrix; infinite when
/// the smallest eigenvalue is not positive.
pub fn condition_number(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mat = MatRef::from_row_major_slice(a, n, n);
    match mat.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) => {
            let lo = ev[0];
            let hi = ev[n - 1];
            if lo <= 0.0 { f64::INFINITY } else { hi / lo }
        }
        Err(_) => f64::INFINITY,
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// `acc += block^T block` for a row-major `rows x cols` block.
pub fn gram_block_add(acc: &mut Mat<f64>, block: &[f64], rows: usize, cols: usize) {
    let b = MatRef::from_row_major_slice(&block[..rows * cols], rows, cols);
    matmul(acc.as_mut(), Accum::Add, b.transpose(), b, 1.0, Par::Seq);
}

/// `acc += block^T v` for a row-major `rows x cols` block.
pub fn gemv_t_add(acc: &mut [f64], block: &[f64], rows: usize, cols: usize, v: &[f64]) {
    for r in 0..rows {
        let row = &block[r * cols..(r + 1) * cols];
        let vr = v[r];
        for (a, x) in acc.iter_mut().zip(row) {
            *a += x * vr;
        }
    }
}

pub fn to_faer(a: ArrayView2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_faer(a: MatRef<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Row-major copy of a faer matrix.
pub fn faer_to_row_major(a: MatRef<f64>) -> Vec<f64> {
    let (r, c) = (a.nrows(), a.ncols());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[i * c + j] = a[(i, j)];
        }
    }
    out
}

/// Dense SPD solve through faer's LL^T. Used only by oracles.
pub fn dense_spd_solve(a: ArrayView2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { context: "dense solve (square)", expected: n, actual: a.ncols() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { context: "dense solve rhs", expected: n, actual: b.len() });
    }
    let mat = to_faer(a);
    let llt = mat.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite { pivot: 0 })?;
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let mut x = llt.solve(&rhs);
    // One step of iterative refinement.
    let mut r = rhs.clone();
    matmul(r.as_mut(), Accum::Add, mat.as_ref(), x.as_ref(), -1.0, Par::Seq);
    x += llt.solve(&r);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

/// Whether a dense symmetric matrix admits an LL^T factorization.
pub fn dense_is_positive_definite(a: ArrayView2<f64>) -> bool {
    to_faer(a).llt(Side::Lower).is_ok()
}

/// Eigendecomposition of a symmetric matrix, eigenvalues in nonincreasing
/// order, eigenvectors as columns.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    let mat = to_faer(a);
    let evd = mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..n).rev().map(|k| s[k]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, k)| u[(i, n - 1 - k)]);
    Ok((values, vectors))
}

/// Eigenvalues only, nonincreasing.
pub fn symmetric_eigenvalues(a: ArrayView2<f64>) -> Result<Vec<f64>> {
    let mat = to_faer(a);
    let mut ev = mat
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigenvalue computation failed: {e:?}")))?;
    ev.reverse();
    Ok(ev)
}

/// `a * b` for dense ndarray operands via faer.
pub fn matmul_dense(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let fa = to_faer(a);
    let fb = to_faer(b);
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, fa.as_ref(), fb.as_ref(), 1.0, Par::Seq);
    from_faer(out.as_ref())
}
