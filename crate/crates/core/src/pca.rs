//! Principal components of the sample correlation matrix.
//!
//! `Psi = Z Z^T` with `Z = Y phi^{1/2}` (N x M), so the nonzero spectrum of
//! `Psi` is that of the M x M matrix `Z^T Z = U diag(lambda) U^T` and the
//! components are `V = Z U lambda^{-1/2}`. Nothing N x N is formed.

use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::design::{gram_only, ColumnDemeaned, DesignRows, MatrixRows};
use crate::error::{Error, Result};
use crate::linalg::{dot, matmul_dense, symmetric_eigen};
use crate::reduce::pairwise_sum;
use crate::regress::weighted_residuals;
use crate::stats::{phi_sqrt_coefficient, LoadingsVariant, NormalizedLoadings};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// Rows of `Y phi^{1/2}`.
pub struct PhiSqrtRows<S> {
    inner: S,
    c: f64,
    root: f64,
}

impl<S: DesignRows> PhiSqrtRows<S> {
    pub fn new(inner: S) -> Self {
        let m = inner.n_cols();
        Self { inner, c: phi_sqrt_coefficient(m), root: (m as f64).sqrt() }
    }
}

impl<S: DesignRows> DesignRows for PhiSqrtRows<S> {
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]) {
        let m = self.n_cols();
        self.inner.fill_rows(start, rows, out);
        for row in out[..rows * m].chunks_mut(m) {
            let shift = self.c * pairwise_sum(row);
            row.iter_mut().for_each(|v| *v = (*v + shift) / self.root);
        }
    }
}

/// Spectrum of `Z^T Z`: nonincreasing eigenvalues (clamped at zero) and
/// eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PcBasis {
    pub eigenvalues: Vec<f64>,
    pub u: Array2<f64>,
    /// Number of eigenvalues above the rank tolerance.
    pub rank: usize,
}

/// `src` yields the rows of the raw M-column `Y`.
pub fn pc_basis(src: &dyn DesignRows) -> Result<PcBasis> {
    let z = PhiSqrtRows::new(src);
    let m = z.n_cols();
    if m == 0 {
        return Err(Error::param("principal components need at least one column"));
    }
    let g = Array2::from_shape_vec((m, m), gram_only(&z)).expect("square");
    let (mut eigenvalues, u) = symmetric_eigen(g.view())?;
    let top = eigenvalues[0].max(0.0);
    let rank = eigenvalues.iter().take_while(|&&l| l > RANK_TOL * top).count();
    eigenvalues.iter_mut().skip(rank).for_each(|l| *l = 0.0);
    Ok(PcBasis { eigenvalues, u, rank })
}

impl PcBasis {
    /// `sum_{k <= a < rank} lambda_a [V_ia]^2`, using
    /// `lambda_a [V_ia]^2 = (Z_i U_a)^2`, per row of `src`.
    fn tail_energy(&self, src: &dyn DesignRows, k: usize) -> Vec<f64> {
        let z = PhiSqrtRows::new(src);
        let m = z.n_cols();
        let r = self.rank;
        let ut: Vec<Vec<f64>> = (k.min(r)..r).map(|a| self.u.column(a).to_vec()).collect();
        (0..z.n_rows())
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; m];
                z.fill_rows(i, 1, &mut row);
                ut.iter().map(|ua| dot(&row, ua).powi(2)).sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcDecomposition {
    /// All M eigenvalues, nonincreasing; numerically zero ones are 0.
    pub eigenvalues: Vec<f64>,
    /// N x r unit components for the r nonzero eigenvalues. The entry of
    /// largest magnitude in each column is positive.
    pub components: Array2<f64>,
    /// `(1/sqrt(N)) sum_i V^(1)_i`.
    pub theta: f64,
}

impl PcDecomposition {
    pub fn rank(&self) -> usize {
        self.components.ncols()
    }
}

pub fn correlation_pcs(y: &NormalizedLoadings) -> Result<PcDecomposition> {
    if y.variant != LoadingsVariant::Raw {
        return Err(Error::param("correlation_pcs needs the raw M-column loadings"));
    }
    let n = y.y.nrows();
    let basis = pc_basis(&y.rows())?;
    let r = basis.rank;
    let m = y.y.ncols();
    let rot = Array2::from_shape_fn((m, r), |(s, a)| basis.u[[s, a]] / basis.eigenvalues[a].sqrt());
    let z = crate::stats::phi_sqrt_apply(y.y.view());
    let mut components = matmul_dense(z.view(), rot.view());
    for mut col in components.axis_iter_mut(Axis(1)) {
        let lead = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if lead < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    let theta = if r > 0 { pairwise_sum(&components.column(0).to_vec()) / (n as f64).sqrt() } else { 0.0 };
    Ok(PcDecomposition { eigenvalues: basis.eigenvalues, components, theta })
}

/// Principal-component specific variances. `violations` lists alphas whose
/// value is not positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PcSpecificRisks {
    pub xi_sq: Vec<f64>,
    pub violations: Vec<usize>,
}

fn check_pc_args(m: usize, k: usize, zeta: f64, sigma: &[f64], n: usize) -> Result<()> {
    if !(1..m).contains(&k) {
        return Err(Error::param(format!("number of principal components K = {k} must satisfy 1 <= K < M = {m}")));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::param(format!("zeta must lie in (0, 1], got {zeta}")));
    }
    if sigma.len() != n {
        return Err(Error::DimensionMismatch { context: "pc specific risks sigma", expected: n, actual: sigma.len() });
    }
    Ok(())
}

fn collect(xi_sq: Vec<f64>) -> PcSpecificRisks {
    let violations = xi_sq.iter().enumerate().filter(|(_, &v)| v <= 0.0).map(|(i, _)| i).collect();
    PcSpecificRisks { xi_sq, violations }
}

/// `xi_i^2 = zeta sigma_i^2 sum_{a > K} lambda_a [V_ia]^2`.
pub fn pc_specific_risks(pcs: &PcDecomposition, sigma: &[f64], k: usize, zeta: f64) -> Result<PcSpecificRisks> {
    let (n, r) = pcs.components.dim();
    check_pc_args(pcs.eigenvalues.len(), k, zeta, sigma, n)?;
    let v = &pcs.components;
    let xi_sq = (0..n)
        .into_par_iter()
        .map(|i| {
            let tail: f64 = (k.min(r)..r).map(|a| pcs.eigenvalues[a] * v[[i, a]] * v[[i, a]]).sum();
            zeta * sigma[i] * sigma[i] * tail
        })
        .collect();
    Ok(collect(xi_sq))
}

/// `xi_i^2 = zeta sigma_i^2 (1 - sum_{a <= K} lambda_a [V_ia]^2)`, using the
/// unit diagonal of `Psi`.
pub fn pc_specific_risks_complement(
    pcs: &PcDecomposition,
    sigma: &[f64],
    k: usize,
    zeta: f64,
) -> Result<PcSpecificRisks> {
    let (n, r) = pcs.components.dim();
    check_pc_args(pcs.eigenvalues.len(), k, zeta, sigma, n)?;
    let v = &pcs.components;
    let xi_sq = (0..n)
        .into_par_iter()
        .map(|i| {
            let head: f64 = (0..k.min(r)).map(|a| pcs.eigenvalues[a] * v[[i, a]] * v[[i, a]]).sum();
            zeta * sigma[i] * sigma[i] * (1.0 - head)
        })
        .collect();
    Ok(collect(xi_sq))
}

/// Tail-form specific variances straight from rows of `Y`, without storing
/// the N x M components.
pub fn pc_specific_risks_streaming(y: &dyn DesignRows, sigma: &[f64], k: usize, zeta: f64) -> Result<PcSpecificRisks> {
    check_pc_args(y.n_cols(), k, zeta, sigma, y.n_rows())?;
    let basis = pc_basis(y)?;
    let tail = basis.tail_energy(y, k);
    let xi_sq = tail.into_iter().zip(sigma).map(|(t, s)| zeta * s * s * t).collect();
    Ok(collect(xi_sq))
}

/// Largest absolute difference between the residuals of `e` regressed over
/// the columns of `Y` and over the principal components. The two sets
/// span the same space.
pub fn span_equivalence(y: &NormalizedLoadings, pcs: &PcDecomposition, e: &[f64]) -> Result<f64> {
    let over_y = weighted_residuals(e, &y.rows(), None)?;
    let over_v = weighted_residuals(e, &MatrixRows(pcs.components.view()), None)?;
    Ok(max_abs_diff(&over_y.residuals, &over_v.residuals))
}

/// Largest absolute difference between residuals over the demeaned
/// `Lambda` (M - 1 columns) and over the components after the first. The
/// two are close but not equal.
pub fn mode_removal_difference(y: &NormalizedLoadings, pcs: &PcDecomposition, e: &[f64]) -> Result<f64> {
    if y.variant != LoadingsVariant::Raw {
        return Err(Error::param("mode_removal_difference needs the raw M-column loadings"));
    }
    let m = y.y.ncols();
    let rows = y.rows();
    let lambda = ColumnDemeaned { means: crate::design::column_means(&rows), inner: rows, keep: m - 1 };
    let over_lambda = weighted_residuals(e, &lambda, None)?;
    let rest: ArrayView2<f64> = pcs.components.slice(s![.., 1..]);
    let over_v = weighted_residuals(e, &MatrixRows(rest), None)?;
    Ok(max_abs_diff(&over_lambda.residuals, &over_v.residuals))
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::ReturnsPanel;
    use crate::stats::{normalize_and_trim, sample_variances, serial_demean};
    use ndarray::{array, Array2};

    fn loadings(r: Array2<f64>) -> NormalizedLoadings {
        let x = serial_demean(&ReturnsPanel::from_matrix(r).unwrap());
        let s: Vec<f64> = sample_variances(&x).unwrap().iter().map(|v| v.sqrt()).collect();
        normalize_and_trim(&x, &s, false).unwrap()
    }

    #[test]
    fn identical_rows_one_component() {
        let y = loadings(array![[1.0, 3.0, 2.0], [1.0, 3.0, 2.0]]);
        let pcs = correlation_pcs(&y).unwrap();
        assert_eq!(pcs.rank(), 1);
        let h = 0.5f64.sqrt();
        assert!((pcs.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!((pcs.components[[0, 0]] - h).abs() < 1e-12 && (pcs.components[[1, 0]] - h).abs() < 1e-12);
        let r = pc_specific_risks(&pcs, &[1.0, 1.0], 1, 1.0).unwrap();
        assert_eq!(r.xi_sq, vec![0.0, 0.0]);
        assert_eq!(r.violations, vec![0, 1]);
    }

    #[test]
    fn argument_checks() {
        let y = loadings(array![[1.0, -0.5, 0.0], [0.2, 1.0, 0.4], [0.3, 0.1, 0.9]]);
        let pcs = correlation_pcs(&y).unwrap();
        assert!(pc_specific_risks(&pcs, &[1.0; 3], 0, 1.0).is_err());
        assert!(pc_specific_risks(&pcs, &[1.0; 3], 2, 1.0).is_err());
        assert!(pc_specific_risks(&pcs, &[1.0; 3], 1, 0.0).is_err());
    }
}
