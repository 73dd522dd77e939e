//! Factor models and the risk quantities derived from them.
//!
//! A factor model `Gamma = diag(xi^2) + Omega Phi Omega^T` is stored as its
//! three parts and never expanded to N x N outside the dense oracles.

mod loadings;
mod shrink;

pub use loadings::{log_center, position_loadings, style_loadings, PositionLoadings};
pub use shrink::{shrink_scm, ShrinkageSpec};

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::design::{gram_only, MatrixRows};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, dot, matmul_dense, Cholesky};
use crate::reduce::pairwise_sum;
use crate::stats::NormalizedLoadings;
use crate::DenseCap;

const PHI_SYMMETRY_TOL: f64 = 1e-12;
const PHI_PSD_TOL: f64 = 1e-10;
/// Relative pivot below which a loadings column counts as dependent.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    xi: Vec<f64>,
    omega: Array2<f64>,
    phi: Array2<f64>,
}

impl FactorModel {
    /// Specific risks must be strictly positive.
    pub fn new(xi: Vec<f64>, omega: Array2<f64>, phi: Array2<f64>) -> Result<Self> {
        if let Some(i) = xi.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::param(format!("specific risk xi[{i}] = {} is not strictly positive", xi[i])));
        }
        if omega.ncols() > omega.nrows() {
            return Err(Error::param(format!("{} factors for {} alphas", omega.ncols(), omega.nrows())));
        }
        Self::semidefinite(xi, omega, phi)
    }

    /// Like [`FactorModel::new`] but admits zero specific risks, as produced
    /// by unshrunk sample covariances, and more factors than alphas.
    pub fn semidefinite(xi: Vec<f64>, omega: Array2<f64>, phi: Array2<f64>) -> Result<Self> {
        let (n, k) = omega.dim();
        if xi.len() != n {
            return Err(Error::DimensionMismatch { context: "factor model xi", expected: n, actual: xi.len() });
        }
        if phi.dim() != (k, k) {
            return Err(Error::DimensionMismatch { context: "factor covariance", expected: k, actual: phi.nrows() });
        }
        if let Some(i) = xi.iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::param(format!("specific risk xi[{i}] = {} is negative", xi[i])));
        }
        if omega.iter().chain(phi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("factor model has non-finite entries"));
        }
        let scale = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for a in 0..k {
            for b in 0..a {
                if (phi[[a, b]] - phi[[b, a]]).abs() > PHI_SYMMETRY_TOL * scale {
                    return Err(Error::validation(format!("factor covariance is not symmetric at ({a}, {b})")));
                }
            }
        }
        let omega = omega.as_standard_layout().into_owned();
        Ok(Self { xi, omega, phi })
    }

    /// `Gamma = diag(xi^2)`.
    pub fn diagonal(xi: Vec<f64>) -> Result<Self> {
        let n = xi.len();
        Self::new(xi, Array2::zeros((n, 0)), Array2::zeros((0, 0)))
    }

    pub fn n_alphas(&self) -> usize {
        self.xi.len()
    }

    pub fn n_factors(&self) -> usize {
        self.omega.ncols()
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn omega(&self) -> &Array2<f64> {
        &self.omega
    }

    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    /// Lower Cholesky factor of `Phi`, semidefinite allowed.
    pub fn phi_cholesky(&self) -> Result<Array2<f64>> {
        let k = self.n_factors();
        let flat: Vec<f64> = self.phi.iter().copied().collect();
        let l = cholesky_psd(&flat, k, PHI_PSD_TOL)?;
        Ok(Array2::from_shape_vec((k, k), l).expect("square"))
    }

    /// `Omega chol(Phi)`: loadings in a basis where the factor covariance is
    /// the identity.
    pub fn rotated_loadings(&self) -> Result<Array2<f64>> {
        let l = self.phi_cholesky()?;
        Ok(matmul_dense(self.omega.view(), l.view()))
    }

    /// `beta_iA = (Omega chol(Phi))_iA / xi_i`, so that
    /// `Gamma_ij = xi_i xi_j (delta_ij + sum_A beta_iA beta_jA)`.
    pub fn scaled_loadings(&self) -> Result<Array2<f64>> {
        if let Some(i) = self.xi.iter().position(|&x| x == 0.0) {
            return Err(Error::param(format!("scaled loadings need xi > 0, xi[{i}] = 0")));
        }
        let mut beta = self.rotated_loadings()?;
        beta.axis_iter_mut(Axis(0)).zip(&self.xi).for_each(|(mut row, x)| row.mapv_inplace(|v| v / x));
        Ok(beta)
    }

    /// Row `i` of `Gamma`'s diagonal: `xi_i^2 + (Omega Phi Omega^T)_ii`.
    pub fn diagonal_entries(&self) -> Vec<f64> {
        let k = self.n_factors();
        let phi: Vec<f64> = self.phi.iter().copied().collect();
        (0..self.n_alphas())
            .into_par_iter()
            .map(|i| {
                let o = self.omega.row(i);
                let o = o.as_slice().expect("standard layout");
                let mut q = 0.0;
                for a in 0..k {
                    q += o[a] * dot(&phi[a * k..(a + 1) * k], o);
                }
                self.xi[i] * self.xi[i] + q
            })
            .collect()
    }

    /// Dense `Gamma`. Oracle only.
    pub fn dense_covariance(&self, cap: DenseCap) -> Result<Array2<f64>> {
        let n = self.n_alphas();
        cap.check("dense_covariance", n)?;
        let op = matmul_dense(self.omega.view(), self.phi.view());
        let mut g = matmul_dense(op.view(), self.omega.t());
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (g[[i, j]] + g[[j, i]]);
                g[[i, j]] = v;
                g[[j, i]] = v;
            }
            g[[i, i]] += self.xi[i] * self.xi[i];
        }
        Ok(g)
    }
}

/// Orthonormal basis `O = Omega H^{-T}` of the column span of `omega`, where
/// `Omega^T Omega = H H^T`. Two Cholesky-QR passes.
pub fn orthonormalize(omega: ArrayView2<f64>) -> Result<Array2<f64>> {
    let k = omega.ncols();
    if k == 0 || k > omega.nrows() {
        return Err(Error::param(format!("cannot orthonormalize {} columns of length {}", k, omega.nrows())));
    }
    let first = cholesky_qr(omega, true)?;
    cholesky_qr(first.view(), false)
}

fn cholesky_qr(omega: ArrayView2<f64>, check_rank: bool) -> Result<Array2<f64>> {
    let k = omega.ncols();
    let g = gram_only(&MatrixRows(omega));
    let tol = if check_rank { RANK_TOL } else { 0.0 };
    let chol = Cholesky::factor(&g, k, tol).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => Error::RankDeficient { column: pivot },
        e => e,
    })?;
    let mut out = Array2::<f64>::zeros(omega.dim());
    out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut row)| {
        let src: Vec<f64> = omega.row(i).to_vec();
        let o = chol.solve_lower(&src);
        row.iter_mut().zip(o).for_each(|(d, v)| *d = v);
    });
    Ok(out)
}

/// `Phi = O^T Psi O` for orthonormal `O`, through the factored form
/// `Psi = Y phi Y^T`: with `A = O^T Y`, `Phi = (A A^T + (A u)(A u)^T) / M`.
pub fn project_fcm(o: ArrayView2<f64>, y: &NormalizedLoadings) -> Result<Array2<f64>> {
    let (n, k) = o.dim();
    if y.y.nrows() != n {
        return Err(Error::DimensionMismatch { context: "project_fcm rows", expected: n, actual: y.y.nrows() });
    }
    if y.variant != crate::stats::LoadingsVariant::Raw {
        return Err(Error::param("project_fcm needs the raw M-column loadings"));
    }
    let m = y.y.ncols();
    let a = matmul_dense(o.t(), y.y.view());
    let au: Vec<f64> = a.axis_iter(Axis(0)).map(|r| pairwise_sum(&r.to_vec())).collect();
    let aat = matmul_dense(a.view(), a.t());
    Ok(Array2::from_shape_fn((k, k), |(p, q)| (aat[[p, q]] + au[p] * au[q]) / m as f64))
}

/// Specific risks in units of the sample variance,
/// `xi_tilde_i^2 = 1 - sum_AB O_iA Phi_AB O_iB`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecificRiskReport {
    pub xi_tilde_sq: Vec<f64>,
    /// Indices with `xi_tilde_sq <= 0`.
    pub violations: Vec<usize>,
    /// `Phi_11` for a single factor.
    pub kappa: Option<f64>,
    pub lambda_star: Option<f64>,
}

pub fn specific_risks(o: ArrayView2<f64>, phi: ArrayView2<f64>) -> Result<SpecificRiskReport> {
    let k = o.ncols();
    if phi.dim() != (k, k) {
        return Err(Error::DimensionMismatch { context: "specific_risks phi", expected: k, actual: phi.nrows() });
    }
    let phi_flat: Vec<f64> = phi.iter().copied().collect();
    let xi_tilde_sq: Vec<f64> = (0..o.nrows())
        .into_par_iter()
        .map(|i| {
            let row = o.row(i).to_vec();
            let mut q = 0.0;
            for a in 0..k {
                q += row[a] * dot(&phi_flat[a * k..(a + 1) * k], &row);
            }
            1.0 - q
        })
        .collect();
    let violations = xi_tilde_sq.iter().enumerate().filter(|(_, &v)| v <= 0.0).map(|(i, _)| i).collect();
    Ok(SpecificRiskReport { xi_tilde_sq, violations, kappa: (k == 1).then(|| phi[[0, 0]]), lambda_star: None })
}

/// `lambda* = (1/N) u^T Psi u`, from the column sums of `Y`.
pub fn lambda_star(y: &NormalizedLoadings) -> Result<f64> {
    if y.variant != crate::stats::LoadingsVariant::Raw {
        return Err(Error::param("lambda* needs the raw M-column loadings"));
    }
    let (n, m) = y.y.dim();
    let t = crate::design::column_sums(&y.rows());
    let p = pairwise_sum(&t);
    let lam = (dot(&t, &t) + p * p) / (n as f64 * m as f64);
    if !(lam > 0.0) {
        return Err(Error::Numerical(format!("lambda* = {lam:e} is not positive")));
    }
    Ok(lam)
}

/// Single-factor positivity check: every alpha with `beta_i^2 <= 1/lambda*`
/// is guaranteed a positive specific risk.
#[derive(Debug, Clone, PartialEq)]
pub struct K1Check {
    pub pass: Vec<bool>,
    pub lambda_star: f64,
}

impl K1Check {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

pub fn k1_sufficient_condition(beta: &[f64], y: &NormalizedLoadings) -> Result<K1Check> {
    check_unit_norm(beta)?;
    let lambda_star = lambda_star(y)?;
    let bound = (1.0 / lambda_star) * (1.0 + 1e-12);
    Ok(K1Check { pass: beta.iter().map(|b| b * b <= bound).collect(), lambda_star })
}

/// Single-factor specific risks `1 - kappa beta_i^2` with
/// `kappa = beta^T Psi beta` from the factored form.
pub fn k1_specific_risks(beta: &[f64], y: &NormalizedLoadings) -> Result<SpecificRiskReport> {
    check_unit_norm(beta)?;
    let col = Array2::from_shape_vec((beta.len(), 1), beta.to_vec()).expect("column");
    let phi = project_fcm(col.view(), y)?;
    let mut report = specific_risks(col.view(), phi.view())?;
    report.lambda_star = Some(lambda_star(y)?);
    Ok(report)
}

fn check_unit_norm(beta: &[f64]) -> Result<()> {
    let norm = dot(beta, beta);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!("beta must have unit norm, sum of squares is {norm}")));
    }
    Ok(())
}
