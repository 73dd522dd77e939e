use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::linalg::dense_spd_solve;
use crate::panel::{ExpectedReturns, WeightVector};
use crate::reduce::pairwise_sum;
use crate::riskmodel::{shrink_scm, FactorModel, ShrinkageSpec};
use crate::stats::{sample_variances, DemeanedPanel};
use crate::DenseCap;

/// `w = C^{-1} E`, normalized, by dense Cholesky. Oracle only.
pub fn dense_oracle_weights(cov: ArrayView2<f64>, e: &ExpectedReturns, cap: DenseCap) -> Result<WeightVector> {
    cap.check("dense_oracle_weights", cov.nrows())?;
    e.check_len(cov.nrows())?;
    WeightVector::from_raw(dense_spd_solve(cov, e.values())?)
}

/// Exact weights for the uniform-correlation covariance
/// `C_ij = sigma_i sigma_j [(1 - rho) delta_ij + rho]`.
pub fn one_factor_weights(e: &ExpectedReturns, sigma: &[f64], rho: f64) -> Result<WeightVector> {
    let n = sigma.len();
    e.check_len(n)?;
    let lo = -1.0 / (n as f64 - 1.0);
    if !(rho > lo && rho < 1.0) {
        return Err(Error::param(format!("rho = {rho} outside the positive-definite range ({lo}, 1)")));
    }
    if let Some(i) = sigma.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::param(format!("sigma[{i}] = {} is not positive", sigma[i])));
    }
    let root = (1.0 - rho).sqrt();
    let xi: Vec<f64> = sigma.iter().map(|s| root * s).collect();
    let et: Vec<f64> = e.values().iter().zip(&xi).map(|(e, x)| e / x).collect();
    let shift = rho / (1.0 + (n as f64 - 1.0) * rho) * pairwise_sum(&et);
    WeightVector::from_raw(et.iter().zip(&xi).map(|(e, x)| (e - shift) / x).collect())
}

/// Inverse-variance weights `E_i / sigma_i^2`, normalized.
pub fn benchmark_weights(e: &ExpectedReturns, sigma: &[f64]) -> Result<WeightVector> {
    e.check_len(sigma.len())?;
    if let Some(i) = sigma.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::param(format!("sigma[{i}] = {} is not positive", sigma[i])));
    }
    WeightVector::from_raw(e.values().iter().zip(sigma).map(|(e, s)| e / (s * s)).collect())
}

/// Dense optimal weights for `zeta diag(C) + (1 - zeta) C`. Oracle only.
pub fn shrinkage_dense_weights(x: &DemeanedPanel, e: &ExpectedReturns, zeta: f64, cap: DenseCap) -> Result<WeightVector> {
    cap.check("shrinkage_dense_weights", x.n_alphas())?;
    let sigma: Vec<f64> = sample_variances(x)?.iter().map(|v| v.sqrt()).collect();
    let target = FactorModel::diagonal(sigma)?;
    let model = shrink_scm(x, &ShrinkageSpec::new(zeta, target)?)?;
    let cov = model.dense_covariance(cap)?;
    dense_oracle_weights(cov.view(), e, cap)
}
