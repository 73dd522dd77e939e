//! Weighted cross-sectional regression and factor-model weights.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::design::{gram_and_moment, residuals, DesignRows, MatrixRows};
use crate::error::{Error, Result};
use crate::linalg::{dot, matmul_dense, Cholesky, ScaledSolve};
use crate::panel::{ExpectedReturns, WeightVector};
use crate::riskmodel::FactorModel;
use crate::stats::GramMatrix;

/// Largest admissible condition estimate of the (Jacobi-scaled) Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub residuals: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// `L^T Z L`.
    pub gram: GramMatrix,
    pub condition_estimate: f64,
}

/// Residuals of the weighted regression of `target` over the columns of
/// `loadings`, without intercept: `eps = t - L (L^T Z L)^{-1} L^T Z t`.
/// `z = None` means unit weights.
pub fn weighted_residuals(target: &[f64], loadings: &dyn DesignRows, z: Option<&[f64]>) -> Result<RegressionResult> {
    let (n, m) = (loadings.n_rows(), loadings.n_cols());
    if target.len() != n {
        return Err(Error::DimensionMismatch { context: "regression target", expected: n, actual: target.len() });
    }
    if let Some(z) = z {
        if z.len() != n {
            return Err(Error::DimensionMismatch { context: "regression weights", expected: n, actual: z.len() });
        }
        if let Some(i) = z.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::param(format!("regression weight z[{i}] = {} is not positive", z[i])));
        }
    }
    if m == 0 {
        return Err(Error::param("regression needs at least one loadings column"));
    }
    if m >= n {
        return Err(Error::param(format!("regression over {m} columns needs more than {m} rows, got {n}")));
    }
    let (gram, moment) = gram_and_moment(loadings, z, target);
    let solver = ScaledSolve::new(&gram, m, MAX_CONDITION)?;
    let coefficients = solver.solve(&gram, &moment);
    let residuals = residuals(loadings, target, &coefficients);
    Ok(RegressionResult {
        residuals,
        coefficients,
        gram: GramMatrix::from_row_major(m, gram),
        condition_estimate: solver.condition(),
    })
}

/// [`weighted_residuals`] over a dense matrix.
pub fn weighted_residuals_dense(target: &[f64], loadings: ArrayView2<f64>, z: Option<&[f64]>) -> Result<RegressionResult> {
    weighted_residuals(target, &MatrixRows(loadings), z)
}

fn check_model(e: &ExpectedReturns, model: &FactorModel) -> Result<()> {
    e.check_len(model.n_alphas())?;
    if let Some(i) = model.xi().iter().position(|&x| !(x > 0.0)) {
        return Err(Error::param(format!("weights need xi > 0, xi[{i}] = {}", model.xi()[i])));
    }
    Ok(())
}

/// Exact optimal weights for a factor-model covariance through the
/// Woodbury identity:
/// `w_i = (1/xi_i) [E~_i - sum_AB beta_iA Q^{-1}_AB (beta^T E~)_B]`,
/// `E~ = E/xi`, `Q = I + beta^T beta`. O(K^2 N + K^3).
pub fn exact_factor_weights(e: &ExpectedReturns, model: &FactorModel) -> Result<WeightVector> {
    check_model(e, model)?;
    let xi = model.xi();
    let et: Vec<f64> = e.values().iter().zip(xi).map(|(e, x)| e / x).collect();
    let k = model.n_factors();
    if k == 0 {
        return WeightVector::from_raw(et.iter().zip(xi).map(|(e, x)| e / x).collect());
    }
    let beta = model.scaled_loadings()?;
    let beta_rows = MatrixRows(beta.view());
    let (q, v) = gram_and_moment(&beta_rows, None, &et);
    let mut big_q = q;
    for a in 0..k {
        big_q[a * k + a] += 1.0;
    }
    let chol = Cholesky::factor(&big_q, k, 0.0)?;
    let c = chol.solve(&v);
    let eps = residuals(&beta_rows, &et, &c);
    WeightVector::from_raw(eps.iter().zip(xi).map(|(r, x)| r / x).collect())
}

/// Weights in the limit where every `q_AA` is large: the regression of `E`
/// over `Omega chol(Phi)` with weights `z = 1/xi^2`, giving `w_i = z_i eps_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitWeights {
    pub weights: WeightVector,
    /// Smallest diagonal entry of `q = beta^T beta`; the approximation needs
    /// it to be large.
    pub min_q: f64,
    pub regression: RegressionResult,
}

pub fn regression_limit_weights(e: &ExpectedReturns, model: &FactorModel) -> Result<LimitWeights> {
    check_model(e, model)?;
    if model.n_factors() == 0 {
        return Err(Error::param("regression limit needs at least one factor"));
    }
    let z: Vec<f64> = model.xi().iter().map(|x| 1.0 / (x * x)).collect();
    let loadings = model.rotated_loadings()?;
    let regression = weighted_residuals_dense(e.values(), loadings.view(), Some(&z))?;
    let min_q = regression.gram.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    let weights = WeightVector::from_raw(regression.residuals.iter().zip(&z).map(|(r, z)| r * z).collect())?;
    Ok(LimitWeights { weights, min_q, regression })
}

/// Dense `L (L^T Z L)^{-1} L^T Z t` residuals through an explicit inverse
/// of the Gram matrix. Oracle only.
pub fn dense_projection_residuals(target: &[f64], loadings: ArrayView2<f64>, z: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = loadings.nrows();
    let zs: Vec<f64> = z.map(|z| z.to_vec()).unwrap_or_else(|| vec![1.0; n]);
    let mut zl = loadings.to_owned();
    zl.axis_iter_mut(Axis(0)).zip(&zs).for_each(|(mut r, w)| r.mapv_inplace(|v| v * w));
    let g = matmul_dense(loadings.t(), zl.view());
    let m = g.nrows();
    let inv = crate::linalg::symmetric_eigen(g.view()).and_then(|(vals, vecs)| {
        if vals.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::NotPositiveDefinite { pivot: 0 });
        }
        Ok(Array2::from_shape_fn((m, m), |(s, t)| (0..m).map(|a| vecs[[s, a]] * vecs[[t, a]] / vals[a]).sum()))
    })?;
    let b: Vec<f64> = (0..m).map(|s| dot(&zl.column(s).to_vec(), target)).collect();
    let c: Vec<f64> = (0..m).map(|s| dot(&inv.row(s).to_vec(), &b)).collect();
    Ok((0..n).into_par_iter().map(|i| target[i] - dot(&loadings.row(i).to_vec(), &c)).collect())
}
