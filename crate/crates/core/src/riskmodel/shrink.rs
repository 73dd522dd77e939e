use ndarray::{s, Array2};

use super::FactorModel;
use crate::error::{Error, Result};
use crate::stats::{sample_variances, DemeanedPanel};

const TARGET_DIAG_TOL: f64 = 1e-9;

/// Shrinkage `C~ = zeta Gamma + (1 - zeta) C` toward a factor-model target
/// whose diagonal equals the sample variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageSpec {
    pub zeta: f64,
    pub target: FactorModel,
}

impl ShrinkageSpec {
    pub fn new(zeta: f64, target: FactorModel) -> Result<Self> {
        if !(0.0..=1.0).contains(&zeta) {
            return Err(Error::param(format!("shrinkage constant must lie in [0, 1], got {zeta}")));
        }
        Ok(Self { zeta, target })
    }
}

/// The shrunk sample covariance as a (K + M)-factor model: loadings
/// `[Omega_target | X_{., 1..M}]`, factor covariance
/// `blockdiag(zeta Phi_target, (1 - zeta) phi)` with `phi = (I + u u^T)/M`,
/// and specific risks `sqrt(zeta) xi_target`.
pub fn shrink_scm(x: &DemeanedPanel, spec: &ShrinkageSpec) -> Result<FactorModel> {
    let (n, m) = (x.n_alphas(), x.m());
    let t = &spec.target;
    if t.n_alphas() != n {
        return Err(Error::DimensionMismatch { context: "shrinkage target", expected: n, actual: t.n_alphas() });
    }
    let c = sample_variances(x)?;
    for (i, (g, c)) in t.diagonal_entries().iter().zip(&c).enumerate() {
        if (g - c).abs() > TARGET_DIAG_TOL * c.abs() {
            return Err(Error::validation(format!(
                "shrinkage target diagonal {g} differs from sample variance {c} at alpha {i}"
            )));
        }
    }
    let k = t.n_factors();
    let zeta = spec.zeta;
    let mut omega = Array2::<f64>::zeros((n, k + m));
    omega.slice_mut(s![.., ..k]).assign(t.omega());
    omega.slice_mut(s![.., k..]).assign(&x.x().slice(s![.., ..m]));
    let mut phi = Array2::<f64>::zeros((k + m, k + m));
    phi.slice_mut(s![..k, ..k]).assign(&(t.phi() * zeta));
    let w = (1.0 - zeta) / m as f64;
    for a in 0..m {
        for b in 0..m {
            phi[[k + a, k + b]] = if a == b { 2.0 * w } else { w };
        }
    }
    let xi = t.xi().iter().map(|v| zeta.sqrt() * v).collect();
    FactorModel::semidefinite(xi, omega, phi)
}
