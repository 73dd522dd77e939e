use ndarray::Array2;

use crate::error::{Error, Result};
use crate::panel::PositionHistory;
use crate::reduce::pairwise_sum;

/// Loadings built from position histories. Instruments never held by any
/// alpha are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionLoadings {
    /// N x K_kept.
    pub omega: Array2<f64>,
    /// Ids of the kept columns, in column order.
    pub instrument_ids: Vec<String>,
    pub dropped: Vec<String>,
}

/// `Omega_iA = scale / (M + 1) * sum_s |P_iAs|`, the average unsigned
/// exposure of alpha `i` to instrument `A`. The overall scale is not fixed
/// by the data; pass 1 for rows summing to one.
pub fn position_loadings(pos: &PositionHistory, scale: f64) -> Result<PositionLoadings> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!("loading scale must be positive, got {scale}")));
    }
    let (n, k) = (pos.n_alphas(), pos.n_instruments());
    let mut acc = Array2::<f64>::zeros((n, k));
    for e in pos.entries() {
        acc[[e.alpha, e.instrument]] += e.value.abs();
    }
    let kept: Vec<usize> = (0..k).filter(|&a| acc.column(a).iter().any(|&v| v != 0.0)).collect();
    if kept.is_empty() {
        return Err(Error::validation("position history has no nonzero positions"));
    }
    let f = scale / pos.n_obs() as f64;
    let omega = Array2::from_shape_fn((n, kept.len()), |(i, c)| acc[[i, kept[c]]] * f);
    let ids = pos.instrument_ids();
    let dropped = (0..k).filter(|a| !kept.contains(a)).map(|a| ids[a].clone()).collect();
    Ok(PositionLoadings { omega, instrument_ids: kept.iter().map(|&a| ids[a].clone()).collect(), dropped })
}

/// `nu_i = ln(v_i) - mean_j ln(v_j)`, i.e. the log of `v` over its
/// geometric mean.
pub fn log_center(name: &str, v: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = v.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::param(format!("{name}[{i}] = {} must be strictly positive", v[i])));
    }
    let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let mean = pairwise_sum(&logs) / logs.len() as f64;
    Ok(logs.into_iter().map(|l| l - mean).collect())
}

/// Style loadings: one log-centered column per supplied property, in the
/// order volatility, turnover, momentum.
pub fn style_loadings(sigma: &[f64], turnover: Option<&[f64]>, momentum: Option<&[f64]>) -> Result<Array2<f64>> {
    let n = sigma.len();
    let mut cols = vec![log_center("volatility", sigma)?];
    for (name, v) in [("turnover", turnover), ("momentum", momentum)] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(Error::DimensionMismatch { context: "style loadings", expected: n, actual: v.len() });
            }
            cols.push(log_center(name, v)?);
        }
    }
    Ok(Array2::from_shape_fn((n, cols.len()), |(i, c)| cols[c][i]))
}
