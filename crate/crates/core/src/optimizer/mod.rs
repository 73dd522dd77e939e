//! The end-to-end weight computation and its baselines.
//!
//! [`combine`] runs, in order: serial demeaning, sample variances,
//! normalization `Y = X / s`, trimming to the first M columns, optional
//! cross-sectional demeaning with a further trim to M - 1 columns, the
//! unit-weight regression of `E / s` over the result, `w = eps / s`, and
//! the unit absolute-sum normalization. Rows of the design are generated
//! block by block, so memory beyond the panel is O(N + M^2).

mod baseline;
pub mod reference;

pub use baseline::{benchmark_weights, dense_oracle_weights, one_factor_weights, shrinkage_dense_weights};
pub use reference::{calc_opt_weights, reference_parity};

use ndarray::Array2;

use crate::design::{column_means, gram_and_moment, residuals, ColumnDemeaned, ColumnSubset, DesignRows, Hstack, MatrixRows};
use crate::error::{Error, Result};
use crate::linalg::ScaledSolve;
use crate::panel::{ExpectedReturns, ReturnsPanel, WeightVector};
use crate::pca::pc_specific_risks_streaming;
use crate::regress::MAX_CONDITION;
use crate::stats::{row_moments, NormalizedRows};

/// Scaled pivot below which a union column counts as dependent on the
/// columns before it.
const DEPENDENT_TOL: f64 = 1e-10;

/// Per-alpha scale `s_i` used to normalize returns, expected returns and
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    /// `s_i = sigma_i`, the sample standard deviation.
    SampleVariance,
    /// Caller-supplied specific risks.
    Precomputed(Vec<f64>),
    /// `s_i^2 = zeta sigma_i^2 sum_{a > K} lambda_a V_ia^2` from the
    /// principal components of the sample correlation matrix.
    PcSpecific { k: usize, zeta: f64 },
}

/// How external loadings combine with the normalized returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    /// Regress over the external loadings alone.
    Replace,
    /// Regress over `[Y | external]`, dropping dependent columns.
    Union,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombineOptions {
    pub remove_overall_mode: bool,
    pub weight_source: WeightSource,
    /// N x K.
    pub external_loadings: Option<Array2<f64>>,
    pub augment_mode: AugmentMode,
}

impl Default for CombineOptions {
    fn default() -> Self {
        Self {
            remove_overall_mode: true,
            weight_source: WeightSource::SampleVariance,
            external_loadings: None,
            augment_mode: AugmentMode::Replace,
        }
    }
}

impl CombineOptions {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        match &self.weight_source {
            WeightSource::SampleVariance => {}
            WeightSource::Precomputed(xi) => {
                if xi.len() != n {
                    return Err(Error::DimensionMismatch { context: "precomputed specific risks", expected: n, actual: xi.len() });
                }
                if let Some(i) = xi.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::param(format!("specific risk xi[{i}] = {} is not strictly positive", xi[i])));
                }
            }
            WeightSource::PcSpecific { k, zeta } => {
                if !(1..m).contains(k) {
                    return Err(Error::param(format!("PC specific risks need 1 <= K <= M - 1 = {}, got {k}", m - 1)));
                }
                if !(*zeta > 0.0 && *zeta <= 1.0) {
                    return Err(Error::param(format!("zeta must lie in (0, 1], got {zeta}")));
                }
            }
        }
        if let Some(ext) = &self.external_loadings {
            if ext.nrows() != n {
                return Err(Error::DimensionMismatch { context: "external loadings rows", expected: n, actual: ext.nrows() });
            }
            if ext.ncols() == 0 {
                return Err(Error::param("external loadings have no columns"));
            }
            if ext.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("external loadings have non-finite entries"));
            }
        }
        Ok(())
    }
}

/// Weights plus the numbers worth logging about how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct CombineReport {
    pub weights: WeightVector,
    /// Columns in the final regression.
    pub n_columns: usize,
    /// Union columns dropped as linearly dependent, as indices into
    /// `[Y | external]` after mode removal.
    pub dropped_columns: Vec<usize>,
    /// `min_s Upsilon_ss / M`: the smallest diagonal of the factor-space
    /// Gram matrix in units where the regression limit needs it large.
    pub min_q: f64,
    pub condition_estimate: f64,
    pub negative_count: usize,
    /// The per-alpha scale `s` that was used.
    pub scale: Vec<f64>,
}

pub fn combine(panel: &ReturnsPanel, e: &ExpectedReturns, opts: &CombineOptions) -> Result<WeightVector> {
    combine_with_report(panel, e, opts).map(|r| r.weights)
}

/// The per-alpha scale selected by `source`.
pub fn resolve_scale(panel: &ReturnsPanel, means: &[f64], sigma: &[f64], source: &WeightSource) -> Result<Vec<f64>> {
    match source {
        WeightSource::SampleVariance => Ok(sigma.to_vec()),
        WeightSource::Precomputed(xi) => Ok(xi.clone()),
        WeightSource::PcSpecific { k, zeta } => {
            let y = NormalizedRows::new(panel, means, sigma, panel.m());
            let risks = pc_specific_risks_streaming(&y, sigma, *k, *zeta)?;
            if let Some(&i) = risks.violations.first() {
                return Err(Error::validation(format!(
                    "principal-component specific variance of alpha {:?} is {:e}; {} alphas are not positive",
                    panel.alpha_ids()[i],
                    risks.xi_sq[i],
                    risks.violations.len()
                )));
            }
            Ok(risks.xi_sq.iter().map(|v| v.sqrt()).collect())
        }
    }
}

pub fn combine_with_report(panel: &ReturnsPanel, e: &ExpectedReturns, opts: &CombineOptions) -> Result<CombineReport> {
    let (n, m) = (panel.n_alphas(), panel.m());
    e.check_len(n)?;
    opts.validate(n, m)?;
    let moments = row_moments(panel)?;
    let sigma: Vec<f64> = moments.variances.iter().map(|v| v.sqrt()).collect();
    let scale = resolve_scale(panel, &moments.means, &sigma, &opts.weight_source)?;

    let y = NormalizedRows::new(panel, &moments.means, &scale, m);
    let union = opts.external_loadings.is_some() && opts.augment_mode == AugmentMode::Union;
    let base: Box<dyn DesignRows + '_> = match &opts.external_loadings {
        None => Box::new(y),
        Some(ext) if union => Box::new(Hstack { left: y, right: MatrixRows(ext.view()) }),
        Some(ext) => Box::new(MatrixRows(ext.view())),
    };
    let design: Box<dyn DesignRows + '_> = if opts.remove_overall_mode {
        let width = base.n_cols();
        if width < 2 {
            return Err(Error::InsufficientObservations { m: width });
        }
        let means = column_means(&*base);
        // The dropped column is always the last one of the normalized
        // returns block.
        let drop = if union { m - 1 } else { width - 1 };
        if drop == width - 1 {
            Box::new(ColumnDemeaned { inner: base, means, keep: width - 1 })
        } else {
            let dem = ColumnDemeaned { inner: base, means, keep: width };
            Box::new(ColumnSubset { inner: dem, columns: (0..width).filter(|&c| c != drop).collect() })
        }
    } else {
        base
    };

    let et: Vec<f64> = e.values().iter().zip(&scale).map(|(e, s)| e / s).collect();
    let (gram, moment) = gram_and_moment(&*design, None, &et);
    let width = design.n_cols();
    let (design, gram, moment, dropped_columns) = if union {
        let kept = independent_columns(&gram, width);
        let dropped: Vec<usize> = (0..width).filter(|c| !kept.contains(c)).collect();
        let k = kept.len();
        let sub_gram: Vec<f64> = (0..k * k).map(|x| gram[kept[x / k] * width + kept[x % k]]).collect();
        let sub_moment: Vec<f64> = kept.iter().map(|&c| moment[c]).collect();
        let sub: Box<dyn DesignRows + '_> = Box::new(ColumnSubset { inner: design, columns: kept });
        (sub, sub_gram, sub_moment, dropped)
    } else {
        (design, gram, moment, Vec::new())
    };
    let k = design.n_cols();
    if k >= n {
        return Err(Error::param(format!("regression over {k} columns needs more than {k} alphas, got {n}")));
    }
    let solver = ScaledSolve::new(&gram, k, MAX_CONDITION)?;
    let coef = solver.solve(&gram, &moment);
    let eps = residuals(&*design, &et, &coef);
    let weights = WeightVector::from_raw(eps.iter().zip(&scale).map(|(r, s)| r / s).collect())?;
    let min_q = (0..k).map(|s| gram[s * k + s]).fold(f64::INFINITY, f64::min) / m as f64;
    Ok(CombineReport {
        negative_count: weights.negative_count(),
        weights,
        n_columns: k,
        dropped_columns,
        min_q,
        condition_estimate: solver.condition(),
        scale,
    })
}

/// Greedy left-to-right selection of columns that are not (numerically)
/// in the span of the columns already kept, by Cholesky of the
/// Jacobi-scaled Gram matrix.
pub fn independent_columns(gram: &[f64], m: usize) -> Vec<usize> {
    let d: Vec<f64> = (0..m).map(|s| gram[s * m + s]).collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut l: Vec<Vec<f64>> = Vec::new();
    for j in 0..m {
        if !(d[j] > 0.0) {
            continue;
        }
        let a = |s: usize, t: usize| gram[s * m + t] / (d[s] * d[t]).sqrt();
        let mut row = Vec::with_capacity(kept.len());
        for (p, &c) in kept.iter().enumerate() {
            let s: f64 = a(j, c) - (0..p).map(|q| row[q] * l[p][q]).sum::<f64>();
            row.push(s / l[p][p]);
        }
        let pivot = 1.0 - row.iter().map(|v| v * v).sum::<f64>();
        if pivot > DEPENDENT_TOL {
            row.push(pivot.sqrt());
            l.push(row);
            kept.push(j);
        }
    }
    kept
}
