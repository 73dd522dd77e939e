//! Demeaning, variances, normalization and Gram kernels.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::design::{column_means, gram_only, DesignRows, MatrixRows};
use crate::error::{Error, Result};
use crate::linalg::{faer_to_row_major, to_faer};
use crate::panel::ReturnsPanel;
use crate::reduce::{pairwise_sum, pairwise_sum_by};
use crate::DenseCap;

const MIN_VARIANCE: f64 = 1e-300;

/// Serially demeaned returns `X_is = R_is - mean_s R_is`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemeanedPanel {
    alpha_ids: Vec<String>,
    x: Array2<f64>,
}

impl DemeanedPanel {
    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn n_alphas(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols() - 1
    }

    pub fn alpha_ids(&self) -> &[String] {
        &self.alpha_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.x.ncols();
        &self.x.as_slice().expect("standard layout")[i * c..(i + 1) * c]
    }
}

pub fn serial_demean(panel: &ReturnsPanel) -> DemeanedPanel {
    let (n, c) = (panel.n_alphas(), panel.n_obs());
    let mut x = Array2::<f64>::zeros((n, c));
    x.as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(i, out)| {
            let row = panel.row(i);
            let mean = pairwise_sum(row) / c as f64;
            for (o, r) in out.iter_mut().zip(row) {
                *o = r - mean;
            }
        });
    DemeanedPanel { alpha_ids: panel.alpha_ids().to_vec(), x }
}

/// `sigma_i^2 = (1/M) sum_s X_is^2`.
pub fn sample_variances(x: &DemeanedPanel) -> Result<Vec<f64>> {
    let m = x.m() as f64;
    let var: Vec<f64> = (0..x.n_alphas()).into_par_iter().map(|i| pairwise_sum_by(x.row(i), |v| v * v) / m).collect();
    check_variances(&var, x.alpha_ids())?;
    Ok(var)
}

fn check_variances(var: &[f64], ids: &[String]) -> Result<()> {
    match var.iter().position(|&v| !(v >= MIN_VARIANCE)) {
        Some(i) => Err(Error::DegenerateAlpha { index: i, id: ids[i].clone(), variance: var[i] }),
        None => Ok(()),
    }
}

/// Per-row means and sample variances straight from the raw panel, without
/// materializing `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMoments {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

pub fn row_moments(panel: &ReturnsPanel) -> Result<RowMoments> {
    let c = panel.n_obs() as f64;
    let m = panel.m() as f64;
    let (means, variances): (Vec<f64>, Vec<f64>) = (0..panel.n_alphas())
        .into_par_iter()
        .map(|i| {
            let row = panel.row(i);
            let mean = pairwise_sum(row) / c;
            (mean, pairwise_sum_by(row, move |r| (r - mean) * (r - mean)) / m)
        })
        .unzip();
    check_variances(&variances, panel.alpha_ids())?;
    Ok(RowMoments { means, variances })
}

/// Rows `(R_is - mean_i) / scale_i` for `s < keep`, generated on demand.
pub struct NormalizedRows<'a> {
    panel: &'a ReturnsPanel,
    means: &'a [f64],
    inv_scale: Vec<f64>,
    keep: usize,
}

impl<'a> NormalizedRows<'a> {
    pub fn new(panel: &'a ReturnsPanel, means: &'a [f64], scale: &[f64], keep: usize) -> Self {
        assert!(keep <= panel.n_obs());
        assert_eq!(means.len(), panel.n_alphas());
        assert_eq!(scale.len(), panel.n_alphas());
        Self { panel, means, inv_scale: scale.iter().map(|s| 1.0 / s).collect(), keep }
    }
}

impl DesignRows for NormalizedRows<'_> {
    fn n_rows(&self) -> usize {
        self.panel.n_alphas()
    }
    fn n_cols(&self) -> usize {
        self.keep
    }
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]) {
        let k = self.keep;
        for r in 0..rows {
            let i = start + r;
            let (mu, inv) = (self.means[i], self.inv_scale[i]);
            let src = &self.panel.row(i)[..k];
            for (o, x) in out[r * k..(r + 1) * k].iter_mut().zip(src) {
                *o = (x - mu) * inv;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadingsVariant {
    /// `Y_is = X_is / sigma_i`, first M columns.
    Raw,
    /// `Lambda_is`, cross-sectionally demeaned, first M - 1 columns.
    Demeaned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLoadings {
    pub y: Array2<f64>,
    pub variant: LoadingsVariant,
}

impl NormalizedLoadings {
    pub fn raw(y: Array2<f64>) -> Self {
        Self { y, variant: LoadingsVariant::Raw }
    }

    pub fn rows(&self) -> MatrixRows<'_> {
        MatrixRows(self.y.view())
    }

    fn require_raw(&self, what: &str) -> Result<()> {
        if self.variant != LoadingsVariant::Raw {
            return Err(Error::param(format!("{what} needs the raw M-column loadings")));
        }
        if self.y.ncols() == 0 {
            return Err(Error::param(format!("{what} needs at least one column")));
        }
        Ok(())
    }
}

/// Divides rows by `sigma`, keeps the first M columns and, when
/// `remove_overall_mode` is set, demeans every column across alphas and
/// keeps the first M - 1.
pub fn normalize_and_trim(x: &DemeanedPanel, sigma: &[f64], remove_overall_mode: bool) -> Result<NormalizedLoadings> {
    let (n, m) = (x.n_alphas(), x.m());
    if sigma.len() != n {
        return Err(Error::DimensionMismatch { context: "normalize_and_trim sigma", expected: n, actual: sigma.len() });
    }
    if let Some(i) = sigma.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::param(format!("sigma[{i}] = {} is not strictly positive", sigma[i])));
    }
    if remove_overall_mode && m < 2 {
        return Err(Error::InsufficientObservations { m });
    }
    let mut y = Array2::<f64>::zeros((n, m));
    y.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut out)| {
        let src = x.row(i);
        for s in 0..m {
            out[s] = src[s] / sigma[i];
        }
    });
    if !remove_overall_mode {
        return Ok(NormalizedLoadings { y, variant: LoadingsVariant::Raw });
    }
    let means = column_means(&MatrixRows(y.view()));
    let mut lambda = y.slice_move(ndarray::s![.., ..m - 1]).as_standard_layout().into_owned();
    lambda.axis_iter_mut(Axis(0)).into_par_iter().for_each(|mut row| {
        for (v, mu) in row.iter_mut().zip(&means) {
            *v -= mu;
        }
    });
    Ok(NormalizedLoadings { y: lambda, variant: LoadingsVariant::Demeaned })
}

/// Dense sample correlation matrix `Psi = Y phi Y^T` with
/// `phi = (I + u u^T) / M`. Oracle only.
pub fn sample_correlation_dense(y: &NormalizedLoadings, cap: DenseCap) -> Result<Array2<f64>> {
    y.require_raw("sample_correlation_dense")?;
    cap.check("sample_correlation_dense", y.y.nrows())?;
    let z = phi_sqrt_apply(y.y.view());
    let zf = to_faer(z.view());
    let psi = &zf * zf.transpose();
    let n = y.y.nrows();
    Ok(Array2::from_shape_vec((n, n), faer_to_row_major(psi.as_ref())).expect("square"))
}

/// `Y phi^{1/2}` where `phi^{1/2} = (I + c u u^T) / sqrt(M)` and
/// `c = (sqrt(1 + M) - 1) / M`.
pub fn phi_sqrt_apply(y: ArrayView2<f64>) -> Array2<f64> {
    let m = y.ncols();
    let c = phi_sqrt_coefficient(m);
    let root = (m as f64).sqrt();
    let mut z = y.to_owned();
    z.axis_iter_mut(Axis(0)).into_par_iter().for_each(|mut row| {
        let shift = c * pairwise_sum(row.as_slice().expect("row-major"));
        row.mapv_inplace(|v| (v + shift) / root);
    });
    z
}

pub fn phi_sqrt_coefficient(m: usize) -> f64 {
    let m = m as f64;
    ((1.0 + m).sqrt() - 1.0) / m
}

/// Symmetric m x m Gram matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    m: usize,
    upsilon: Vec<f64>,
}

impl GramMatrix {
    pub fn from_row_major(m: usize, upsilon: Vec<f64>) -> Self {
        assert_eq!(upsilon.len(), m * m);
        Self { m, upsilon }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.upsilon[s * self.m + t]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.upsilon
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.m, self.m), self.upsilon.clone()).expect("square")
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.m).map(|s| self.get(s, s)).collect()
    }
}

/// `L^T L` in one pass over rows.
pub fn gram(loadings: &dyn DesignRows) -> GramMatrix {
    GramMatrix::from_row_major(loadings.n_cols(), gram_only(loadings))
}
