//! Do style properties predict pairwise correlations?
//!
//! The off-diagonal sample correlations `Psi_ij` (i > j) are flattened into
//! an L-vector `Psi_a`, `L = N(N-1)/2`, and regressed with intercept over
//! `y_ij = nu_i + nu_j` and `z_ij = nu_i nu_j`, where `nu` is a
//! log-centered style property.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::reduce::{pairwise_dot, pairwise_sum};

const SYMMETRY_TOL: f64 = 1e-9;

/// Number of off-diagonal pairs for `n` alphas.
pub fn n_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Flat index of the pair `(i, j)`, `i > j`. Pairs are ordered by `j`, then
/// by `i`: (1,0), (2,0), ..., (n-1,0), (2,1), ...
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    assert!(j < i && i < n, "pair ({i}, {j}) out of range for n = {n}");
    j * (2 * n - j - 1) / 2 + (i - j - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(a: usize, n: usize) -> (usize, usize) {
    assert!(a < n_pairs(n));
    let mut j = 0;
    let mut start = 0;
    loop {
        let len = n - j - 1;
        if a < start + len {
            return (j + 1 + (a - start), j);
        }
        start += len;
        j += 1;
    }
}

/// Off-diagonal lower-triangular entries in [`pair_index`] order.
pub fn flatten_offdiag(psi: ArrayView2<f64>) -> Result<Vec<f64>> {
    let n = psi.nrows();
    if psi.ncols() != n {
        return Err(Error::DimensionMismatch { context: "flatten_offdiag (square)", expected: n, actual: psi.ncols() });
    }
    if n < 2 {
        return Err(Error::param("flatten_offdiag needs N >= 2"));
    }
    let mut out = Vec::with_capacity(n_pairs(n));
    for j in 0..n {
        for i in j + 1..n {
            let (a, b) = (psi[[i, j]], psi[[j, i]]);
            if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::validation(format!("matrix is not symmetric at ({i}, {j}): {a} vs {b}")));
            }
            out.push(a);
        }
    }
    Ok(out)
}

/// Flattened `x_a = 1`, `y_a`, `z_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleTensors {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn style_tensors(nu: &[f64]) -> Result<StyleTensors> {
    let n = nu.len();
    if n < 2 {
        return Err(Error::param("style tensors need N >= 2"));
    }
    let mean = pairwise_sum(nu) / n as f64;
    let scale = nu.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if mean.abs() > 1e-9 * scale {
        return Err(Error::param(format!("nu must have zero mean, mean is {mean:e}")));
    }
    let l = n_pairs(n);
    let (mut y, mut z) = (Vec::with_capacity(l), Vec::with_capacity(l));
    for j in 0..n {
        for i in j + 1..n {
            y.push(nu[i] + nu[j]);
            z.push(nu[i] * nu[j]);
        }
    }
    Ok(StyleTensors { x: vec![1.0; l], y, z })
}

/// OLS of `Psi_a` on `(1, y_a, z_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleRegressionReport {
    /// Intercept, y, z.
    pub coefficients: [f64; 3],
    pub standard_errors: [f64; 3],
    pub t_statistics: [f64; 3],
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub f_statistic: f64,
    pub n_points: usize,
}

/// Ordinary least squares with intercept. Variables are centered before
/// the normal equations are formed.
pub fn style_regression(psi_a: &[f64], y_a: &[f64], z_a: &[f64]) -> Result<StyleRegressionReport> {
    let l = psi_a.len();
    if y_a.len() != l || z_a.len() != l {
        return Err(Error::DimensionMismatch { context: "style regression", expected: l, actual: y_a.len().min(z_a.len()) });
    }
    if l < 4 {
        return Err(Error::param(format!("style regression needs at least 4 points, got {l}")));
    }
    let lf = l as f64;
    let mean = |v: &[f64]| pairwise_sum(v) / lf;
    let (mp, my, mz) = (mean(psi_a), mean(y_a), mean(z_a));
    let center = |v: &[f64], m: f64| v.iter().map(|x| x - m).collect::<Vec<f64>>();
    let (p, y, z) = (center(psi_a, mp), center(y_a, my), center(z_a, mz));
    let s = [pairwise_dot(&y, &y), pairwise_dot(&y, &z), pairwise_dot(&y, &z), pairwise_dot(&z, &z)];
    let chol = Cholesky::factor(&s, 2, 1e-12)
        .map_err(|_| Error::validation("style regressors y and z are collinear (or constant)"))?;
    let b = chol.solve(&[pairwise_dot(&y, &p), pairwise_dot(&z, &p)]);
    let intercept = mp - b[0] * my - b[1] * mz;

    let resid: Vec<f64> = (0..l).map(|a| p[a] - b[0] * y[a] - b[1] * z[a]).collect();
    let ssr = pairwise_dot(&resid, &resid);
    let sst = pairwise_dot(&p, &p);
    let dof = lf - 3.0;
    let sigma2 = ssr / dof;
    let s_inv = [chol.solve(&[1.0, 0.0]), chol.solve(&[0.0, 1.0])];
    let var_b1 = sigma2 * s_inv[0][0];
    let var_b2 = sigma2 * s_inv[1][1];
    let quad = my * (s_inv[0][0] * my + s_inv[0][1] * mz) + mz * (s_inv[1][0] * my + s_inv[1][1] * mz);
    let var_b0 = sigma2 * (1.0 / lf + quad);
    let coefficients = [intercept, b[0], b[1]];
    let standard_errors = [var_b0.sqrt(), var_b1.sqrt(), var_b2.sqrt()];
    let t_statistics = [0, 1, 2].map(|k| coefficients[k] / standard_errors[k]);
    let r_squared = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 1.0 };
    let adjusted_r_squared = 1.0 - (1.0 - r_squared) * (lf - 1.0) / dof;
    let f_statistic = (r_squared / 2.0) / ((1.0 - r_squared) / dof);
    Ok(StyleRegressionReport {
        coefficients,
        standard_errors,
        t_statistics,
        r_squared,
        adjusted_r_squared,
        f_statistic,
        n_points: l,
    })
}

fn fmt15(v: f64) -> String {
    format!("{v:.14e}")
}

impl StyleRegressionReport {
    /// CSV table with columns `term,estimate,standard_error,t_statistic,overall`
    /// and rows Intercept, y, z, R-squared, F-statistic.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,estimate,standard_error,t_statistic,overall\n");
        for (k, name) in ["Intercept", "y_a", "z_a"].iter().enumerate() {
            let _ = writeln!(
                out,
                "{name},{},{},{},",
                fmt15(self.coefficients[k]),
                fmt15(self.standard_errors[k]),
                fmt15(self.t_statistics[k])
            );
        }
        let _ = writeln!(
            out,
            "Mult./Adj. R-squared,,,,{} / {}",
            fmt15(self.r_squared),
            fmt15(self.adjusted_r_squared)
        );
        let _ = writeln!(out, "F-statistic,,,,{}", fmt15(self.f_statistic));
        out
    }

    /// Human-readable table in the same layout.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<22}{:>14}{:>16}{:>14}{:>20}\n",
            "", "Estimate", "Standard error", "t-statistic", "Overall"
        );
        for (k, name) in ["Intercept", "y_a", "z_a"].iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<22}{:>14.4}{:>16.3e}{:>14.2}",
                name, self.coefficients[k], self.standard_errors[k], self.t_statistics[k]
            );
        }
        let _ = writeln!(
            out,
            "{:<22}{:>64}",
            "Mult./Adj. R-squared",
            format!("{:.4} / {:.4}", self.r_squared, self.adjusted_r_squared)
        );
        let _ = writeln!(out, "{:<22}{:>64.2}", "F-statistic", self.f_statistic);
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_csv())
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    f.write_all(body.as_bytes()).map_err(|source| Error::Io { path: path.to_owned(), source })
}

/// Scatter coordinates: `w_a = b_y y_a + b_z z_a` against
/// `Psi_a - mean(Psi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureColumns {
    pub w: Vec<f64>,
    pub psi_demeaned: Vec<f64>,
}

pub fn figure_projection(psi_a: &[f64], y_a: &[f64], z_a: &[f64], coefficients: &[f64; 3]) -> Result<FigureColumns> {
    let l = psi_a.len();
    if y_a.len() != l || z_a.len() != l {
        return Err(Error::DimensionMismatch { context: "figure projection", expected: l, actual: y_a.len().min(z_a.len()) });
    }
    let mean = pairwise_sum(psi_a) / l as f64;
    Ok(FigureColumns {
        w: (0..l).map(|a| coefficients[1] * y_a[a] + coefficients[2] * z_a[a]).collect(),
        psi_demeaned: psi_a.iter().map(|p| p - mean).collect(),
    })
}

impl FigureColumns {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut body = String::from("w_a,psi_demeaned\n");
        for (w, p) in self.w.iter().zip(&self.psi_demeaned) {
            let _ = writeln!(body, "{},{}", fmt15(*w), fmt15(*p));
        }
        write_file(path.as_ref(), &body)
    }
}
