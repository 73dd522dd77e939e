//! A deliberately naive transliteration of the reference R routine
//! `calc.opt.weights(e.r, ret, y = 0, s = 0, rm.overall = T)`, kept as a
//! fixed point for parity checks. Plain loops, no blocking, no
//! parallelism. Do not optimize.

use ndarray::Array2;

use super::{combine, resolve_scale, AugmentMode, CombineOptions, WeightSource};
use crate::error::{Error, Result};
use crate::panel::{ExpectedReturns, ReturnsPanel};
use crate::pca::max_abs_diff;
use crate::stats::row_moments;

/// `y = None` and `s = None` play the role of the R defaults `y = 0` and
/// `s = 0`.
pub fn calc_opt_weights(
    e_r: &[f64],
    ret: &Array2<f64>,
    y: Option<&Array2<f64>>,
    s: Option<&[f64]>,
    rm_overall: bool,
) -> Result<Vec<f64>> {
    let (n, cols) = ret.dim();

    // if(length(s) == 1) s <- apply(ret, 1, sd)
    let s: Vec<f64> = match s {
        Some(s) => s.to_vec(),
        None => (0..n)
            .map(|i| {
                let mut mean = 0.0;
                for t in 0..cols {
                    mean += ret[[i, t]];
                }
                mean /= cols as f64;
                let mut ss = 0.0;
                for t in 0..cols {
                    ss += (ret[[i, t]] - mean) * (ret[[i, t]] - mean);
                }
                (ss / (cols as f64 - 1.0)).sqrt()
            })
            .collect(),
    };

    // if(length(y) == 1) { x <- ret - rowMeans(ret); y <- x / s; y <- y[, -ncol(x)] }
    let mut y: Array2<f64> = match y {
        Some(y) => y.clone(),
        None => {
            let mut x = ret.clone();
            for i in 0..n {
                let mut mean = 0.0;
                for t in 0..cols {
                    mean += ret[[i, t]];
                }
                mean /= cols as f64;
                for t in 0..cols {
                    x[[i, t]] = ret[[i, t]] - mean;
                }
            }
            let mut out = Array2::zeros((n, cols - 1));
            for i in 0..n {
                for t in 0..cols - 1 {
                    out[[i, t]] = x[[i, t]] / s[i];
                }
            }
            out
        }
    };

    // if(rm.overall) { y <- t(t(y) - colMeans(y)); y <- y[, -ncol(y)] }
    if rm_overall {
        let k = y.ncols();
        let mut out = Array2::zeros((n, k - 1));
        for t in 0..k - 1 {
            let mut mean = 0.0;
            for i in 0..n {
                mean += y[[i, t]];
            }
            mean /= n as f64;
            for i in 0..n {
                out[[i, t]] = y[[i, t]] - mean;
            }
        }
        y = out;
    }
    let k = y.ncols();

    // e.r <- matrix(e.r / s, length(e.r), 1)
    let e: Vec<f64> = (0..n).map(|i| e_r[i] / s[i]).collect();

    // w <- t(y) %*% e.r
    let mut rhs = vec![0.0; k];
    for t in 0..k {
        for i in 0..n {
            rhs[t] += y[[i, t]] * e[i];
        }
    }
    // w <- solve(t(y) %*% y) %*% w
    let mut a = vec![vec![0.0; k]; k];
    for p in 0..k {
        for q in 0..k {
            for i in 0..n {
                a[p][q] += y[[i, p]] * y[[i, q]];
            }
        }
    }
    let coef = gauss_solve(a, rhs)?;
    // w <- e.r - y %*% w
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut fit = 0.0;
        for t in 0..k {
            fit += y[[i, t]] * coef[t];
        }
        w[i] = e[i] - fit;
    }
    // w <- w / s
    for i in 0..n {
        w[i] /= s[i];
    }
    // w <- w / sum(abs(w))
    let mut total = 0.0;
    for v in &w {
        total += v.abs();
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Gaussian elimination with partial pivoting, as `solve()` does.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let mut piv = col;
        for r in col + 1..k {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col] == 0.0 {
            return Err(Error::Numerical("reference solve: singular system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..k {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let mut s = b[r];
        for c in r + 1..k {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Ok(x)
}

/// Max `|w_fast - w_reference|` for the same inputs. Union mode has no
/// counterpart in the reference routine.
pub fn reference_parity(panel: &ReturnsPanel, e: &ExpectedReturns, opts: &CombineOptions) -> Result<f64> {
    if opts.external_loadings.is_some() && opts.augment_mode == AugmentMode::Union {
        return Err(Error::param("union loadings have no reference counterpart"));
    }
    let fast = combine(panel, e, opts)?;
    let s = match &opts.weight_source {
        WeightSource::SampleVariance => None,
        source => {
            let mom = row_moments(panel)?;
            let sigma: Vec<f64> = mom.variances.iter().map(|v| v.sqrt()).collect();
            Some(resolve_scale(panel, &mom.means, &sigma, source)?)
        }
    };
    let naive = calc_opt_weights(
        e.values(),
        panel.returns(),
        opts.external_loadings.as_ref(),
        s.as_deref(),
        opts.remove_overall_mode,
    )?;
    Ok(max_abs_diff(fast.weights(), &naive))
}
