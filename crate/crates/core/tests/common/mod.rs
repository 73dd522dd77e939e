#![allow(dead_code)]

use alphacomb::panel::{gen_synthetic, SynthSpec, Synthetic};
use alphacomb::stats::{normalize_and_trim, sample_variances, serial_demean, NormalizedLoadings};
use alphacomb::ReturnsPanel;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

pub fn normal_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| normal(r))
}

pub fn random_panel(seed: u64, n: usize, cols: usize) -> ReturnsPanel {
    let mut r = rng(seed);
    ReturnsPanel::from_matrix(normal_matrix(&mut r, n, cols)).unwrap()
}

pub fn synth(n: usize, cols: usize, k: usize, seed: u64) -> Synthetic {
    gen_synthetic(&SynthSpec { n_alphas: n, n_obs: cols, true_k: k, seed, ..Default::default() }).unwrap()
}

pub fn sigma_of(panel: &ReturnsPanel) -> Vec<f64> {
    sample_variances(&serial_demean(panel)).unwrap().iter().map(|v| v.sqrt()).collect()
}

/// Y = X / sigma over the first M columns.
pub fn raw_loadings(panel: &ReturnsPanel) -> (NormalizedLoadings, Vec<f64>) {
    let x = serial_demean(panel);
    let s: Vec<f64> = sample_variances(&x).unwrap().iter().map(|v| v.sqrt()).collect();
    (normalize_and_trim(&x, &s, false).unwrap(), s)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    max_abs_diff(a, b) / max_abs(b)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Textbook Pearson correlation over all observations.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[[i, c]].abs().total_cmp(&m[[j, c]].abs())).unwrap();
        for k in 0..n {
            m.swap([c, k], [p, k]);
            inv.swap([c, k], [p, k]);
        }
        let d = m[[c, c]];
        for k in 0..n {
            m[[c, k]] /= d;
            inv[[c, k]] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[[r, c]];
                for k in 0..n {
                    m[[r, k]] -= f * m[[c, k]];
                    inv[[r, k]] -= f * inv[[c, k]];
                }
            }
        }
    }
    inv
}

/// `t - L (L^T Z L)^{-1} L^T Z t` through an explicit inverse.
pub fn projection_oracle(t: &[f64], l: &Array2<f64>, z: &[f64]) -> Vec<f64> {
    let (n, m) = l.dim();
    let mut g = Array2::<f64>::zeros((m, m));
    let mut b = vec![0.0; m];
    for i in 0..n {
        for p in 0..m {
            b[p] += l[[i, p]] * z[i] * t[i];
            for q in 0..m {
                g[[p, q]] += l[[i, p]] * z[i] * l[[i, q]];
            }
        }
    }
    let gi = invert(&g);
    let coef: Vec<f64> = (0..m).map(|p| (0..m).map(|q| gi[[p, q]] * b[q]).sum()).collect();
    (0..n).map(|i| t[i] - (0..m).map(|p| l[[i, p]] * coef[p]).sum::<f64>()).collect()
}
