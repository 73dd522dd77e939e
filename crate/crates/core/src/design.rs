//! Row-streamed design matrices.
//!
//! The regression never needs more than a few hundred rows of its N x m
//! design in memory at once: the Gram matrix, the moment vector and the
//! residuals are all single passes over rows. [`DesignRows`] produces
//! rows on demand so derived designs (normalized returns, demeaned and
//! trimmed columns, unions with external loadings) need not be
//! materialized.

use faer::Mat;
use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::linalg::{dot, faer_to_row_major, gemv_t_add, gram_block_add};
use crate::reduce::{add_into, tree_reduce, BLOCK_ROWS};

/// Source of design-matrix rows.
pub trait DesignRows: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// Writes rows `start..start + rows` row-major into `out`, which holds
    /// exactly `rows * n_cols()` values.
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]);
}

impl<T: DesignRows + ?Sized> DesignRows for &T {
    fn n_rows(&self) -> usize {
        (**self).n_rows()
    }
    fn n_cols(&self) -> usize {
        (**self).n_cols()
    }
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]) {
        (**self).fill_rows(start, rows, out)
    }
}

impl<T: DesignRows + ?Sized> DesignRows for Box<T> {
    fn n_rows(&self) -> usize {
        (**self).n_rows()
    }
    fn n_cols(&self) -> usize {
        (**self).n_cols()
    }
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]) {
        (**self).fill_rows(start, rows, out)
    }
}

/// A dense matrix view.
pub struct MatrixRows<'a>(pub ArrayView2<'a, f64>);

impl DesignRows for MatrixRows<'_> {
    fn n_rows(&self) -> usize {
        self.0.nrows()
    }
    fn n_cols(&self) -> usize {
        self.0.ncols()
    }
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]) {
        let m = self.0.ncols();
        for r in 0..rows {
            let dst = &mut out[r * m..(r + 1) * m];
            let src = self.0.row(start + r);
            match src.as_slice() {
                Some(s) => dst.copy_from_slice(s),
                None => dst.iter_mut().zip(src.iter()).for_each(|(d, s)| *d = *s),
            }
        }
    }
}

/// Columns of `inner` with the given column means subtracted, keeping only
/// the first `keep` columns.
pub struct ColumnDemeaned<S> {
    pub inner: S,
    pub means: Vec<f64>,
    pub keep: usize,
}

impl<S: DesignRows> DesignRows for ColumnDemeaned<S> {
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }
    fn n_cols(&self) -> usize {
        self.keep
    }
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]) {
        let w = self.inner.n_cols();
        let mut buf = vec![0.0; rows * w];
        self.inner.fill_rows(start, rows, &mut buf);
        for r in 0..rows {
            let src = &buf[r * w..r * w + self.keep];
            let dst = &mut out[r * self.keep..(r + 1) * self.keep];
            for ((d, s), mu) in dst.iter_mut().zip(src).zip(&self.means) {
                *d = s - mu;
            }
        }
    }
}

/// A subset of `inner`'s columns, in the given order.
pub struct ColumnSubset<S> {
    pub inner: S,
    pub columns: Vec<usize>,
}

impl<S: DesignRows> DesignRows for ColumnSubset<S> {
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }
    fn n_cols(&self) -> usize {
        self.columns.len()
    }
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]) {
        let w = self.inner.n_cols();
        let k = self.columns.len();
        let mut buf = vec![0.0; rows * w];
        self.inner.fill_rows(start, rows, &mut buf);
        for r in 0..rows {
            for (j, &c) in self.columns.iter().enumerate() {
                out[r * k + j] = buf[r * w + c];
            }
        }
    }
}

/// Horizontal concatenation `[left | right]`.
pub struct Hstack<A, B> {
    pub left: A,
    pub right: B,
}

impl<A: DesignRows, B: DesignRows> DesignRows for Hstack<A, B> {
    fn n_rows(&self) -> usize {
        self.left.n_rows()
    }
    fn n_cols(&self) -> usize {
        self.left.n_cols() + self.right.n_cols()
    }
    fn fill_rows(&self, start: usize, rows: usize, out: &mut [f64]) {
        let (a, b) = (self.left.n_cols(), self.right.n_cols());
        let mut la = vec![0.0; rows * a];
        let mut lb = vec![0.0; rows * b];
        self.left.fill_rows(start, rows, &mut la);
        self.right.fill_rows(start, rows, &mut lb);
        for r in 0..rows {
            out[r * (a + b)..r * (a + b) + a].copy_from_slice(&la[r * a..(r + 1) * a]);
            out[r * (a + b) + a..(r + 1) * (a + b)].copy_from_slice(&lb[r * b..(r + 1) * b]);
        }
    }
}

fn for_blocks(range: std::ops::Range<usize>, mut f: impl FnMut(usize, usize)) {
    let mut start = range.start;
    while start < range.end {
        let rows = BLOCK_ROWS.min(range.end - start);
        f(start, rows);
        start += rows;
    }
}

/// Column sums, reduced along the fixed tree.
pub fn column_sums(src: &dyn DesignRows) -> Vec<f64> {
    let m = src.n_cols();
    tree_reduce(
        src.n_rows(),
        |range| {
            let mut acc = vec![0.0; m];
            let mut buf = vec![0.0; BLOCK_ROWS * m];
            for_blocks(range, |start, rows| {
                src.fill_rows(start, rows, &mut buf[..rows * m]);
                for r in 0..rows {
                    for (a, x) in acc.iter_mut().zip(&buf[r * m..(r + 1) * m]) {
                        *a += x;
                    }
                }
            });
            acc
        },
        add_into,
    )
    .unwrap_or_else(|| vec![0.0; m])
}

pub fn column_means(src: &dyn DesignRows) -> Vec<f64> {
    let n = src.n_rows() as f64;
    column_sums(src).into_iter().map(|s| s / n).collect()
}

/// Weighted Gram matrix `sum_i z_i L_i L_i^T` (row-major m x m) and moment
/// vector `sum_i z_i L_i t_i`, in one pass. `weights = None` means unit
/// weights.
pub fn gram_and_moment(src: &dyn DesignRows, weights: Option<&[f64]>, target: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = src.n_cols();
    let (g, b) = tree_reduce(
        src.n_rows(),
        |range| {
            let mut g = Mat::<f64>::zeros(m, m);
            let mut b = vec![0.0; m];
            let mut buf = vec![0.0; BLOCK_ROWS * m];
            let mut t = vec![0.0; BLOCK_ROWS];
            for_blocks(range, |start, rows| {
                let block = &mut buf[..rows * m];
                src.fill_rows(start, rows, block);
                for r in 0..rows {
                    let i = start + r;
                    match weights {
                        Some(z) => {
                            let sz = z[i].sqrt();
                            block[r * m..(r + 1) * m].iter_mut().for_each(|x| *x *= sz);
                            t[r] = sz * target[i];
                        }
                        None => t[r] = target[i],
                    }
                }
                gram_block_add(&mut g, block, rows, m);
                gemv_t_add(&mut b, block, rows, m, &t[..rows]);
            });
            (g, b)
        },
        |(mut g1, b1), (g2, b2)| {
            g1 += &g2;
            (g1, add_into(b1, b2))
        },
    )
    .unwrap_or_else(|| (Mat::zeros(m, m), vec![0.0; m]));
    let mut g = faer_to_row_major(g.as_ref());
    symmetrize(&mut g, m);
    (g, b)
}

/// Unweighted Gram matrix only.
pub fn gram_only(src: &dyn DesignRows) -> Vec<f64> {
    let m = src.n_cols();
    let g = tree_reduce(
        src.n_rows(),
        |range| {
            let mut g = Mat::<f64>::zeros(m, m);
            let mut buf = vec![0.0; BLOCK_ROWS * m];
            for_blocks(range, |start, rows| {
                src.fill_rows(start, rows, &mut buf[..rows * m]);
                gram_block_add(&mut g, &buf[..rows * m], rows, m);
            });
            g
        },
        |mut a, b| {
            a += &b;
            a
        },
    )
    .unwrap_or_else(|| Mat::zeros(m, m));
    let mut g = faer_to_row_major(g.as_ref());
    symmetrize(&mut g, m);
    g
}

fn symmetrize(g: &mut [f64], m: usize) {
    for s in 0..m {
        for t in 0..s {
            let v = 0.5 * (g[s * m + t] + g[t * m + s]);
            g[s * m + t] = v;
            g[t * m + s] = v;
        }
    }
}

/// `L^T v` for an N-vector `v`.
pub fn transpose_times(src: &dyn DesignRows, v: &[f64]) -> Vec<f64> {
    let m = src.n_cols();
    tree_reduce(
        src.n_rows(),
        |range| {
            let mut acc = vec![0.0; m];
            let mut buf = vec![0.0; BLOCK_ROWS * m];
            for_blocks(range, |start, rows| {
                src.fill_rows(start, rows, &mut buf[..rows * m]);
                gemv_t_add(&mut acc, &buf[..rows * m], rows, m, &v[start..start + rows]);
            });
            acc
        },
        add_into,
    )
    .unwrap_or_else(|| vec![0.0; m])
}

/// `t_i - L_i . c` for every row.
pub fn residuals(src: &dyn DesignRows, target: &[f64], coef: &[f64]) -> Vec<f64> {
    let m = src.n_cols();
    let mut out = vec![0.0; src.n_rows()];
    out.par_chunks_mut(BLOCK_ROWS).enumerate().for_each(|(blk, chunk)| {
        let start = blk * BLOCK_ROWS;
        let rows = chunk.len();
        let mut buf = vec![0.0; rows * m];
        src.fill_rows(start, rows, &mut buf);
        for (r, o) in chunk.iter_mut().enumerate() {
            *o = target[start + r] - dot(&buf[r * m..(r + 1) * m], coef);
        }
    });
    out
}

/// `L c` for every row.
pub fn times(src: &dyn DesignRows, coef: &[f64]) -> Vec<f64> {
    let zeros = vec![0.0; src.n_rows()];
    residuals(src, &zeros, coef).into_iter().map(|x| -x).collect()
}
