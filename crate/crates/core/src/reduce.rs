//! Deterministic reductions.
//!
//! Every sum over alphas goes through a fixed binary tree whose shape
//! depends only on the number of rows, never on the number of worker
//! threads, so results are bit-identical for any rayon pool size.

use std::ops::Range;

/// Rows handled sequentially by one leaf of the reduction tree.
pub const LEAF_ROWS: usize = 2048;

/// Rows packed into one contiguous buffer inside a leaf.
pub const BLOCK_ROWS: usize = 256;

const PAIRWISE_BASE: usize = 32;

/// Pairwise (cascade) summation. Error grows as O(log n) instead of O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BASE {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(x)` without materializing the mapped slice.
pub fn pairwise_sum_by(xs: &[f64], f: impl Fn(f64) -> f64 + Copy) -> f64 {
    if xs.len() <= PAIRWISE_BASE {
        let mut s = 0.0;
        for &x in xs {
            s += f(x);
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum_by(&xs[..mid], f) + pairwise_sum_by(&xs[mid..], f)
}

/// Dot product with pairwise accumulation.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BASE {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            s += x * y;
        }
        return s;
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// Reduces `leaf` over `0..n_rows` split into [`LEAF_ROWS`] leaves and
/// combined along a fixed balanced tree. Leaves run in parallel.
///
/// Returns `None` when `n_rows == 0`.
pub fn tree_reduce<T, L, C>(n_rows: usize, leaf: L, combine: C) -> Option<T>
where
    T: Send,
    L: Fn(Range<usize>) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    if n_rows == 0 {
        return None;
    }
    let n_leaves = n_rows.div_ceil(LEAF_ROWS);
    Some(reduce_leaves(0, n_leaves, n_rows, &leaf, &combine))
}

fn reduce_leaves<T, L, C>(lo: usize, hi: usize, n_rows: usize, leaf: &L, combine: &C) -> T
where
    T: Send,
    L: Fn(Range<usize>) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    if hi - lo == 1 {
        let start = lo * LEAF_ROWS;
        let end = (start + LEAF_ROWS).min(n_rows);
        return leaf(start..end);
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(
        || reduce_leaves(lo, mid, n_rows, leaf, combine),
        || reduce_leaves(mid, hi, n_rows, leaf, combine),
    );
    combine(a, b)
}

/// Elementwise `a += b`, returning `a`. Combiner for vector-valued reductions.
pub fn add_into(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(&b) {
        *x += y;
    }
    a
}
