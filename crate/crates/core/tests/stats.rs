mod common;

use alphacomb::design::MatrixRows;
use alphacomb::linalg::{condition_number, symmetric_eigenvalues};
use alphacomb::stats::{
    gram, normalize_and_trim, row_moments, sample_correlation_dense, sample_variances, serial_demean, LoadingsVariant,
};
use alphacomb::{DenseCap, ReturnsPanel};
use common::*;
use ndarray::Array2;
use proptest::prelude::*;

/// Independent two-pass mean and variance with denominator M.
fn two_pass(row: &[f64]) -> (f64, f64) {
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    let ss: f64 = row.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (row.len() - 1) as f64)
}

#[test]
fn variances_match_two_pass_oracle() {
    let s = synth(1000, 40, 3, 31);
    let v = sample_variances(&serial_demean(&s.panel)).unwrap();
    let mom = row_moments(&s.panel).unwrap();
    for i in 0..1000 {
        let (mean, var) = two_pass(s.panel.row(i));
        assert!((v[i] - var).abs() <= 1e-12 * var);
        assert!((mom.variances[i] - var).abs() <= 1e-12 * var);
        assert!((mom.means[i] - mean).abs() <= 1e-12 * mean.abs().max(1e-3));
    }
}

#[test]
fn demeaned_triple_has_unit_variance() {
    let p = ReturnsPanel::from_matrix(Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, 0.0, 5.0, 1.0]).unwrap()).unwrap();
    let x = serial_demean(&p);
    assert_eq!(x.row(0), &[-1.0, 0.0, 1.0]);
    assert_eq!(sample_variances(&x).unwrap()[0], 1.0);
}

#[test]
fn trimming_shapes() {
    let p = random_panel(32, 20, 9);
    let x = serial_demean(&p);
    let s: Vec<f64> = sample_variances(&x).unwrap().iter().map(|v| v.sqrt()).collect();
    let raw = normalize_and_trim(&x, &s, false).unwrap();
    let lam = normalize_and_trim(&x, &s, true).unwrap();
    assert_eq!((raw.y.ncols(), raw.variant), (8, LoadingsVariant::Raw));
    assert_eq!((lam.y.ncols(), lam.variant), (7, LoadingsVariant::Demeaned));
    for c in 0..7 {
        let col_mean = lam.y.column(c).sum() / 20.0;
        assert!(col_mean.abs() < 1e-13, "column {c} mean {col_mean}");
    }
}

#[test]
fn correlation_matches_pairwise_oracle_over_all_columns() {
    let p = random_panel(33, 50, 11);
    let (y, _) = raw_loadings(&p);
    let psi = sample_correlation_dense(&y, DenseCap::default()).unwrap();
    for i in 0..50 {
        for j in 0..50 {
            let expect = pearson(p.row(i), p.row(j));
            assert!((psi[[i, j]] - expect).abs() < 1e-10, "({i},{j}): {} vs {expect}", psi[[i, j]]);
        }
    }
}

#[test]
fn correlation_is_bounded_and_symmetric() {
    let s = synth(300, 25, 2, 34);
    let (y, _) = raw_loadings(&s.panel);
    let psi = sample_correlation_dense(&y, DenseCap::default()).unwrap();
    for i in 0..300 {
        assert!((psi[[i, i]] - 1.0).abs() < 1e-10);
        for j in 0..i {
            assert!(psi[[i, j]].abs() <= 1.0 + 1e-10);
            assert!((psi[[i, j]] - psi[[j, i]]).abs() <= 1e-12);
        }
    }
}

#[test]
fn gram_of_orthogonal_columns_is_diagonal() {
    let l = Array2::from_shape_fn((8, 3), |(i, c)| match c {
        0 => 1.0,
        1 => if i % 2 == 0 { 1.0 } else { -1.0 },
        _ => if i < 4 { 1.0 } else { -1.0 },
    });
    let g = gram(&MatrixRows(l.view()));
    for a in 0..3 {
        assert_eq!(g.get(a, a), 8.0);
        for b in 0..3 {
            if a != b {
                assert!(g.get(a, b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn gram_matches_triple_loop_and_is_psd() {
    let mut r = rng(35);
    let l = normal_matrix(&mut r, 1000, 20);
    let g = gram(&MatrixRows(l.view()));
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for a in 0..20 {
        for b in 0..20 {
            let mut acc = 0.0;
            for i in 0..1000 {
                acc += l[[i, a]] * l[[i, b]];
            }
            scale = scale.max(acc.abs());
            worst = worst.max((g.get(a, b) - acc).abs());
        }
    }
    assert!(worst <= 1e-12 * scale, "{worst}");
    let trace: f64 = g.diagonal().iter().sum();
    let eig = symmetric_eigenvalues(g.to_array().view()).unwrap();
    assert!(eig.iter().all(|&e| e >= -1e-10 * trace));
}

#[test]
fn mode_removed_loadings_have_full_rank() {
    let s = synth(5000, 61, 3, 36);
    let x = serial_demean(&s.panel);
    let sigma: Vec<f64> = sample_variances(&x).unwrap().iter().map(|v| v.sqrt()).collect();
    let lam = normalize_and_trim(&x, &sigma, true).unwrap();
    let g = gram(&lam.rows());
    let cond = condition_number(g.as_slice(), g.dim());
    assert!(cond.is_finite() && cond < 1e6, "condition {cond}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn demeaned_rows_sum_to_zero(seed in any::<u64>(), n in 2usize..20, cols in 3usize..30, shift in -1e3f64..1e3) {
        let mut r = rng(seed);
        let m = normal_matrix(&mut r, n, cols) + shift;
        let x = serial_demean(&ReturnsPanel::from_matrix(m).unwrap());
        let max = x.x().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            let sum: f64 = x.row(i).iter().sum();
            prop_assert!(sum.abs() <= 1e-9 * (cols - 1) as f64 * max);
        }
    }

    #[test]
    fn variance_is_homogeneous_of_degree_two(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let p = random_panel(seed, 6, 10);
        let scaled = ReturnsPanel::from_matrix(p.returns() * c).unwrap();
        let v = sample_variances(&serial_demean(&p)).unwrap();
        let vc = sample_variances(&serial_demean(&scaled)).unwrap();
        for (a, b) in v.iter().zip(&vc) {
            prop_assert!((b - c * c * a).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn mode_removed_columns_have_zero_mean(seed in any::<u64>(), n in 2usize..40, cols in 4usize..15) {
        let p = random_panel(seed, n, cols);
        let x = serial_demean(&p);
        let s: Vec<f64> = sample_variances(&x).unwrap().iter().map(|v| v.sqrt()).collect();
        let lam = normalize_and_trim(&x, &s, true).unwrap();
        for c in 0..lam.y.ncols() {
            let mean = lam.y.column(c).sum() / n as f64;
            prop_assert!(mean.abs() < 1e-13);
        }
    }
}
