mod common;

use alphacomb::optimizer::{benchmark_weights, dense_oracle_weights, one_factor_weights};
use alphacomb::regress::{exact_factor_weights, regression_limit_weights, weighted_residuals, weighted_residuals_dense};
use alphacomb::design::MatrixRows;
use alphacomb::{DenseCap, Error, ExpectedReturns, FactorModel};
use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn problem(seed: u64, n: usize, m: usize) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let l = normal_matrix(&mut r, n, m);
    let t = (0..n).map(|_| normal(&mut r) + 0.5).collect();
    let z = (0..n).map(|_| r.random_range(0.1..10.0)).collect();
    (l, t, z)
}

#[test]
fn matches_explicit_inverse_oracle() {
    let (l, t, z) = problem(61, 400, 12);
    let fast = weighted_residuals(&t, &MatrixRows(l.view()), Some(&z)).unwrap();
    let oracle = projection_oracle(&t, &l, &z);
    assert!(max_abs_diff(&fast.residuals, &oracle) < 1e-10);
    let unit = weighted_residuals(&t, &MatrixRows(l.view()), None).unwrap();
    assert!(max_abs_diff(&unit.residuals, &projection_oracle(&t, &l, &vec![1.0; 400])) < 1e-10);
}

#[test]
fn duplicated_column_is_rejected() {
    let (mut l, t, _) = problem(62, 100, 4);
    let c = l.column(1).to_owned();
    l.column_mut(3).assign(&c);
    assert!(matches!(weighted_residuals_dense(&t, l.view(), None), Err(Error::SingularDesign { .. })));
}

#[test]
fn no_factor_model_gives_inverse_variance_weights() {
    let mut r = rng(63);
    let xi: Vec<f64> = (0..50).map(|_| r.random_range(0.5..2.0)).collect();
    let e = ExpectedReturns::new((0..50).map(|_| normal(&mut r)).collect()).unwrap();
    let model = FactorModel::new(xi.clone(), Array2::zeros((50, 0)), Array2::zeros((0, 0))).unwrap();
    let w = exact_factor_weights(&e, &model).unwrap();
    let bench = benchmark_weights(&e, &xi).unwrap();
    assert!(max_abs_diff(w.weights(), bench.weights()) < 1e-15);
}

#[test]
fn woodbury_matches_dense_inverse() {
    let mut r = rng(64);
    let n = 2000;
    let xi: Vec<f64> = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
    let omega = normal_matrix(&mut r, n, 6) * 0.4;
    let a = normal_matrix(&mut r, 6, 6);
    let phi = a.dot(&a.t()) / 6.0 + Array2::<f64>::eye(6) * 0.1;
    let model = FactorModel::new(xi, omega, phi).unwrap();
    let e = ExpectedReturns::new((0..n).map(|_| normal(&mut r) + 0.3).collect()).unwrap();
    let fast = exact_factor_weights(&e, &model).unwrap();
    let dense = dense_oracle_weights(model.dense_covariance(DenseCap(n)).unwrap().view(), &e, DenseCap(n)).unwrap();
    assert!(rel_err(fast.weights(), dense.weights()) < 1e-10);
}

#[test]
fn uniform_one_factor_model_matches_closed_form() {
    let mut r = rng(65);
    let n = 300;
    let rho: f64 = 0.3;
    let sigma: Vec<f64> = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
    let e = ExpectedReturns::new((0..n).map(|_| normal(&mut r) + 0.2).collect()).unwrap();
    let xi = sigma.iter().map(|s| s * (1.0 - rho).sqrt()).collect();
    let omega = Array2::from_shape_fn((n, 1), |(i, _)| sigma[i] * rho.sqrt());
    let model = FactorModel::new(xi, omega, Array2::eye(1)).unwrap();
    let w = exact_factor_weights(&e, &model).unwrap();
    let closed = one_factor_weights(&e, &sigma, rho).unwrap();
    assert!(rel_err(w.weights(), closed.weights()) < 1e-12);
}

#[test]
fn weak_factors_approach_benchmark() {
    let mut r = rng(66);
    let n = 1000;
    let xi: Vec<f64> = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
    let omega = Array2::from_shape_fn((n, 3), |(i, _)| 0.002 * xi[i] * normal(&mut r));
    let model = FactorModel::new(xi.clone(), omega, Array2::eye(3)).unwrap();
    let e = ExpectedReturns::new(xi.iter().map(|x| 0.05 * x * r.random_range(0.5..1.5)).collect()).unwrap();
    let limit = regression_limit_weights(&e, &model).unwrap();
    assert!(limit.min_q < 0.01, "min q {}", limit.min_q);
    let exact = exact_factor_weights(&e, &model).unwrap();
    let bench = benchmark_weights(&e, &xi).unwrap();
    assert!(rel_err(exact.weights(), bench.weights()) < 0.02);
}

#[test]
fn strong_factors_approach_regression_limit() {
    let mut r = rng(67);
    let mut devs = Vec::new();
    for n in [1000, 10_000, 100_000] {
        let xi: Vec<f64> = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
        let omega = Array2::from_shape_fn((n, 2), |(i, a)| {
            let g = if a == 0 { 1.0 } else { normal(&mut r) };
            xi[i] * 0.5 * g
        });
        let model = FactorModel::new(xi.clone(), omega, Array2::eye(2)).unwrap();
        let e = ExpectedReturns::new(xi.iter().map(|x| 0.05 * x * r.random_range(0.5..1.5)).collect()).unwrap();
        let exact = exact_factor_weights(&e, &model).unwrap();
        let limit = regression_limit_weights(&e, &model).unwrap();
        devs.push(rel_err(limit.weights.weights(), exact.weights()));
    }
    assert!(devs[0] > devs[1] && devs[1] > devs[2] && devs[2] < 0.01, "{devs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weight_rescaling_leaves_residuals_unchanged(seed in any::<u64>(), lam in prop::sample::select(vec![1e-3, 1.0, 1e3])) {
        let (l, t, z) = problem(seed, 200, 6);
        let base = weighted_residuals_dense(&t, l.view(), Some(&z)).unwrap();
        let zl: Vec<f64> = z.iter().map(|v| v * lam).collect();
        let scaled = weighted_residuals_dense(&t, l.view(), Some(&zl)).unwrap();
        prop_assert!(max_abs_diff(&base.residuals, &scaled.residuals) < 1e-10);
    }

    #[test]
    fn residuals_depend_only_on_span(seed in any::<u64>()) {
        let (l, t, z) = problem(seed, 200, 6);
        let mut r = rng(seed ^ 0x5eed);
        let u = normal_matrix(&mut r, 6, 6) + Array2::<f64>::eye(6) * 3.0;
        let base = weighted_residuals_dense(&t, l.view(), Some(&z)).unwrap();
        let rotated = weighted_residuals_dense(&t, l.dot(&u).view(), Some(&z)).unwrap();
        prop_assert!(max_abs_diff(&base.residuals, &rotated.residuals) < 1e-9);
    }

    #[test]
    fn residuals_are_weighted_orthogonal_and_idempotent(seed in any::<u64>(), n in 20usize..300, m in 1usize..10) {
        let (l, t, z) = problem(seed, n, m);
        let res = weighted_residuals_dense(&t, l.view(), Some(&z)).unwrap();
        for s in 0..m {
            let col = l.column(s).to_vec();
            let d: f64 = (0..n).map(|i| z[i] * col[i] * res.residuals[i]).sum();
            prop_assert!(d.abs() <= 1e-9 * norm(&t) * norm(&col) * max_abs(&z));
        }
        let again = weighted_residuals_dense(&res.residuals, l.view(), Some(&z)).unwrap();
        prop_assert!(max_abs_diff(&again.residuals, &res.residuals) < 1e-10);
    }

    #[test]
    fn target_in_span_leaves_zero_residual(seed in any::<u64>()) {
        let (l, _, z) = problem(seed, 150, 5);
        let mut r = rng(seed.wrapping_add(1));
        let c: Vec<f64> = (0..5).map(|_| normal(&mut r)).collect();
        let t: Vec<f64> = (0..150).map(|i| (0..5).map(|s| l[[i, s]] * c[s]).sum()).collect();
        let res = weighted_residuals_dense(&t, l.view(), Some(&z)).unwrap();
        prop_assert!(max_abs(&res.residuals) < 1e-10);
    }
}
