use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use blin::estimators::lasso::{self, LassoOptions};
use blin::estimators::ModelKind;
use blin::evaluate::{aic_hat, fold_assignment, likelihood_line_scan, r_squared, r_squared_slices};
use blin::evaluate::study::normalized_offdiag;
use blin::io::{ingest_reader, long_csv_string, matrix_csv, read_matrix_csv, IngestOptions};
use blin::linalg::{spectral_radius, standard_normal_matrix};
use blin::multiway::{fold, mode_matricize, mode_product};
use blin::{blin_mean, build_design, canonicalize, InfluencePair, LagSpec, Panel, QuadraticProblem, TensorSeries};

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn random_pair(s: usize, l: usize, seed: u64) -> InfluencePair {
    let mut r = rng(seed);
    InfluencePair::new(standard_normal_matrix(&mut r, s, s), standard_normal_matrix(&mut r, l, l)).unwrap()
}

fn random_series(dims: &[usize], t: usize, seed: u64) -> TensorSeries {
    let n: usize = dims.iter().product();
    let data = standard_normal_matrix(&mut rng(seed), n * t, 1);
    TensorSeries::new(dims.to_vec(), t, data.as_slice().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diagonal_shift_leaves_mean_unchanged(s in 1usize..6, l in 1usize..6, seed in any::<u64>(), c in -10.0f64..10.0) {
        let pair = random_pair(s, l, seed);
        let x = standard_normal_matrix(&mut rng(seed ^ 1), s, l);
        let before = blin_mean(&pair, &x, &x).unwrap();
        let after = blin_mean(&pair.shifted(c), &x, &x).unwrap();
        prop_assert!((before - after).amax() < 1e-10 * (1.0 + c.abs()) * 10.0);
    }

    #[test]
    fn canonicalize_is_idempotent_and_keeps_diag_effect(s in 1usize..6, l in 1usize..6, seed in any::<u64>()) {
        let pair = random_pair(s, l, seed);
        let once = canonicalize(&pair);
        let twice = canonicalize(&once);
        prop_assert!((&once.a - &twice.a).amax() < 1e-12);
        prop_assert!((&once.b - &twice.b).amax() < 1e-12);
        prop_assert!((pair.diag_effect() - once.diag_effect()).amax() < 1e-12);
    }

    #[test]
    fn theta_round_trip(s in 1usize..6, l in 1usize..6, seed in any::<u64>()) {
        let pair = random_pair(s, l, seed);
        let back = InfluencePair::from_theta(pair.to_theta().as_slice(), s, l).unwrap();
        prop_assert_eq!(back.a, pair.a);
        prop_assert_eq!(back.b, pair.b);
    }

    #[test]
    fn design_times_theta_is_the_mean(s in 1usize..5, l in 1usize..5, t in 3usize..8, pa in 1usize..3, pb in 1usize..3, seed in any::<u64>()) {
        let lags = LagSpec::new(pa, pb).unwrap();
        let series = random_series(&[s, l], t, seed);
        let pair = random_pair(s, l, seed ^ 7);
        let (d, _) = build_design(&series, &lags).unwrap();
        let panel = Panel::from_series(&series, &lags).unwrap();
        let fitted: Vec<f64> = panel.fitted_blin(&pair).unwrap().iter().flat_map(|m| m.iter().copied().collect::<Vec<_>>()).collect();
        let via_design = d * pair.to_theta();
        prop_assert!((via_design - DVector::from_vec(fitted)).amax() < 1e-10);
    }

    #[test]
    fn folds_partition_and_balance(n in 2usize..200, k in 2usize..12, seed in any::<u64>()) {
        let k = k.min(n);
        let a = fold_assignment(n, k, seed);
        prop_assert_eq!(a.len(), n);
        let mut counts = vec![0usize; k];
        for f in &a {
            prop_assert!(*f < k);
            counts[*f] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        prop_assert_eq!(a, fold_assignment(n, k, seed));
    }

    #[test]
    fn r_squared_reference_points(seed in any::<u64>(), n in 1usize..50) {
        let y: Vec<f64> = standard_normal_matrix(&mut rng(seed), n, 1).as_slice().to_vec();
        prop_assume!(y.iter().any(|v| *v != 0.0));
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let zero = vec![0.0; n];
        assert_relative_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_relative_eq!(r_squared(&y, &zero).unwrap(), 0.0);
        // (−y − y)² = 4y²
        assert_relative_eq!(r_squared(&y, &neg).unwrap(), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn normalized_offdiag_is_scale_free(n in 2usize..7, seed in any::<u64>(), c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let m = standard_normal_matrix(&mut rng(seed), n, n);
        let total: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|ij| m[ij]).sum();
        prop_assume!(total.abs() > 1e-3);
        let a = normalized_offdiag(&m);
        let b = normalized_offdiag(&(&m * c));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn line_scan_is_quadratic_in_xi(s in 2usize..5, l in 2usize..5, seed in any::<u64>()) {
        let lags = LagSpec::new(1, 1).unwrap();
        let train = Panel::from_series(&random_series(&[s, l], 12, seed), &lags).unwrap();
        let test = Panel::from_series(&random_series(&[s, l], 8, seed ^ 3), &lags).unwrap();
        let truth = random_pair(s, l, seed ^ 5);
        let fitted = random_pair(s, l, seed ^ 9);
        let grid: Vec<f64> = (0..=8).map(|k| -1.0 + 0.5 * k as f64).collect();
        for kind in [ModelKind::Blin, ModelKind::Bilinear] {
            let pts = likelihood_line_scan(&train, &test, &truth, &fitted, &grid, kind).unwrap();
            // BLIN predictions are linear in ξ so R² is quadratic; the
            // bilinear mean is quadratic in ξ so R² is quartic
            let order = if kind == ModelKind::Blin { 3 } else { 5 };
            for series in [pts.iter().map(|p| p.r2_in).collect::<Vec<_>>(), pts.iter().map(|p| p.r2_out).collect()] {
                let mut d = series.clone();
                for _ in 0..order {
                    d = d.windows(2).map(|w| w[1] - w[0]).collect();
                }
                let scale = series.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                prop_assert!(d.iter().all(|v| v.abs() < 1e-8 * scale), "{kind:?} {d:?}");
            }
            // endpoints reproduce the two models
            let at = |xi: f64| likelihood_line_scan(&train, &test, &truth, &fitted, &[xi], kind).unwrap()[0];
            let predict = |p: &InfluencePair, panel: &Panel| match kind {
                ModelKind::Blin => panel.fitted_blin(p).unwrap(),
                ModelKind::Bilinear => panel.fitted_bilinear(p).unwrap(),
            };
            prop_assert!((at(0.0).r2_in - r_squared_slices(&train.ys, &predict(&truth, &train)).unwrap()).abs() < 1e-12);
            prop_assert!((at(1.0).r2_out - r_squared_slices(&test.ys, &predict(&fitted, &test)).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn long_csv_round_trip(d1 in 1usize..4, d2 in 1usize..4, d3 in 0usize..3, t in 1usize..6, seed in any::<u64>()) {
        let dims: Vec<usize> = if d3 == 0 { vec![d1, d2] } else { vec![d1, d2, d3] };
        let series = random_series(&dims, t, seed);
        let text = long_csv_string(&series).unwrap();
        let (back, report) = ingest_reader(text.as_bytes(), &IngestOptions::default()).unwrap();
        prop_assert_eq!(back.dims(), series.dims());
        prop_assert_eq!(back.data(), series.data());
        prop_assert_eq!(report.filled, 0);
    }

    #[test]
    fn matrix_csv_round_trip(r in 1usize..6, c in 1usize..6, seed in any::<u64>()) {
        let m = standard_normal_matrix(&mut rng(seed), r, c) * 1e3;
        prop_assert_eq!(read_matrix_csv(matrix_csv(&m).as_bytes()).unwrap(), m);
    }

    #[test]
    fn each_nonzero_costs_two(nnz in 0usize..500, n_obs in 1usize..10_000, rss in 1e-6f64..1e6) {
        let step = aic_hat(nnz + 1, n_obs, rss) - aic_hat(nnz, n_obs, rss);
        prop_assert!((step - 2.0).abs() < 1e-9 * aic_hat(nnz, n_obs, rss).abs().max(1.0));
    }

    #[test]
    fn lasso_solutions_satisfy_kkt(rows in 8usize..40, cols in 2usize..10, seed in any::<u64>(), frac in 0.01f64..0.9) {
        let mut r = rng(seed);
        let d = standard_normal_matrix(&mut r, rows, cols);
        let y = DVector::from_column_slice(standard_normal_matrix(&mut r, rows, 1).as_slice());
        let q = QuadraticProblem::from_design(&d, &y);
        let lam = frac * lasso::lambda_max(&q);
        let sol = lasso::solve(&q, lam, None, LassoOptions::scaled(&q, 1e-10, 100_000));
        prop_assert!(sol.converged);
        prop_assert!(lasso::kkt_violation(&q, &sol.theta, lam) <= 1e-8 * lasso::lambda_max(&q));
        let top = lasso::solve(&q, lasso::lambda_max(&q), None, LassoOptions::scaled(&q, 1e-10, 1000));
        prop_assert!(top.theta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn spectral_radius_is_homogeneous(n in 1usize..8, seed in any::<u64>(), c in -5.0f64..5.0) {
        let m = standard_normal_matrix(&mut rng(seed), n, n);
        let r = spectral_radius(&m);
        prop_assert!((spectral_radius(&(&m * c)) - c.abs() * r).abs() <= 1e-10 * (1.0 + c.abs() * r));
        // never exceeds any induced norm
        prop_assert!(r <= m.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn unfold_fold_round_trip(d1 in 1usize..4, d2 in 1usize..4, d3 in 1usize..4, mode in 0usize..3, seed in any::<u64>()) {
        let dims = [d1, d2, d3];
        let n = d1 * d2 * d3;
        let v: Vec<f64> = standard_normal_matrix(&mut rng(seed), n, 1).as_slice().to_vec();
        let m = mode_matricize(&v, &dims, mode).unwrap();
        prop_assert_eq!(fold(&m, &dims, mode).unwrap(), v.clone());
        // X ×_k M unfolds to M · X_(k)
        let f = standard_normal_matrix(&mut rng(seed ^ 11), dims[mode], dims[mode]);
        let prod = mode_product(&v, &dims, mode, &f).unwrap();
        prop_assert!((mode_matricize(&prod, &dims, mode).unwrap() - &f * m).amax() < 1e-12);
    }
}

#[test]
fn two_mode_products_are_matrix_products() {
    let mut r = rng(4);
    let x = standard_normal_matrix(&mut r, 3, 4);
    let a = standard_normal_matrix(&mut r, 3, 3);
    let b = standard_normal_matrix(&mut r, 4, 4);
    let dims = [3, 4];
    let left = mode_product(x.as_slice(), &dims, 0, &a.transpose()).unwrap();
    let right = mode_product(x.as_slice(), &dims, 1, &b.transpose()).unwrap();
    assert!((DMatrix::from_column_slice(3, 4, &left) - a.transpose() * &x).amax() < 1e-12);
    assert!((DMatrix::from_column_slice(3, 4, &right) - &x * &b).amax() < 1e-12);
}
