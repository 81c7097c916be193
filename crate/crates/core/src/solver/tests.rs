use super::*;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Brute-force oracle for intercept-only fits: some data point attains
/// the optimum, so scan them all.
fn scan_intercept_objective(y: &[f64], tau: f64) -> f64 {
    y.iter()
        .map(|&mu| y.iter().map(|&v| check_loss(v - mu, tau)).sum::<f64>() / y.len() as f64)
        .fold(f64::INFINITY, f64::min)
}

fn random_instance(seed: u64, t_len: usize, p: usize) -> (Vec<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((t_len, p), |_| rng.gen_range(-1.0..1.0f64));
    let y: Vec<f64> = (0..t_len).map(|_| rng.gen_range(-2.0..2.0f64)).collect();
    (y, x)
}

#[test]
fn check_loss_hand_values() {
    assert!((check_loss(2.0, 0.05) - 0.10).abs() < 1e-15);
    assert!((check_loss(-2.0, 0.05) - 1.90).abs() < 1e-15);
    assert_eq!(check_loss(0.0, 0.3), 0.0);
    assert!(check_loss(-1e-12, 0.99) >= 0.0);
}

#[test]
fn intercept_only_median() {
    let y: Vec<f64> = (1..=10).map(f64::from).collect();
    let fit = fit_qr(&y, Array2::zeros((10, 0)).view(), 0.5).unwrap();
    assert!((fit.objective - 1.25).abs() < 1e-12, "objective {}", fit.objective);
    assert!((5.0..=6.0).contains(&fit.intercept), "intercept {}", fit.intercept);
    assert!((fit.objective - scan_intercept_objective(&y, 0.5)).abs() < 1e-12);
}

#[test]
fn intercept_only_lower_tail() {
    let y: Vec<f64> = (1..=10).map(f64::from).collect();
    let fit = fit_qr(&y, Array2::zeros((10, 0)).view(), 0.05).unwrap();
    assert_eq!(fit.intercept, 1.0);
    assert!((fit.objective - scan_intercept_objective(&y, 0.05)).abs() < 1e-12);
}

#[test]
fn interpolating_fit_is_exact() {
    let x = Array2::from_shape_fn((12, 1), |(i, _)| i as f64 - 5.5);
    let y: Vec<f64> = (0..12).map(|i| 2.0 * (i as f64 - 5.5)).collect();
    for tau in [0.05, 0.5, 0.9] {
        let fit = fit_qr(&y, x.view(), tau).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-6, "tau {tau}");
        assert!(fit.intercept.abs() < 1e-6, "tau {tau}");
        assert!(fit.objective < 1e-8, "tau {tau} objective {}", fit.objective);
    }
}

#[test]
fn quantile_subgradient_condition() {
    for seed in 0..20 {
        for tau in [0.05, 0.25, 0.5] {
            let (y, x) = random_instance(seed, 37, 3);
            let fit = fit_qr(&y, x.view(), tau).unwrap();
            let resid = fit.residuals(&y, x.view());
            let below = resid.iter().filter(|r| **r < 0.0).count() as f64;
            let at_or_below = resid.iter().filter(|r| **r <= 0.0).count() as f64;
            let bound = tau * y.len() as f64;
            assert!(
                below <= bound && bound <= at_or_below,
                "seed {seed} tau {tau}: {below} <= {bound} <= {at_or_below}"
            );
        }
    }
}

#[test]
fn lasso_at_zero_lambda_matches_unpenalized() {
    let (y, x) = random_instance(7, 40, 4);
    let plain = fit_qr(&y, x.view(), 0.25).unwrap();
    let pen = fit_qr_weighted_l1(&y, x.view(), 0.25, 0.0, &[1.0; 4]).unwrap();
    assert!((plain.objective - pen.objective).abs() < 1e-6);
}

#[test]
fn lasso_at_huge_lambda_is_intercept_only() {
    let (y, x) = random_instance(11, 50, 4);
    let tau = 0.25;
    let fit = fit_qr_weighted_l1(&y, x.view(), tau, 1e6, &[1.0; 4]).unwrap();
    assert!(fit.coefficients.iter().all(|c| *c == 0.0));
    assert_eq!(fit.intercept, crate::stats::type1_quantile(&y, tau));
    assert!(fit.support.is_empty());
}

#[test]
fn objective_never_exceeds_intercept_only_candidate() {
    for seed in 30..40 {
        let (y, x) = random_instance(seed, 30, 3);
        let fit = fit_qr_weighted_l1(&y, x.view(), 0.1, 0.05, &[1.0; 3]).unwrap();
        let candidate = scan_intercept_objective(&y, 0.1);
        assert!(fit.objective <= candidate + 1e-10);
    }
}

#[test]
fn scale_consistency() {
    let (y, x) = random_instance(3, 35, 2);
    let tau = 0.3;
    let base = fit_qr(&y, x.view(), tau).unwrap();
    let k = 7.5;
    let y2: Vec<f64> = y.iter().map(|v| v * k).collect();
    let x2 = x.mapv(|v| v * k);
    let scaled = fit_qr(&y2, x2.view(), tau).unwrap();
    assert!((scaled.objective - k * base.objective).abs() < 1e-6 * (1.0 + k * base.objective));
    for j in 0..2 {
        assert!((scaled.coefficients[j] - base.coefficients[j]).abs() < 1e-5);
    }
    assert!((scaled.intercept - k * base.intercept).abs() < 1e-4);
}

#[test]
fn deterministic_for_fixed_inputs() {
    let (y, x) = random_instance(5, 30, 3);
    let a = fit_qr_weighted_l1(&y, x.view(), 0.05, 0.3, &[1.0; 3]).unwrap();
    let b = fit_qr_weighted_l1(&y, x.view(), 0.05, 0.3, &[1.0; 3]).unwrap();
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.intercept.to_bits(), b.intercept.to_bits());
}

#[test]
fn nonconvex_at_zero_lambda_matches_unpenalized() {
    let (y, x) = random_instance(9, 40, 3);
    let plain = fit_qr(&y, x.view(), 0.1).unwrap();
    for spec in [PenaltySpec::scad(0.0, 3.7, 3), PenaltySpec::mcp(0.0, 3.0, 3)] {
        let fit = fit_qr_nonconvex(&y, x.view(), 0.1, &spec).unwrap();
        assert!(
            (fit.objective - plain.objective).abs() < 1e-6,
            "{:?}: {} vs {}",
            spec.kind,
            fit.objective,
            plain.objective
        );
    }
}

#[test]
fn nonconvex_is_unbiased_beyond_flat_region() {
    // Noise-free signal with coefficients far beyond a*lambda: the penalty
    // derivative vanishes there, so the LLA fixed point is the unpenalized fit.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let t_len = 40;
    let x = Array2::from_shape_fn((t_len, 2), |_| rng.gen_range(-1.0..1.0f64));
    let y: Vec<f64> = (0..t_len).map(|i| 5.0 * x[[i, 0]] + 5.0 * x[[i, 1]]).collect();
    let tau = 0.1;
    let plain = fit_qr(&y, x.view(), tau).unwrap();
    for spec in [PenaltySpec::scad(0.1, 3.7, 2), PenaltySpec::mcp(0.1, 3.0, 2)] {
        let fit = fit_qr_nonconvex(&y, x.view(), tau, &spec).unwrap();
        for j in 0..2 {
            assert!(
                (fit.coefficients[j] - plain.coefficients[j]).abs() < 1e-5,
                "{:?} coef {j}: {} vs {}",
                spec.kind,
                fit.coefficients[j],
                plain.coefficients[j]
            );
        }
    }
}

#[test]
fn lla_descends_from_lasso_initializer() {
    let (y, x) = random_instance(17, 30, 3);
    let tau = 0.05;
    for spec in [PenaltySpec::scad(0.05, 3.7, 3), PenaltySpec::mcp(0.05, 3.0, 3)] {
        // Evaluate the LASSO initializer under the exact nonconvex penalty,
        // in the same standardized coordinates the fit uses.
        let mut scaled = x.clone();
        let mut stds = vec![0.0; 3];
        for j in 0..3 {
            let col: Vec<f64> = x.column(j).to_vec();
            stds[j] = crate::stats::sample_std(&col);
            for i in 0..x.nrows() {
                scaled[[i, j]] /= stds[j];
            }
        }
        let init = fit_qr_weighted_l1(&y, scaled.view(), tau, spec.lambda, &[1.0; 3]).unwrap();
        let init_loss = (0..y.len())
            .map(|i| {
                let mut v = y[i] - init.intercept;
                for j in 0..3 {
                    v -= scaled[[i, j]] * init.coefficients[j];
                }
                check_loss(v, tau)
            })
            .sum::<f64>()
            / y.len() as f64;
        let init_pen: f64 = init
            .coefficients
            .iter()
            .map(|c| penalty_value(*c, &spec).unwrap())
            .sum();
        let fit = fit_qr_nonconvex(&y, x.view(), tau, &spec).unwrap();
        assert!(
            fit.objective <= init_loss + init_pen + 1e-9,
            "{:?}: {} vs initializer {}",
            spec.kind,
            fit.objective,
            init_loss + init_pen
        );
    }
}

#[test]
fn rejects_bad_inputs() {
    let (y, x) = random_instance(1, 10, 2);
    assert!(fit_qr(&y, x.view(), 0.0).is_err());
    assert!(fit_qr(&y, x.view(), 1.0).is_err());
    let mut bad = y.clone();
    bad[3] = f64::NAN;
    assert!(fit_qr(&bad, x.view(), 0.5).is_err());
    assert!(fit_qr_weighted_l1(&y, x.view(), 0.5, -1.0, &[1.0; 2]).is_err());
    assert!(fit_qr_weighted_l1(&y, x.view(), 0.5, 1.0, &[1.0; 3]).is_err());
    // Too few rows for an unpenalized fit.
    let (y_small, x_small) = random_instance(2, 2, 3);
    assert!(fit_qr(&y_small, x_small.view(), 0.5).is_err());
}
