use super::*;
use ndarray::array;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn toy_window(seed: u64, t_len: usize, n: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Correlated heavy-ish returns in percent.
    let mut out = Array2::zeros((t_len, n));
    for t in 0..t_len {
        let market: f64 = rng.gen_range(-2.0..2.0);
        for j in 0..n {
            let idio: f64 = rng.gen_range(-1.5..1.5);
            out[[t, j]] = market + idio + 0.05 * j as f64;
        }
    }
    out
}

#[test]
fn reference_prefers_shifted_up_asset() {
    let mut window = toy_window(1, 40, 2);
    for t in 0..40 {
        window[[t, 1]] = window[[t, 0]] - 1.0;
    }
    // Asset 0 dominates asset 1 everywhere, so it has the lower ES.
    assert_eq!(select_reference_asset(window.view(), 0.1).unwrap(), 0);

    for t in 0..40 {
        window[[t, 0]] = window[[t, 1]] - 2.0;
    }
    assert_eq!(select_reference_asset(window.view(), 0.1).unwrap(), 1);
}

#[test]
fn reference_tie_breaks_to_lowest_index() {
    let mut window = toy_window(2, 30, 3);
    for t in 0..30 {
        let v = window[[t, 0]];
        window[[t, 1]] = v;
        window[[t, 2]] = v;
    }
    assert_eq!(select_reference_asset(window.view(), 0.1).unwrap(), 0);
}

#[test]
fn reference_matches_exhaustive_scan() {
    let window = toy_window(3, 40, 3);
    let tau = 0.05;
    let s = select_reference_asset(window.view(), tau).unwrap();
    let risks: Vec<f64> = (0..3)
        .map(|j| crate::metrics::es(&window.column(j).to_vec(), tau).unwrap())
        .collect();
    let best = (0..3).min_by(|&a, &b| risks[a].total_cmp(&risks[b])).unwrap();
    assert_eq!(s, best);
}

#[test]
fn design_hand_example() {
    let window = array![[1.0, 2.0, 3.0]];
    let design = build_design(window.view(), 0);
    assert_eq!(design.y, vec![1.0]);
    assert_eq!(design.x[[0, 0]], -1.0);
    assert_eq!(design.x[[0, 1]], -2.0);
    assert_eq!(design.column_map, vec![1, 2]);
}

#[test]
fn design_identical_assets_give_zero_column() {
    let window = array![[0.5, 0.5], [1.5, 1.5], [-0.25, -0.25]];
    let design = build_design(window.view(), 0);
    assert!(design.x.iter().all(|v| *v == 0.0));
}

#[test]
fn design_reconstructs_portfolio_return() {
    let window = toy_window(4, 15, 4);
    let design = build_design(window.view(), 2);
    let coefs = [0.3, -0.2, 0.4];
    for t in 0..15 {
        let lhs = design.y[t]
            - (0..3).map(|c| design.x[[t, c]] * coefs[c]).sum::<f64>();
        // Portfolio return with w_s as the budget complement.
        let w_s = 1.0 - coefs.iter().sum::<f64>();
        let mut rhs = w_s * window[[t, 2]];
        for (c, &j) in design.column_map.iter().enumerate() {
            rhs += coefs[c] * window[[t, j]];
        }
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn recover_weights_hand_values() {
    let window = toy_window(5, 10, 3);
    let design = build_design(window.view(), 0);
    let fit = QuantileFit {
        intercept: 0.0,
        coefficients: vec![0.3, 0.2],
        objective: 0.0,
        support: vec![0, 1],
        iterations: 0,
        converged: true,
    };
    let w = recover_weights(&fit, &design, 3, 1e-5);
    assert_eq!(w.weights, vec![0.5, 0.3, 0.2]);
    assert_eq!(w.reference, Some(0));
    assert_eq!(w.support_size, 3);

    let empty = QuantileFit {
        coefficients: vec![0.0, 0.0],
        support: vec![],
        ..fit
    };
    let w = recover_weights(&empty, &design, 3, 1e-5);
    assert_eq!(w.weights, vec![1.0, 0.0, 0.0]);
    assert_eq!(w.support_size, 1);
}

#[test]
fn recovered_weights_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let window = toy_window(6, 12, 8);
    let design = build_design(window.view(), 3);
    for _ in 0..20 {
        let coefs: Vec<f64> = (0..7).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let fit = QuantileFit {
            intercept: 0.0,
            coefficients: coefs,
            objective: 0.0,
            support: vec![],
            iterations: 0,
            converged: true,
        };
        let w = recover_weights(&fit, &design, 8, 1e-5);
        let total: f64 = w.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-15, "sum {total}");
    }
}

#[test]
fn post_refit_empty_stage_is_intercept_only() {
    let window = toy_window(7, 30, 3);
    let design = build_design(window.view(), 0);
    let tau = 0.1;
    let stage1 = QuantileFit {
        intercept: 0.3,
        coefficients: vec![0.0, 0.0],
        objective: 0.0,
        support: vec![],
        iterations: 0,
        converged: true,
    };
    let refit = post_refit(&design, &stage1, 1e-5, tau).unwrap();
    assert!(refit.coefficients.iter().all(|c| *c == 0.0));
    assert_eq!(refit.intercept, crate::stats::type1_quantile(&design.y, tau));
}

#[test]
fn post_refit_full_support_matches_unpenalized() {
    let window = toy_window(8, 40, 3);
    let design = build_design(window.view(), 1);
    let tau = 0.25;
    let full = fit_qr(&design.y, design.x.view(), tau).unwrap();
    let stage1 = QuantileFit {
        intercept: 0.0,
        coefficients: vec![0.5, 0.5],
        objective: 0.0,
        support: vec![0, 1],
        iterations: 0,
        converged: true,
    };
    let refit = post_refit(&design, &stage1, 1e-5, tau).unwrap();
    assert!((refit.objective - full.objective).abs() < 1e-6);
}

#[test]
fn post_refit_releases_shrinkage() {
    // y depends on one regressor; the penalized stage shrinks it, the
    // refit restores it.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t_len = 60;
    let mut x = Array2::zeros((t_len, 3));
    let mut y = Vec::with_capacity(t_len);
    for t in 0..t_len {
        for j in 0..3 {
            x[[t, j]] = rng.gen_range(-1.0..1.0);
        }
        y.push(x[[t, 0]] + 0.01 * rng.gen_range(-1.0..1.0));
    }
    let tau = 0.25;
    let design = DesignPair {
        y,
        x,
        column_map: vec![1, 2, 3],
        reference: 0,
    };
    let weights = crate::tuning::lasso_scale_weights(design.x.view(), tau).unwrap();
    let grid = crate::tuning::lambda_grid(&design.y, design.x.view(), tau, 20, &weights, 1e-4)
        .unwrap();
    // A lambda in the middle of the path shrinks without killing the signal.
    let lambda = grid[8];
    let stage1 = fit_qr_weighted_l1(&design.y, design.x.view(), tau, lambda, &weights).unwrap();
    assert!(
        stage1.coefficients[0].abs() > 1e-5,
        "stage 1 killed the true coefficient entirely; pick a smaller lambda"
    );
    let refit = post_refit(&design, &stage1, 1e-5, tau).unwrap();
    assert!(
        refit.coefficients[0].abs() > stage1.coefficients[0].abs(),
        "refit {} not larger than shrunken {}",
        refit.coefficients[0],
        stage1.coefficients[0]
    );
}

#[test]
fn ew_weights_are_uniform() {
    let window = toy_window(10, 25, 49);
    let spec = StrategySpec::from_label(StrategyLabel::Ew, &HyperParams::default());
    let (w, diag) = run_strategy_window(window.view(), &spec, 7).unwrap();
    assert_eq!(w.weights.len(), 49);
    assert!(w.weights.iter().all(|v| (*v - 1.0 / 49.0).abs() < 1e-15));
    assert_eq!(w.support_size, 49);
    assert_eq!(diag.reference, None);
}

#[test]
fn taxonomy_rejects_invalid_combinations() {
    let mut spec = StrategySpec::from_label(StrategyLabel::Lbch, &HyperParams::default());
    spec.post_refit = true; // that would be PLBCH
    assert!(spec.validate().is_err());

    let mut spec = StrategySpec::from_label(StrategyLabel::Plbic, &HyperParams::default());
    spec.post_refit = false; // BIC implies the refit
    assert!(spec.validate().is_err());
}

#[test]
fn lbch_and_plbch_share_support_on_same_seed() {
    let window = toy_window(11, 50, 6);
    let params = HyperParams::default();
    let lbch = StrategySpec::from_label(StrategyLabel::Lbch, &params);
    let plbch = StrategySpec::from_label(StrategyLabel::Plbch, &params);
    // Same label-independent seed so the BCH draws coincide.
    let (w1, d1) = run_strategy_window(window.view(), &lbch, 99).unwrap();
    let (w2, d2) = run_strategy_window(window.view(), &plbch, 99).unwrap();
    assert_eq!(d1.lambda, d2.lambda);
    let s = d1.reference.unwrap();
    let active1: Vec<usize> = (0..6)
        .filter(|&j| j != s && w1.weights[j].abs() > 1e-5)
        .collect();
    let active2: Vec<usize> = (0..6)
        .filter(|&j| j != s && w2.weights[j].abs() > 1e-5)
        .collect();
    assert_eq!(active1, active2, "supports differ");
}

#[test]
fn every_strategy_satisfies_budget_constraint() {
    let window = toy_window(12, 45, 5);
    let params = HyperParams {
        bch_sims: 200,
        grid_size: 12,
        ..HyperParams::default()
    };
    for label in StrategyLabel::ALL {
        let spec = StrategySpec::from_label(label, &params);
        let (w, _) = run_strategy_window(window.view(), &spec, 5).unwrap();
        let total: f64 = w.weights.iter().sum();
        assert!(
            (total - 1.0).abs() < 1e-10,
            "{label}: weights sum to {total}"
        );
    }
}
