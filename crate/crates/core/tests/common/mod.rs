//! Shared test oracles, independent of the library's solve path.

#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Exact LP oracle for (weighted-L1-penalized) quantile regression.
///
/// Formulates the problem the textbook way -- residual splitting
/// (u+, u- >= 0) and coefficient splitting (w+, w- >= 0) -- and solves the
/// resulting LP with a dense primal simplex using Bland's rule. Completely
/// separate from the interior-point path under test. Returns the optimal
/// objective on the `(1/T) sum rho + lambda sum omega |w|` scale.
pub fn lp_objective_oracle(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    tau: f64,
    lambda: f64,
    scale_weights: &[f64],
) -> f64 {
    let t_len = y.len();
    let p = x.ncols();
    assert_eq!(scale_weights.len(), p);
    let n_cols = 2 * p + 2 + 2 * t_len;

    // Cost vector, on the T * objective scale.
    let mut cost = vec![0.0; n_cols];
    for j in 0..p {
        cost[j] = t_len as f64 * lambda * scale_weights[j];
        cost[p + j] = cost[j];
    }
    for t in 0..t_len {
        cost[2 * p + 2 + t] = tau;
        cost[2 * p + 2 + t_len + t] = 1.0 - tau;
    }

    // Row t of [X, -X, 1, -1, I, -I] v = y, sign-flipped so b >= 0; the
    // residual split variable with +1 after the flip seeds the basis.
    let mut tableau = vec![vec![0.0; n_cols + 1]; t_len];
    let mut basis = vec![0usize; t_len];
    for t in 0..t_len {
        let sign = if y[t] >= 0.0 { 1.0 } else { -1.0 };
        for j in 0..p {
            tableau[t][j] = sign * x[[t, j]];
            tableau[t][p + j] = -sign * x[[t, j]];
        }
        tableau[t][2 * p] = sign;
        tableau[t][2 * p + 1] = -sign;
        tableau[t][2 * p + 2 + t] = sign;
        tableau[t][2 * p + 2 + t_len + t] = -sign;
        tableau[t][n_cols] = sign * y[t];
        basis[t] = if y[t] >= 0.0 {
            2 * p + 2 + t
        } else {
            2 * p + 2 + t_len + t
        };
    }

    // Reduced costs r = c - c_B' B^-1 A.
    let mut reduced = cost.clone();
    for t in 0..t_len {
        let cb = cost[basis[t]];
        if cb != 0.0 {
            for j in 0..n_cols {
                reduced[j] -= cb * tableau[t][j];
            }
        }
    }

    let mut pivots = 0usize;
    loop {
        // Bland's rule: smallest improving column.
        let entering = (0..n_cols).find(|&j| reduced[j] < -1e-9);
        let Some(enter) = entering else { break };

        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for t in 0..t_len {
            let a = tableau[t][enter];
            if a > 1e-9 {
                let ratio = tableau[t][n_cols] / a;
                let better = ratio < best_ratio - 1e-12
                    || ((ratio - best_ratio).abs() <= 1e-12
                        && leave.map(|l| basis[t] < basis[l]).unwrap_or(false));
                if better || leave.is_none() && ratio < best_ratio {
                    best_ratio = ratio;
                    leave = Some(t);
                }
            }
        }
        let leave = leave.expect("penalized check loss is bounded below; LP cannot be unbounded");

        // Pivot.
        let pivot = tableau[leave][enter];
        for j in 0..=n_cols {
            tableau[leave][j] /= pivot;
        }
        for t in 0..t_len {
            if t != leave {
                let factor = tableau[t][enter];
                if factor != 0.0 {
                    for j in 0..=n_cols {
                        tableau[t][j] -= factor * tableau[leave][j];
                    }
                }
            }
        }
        let factor = reduced[enter];
        for j in 0..n_cols {
            reduced[j] -= factor * tableau[leave][j];
        }
        basis[leave] = enter;

        pivots += 1;
        assert!(pivots < 100_000, "simplex oracle failed to terminate");
    }

    let lp_value: f64 = (0..t_len).map(|t| cost[basis[t]] * tableau[t][n_cols]).sum();
    lp_value / t_len as f64
}

/// Brute-force re-implementation of the simulated pivotal tuning rule.
/// Shares only the RNG stream derivation with the library.
pub fn bch_oracle(
    x: ArrayView2<'_, f64>,
    tau: f64,
    params: &esqr_core::tuning::BchParams,
) -> f64 {
    use esqr_core::seeds;
    let (t_len, p) = x.dim();
    let sd: Vec<f64> = (0..p)
        .map(|j| std_n_minus_1(&x.column(j).to_vec()))
        .collect();
    let norm = (tau * (1.0 - tau)).sqrt();
    let mut draws = Vec::new();
    for b in 0..params.n_sims {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(params.seed, &[seeds::stream::BCH, b as u64]));
        let e: Vec<f64> = (0..t_len).map(|_| rng.gen::<f64>()).collect();
        let mut lam = 0.0f64;
        for j in 0..p {
            let mut acc = 0.0;
            for t in 0..t_len {
                let ind = if e[t] <= tau { 1.0 } else { 0.0 };
                acc += x[[t, j]] * (tau - ind) / (sd[j] * norm);
            }
            let candidate = (acc / t_len as f64).abs();
            if candidate > lam {
                lam = candidate;
            }
        }
        draws.push(t_len as f64 * lam);
    }
    draws.sort_by(f64::total_cmp);
    let raw = (1.0 - params.tail_beta) * params.n_sims as f64;
    let rounded = raw.round();
    let k = if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    };
    params.multiplier * draws[k.clamp(1, params.n_sims) - 1]
}

/// Nested-loop re-implementation of the K-fold CV steps, sharing the fold
/// assignment and the fitting routine with the library.
pub fn cv_oracle(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    tau: f64,
    folds: usize,
    seed: u64,
    grid: &[f64],
) -> f64 {
    let t_len = y.len();
    let p = x.ncols();
    let assignment = esqr_core::tuning::cv_folds(t_len, folds, seed);
    let norm = (tau * (1.0 - tau)).sqrt();

    let mut best_lambda = f64::NAN;
    let mut best_loss = f64::INFINITY;
    for &lambda in grid {
        let mut total = 0.0;
        for fold in &assignment {
            let mut is_val = vec![false; t_len];
            for &i in fold {
                is_val[i] = true;
            }
            let train: Vec<usize> = (0..t_len).filter(|i| !is_val[*i]).collect();
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let mut x_train = Array2::zeros((train.len(), p));
            for (r, &i) in train.iter().enumerate() {
                for j in 0..p {
                    x_train[[r, j]] = x[[i, j]];
                }
            }
            let weights: Vec<f64> = (0..p)
                .map(|j| std_n_minus_1(&x_train.column(j).to_vec()) * norm / train.len() as f64)
                .collect();
            let fit = esqr_core::solver::fit_qr_weighted_l1(
                &y_train,
                x_train.view(),
                tau,
                lambda,
                &weights,
            )
            .unwrap();
            let mut loss = 0.0;
            for &i in fold {
                let mut v = y[i];
                for j in 0..p {
                    v -= x[[i, j]] * fit.coefficients[j];
                }
                let u = v - fit.intercept;
                loss += if u < 0.0 { u * (tau - 1.0) } else { u * tau };
            }
            total += loss / fold.len() as f64;
        }
        let mean = total / folds as f64;
        if mean < best_loss || (mean == best_loss && lambda > best_lambda) {
            best_loss = mean;
            best_lambda = lambda;
        }
    }
    best_lambda
}

pub fn std_n_minus_1(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Random regression instance shared across oracle tests.
pub fn random_instance(seed: u64, t_len: usize, p: usize) -> (Vec<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((t_len, p), |_| rng.gen_range(-1.0..1.0f64));
    let y: Vec<f64> = (0..t_len).map(|_| rng.gen_range(-2.0..2.0f64)).collect();
    (y, x)
}

/// Random instance with instance dimensions drawn from a seed, matching the
/// "T <= 50, p <= 5" oracle-equivalence regime.
pub fn random_sized_instance(seed: u64) -> (Vec<f64>, Array2<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd_1234);
    let t_len = rng.gen_range(10..=50);
    let p = rng.gen_range(0..=5usize.min(t_len / 3));
    let tau = *[0.05, 0.25, 0.5].choose(&mut rng).unwrap();
    let (y, x) = random_instance(seed, t_len, p);
    (y, x, tau)
}
