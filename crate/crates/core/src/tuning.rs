//! Selection of the regularization strength: simulation-based pivotal rule
//! (BCH), quantile-regression BIC, and K-fold cross-validation.

use ndarray::ArrayView2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{self, stream};
use crate::solver::{
    check_loss, fit_qr_nonconvex, fit_qr_weighted_l1, PenaltySpec, QuantileFit,
};
use crate::stats::{ceil_index, sample_std, type1_quantile};

/// Parameters of the simulation-based pivotal rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BchParams {
    /// Number of simulated draws of the pivotal statistic.
    pub n_sims: usize,
    /// Scale applied to the simulated quantile (must exceed 1).
    pub multiplier: f64,
    /// Tail level: the rule takes the (1 - tail_beta) quantile.
    pub tail_beta: f64,
    pub seed: u64,
}

impl Default for BchParams {
    fn default() -> Self {
        Self {
            n_sims: 1000,
            multiplier: 2.0,
            tail_beta: 0.1,
            seed: 0,
        }
    }
}

/// Parameters of the quantile-regression BIC.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BicParams {
    /// Multiplier on the complexity term (the paper-recommended default is
    /// `ln T`, which depends on the window length; see [`BicParams::log_t`]).
    pub complexity: f64,
    /// Support-extraction threshold.
    pub eta: f64,
}

impl BicParams {
    pub fn log_t(t_len: usize, eta: f64) -> Self {
        Self {
            complexity: (t_len as f64).ln(),
            eta,
        }
    }
}

/// BIC value; a perfect in-sample fit is reported as a marker rather than
/// as a non-finite number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BicScore {
    PerfectFit,
    Value(f64),
}

impl BicScore {
    /// Ordering used by the grid search: a perfect fit scores below any
    /// finite value.
    pub fn better_than(&self, other: &BicScore) -> bool {
        match (self, other) {
            (BicScore::PerfectFit, BicScore::PerfectFit) => false,
            (BicScore::PerfectFit, BicScore::Value(_)) => true,
            (BicScore::Value(_), BicScore::PerfectFit) => false,
            (BicScore::Value(a), BicScore::Value(b)) => a < b,
        }
    }
}

/// BIC of a refit together with the asymmetric-Laplace scale estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BicOutput {
    pub score: BicScore,
    /// Maximum-likelihood scale `(1/T) sum rho_tau(resid)`.
    pub residual_scale: f64,
}

/// Parameters of K-fold cross-validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvParams {
    pub folds: usize,
    pub seed: u64,
    /// Candidate lambda values, largest first.
    pub grid: Vec<f64>,
}

/// Penalty fitted inside each CV training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CvPenalty {
    /// Weighted L1 with per-training-set scale weights
    /// `sigma_j sqrt(tau (1 - tau)) / T_train`.
    Lasso,
    Scad { concavity: f64 },
    Mcp { concavity: f64 },
}

/// Cross-validation outcome: the selected lambda and the loss curve
/// (`None` marks grid points where a fold fit failed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSelection {
    pub lambda: f64,
    pub curve: Vec<(f64, Option<f64>)>,
}

/// Simulate the pivotal statistic and return the scaled tail quantile.
///
/// Each of the `n_sims` draws replaces the response by i.i.d. uniforms and
/// computes `T max_j |(1/T) sum_t x_jt (tau - 1{e_t <= tau}) /
/// (sigma_j sqrt(tau (1-tau)))|`; the rule returns `multiplier` times the
/// empirical `(1 - tail_beta)` quantile of the draws. Draw `b` uses its own
/// derived RNG stream, so the result does not depend on evaluation order.
pub fn bch_lambda(x: ArrayView2<'_, f64>, tau: f64, params: &BchParams) -> Result<f64> {
    if params.n_sims == 0 {
        return Err(Error::Validation("bch n_sims must be at least 1".into()));
    }
    if !(params.multiplier > 1.0) {
        return Err(Error::Validation(format!(
            "bch multiplier must exceed 1, got {}",
            params.multiplier
        )));
    }
    if !(params.tail_beta > 0.0 && params.tail_beta < 1.0) {
        return Err(Error::Validation(format!(
            "bch tail level must lie in (0, 1), got {}",
            params.tail_beta
        )));
    }
    let (t_len, p) = x.dim();
    if p == 0 || t_len == 0 {
        return Err(Error::Validation("bch requires a nonempty design".into()));
    }
    let mut col_std = vec![0.0; p];
    for j in 0..p {
        let col: Vec<f64> = x.column(j).to_vec();
        let sd = sample_std(&col);
        if sd <= 0.0 || !sd.is_finite() {
            return Err(Error::Validation(format!(
                "column {j} has zero sample standard deviation"
            )));
        }
        col_std[j] = sd;
    }
    let norm = (tau * (1.0 - tau)).sqrt();

    let mut draws =
        Vec::with_capacity(params.n_sims);
    for b in 0..params.n_sims {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(params.seed, &[stream::BCH, b as u64]));
        let mut max_abs = 0.0f64;
        // One pass per column over the same uniform draw: generate once.
        let e: Vec<f64> = (0..t_len).map(|_| rng.gen::<f64>()).collect();
        for j in 0..p {
            let mut acc = 0.0;
            for t in 0..t_len {
                let ind = if e[t] <= tau { 1.0 } else { 0.0 };
                acc += x[[t, j]] * (tau - ind) / (col_std[j] * norm);
            }
            max_abs = max_abs.max((acc / t_len as f64).abs());
        }
        draws.push(t_len as f64 * max_abs);
    }
    draws.sort_by(f64::total_cmp);
    let k = ceil_index((1.0 - params.tail_beta) * params.n_sims as f64).clamp(1, params.n_sims);
    Ok(params.multiplier * draws[k - 1])
}

/// Score a refit on the selected columns:
/// `log(2 sum_t rho_tau(resid)) + |D| (log T / 2T) complexity`.
pub fn bic_score(
    y: &[f64],
    x_selected: ArrayView2<'_, f64>,
    tau: f64,
    fit: &QuantileFit,
    params: &BicParams,
    t_len: usize,
) -> Result<BicOutput> {
    if y.len() != t_len || x_selected.nrows() != t_len {
        return Err(Error::Validation(
            "bic_score sample length mismatch".into(),
        ));
    }
    if fit.coefficients.len() != x_selected.ncols() {
        return Err(Error::Validation(format!(
            "fit has {} coefficients but {} selected columns",
            fit.coefficients.len(),
            x_selected.ncols()
        )));
    }
    if !(params.complexity > 0.0) {
        return Err(Error::Validation("bic complexity factor must be positive".into()));
    }
    let resid = fit.residuals(y, x_selected);
    let loss_sum: f64 = resid.iter().map(|&r| check_loss(r, tau)).sum();
    let residual_scale = loss_sum / t_len as f64;
    if loss_sum <= 0.0 {
        return Ok(BicOutput {
            score: BicScore::PerfectFit,
            residual_scale,
        });
    }
    let d = x_selected.ncols() as f64;
    let t = t_len as f64;
    let score = (2.0 * loss_sum).ln() + d * (t.ln() / (2.0 * t)) * params.complexity;
    Ok(BicOutput {
        score: BicScore::Value(score),
        residual_scale,
    })
}

/// Random fold assignment: a seeded permutation of `0..t_len` cut into
/// `k` contiguous blocks whose sizes differ by at most one. Exposed so
/// oracle re-implementations can share the assignment.
pub fn cv_folds(t_len: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..t_len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[stream::CV_FOLDS]));
    perm.shuffle(&mut rng);
    let base = t_len / k;
    let extra = t_len % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(perm[start..start + size].to_vec());
        start += size;
    }
    folds
}

/// K-fold cross-validation over a lambda grid.
///
/// For each lambda, fits the requested penalized model on each training
/// complement and averages the check loss on the held-out fold; returns the
/// minimizer, breaking ties toward the larger (sparser) lambda. A grid
/// point where any fold fit fails is marked invalid and excluded.
pub fn kfold_cv(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    tau: f64,
    penalty: CvPenalty,
    params: &CvParams,
) -> Result<CvSelection> {
    let t_len = y.len();
    if params.folds < 2 {
        return Err(Error::Validation("cross-validation needs at least 2 folds".into()));
    }
    if params.folds > t_len {
        return Err(Error::Validation(format!(
            "{} folds exceed the {} observations",
            params.folds, t_len
        )));
    }
    if params.grid.is_empty() {
        return Err(Error::Validation("empty lambda grid".into()));
    }
    let folds = cv_folds(t_len, params.folds, params.seed);
    let mut in_validation = vec![usize::MAX; t_len];
    for (k, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_validation[i] = k;
        }
    }

    let p = x.ncols();
    let mut curve = Vec::with_capacity(params.grid.len());
    for &lambda in &params.grid {
        let mut total = 0.0;
        let mut valid = true;
        for (k, fold) in folds.iter().enumerate() {
            let train_rows: Vec<usize> = (0..t_len).filter(|i| in_validation[*i] != k).collect();
            let y_train: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
            let x_train = x.select(ndarray::Axis(0), &train_rows);

            let fit = match penalty {
                CvPenalty::Lasso => lasso_scale_weights(x_train.view(), tau).and_then(|w| {
                    fit_qr_weighted_l1(&y_train, x_train.view(), tau, lambda, &w)
                }),
                CvPenalty::Scad { concavity } => {
                    let spec = PenaltySpec::scad(lambda, concavity, p);
                    fit_qr_nonconvex(&y_train, x_train.view(), tau, &spec)
                }
                CvPenalty::Mcp { concavity } => {
                    let spec = PenaltySpec::mcp(lambda, concavity, p);
                    fit_qr_nonconvex(&y_train, x_train.view(), tau, &spec)
                }
            };
            let fit = match fit {
                Ok(f) => f,
                Err(_) => {
                    valid = false;
                    break;
                }
            };

            let mut fold_loss = 0.0;
            for &i in fold {
                let mut v = y[i];
                for j in 0..p {
                    v -= x[[i, j]] * fit.coefficients[j];
                }
                fold_loss += check_loss(v - fit.intercept, tau);
            }
            total += fold_loss / fold.len() as f64;
        }
        curve.push((lambda, valid.then(|| total / params.folds as f64)));
    }

    let mut best: Option<(f64, f64)> = None; // (lambda, loss)
    for &(lambda, loss) in &curve {
        if let Some(loss) = loss {
            let improves = match best {
                None => true,
                Some((best_lambda, best_loss)) => {
                    loss < best_loss || (loss == best_loss && lambda > best_lambda)
                }
            };
            if improves {
                best = Some((lambda, loss));
            }
        }
    }
    match best {
        Some((lambda, _)) => Ok(CvSelection { lambda, curve }),
        None => Err(Error::Solver(
            "every grid point failed during cross-validation".into(),
        )),
    }
}

/// Eq.-style scale weights for the weighted L1 penalty:
/// `sigma_j sqrt(tau (1 - tau)) / T`, computed on the data being fit.
pub fn lasso_scale_weights(x: ArrayView2<'_, f64>, tau: f64) -> Result<Vec<f64>> {
    let (t_len, p) = x.dim();
    let norm = (tau * (1.0 - tau)).sqrt();
    let mut weights = Vec::with_capacity(p);
    for j in 0..p {
        let col: Vec<f64> = x.column(j).to_vec();
        let sd = sample_std(&col);
        if sd <= 0.0 || !sd.is_finite() {
            return Err(Error::Validation(format!(
                "column {j} has zero sample standard deviation"
            )));
        }
        weights.push(sd * norm / t_len as f64);
    }
    Ok(weights)
}

/// Log-spaced lambda grid from the deactivation bound down to
/// `floor_ratio` times it, largest first.
///
/// The upper endpoint is the smallest lambda at which the intercept-only
/// solution satisfies the L1 subgradient optimality condition:
/// `max_j |(1/T) sum_t x_jt (tau - 1{y_t <= q_tau(y)})| / scale_weights[j]`.
pub fn lambda_grid(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    tau: f64,
    n_points: usize,
    scale_weights: &[f64],
    floor_ratio: f64,
) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::Validation("lambda grid needs at least 2 points".into()));
    }
    if !(floor_ratio > 0.0 && floor_ratio < 1.0) {
        return Err(Error::Validation(format!(
            "grid floor ratio must lie in (0, 1), got {floor_ratio}"
        )));
    }
    let (t_len, p) = x.dim();
    if p == 0 || scale_weights.len() != p {
        return Err(Error::Validation("lambda grid: degenerate design".into()));
    }
    let q = type1_quantile(y, tau);
    // Rows tied with the quantile enter the subgradient with the fractional
    // indicator forced by intercept stationarity, clamped into [0, 1]; for
    // integer tau*T this is exactly the plain 1{y <= q} indicator, and for
    // fractional tau*T it is what actually makes lambda_max deactivating.
    let below = y.iter().filter(|v| **v < q).count() as f64;
    let ties = y.iter().filter(|v| **v == q).count() as f64;
    let tie_ind = ((tau * t_len as f64 - below) / ties).clamp(0.0, 1.0);
    let mut lambda_max = 0.0f64;
    for j in 0..p {
        if scale_weights[j] <= 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for t in 0..t_len {
            let ind = if y[t] < q {
                1.0
            } else if y[t] == q {
                tie_ind
            } else {
                0.0
            };
            acc += x[[t, j]] * (tau - ind);
        }
        lambda_max = lambda_max.max((acc / t_len as f64).abs() / scale_weights[j]);
    }
    if lambda_max <= 0.0 || !lambda_max.is_finite() {
        return Err(Error::Validation(
            "lambda grid: deactivation bound is degenerate".into(),
        ));
    }
    let log_floor = floor_ratio.ln();
    let grid: Vec<f64> = (0..n_points)
        .map(|i| lambda_max * (log_floor * i as f64 / (n_points - 1) as f64).exp())
        .collect();
    Ok(grid)
}
