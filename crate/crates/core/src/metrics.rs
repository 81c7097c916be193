//! The six performance statistics (ES, SD, SR, TO, AP, SP) and the
//! pairwise bootstrap tests for variance and Sharpe-ratio equality.

use ndarray::ArrayView2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Threads};
use crate::seeds::{self, stream};
use crate::stats::{ceil_index, sorted_sum};

/// The statistics block of one backtest, in report column order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricBlock {
    pub es: f64,
    pub sd: f64,
    pub sr: f64,
    pub to: f64,
    pub ap: f64,
    pub sp: f64,
    pub tau: f64,
    pub eta: f64,
}

/// Value-at-risk: the type-1 empirical tau-quantile of the returns.
pub fn var_tau(returns: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Validation(format!("tau must lie in (0, 1), got {tau}")));
    }
    let needed = ceil_index(1.0 / tau);
    if returns.len() < needed {
        return Err(Error::Data(format!(
            "need at least {needed} observations for the {tau} quantile, got {}",
            returns.len()
        )));
    }
    Ok(crate::stats::type1_quantile(returns, tau))
}

/// Expected shortfall: negative mean of the returns strictly below the
/// tau-level value-at-risk.
pub fn es(returns: &[f64], tau: f64) -> Result<f64> {
    let var = var_tau(returns, tau)?;
    let tail: Vec<f64> = returns.iter().copied().filter(|r| *r < var).collect();
    if tail.is_empty() {
        return Err(Error::Numerical(format!(
            "no return falls strictly below the VaR ({var}); the series is too \
             degenerate or discrete for an expected-shortfall estimate"
        )));
    }
    Ok(-(tail.iter().sum::<f64>() / tail.len() as f64))
}

/// Sample standard deviation, (n-1) denominator.
pub fn sd(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::Data("standard deviation needs at least 2 points".into()));
    }
    Ok(crate::stats::sample_std(returns))
}

/// Sharpe ratio with zero risk-free rate, reported in percent.
pub fn sharpe(returns: &[f64]) -> Result<f64> {
    let s = sd(returns)?;
    if s <= 0.0 {
        return Err(Error::Numerical("zero standard deviation".into()));
    }
    Ok(crate::stats::mean(returns) / s * 100.0)
}

/// Mean L1 distance between post-rebalance weights and the drifted
/// pre-rebalance weights. Row `k` of `drifted` is compared against row
/// `k + 1` of `weights` (the first rebalance has no predecessor).
pub fn turnover(weights: ArrayView2<'_, f64>, drifted: ArrayView2<'_, f64>) -> Result<f64> {
    let n_dates = weights.nrows();
    if drifted.nrows() + 1 != n_dates || weights.ncols() != drifted.ncols() {
        return Err(Error::Validation(format!(
            "misaligned weight histories: {} post-rebalance rows vs {} drifted rows",
            n_dates,
            drifted.nrows()
        )));
    }
    if drifted.nrows() == 0 {
        return Err(Error::Data("turnover needs at least two rebalances".into()));
    }
    let mut total = 0.0;
    for k in 0..drifted.nrows() {
        for j in 0..weights.ncols() {
            total += (weights[[k + 1, j]] - drifted[[k, j]]).abs();
        }
    }
    Ok(total / drifted.nrows() as f64)
}

/// Average counts of active (`|w| > eta`) and short (`w < -eta`) positions
/// per rebalance date.
pub fn active_short_positions(weights: ArrayView2<'_, f64>, eta: f64) -> (f64, f64) {
    let n_dates = weights.nrows();
    let mut active = 0usize;
    let mut short = 0usize;
    for k in 0..n_dates {
        for j in 0..weights.ncols() {
            let w = weights[[k, j]];
            if w.abs() > eta {
                active += 1;
            }
            if w < -eta {
                short += 1;
            }
        }
    }
    (
        active as f64 / n_dates as f64,
        short as f64 / n_dates as f64,
    )
}

/// Assemble the full statistics block for one backtest.
pub fn metric_block(
    oos_returns: &[f64],
    weights: ArrayView2<'_, f64>,
    drifted: ArrayView2<'_, f64>,
    tau: f64,
    eta: f64,
) -> Result<MetricBlock> {
    let (ap, sp) = active_short_positions(weights, eta);
    Ok(MetricBlock {
        es: es(oos_returns, tau)?,
        sd: sd(oos_returns)?,
        sr: sharpe(oos_returns)?,
        to: turnover(weights, drifted)?,
        ap,
        sp,
        tau,
        eta,
    })
}

/// Which pairwise equality test to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LwKind {
    Variance,
    Sharpe,
}

/// Bootstrap test configuration. Defaults: 4999 draws, circular blocks of
/// length 5, HAC studentization with a Parzen kernel whose bandwidth
/// matches the block length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LwConfig {
    pub draws: usize,
    pub block_len: usize,
    pub hac_bandwidth: usize,
    pub seed: u64,
    #[serde(skip)]
    pub threads: Threads,
}

impl Default for LwConfig {
    fn default() -> Self {
        Self {
            draws: 4999,
            block_len: 5,
            hac_bandwidth: 5,
            seed: 0,
            threads: Threads::Auto,
        }
    }
}

/// Outcome of a pairwise bootstrap test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LwTestResult {
    /// HAC-studentized statistic on the original pair.
    pub statistic: f64,
    pub p_value: f64,
    pub bootstrap_draws: usize,
    pub block_length: usize,
    pub kind: LwKind,
}

/// Two-sided bootstrap test of equal variances (difference of
/// log-variances, studentized circular-block bootstrap).
pub fn lw_variance_test(r1: &[f64], r2: &[f64], cfg: &LwConfig) -> Result<LwTestResult> {
    lw_test(LwKind::Variance, r1, r2, cfg)
}

/// Two-sided bootstrap test of equal Sharpe ratios.
pub fn lw_sharpe_test(r1: &[f64], r2: &[f64], cfg: &LwConfig) -> Result<LwTestResult> {
    lw_test(LwKind::Sharpe, r1, r2, cfg)
}

/// Moments computed with sorted accumulation, so that two series with the
/// same values in different order produce bit-identical mean and variance
/// (the variance statistic must be *exactly* permutation-invariant).
fn invariant_moments(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mut values = series.to_vec();
    let mean = sorted_sum(&mut values) / n;
    let mut sq: Vec<f64> = series.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = sorted_sum(&mut sq) / (n - 1.0);
    (mean, variance)
}

fn parzen(x: f64) -> f64 {
    let x = x.abs();
    if x <= 0.5 {
        1.0 - 6.0 * x * x + 6.0 * x * x * x
    } else if x <= 1.0 {
        2.0 * (1.0 - x).powi(3)
    } else {
        0.0
    }
}

/// Statistic and its HAC standard error on a paired sample.
fn statistic_and_se(kind: LwKind, r1: &[f64], r2: &[f64], bandwidth: usize) -> (f64, f64) {
    let n = r1.len();
    let (m1, v1) = invariant_moments(r1);
    let (m2, v2) = invariant_moments(r2);
    let (theta, psi): (f64, Vec<f64>) = match kind {
        LwKind::Variance => {
            let theta = v1.ln() - v2.ln();
            let psi = (0..n)
                .map(|t| {
                    let d1 = r1[t] - m1;
                    let d2 = r2[t] - m2;
                    (d1 * d1 - v1) / v1 - (d2 * d2 - v2) / v2
                })
                .collect();
            (theta, psi)
        }
        LwKind::Sharpe => {
            let s1 = v1.sqrt();
            let s2 = v2.sqrt();
            let theta = m1 / s1 - m2 / s2;
            let psi = (0..n)
                .map(|t| {
                    let d1 = r1[t] - m1;
                    let d2 = r2[t] - m2;
                    let g1 = d1 / s1 - m1 * (d1 * d1 - v1) / (2.0 * s1 * v1);
                    let g2 = d2 / s2 - m2 * (d2 * d2 - v2) / (2.0 * s2 * v2);
                    g1 - g2
                })
                .collect();
            (theta, psi)
        }
    };
    // Parzen lag window over the influence series.
    let nf = n as f64;
    let mut s = psi.iter().map(|p| p * p).sum::<f64>() / nf;
    let l = bandwidth.min(n - 1);
    for lag in 1..=l {
        let k = parzen(lag as f64 / (l as f64 + 1.0));
        let gamma = (0..n - lag).map(|t| psi[t] * psi[t + lag]).sum::<f64>() / nf;
        s += 2.0 * k * gamma;
    }
    let se = (s.max(0.0) / nf).sqrt();
    (theta, se)
}

fn studentize(theta: f64, se: f64) -> f64 {
    if se > 0.0 {
        theta / se
    } else {
        0.0
    }
}

fn lw_test(kind: LwKind, r1: &[f64], r2: &[f64], cfg: &LwConfig) -> Result<LwTestResult> {
    let n = r1.len();
    if n != r2.len() {
        return Err(Error::Validation(format!(
            "paired series differ in length: {n} vs {}",
            r2.len()
        )));
    }
    if n < 50 {
        return Err(Error::Data(format!(
            "pairwise tests need at least 50 paired observations, got {n}"
        )));
    }
    if cfg.draws == 0 || cfg.block_len == 0 {
        return Err(Error::Validation("bootstrap draws and block length must be positive".into()));
    }
    let (_, v1) = invariant_moments(r1);
    let (_, v2) = invariant_moments(r2);
    if v1 <= 0.0 || v2 <= 0.0 {
        return Err(Error::Numerical(
            "constant series: the test statistic is undefined".into(),
        ));
    }

    let (theta_hat, se_hat) = statistic_and_se(kind, r1, r2, cfg.hac_bandwidth);
    let t_hat = studentize(theta_hat, se_hat);

    let block = cfg.block_len.min(n);
    let exceed: Vec<bool> = map_indexed(cfg.draws, cfg.threads, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(
            cfg.seed,
            &[stream::BOOTSTRAP, b as u64],
        ));
        let mut s1 = Vec::with_capacity(n);
        let mut s2 = Vec::with_capacity(n);
        while s1.len() < n {
            let start = rng.gen_range(0..n);
            for k in 0..block {
                if s1.len() == n {
                    break;
                }
                let idx = (start + k) % n;
                s1.push(r1[idx]);
                s2.push(r2[idx]);
            }
        }
        let (theta_b, se_b) = statistic_and_se(kind, &s1, &s2, cfg.hac_bandwidth);
        studentize(theta_b - theta_hat, se_b).abs() >= t_hat.abs()
    });
    let count = exceed.iter().filter(|e| **e).count();
    let p_value = (count + 1) as f64 / (cfg.draws + 1) as f64;

    Ok(LwTestResult {
        statistic: t_hat,
        p_value,
        bootstrap_draws: cfg.draws,
        block_length: cfg.block_len,
        kind,
    })
}
