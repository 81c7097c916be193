//! Rolling-window out-of-sample evaluation: estimate weights on each
//! T-week window, apply them to the following week, and assemble return
//! and weight histories.

use chrono::NaiveDate;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::data::ReturnPanel;
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Threads};
use crate::strategy::{run_strategy_window, window_seed, StrategySpec, WindowDiagnostics};

/// Smallest admissible estimation window.
pub const MIN_WINDOW: usize = 20;

/// The window scheme: overlapping windows of length `window`, shifted one
/// week at a time, producing `total - window` out-of-sample returns.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RollingPlan {
    pub window: usize,
    pub total: usize,
}

impl RollingPlan {
    pub fn new(window: usize, total: usize) -> Result<Self> {
        if window < MIN_WINDOW {
            return Err(Error::Validation(format!(
                "window length {window} below the minimum {MIN_WINDOW}"
            )));
        }
        if window >= total {
            return Err(Error::Validation(format!(
                "window length {window} must be shorter than the panel ({total} weeks)"
            )));
        }
        Ok(Self { window, total })
    }

    pub fn n_out_of_sample(&self) -> usize {
        self.total - self.window
    }
}

/// Everything one (strategy, window length) backtest produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub label: String,
    pub window_len: usize,
    pub asset_ids: Vec<String>,
    /// Week-end dates of the out-of-sample returns.
    pub oos_dates: Vec<NaiveDate>,
    /// Rebalance dates: the last estimation week of each window.
    pub rebalance_dates: Vec<NaiveDate>,
    /// Out-of-sample portfolio returns, percent.
    pub oos_returns: Vec<f64>,
    /// Post-rebalance weights, one row per estimation window.
    pub weight_history: Array2<f64>,
    /// Drifted (pre-rebalance) weights, one row fewer.
    pub drifted_weights: Array2<f64>,
    pub diagnostics: Vec<WindowDiagnostics>,
}

/// Buy-and-hold drift of a weight vector over one week of returns
/// (percent): `w_j (1 + r_j/100) / (1 + r_p/100)`.
pub fn drift_weights(w_post: &[f64], next_returns: &[f64]) -> Result<Vec<f64>> {
    if w_post.len() != next_returns.len() {
        return Err(Error::Validation("weight/return length mismatch".into()));
    }
    let r_p: f64 = w_post
        .iter()
        .zip(next_returns)
        .map(|(w, r)| w * r)
        .sum::<f64>();
    let growth = 1.0 + r_p / 100.0;
    if growth <= 0.0 {
        return Err(Error::Numerical(format!(
            "portfolio return of {r_p}% wipes out the wealth; weights cannot drift"
        )));
    }
    Ok(w_post
        .iter()
        .zip(next_returns)
        .map(|(w, r)| w * (1.0 + r / 100.0) / growth)
        .collect())
}

/// Compounded wealth path from percent returns: `W_0 = initial`,
/// `W_{k+1} = W_k (1 + r_k / 100)`.
pub fn wealth_curve(oos_returns: &[f64], initial: f64) -> Vec<f64> {
    let mut curve = Vec::with_capacity(oos_returns.len() + 1);
    curve.push(initial);
    let mut w = initial;
    for r in oos_returns {
        w *= 1.0 + r / 100.0;
        curve.push(w);
    }
    curve
}

/// Run one strategy through the whole panel.
///
/// Window k (0-based) estimates on weeks `[k, k+T)` and is scored on week
/// `k+T`. Windows are independent work items; each gets a seed derived
/// from `(master seed, window index, strategy label)`, so the report is
/// bit-identical at any thread count. Any window failure aborts the run
/// with its index attached.
pub fn roll(
    panel: &ReturnPanel,
    window_len: usize,
    spec: &StrategySpec,
    master_seed: u64,
    threads: Threads,
) -> Result<BacktestReport> {
    let plan = RollingPlan::new(window_len, panel.n_weeks())?;
    let n = panel.n_assets();
    let n_oos = plan.n_out_of_sample();

    let outcomes = map_indexed(n_oos, threads, |k| {
        let window = panel.returns.slice(s![k..k + window_len, ..]);
        let seed = window_seed(master_seed, k, spec.label);
        run_strategy_window(window, spec, seed).map(|(w, mut diag)| {
            diag.window_index = k;
            (w, diag)
        })
    });

    let mut weight_history = Array2::zeros((n_oos, n));
    let mut diagnostics = Vec::with_capacity(n_oos);
    let mut oos_returns = Vec::with_capacity(n_oos);
    let mut oos_dates = Vec::with_capacity(n_oos);
    let mut rebalance_dates = Vec::with_capacity(n_oos);
    for (k, outcome) in outcomes.into_iter().enumerate() {
        let (weights, diag) = outcome.map_err(|e| {
            Error::Solver(format!("window {k} (weeks {}..{}): {e}", k, k + window_len))
        })?;
        for j in 0..n {
            weight_history[[k, j]] = weights.weights[j];
        }
        diagnostics.push(diag);
        let oos_week = k + window_len;
        let r: f64 = (0..n)
            .map(|j| weights.weights[j] * panel.returns[[oos_week, j]])
            .sum();
        oos_returns.push(r);
        oos_dates.push(panel.week_ends[oos_week]);
        rebalance_dates.push(panel.week_ends[oos_week - 1]);
    }

    let mut drifted_weights = Array2::zeros((n_oos.saturating_sub(1), n));
    for k in 1..n_oos {
        let prev: Vec<f64> = (0..n).map(|j| weight_history[[k - 1, j]]).collect();
        let week: Vec<f64> = (0..n)
            .map(|j| panel.returns[[k - 1 + window_len, j]])
            .collect();
        let drifted = drift_weights(&prev, &week)?;
        for j in 0..n {
            drifted_weights[[k - 1, j]] = drifted[j];
        }
    }

    Ok(BacktestReport {
        label: spec.label.to_string(),
        window_len,
        asset_ids: panel.asset_ids.clone(),
        oos_dates,
        rebalance_dates,
        oos_returns,
        weight_history,
        drifted_weights,
        diagnostics,
    })
}
