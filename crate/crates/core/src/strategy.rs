//! One estimation window to one weight vector: reference-asset choice,
//! design transform, penalized fit, tuning, optional post-penalization
//! refit, and budget-constrained weight recovery.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::seeds;
use crate::solver::{
    fit_qr, fit_qr_nonconvex, fit_qr_weighted_l1, PenaltyKind, PenaltySpec, QuantileFit,
};
use crate::stats::sample_std;
use crate::tuning::{
    bch_lambda, bic_score, kfold_cv, lambda_grid, lasso_scale_weights, BchParams, BicParams,
    BicScore, CvParams, CvPenalty,
};

/// Investment-rule labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyLabel {
    Lbch,
    Lcv5,
    Plbch,
    Plcv5,
    Plbic,
    Scv5,
    Pscv5,
    Mcv5,
    Pmcv5,
    Ew,
}

impl StrategyLabel {
    pub const ALL: [StrategyLabel; 10] = [
        StrategyLabel::Lbch,
        StrategyLabel::Lcv5,
        StrategyLabel::Plbch,
        StrategyLabel::Plcv5,
        StrategyLabel::Plbic,
        StrategyLabel::Scv5,
        StrategyLabel::Pscv5,
        StrategyLabel::Mcv5,
        StrategyLabel::Pmcv5,
        StrategyLabel::Ew,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyLabel::Lbch => "LBCH",
            StrategyLabel::Lcv5 => "LCV5",
            StrategyLabel::Plbch => "PLBCH",
            StrategyLabel::Plcv5 => "PLCV5",
            StrategyLabel::Plbic => "PLBIC",
            StrategyLabel::Scv5 => "SCV5",
            StrategyLabel::Pscv5 => "PSCV5",
            StrategyLabel::Mcv5 => "MCV5",
            StrategyLabel::Pmcv5 => "PMCV5",
            StrategyLabel::Ew => "EW",
        }
    }
}

impl std::fmt::Display for StrategyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StrategyLabel::ALL
            .iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::Validation(format!("unknown strategy label '{s}'")))
    }
}

/// How the regularization strength is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Bch,
    Cv,
    Bic,
    None,
}

/// Shared hyperparameters; defaults mirror the empirical settings
/// (tau 0.05, eta 1e-5, B=1000, c=2, 1-beta=0.9, K=5, 100-point grid,
/// SCAD a=3.7, MCP a=3, C_T = log T).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams {
    pub tau: f64,
    pub eta: f64,
    pub scad_a: f64,
    pub mcp_a: f64,
    pub bch_sims: usize,
    pub bch_multiplier: f64,
    pub bch_tail: f64,
    pub cv_folds: usize,
    pub grid_size: usize,
    pub grid_floor: f64,
    /// `None` selects `ln T` per window.
    pub bic_complexity: Option<f64>,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            tau: 0.05,
            eta: 1e-5,
            scad_a: 3.7,
            mcp_a: 3.0,
            bch_sims: 1000,
            bch_multiplier: 2.0,
            bch_tail: 0.1,
            cv_folds: 5,
            grid_size: 100,
            grid_floor: 1e-4,
            bic_complexity: None,
        }
    }
}

/// A fully resolved strategy: one row of the taxonomy plus hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategySpec {
    pub label: StrategyLabel,
    pub penalty: PenaltyKind,
    pub selector: SelectorKind,
    pub post_refit: bool,
    pub params: HyperParams,
}

impl StrategySpec {
    pub fn from_label(label: StrategyLabel, params: &HyperParams) -> Self {
        use PenaltyKind::*;
        use SelectorKind as Sel;
        use StrategyLabel::*;
        let (penalty, selector, post_refit) = match label {
            Lbch => (Lasso, Sel::Bch, false),
            Plbch => (Lasso, Sel::Bch, true),
            Lcv5 => (Lasso, Sel::Cv, false),
            Plcv5 => (Lasso, Sel::Cv, true),
            Plbic => (Lasso, Sel::Bic, true),
            Scv5 => (Scad, Sel::Cv, false),
            Pscv5 => (Scad, Sel::Cv, true),
            Mcv5 => (Mcp, Sel::Cv, false),
            Pmcv5 => (Mcp, Sel::Cv, true),
            Ew => (None, Sel::None, false),
        };
        StrategySpec {
            label,
            penalty,
            selector,
            post_refit,
            params: params.clone(),
        }
    }

    /// Reject combinations outside the taxonomy.
    pub fn validate(&self) -> Result<()> {
        let canonical = StrategySpec::from_label(self.label, &self.params);
        if self.penalty != canonical.penalty
            || self.selector != canonical.selector
            || self.post_refit != canonical.post_refit
        {
            return Err(Error::Validation(format!(
                "strategy {} must use penalty {:?}, selector {:?}, post_refit {}",
                self.label, canonical.penalty, canonical.selector, canonical.post_refit
            )));
        }
        if !(self.params.tau > 0.0 && self.params.tau < 1.0) {
            return Err(Error::Validation("tau must lie in (0, 1)".into()));
        }
        if self.params.eta < 0.0 {
            return Err(Error::Validation("eta must be nonnegative".into()));
        }
        Ok(())
    }

    fn concavity(&self) -> f64 {
        match self.penalty {
            PenaltyKind::Scad => self.params.scad_a,
            PenaltyKind::Mcp => self.params.mcp_a,
            _ => f64::NAN,
        }
    }
}

/// Response and regressors for one window given a reference asset:
/// `y_t = r_{s,t}`, column for asset j is `r_{s,t} - r_{j,t}`.
#[derive(Debug, Clone)]
pub struct DesignPair {
    pub y: Vec<f64>,
    pub x: Array2<f64>,
    /// Regressor column -> original asset index (bijection onto the
    /// non-reference assets, ascending).
    pub column_map: Vec<usize>,
    pub reference: usize,
}

/// Budget-constrained weight vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub weights: Vec<f64>,
    /// Reference asset slot; `None` for the equally weighted rule.
    pub reference: Option<usize>,
    /// Count of |w_j| > eta over all slots.
    pub support_size: usize,
}

/// Per-window diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowDiagnostics {
    pub window_index: usize,
    pub reference: Option<usize>,
    pub lambda: Option<f64>,
    pub support_size: usize,
    pub solver_iterations: usize,
    pub converged: bool,
    pub reference_weight: f64,
    pub runtime_ms: f64,
}

/// Pick the asset with the lowest in-sample expected shortfall; ties go to
/// the lowest index.
pub fn select_reference_asset(window: ArrayView2<'_, f64>, tau: f64) -> Result<usize> {
    let (t_len, n) = window.dim();
    if (t_len as f64) * tau < 1.0 {
        return Err(Error::Data(format!(
            "window of {t_len} weeks has no tail observation at tau {tau}"
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for j in 0..n {
        let col: Vec<f64> = window.column(j).to_vec();
        let risk = metrics::es(&col, tau)?;
        if best.map(|(_, b)| risk < b).unwrap_or(true) {
            best = Some((j, risk));
        }
    }
    Ok(best.expect("at least one asset").0)
}

/// Build the regression variables for reference asset `s`.
pub fn build_design(window: ArrayView2<'_, f64>, s: usize) -> DesignPair {
    let (t_len, n) = window.dim();
    debug_assert!(s < n);
    let y: Vec<f64> = window.column(s).to_vec();
    let column_map: Vec<usize> = (0..n).filter(|&j| j != s).collect();
    let mut x = Array2::zeros((t_len, n - 1));
    for (c, &j) in column_map.iter().enumerate() {
        for t in 0..t_len {
            x[[t, c]] = y[t] - window[[t, j]];
        }
    }
    DesignPair {
        y,
        x,
        column_map,
        reference: s,
    }
}

/// Map regressor coefficients back to asset slots; the reference asset
/// takes the budget complement `1 - sum_j w_j`.
pub fn recover_weights(fit: &QuantileFit, design: &DesignPair, n: usize, eta: f64) -> PortfolioWeights {
    let mut weights = vec![0.0; n];
    for (c, &j) in design.column_map.iter().enumerate() {
        weights[j] = fit.coefficients[c];
    }
    let others: f64 = fit.coefficients.iter().sum();
    weights[design.reference] = 1.0 - others;
    let support_size = weights.iter().filter(|w| w.abs() > eta).count();
    PortfolioWeights {
        weights,
        reference: Some(design.reference),
        support_size,
    }
}

/// Unpenalized refit on the first stage's active set; discarded
/// coefficients are exactly zero in the returned fit.
pub fn post_refit(
    design: &DesignPair,
    first_stage: &QuantileFit,
    eta: f64,
    tau: f64,
) -> Result<QuantileFit> {
    let selected = first_stage.support_with(eta);
    let p = design.x.ncols();
    if selected.is_empty() {
        let mut fit = fit_qr(&design.y, Array2::zeros((design.y.len(), 0)).view(), tau)?;
        fit.coefficients = vec![0.0; p];
        return Ok(fit);
    }
    let x_sel = design.x.select(ndarray::Axis(1), &selected);
    let refit = fit_qr(&design.y, x_sel.view(), tau)?;
    let mut coefficients = vec![0.0; p];
    for (k, &c) in selected.iter().enumerate() {
        coefficients[c] = refit.coefficients[k];
    }
    let support = (0..p)
        .filter(|j| coefficients[*j].abs() > crate::solver::DEFAULT_SUPPORT_ETA)
        .collect();
    Ok(QuantileFit {
        coefficients,
        support,
        ..refit
    })
}

/// Standardized copy of the design for the folded-concave penalties.
fn standardized(x: &Array2<f64>) -> Result<Array2<f64>> {
    let (t_len, p) = x.dim();
    let mut out = x.clone();
    for j in 0..p {
        let col: Vec<f64> = x.column(j).to_vec();
        let sd = sample_std(&col);
        if sd <= 0.0 || !sd.is_finite() {
            return Err(Error::Validation(format!(
                "column {j} has zero sample standard deviation"
            )));
        }
        for t in 0..t_len {
            out[[t, j]] /= sd;
        }
    }
    Ok(out)
}

/// Run one strategy on one estimation window.
///
/// `window_seed` feeds every randomized component (BCH draws, CV folds);
/// derive it from the master seed, window index, and strategy label so the
/// result is reproducible and schedule-independent.
pub fn run_strategy_window(
    window: ArrayView2<'_, f64>,
    spec: &StrategySpec,
    window_seed: u64,
) -> Result<(PortfolioWeights, WindowDiagnostics)> {
    spec.validate()?;
    let started = Instant::now();
    let n = window.ncols();
    let tau = spec.params.tau;
    let eta = spec.params.eta;

    if spec.label == StrategyLabel::Ew {
        let weights = vec![1.0 / n as f64; n];
        let support_size = weights.iter().filter(|w| w.abs() > eta).count();
        let diag = WindowDiagnostics {
            window_index: 0,
            reference: None,
            lambda: None,
            support_size,
            solver_iterations: 0,
            converged: true,
            reference_weight: f64::NAN,
            runtime_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        return Ok((
            PortfolioWeights {
                weights,
                reference: None,
                support_size,
            },
            diag,
        ));
    }

    let s = select_reference_asset(window, tau)?;
    let design = build_design(window, s);
    let p = design.x.ncols();

    let (fit, lambda) = match spec.selector {
        SelectorKind::Bch => {
            let bch = BchParams {
                n_sims: spec.params.bch_sims,
                multiplier: spec.params.bch_multiplier,
                tail_beta: spec.params.bch_tail,
                seed: window_seed,
            };
            let lambda = bch_lambda(design.x.view(), tau, &bch)?;
            let weights = lasso_scale_weights(design.x.view(), tau)?;
            let fit = fit_qr_weighted_l1(&design.y, design.x.view(), tau, lambda, &weights)?;
            (fit, Some(lambda))
        }
        SelectorKind::Cv => {
            let (grid, cv_penalty) = match spec.penalty {
                PenaltyKind::Lasso => {
                    let weights = lasso_scale_weights(design.x.view(), tau)?;
                    let grid = lambda_grid(
                        &design.y,
                        design.x.view(),
                        tau,
                        spec.params.grid_size,
                        &weights,
                        spec.params.grid_floor,
                    )?;
                    (grid, CvPenalty::Lasso)
                }
                PenaltyKind::Scad | PenaltyKind::Mcp => {
                    let scaled = standardized(&design.x)?;
                    let grid = lambda_grid(
                        &design.y,
                        scaled.view(),
                        tau,
                        spec.params.grid_size,
                        &vec![1.0; p],
                        spec.params.grid_floor,
                    )?;
                    let pen = if spec.penalty == PenaltyKind::Scad {
                        CvPenalty::Scad {
                            concavity: spec.concavity(),
                        }
                    } else {
                        CvPenalty::Mcp {
                            concavity: spec.concavity(),
                        }
                    };
                    (grid, pen)
                }
                _ => unreachable!("validated taxonomy"),
            };
            let cv = CvParams {
                folds: spec.params.cv_folds,
                seed: window_seed,
                grid,
            };
            let selection = kfold_cv(&design.y, design.x.view(), tau, cv_penalty, &cv)?;
            let lambda = selection.lambda;
            let fit = match spec.penalty {
                PenaltyKind::Lasso => {
                    let weights = lasso_scale_weights(design.x.view(), tau)?;
                    fit_qr_weighted_l1(&design.y, design.x.view(), tau, lambda, &weights)?
                }
                PenaltyKind::Scad => {
                    let pen = PenaltySpec::scad(lambda, spec.concavity(), p);
                    fit_qr_nonconvex(&design.y, design.x.view(), tau, &pen)?
                }
                PenaltyKind::Mcp => {
                    let pen = PenaltySpec::mcp(lambda, spec.concavity(), p);
                    fit_qr_nonconvex(&design.y, design.x.view(), tau, &pen)?
                }
                _ => unreachable!("validated taxonomy"),
            };
            (fit, Some(lambda))
        }
        SelectorKind::Bic => {
            let (fit, lambda) = bic_search(&design, spec)?;
            (fit, Some(lambda))
        }
        SelectorKind::None => unreachable!("EW handled above"),
    };

    let final_fit = if spec.post_refit && spec.selector != SelectorKind::Bic {
        post_refit(&design, &fit, eta, tau)?
    } else {
        fit
    };

    let weights = recover_weights(&final_fit, &design, n, eta);
    let diag = WindowDiagnostics {
        window_index: 0,
        reference: Some(s),
        lambda,
        support_size: weights.support_size,
        solver_iterations: final_fit.iterations,
        converged: final_fit.converged,
        reference_weight: weights.weights[s],
        runtime_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok((weights, diag))
}

/// Grid search of the BIC over post-refit supports: fit the L1 path,
/// refit each distinct active set, and keep the lowest score.
fn bic_search(design: &DesignPair, spec: &StrategySpec) -> Result<(QuantileFit, f64)> {
    let tau = spec.params.tau;
    let eta = spec.params.eta;
    let t_len = design.y.len();
    let weights = lasso_scale_weights(design.x.view(), tau)?;
    let grid = lambda_grid(
        &design.y,
        design.x.view(),
        tau,
        spec.params.grid_size,
        &weights,
        spec.params.grid_floor,
    )?;
    let bic = BicParams {
        complexity: spec
            .params
            .bic_complexity
            .unwrap_or_else(|| (t_len as f64).ln()),
        eta,
    };

    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut best: Option<(BicScore, QuantileFit, f64)> = None;
    for &lambda in &grid {
        let stage1 = fit_qr_weighted_l1(&design.y, design.x.view(), tau, lambda, &weights)?;
        let selected = stage1.support_with(eta);
        if !seen.insert(selected.clone()) {
            continue;
        }
        // Degenerate supports (too large to refit) are skipped like any
        // other failed grid point.
        if selected.len() + 1 > t_len {
            continue;
        }
        let refit = post_refit(design, &stage1, eta, tau)?;
        let x_sel = design.x.select(ndarray::Axis(1), &selected);
        let sel_fit = QuantileFit {
            coefficients: selected.iter().map(|&j| refit.coefficients[j]).collect(),
            ..refit.clone()
        };
        let out = bic_score(&design.y, x_sel.view(), tau, &sel_fit, &bic, t_len)?;
        let better = match &best {
            None => true,
            Some((score, _, _)) => out.score.better_than(score),
        };
        if better {
            best = Some((out.score, refit, lambda));
        }
    }
    best.map(|(_, fit, lambda)| (fit, lambda))
        .ok_or_else(|| Error::Solver("no scoreable support along the BIC path".into()))
}

/// Window seed derivation shared by the backtest driver and tests.
pub fn window_seed(master: u64, window_index: usize, label: StrategyLabel) -> u64 {
    seeds::derive(
        master ^ seeds::label_hash(label.as_str()),
        &[window_index as u64],
    )
}

#[cfg(test)]
mod tests;
