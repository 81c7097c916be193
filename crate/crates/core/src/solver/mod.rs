//! Quantile-regression solvers: unpenalized, weighted-L1 (LASSO), and
//! folded-concave (SCAD/MCP via local linear approximation).
//!
//! All fits minimize `(1/T) sum_t rho_tau(y_t - x_t'w - mu)` plus the
//! requested penalty on `w`; the intercept is never penalized. The weighted
//! L1 problem is cast as one unpenalized fit on an augmented design: a pair
//! of pseudo-rows `(0, +k_j e_j)` and `(0, -k_j e_j)` with `k_j = T lambda
//! omega_j` contributes exactly `k_j |w_j|` to the check-loss sum, which is
//! the coefficient-splitting LP in disguise. The augmented LP is solved by
//! the primal-dual interior-point engine in [`ipm`].

mod ipm;
mod penalty;

pub use penalty::{penalty_derivative, penalty_value, PenaltyKind, PenaltySpec};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{sample_std, type1_quantile};

/// Duality-gap tolerance of the interior-point solve.
pub const IPM_TOLERANCE: f64 = 1e-8;
/// Iteration cap of the interior-point solve.
pub const IPM_MAX_ITER: usize = 200;
/// Coefficient magnitude below which a regressor is considered inactive.
pub const DEFAULT_SUPPORT_ETA: f64 = 1e-5;
/// Stopping threshold on the max coefficient change between LLA rounds.
const LLA_TOLERANCE: f64 = 1e-6;
/// Maximum number of LLA rounds for SCAD/MCP fits.
const LLA_MAX_ROUNDS: usize = 20;

/// The asymmetric check loss `u (tau - 1{u < 0})`; nonnegative, minimized
/// over constants by the tau-quantile.
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// Result of one quantile-regression fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Achieved penalized objective, on the `(1/T) sum rho + penalty` scale.
    pub objective: f64,
    /// Active set at [`DEFAULT_SUPPORT_ETA`].
    pub support: Vec<usize>,
    /// Interior-point iterations (summed over LLA rounds for SCAD/MCP).
    pub iterations: usize,
    pub converged: bool,
}

impl QuantileFit {
    /// Active set at a caller-chosen threshold.
    pub fn support_with(&self, eta: f64) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&j| self.coefficients[j].abs() > eta)
            .collect()
    }

    /// Residuals `(y_t - x_t'w) - mu`, in the same evaluation order the fit
    /// itself used, so quantile ties are exact zeros rather than fp dust.
    pub fn residuals(&self, y: &[f64], x: ArrayView2<'_, f64>) -> Vec<f64> {
        let p = self.coefficients.len();
        (0..y.len())
            .map(|i| {
                let mut v = y[i];
                for j in 0..p {
                    v -= x[[i, j]] * self.coefficients[j];
                }
                v - self.intercept
            })
            .collect()
    }

    fn intercept_only(y: &[f64], tau: f64, n_coefs: usize) -> Self {
        let mu = type1_quantile(y, tau);
        let objective =
            y.iter().map(|&v| check_loss(v - mu, tau)).sum::<f64>() / y.len() as f64;
        Self {
            intercept: mu,
            coefficients: vec![0.0; n_coefs],
            objective,
            support: Vec::new(),
            iterations: 0,
            converged: true,
        }
    }
}

fn validate_inputs(y: &[f64], x: ArrayView2<'_, f64>, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Validation(format!(
            "tau must lie strictly inside (0, 1), got {tau}"
        )));
    }
    if y.len() != x.nrows() {
        return Err(Error::Validation(format!(
            "response length {} does not match design rows {}",
            y.len(),
            x.nrows()
        )));
    }
    if y.is_empty() {
        return Err(Error::Validation("empty sample".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in regression input".into()));
    }
    Ok(())
}

/// Unpenalized quantile regression with intercept.
pub fn fit_qr(y: &[f64], x: ArrayView2<'_, f64>, tau: f64) -> Result<QuantileFit> {
    validate_inputs(y, x, tau)?;
    let (t_len, p) = x.dim();
    if t_len < p + 1 {
        return Err(Error::Validation(format!(
            "need at least p+1 = {} observations for an unpenalized fit, got {t_len}",
            p + 1
        )));
    }
    if p == 0 {
        return Ok(QuantileFit::intercept_only(y, tau, 0));
    }
    solve_augmented(y, x, tau, 0.0, &vec![0.0; p])
}

/// Weighted-L1 penalized quantile regression:
/// `(1/T) sum rho_tau + lambda sum_j scale_weights[j] |w_j|`.
pub fn fit_qr_weighted_l1(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    tau: f64,
    lambda: f64,
    scale_weights: &[f64],
) -> Result<QuantileFit> {
    validate_inputs(y, x, tau)?;
    let p = x.ncols();
    if scale_weights.len() != p {
        return Err(Error::Validation(format!(
            "scale_weights length {} does not match {} regressors",
            scale_weights.len(),
            p
        )));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Validation(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if scale_weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::Validation("scale_weights must be nonnegative".into()));
    }
    if lambda == 0.0 {
        return fit_qr(y, x, tau);
    }
    if p == 0 {
        return Ok(QuantileFit::intercept_only(y, tau, 0));
    }
    solve_augmented(y, x, tau, lambda, scale_weights)
}

/// Shared fit path. Builds `[X | 1]` plus penalty pseudo-rows, runs the
/// interior-point solve, re-optimizes the intercept exactly given the
/// slopes, and falls back to the intercept-only candidate whenever that
/// candidate is at least as good (this is what makes an all-zero solution
/// exact rather than merely tiny).
fn solve_augmented(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    tau: f64,
    lambda: f64,
    scale_weights: &[f64],
) -> Result<QuantileFit> {
    let (t_len, p) = x.dim();
    let kappa: Vec<f64> = scale_weights
        .iter()
        .map(|w| t_len as f64 * lambda * w)
        .collect();
    let n_pseudo = 2 * kappa.iter().filter(|k| **k > 0.0).count();

    let n_rows = t_len + n_pseudo;
    let mut design = Array2::zeros((n_rows, p + 1));
    let mut rhs = vec![0.0; n_rows];
    for i in 0..t_len {
        for j in 0..p {
            design[[i, j]] = x[[i, j]];
        }
        design[[i, p]] = 1.0; // intercept column
        rhs[i] = y[i];
    }
    let mut row = t_len;
    for (j, &k) in kappa.iter().enumerate() {
        if k > 0.0 {
            design[[row, j]] = k;
            design[[row + 1, j]] = -k;
            row += 2;
        }
    }

    let sol = ipm::solve_qr_lp(design.view(), &rhs, tau, IPM_TOLERANCE, IPM_MAX_ITER)?;
    let coefficients: Vec<f64> = sol.beta[..p].to_vec();

    // Exact intercept polish: given the slopes, the optimal intercept is a
    // type-1 quantile of the partial residuals. This pins the quantile
    // subgradient condition down to exact zero ties.
    let partial: Vec<f64> = (0..t_len)
        .map(|i| {
            let mut v = y[i];
            for j in 0..p {
                v -= x[[i, j]] * coefficients[j];
            }
            v
        })
        .collect();
    let intercept = type1_quantile(&partial, tau);
    let loss = partial
        .iter()
        .map(|&v| check_loss(v - intercept, tau))
        .sum::<f64>()
        / t_len as f64;
    let penalty: f64 = lambda
        * coefficients
            .iter()
            .zip(scale_weights)
            .map(|(c, w)| w * c.abs())
            .sum::<f64>();
    let objective = loss + penalty;

    let candidate = QuantileFit::intercept_only(y, tau, p);
    if candidate.objective <= objective + 1e-12 * (1.0 + objective.abs()) {
        return Ok(QuantileFit {
            iterations: sol.iterations,
            converged: sol.converged,
            ..candidate
        });
    }

    let mut fit = QuantileFit {
        intercept,
        coefficients,
        objective,
        support: Vec::new(),
        iterations: sol.iterations,
        converged: sol.converged,
    };
    fit.support = fit.support_with(DEFAULT_SUPPORT_ETA);
    Ok(fit)
}

/// SCAD/MCP-penalized quantile regression by local linear approximation.
///
/// Columns are standardized to unit sample standard deviation internally
/// (the penalty applies to standardized coefficients); returned
/// coefficients are rescaled to the original columns. The fit starts from
/// the LASSO solution at the same lambda and iterates weighted-L1
/// subproblems with weights equal to the penalty derivative at the current
/// coefficient magnitudes, keeping the best iterate under the exact
/// folded-concave objective.
pub fn fit_qr_nonconvex(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    tau: f64,
    spec: &PenaltySpec,
) -> Result<QuantileFit> {
    if !matches!(spec.kind, PenaltyKind::Scad | PenaltyKind::Mcp) {
        return Err(Error::Validation(
            "fit_qr_nonconvex requires a SCAD or MCP penalty".into(),
        ));
    }
    spec.validate()?;
    validate_inputs(y, x, tau)?;
    let (t_len, p) = x.dim();
    if p == 0 {
        return Ok(QuantileFit::intercept_only(y, tau, 0));
    }

    let mut col_std = vec![0.0; p];
    let mut scaled = x.to_owned();
    for j in 0..p {
        let col: Vec<f64> = x.column(j).to_vec();
        let sd = sample_std(&col);
        if sd <= 0.0 || !sd.is_finite() {
            return Err(Error::Validation(format!(
                "column {j} has zero sample standard deviation; cannot standardize"
            )));
        }
        col_std[j] = sd;
        for i in 0..t_len {
            scaled[[i, j]] /= sd;
        }
    }

    let exact_objective = |fit: &QuantileFit| -> Result<f64> {
        let loss = (0..t_len)
            .map(|i| {
                let mut v = y[i] - fit.intercept;
                for j in 0..p {
                    v -= scaled[[i, j]] * fit.coefficients[j];
                }
                check_loss(v, tau)
            })
            .sum::<f64>()
            / t_len as f64;
        let mut pen = 0.0;
        for c in &fit.coefficients {
            pen += penalty_value(*c, spec)?;
        }
        Ok(loss + pen)
    };

    let unit = vec![1.0; p];
    let mut current = fit_qr_weighted_l1(y, scaled.view(), tau, spec.lambda, &unit)?;
    let mut total_iterations = current.iterations;
    let mut best = current.clone();
    let mut best_objective = exact_objective(&best)?;
    let mut converged = false;

    for _ in 0..LLA_MAX_ROUNDS {
        let mut weights = vec![0.0; p];
        for j in 0..p {
            weights[j] = penalty_derivative(current.coefficients[j], spec)?;
        }
        let next = fit_qr_weighted_l1(y, scaled.view(), tau, 1.0, &weights)?;
        total_iterations += next.iterations;
        let delta = next
            .coefficients
            .iter()
            .zip(&current.coefficients)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let objective = exact_objective(&next)?;
        if objective <= best_objective {
            best = next.clone();
            best_objective = objective;
        }
        current = next;
        if delta < LLA_TOLERANCE {
            converged = true;
            break;
        }
    }

    let coefficients: Vec<f64> = best
        .coefficients
        .iter()
        .zip(&col_std)
        .map(|(c, sd)| c / sd)
        .collect();
    let mut fit = QuantileFit {
        intercept: best.intercept,
        coefficients,
        objective: best_objective,
        support: Vec::new(),
        iterations: total_iterations,
        converged,
    };
    fit.support = fit.support_with(DEFAULT_SUPPORT_ETA);
    Ok(fit)
}

#[cfg(test)]
mod tests;
