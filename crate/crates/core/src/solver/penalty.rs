//! Folded-concave penalty functions (SCAD and MCP) and their derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Penalty attached to a quantile-regression fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    Lasso,
    Scad,
    Mcp,
}

impl PenaltyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PenaltyKind::None => "none",
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::Scad => "scad",
            PenaltyKind::Mcp => "mcp",
        }
    }
}

/// Full penalty specification for one fit.
///
/// `scale_weights` carries the per-coefficient factors of the weighted L1
/// term (for the LASSO these are `sigma_j * sqrt(tau (1-tau)) / T`; unit
/// weights otherwise). `concavity` is the SCAD/MCP shape parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub concavity: f64,
    pub scale_weights: Vec<f64>,
}

impl PenaltySpec {
    pub fn lasso(lambda: f64, scale_weights: Vec<f64>) -> Self {
        Self {
            kind: PenaltyKind::Lasso,
            lambda,
            concavity: f64::NAN,
            scale_weights,
        }
    }

    pub fn scad(lambda: f64, concavity: f64, n_coefs: usize) -> Self {
        Self {
            kind: PenaltyKind::Scad,
            lambda,
            concavity,
            scale_weights: vec![1.0; n_coefs],
        }
    }

    pub fn mcp(lambda: f64, concavity: f64, n_coefs: usize) -> Self {
        Self {
            kind: PenaltyKind::Mcp,
            lambda,
            concavity,
            scale_weights: vec![1.0; n_coefs],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::Validation(format!(
                "penalty lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        match self.kind {
            PenaltyKind::Scad if !(self.concavity > 2.0) => Err(Error::Validation(format!(
                "SCAD concavity parameter must exceed 2, got {}",
                self.concavity
            ))),
            PenaltyKind::Mcp if !(self.concavity > 1.0) => Err(Error::Validation(format!(
                "MCP concavity parameter must exceed 1, got {}",
                self.concavity
            ))),
            _ => Ok(()),
        }
    }
}

/// Evaluate the SCAD/MCP penalty at a single coefficient value.
pub fn penalty_value(coef: f64, spec: &PenaltySpec) -> Result<f64> {
    spec.validate()?;
    let t = coef.abs();
    let lambda = spec.lambda;
    let a = spec.concavity;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    match spec.kind {
        PenaltyKind::Scad => Ok(if t < lambda {
            lambda * t
        } else if t <= a * lambda {
            (a * lambda * t - (t * t + lambda * lambda) / 2.0) / (a - 1.0)
        } else {
            (a + 1.0) * lambda * lambda / 2.0
        }),
        PenaltyKind::Mcp => Ok(if t <= a * lambda {
            lambda * (t - t * t / (2.0 * a * lambda))
        } else {
            a * lambda * lambda / 2.0
        }),
        _ => Err(Error::Validation(
            "penalty_value is defined for SCAD and MCP only".into(),
        )),
    }
}

/// Marginal penalty (derivative w.r.t. |coef|), used as the weight of the
/// local linear approximation subproblem.
pub fn penalty_derivative(coef: f64, spec: &PenaltySpec) -> Result<f64> {
    spec.validate()?;
    let t = coef.abs();
    let lambda = spec.lambda;
    let a = spec.concavity;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    match spec.kind {
        PenaltyKind::Scad => Ok(if t <= lambda {
            lambda
        } else if t <= a * lambda {
            (a * lambda - t) / (a - 1.0)
        } else {
            0.0
        }),
        PenaltyKind::Mcp => Ok((lambda - t / a).max(0.0)),
        _ => Err(Error::Validation(
            "penalty_derivative is defined for SCAD and MCP only".into(),
        )),
    }
}
