//! Primal-dual interior-point engine for quantile regression.
//!
//! The fit `min_b sum_i rho_tau(y_i - x_i'b)` is a linear program. We solve
//! its bounded dual
//!
//! ```text
//!     min -y'a   s.t.   X'a = (1 - tau) X'1,   0 <= a <= 1,
//! ```
//!
//! with a Mehrotra predictor-corrector method. The multipliers on the
//! equality constraints are (minus) the regression coefficients, so one
//! solve yields both primal and dual solutions. Each iteration reduces to
//! a Cholesky factorization of the (p+1)x(p+1) matrix `X' D X`, which keeps
//! the cost linear in the number of observations.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub(crate) struct IpmSolution {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const STEP_DAMPING: f64 = 0.99995;

/// Solve the quantile-regression LP for a design matrix `x` (n rows,
/// m columns, intercept included as a column) at level `tau`.
pub(crate) fn solve_qr_lp(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<IpmSolution> {
    let (n, m) = x.dim();
    debug_assert_eq!(n, y.len());
    if n == 0 || m == 0 {
        return Err(Error::Validation("empty design in interior-point solve".into()));
    }

    let c: Vec<f64> = y.iter().map(|v| -v).collect();
    // b = (1 - tau) X'1
    let mut b = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            b[j] += (1.0 - tau) * x[[i, j]];
        }
    }

    // Strictly interior, exactly feasible start.
    let mut a = vec![1.0 - tau; n];
    let mut s = vec![tau; n];
    let mut lambda = vec![0.0; m];
    let eps0 = {
        let mean_abs = c.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        (0.1 * mean_abs).max(0.1)
    };
    let mut z: Vec<f64> = c.iter().map(|&ci| ci.max(0.0) + eps0).collect();
    let mut w: Vec<f64> = c.iter().map(|&ci| (-ci).max(0.0) + eps0).collect();

    let mut r_primal = vec![0.0; m];
    let mut r_dual = vec![0.0; n];
    let mut r_bound = vec![0.0; n];
    let b_scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let c_scale = 1.0 + c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..max_iter {
        iterations = iter + 1;

        // Residuals.
        let xa = xt_vec(x, &a); // X'a
        for j in 0..m {
            r_primal[j] = b[j] - xa[j];
        }
        let xl = x_vec(x, &lambda); // X lambda
        for i in 0..n {
            r_dual[i] = c[i] - xl[i] - z[i] + w[i];
            r_bound[i] = 1.0 - a[i] - s[i];
        }
        let gap: f64 = dot(&a, &z) + dot(&s, &w);
        let obj: f64 = dot(&c, &a);

        let prim_ok = inf_norm(&r_primal) <= tol * b_scale;
        let dual_ok = inf_norm(&r_dual) <= tol * c_scale;
        let gap_ok = gap <= tol * (1.0 + obj.abs());
        if prim_ok && dual_ok && gap_ok {
            converged = true;
            break;
        }

        let mu = gap / (2.0 * n as f64);

        // Diagonal scaling for the normal equations.
        let d_inv: Vec<f64> = (0..n).map(|i| 1.0 / (z[i] / a[i] + w[i] / s[i])).collect();

        // Affine (predictor) direction.
        let rhs_aff: Vec<f64> = (0..n)
            .map(|i| r_dual[i] + z[i] - w[i] - (w[i] / s[i]) * r_bound[i])
            .collect();
        let normal = normal_matrix(x, &d_inv);
        let chol = Cholesky::factor(normal)?;
        let (_dl_aff, da_aff) = solve_direction(x, &d_inv, &chol, &r_primal, &rhs_aff);
        let ds_aff: Vec<f64> = (0..n).map(|i| r_bound[i] - da_aff[i]).collect();
        let dz_aff: Vec<f64> = (0..n)
            .map(|i| (-a[i] * z[i] - z[i] * da_aff[i]) / a[i])
            .collect();
        let dw_aff: Vec<f64> = (0..n)
            .map(|i| (-s[i] * w[i] - w[i] * ds_aff[i]) / s[i])
            .collect();

        let alpha_p_aff = max_step(&a, &da_aff).min(max_step(&s, &ds_aff));
        let alpha_d_aff = max_step(&z, &dz_aff).min(max_step(&w, &dw_aff));
        let mut gap_aff = 0.0;
        for i in 0..n {
            gap_aff += (a[i] + alpha_p_aff * da_aff[i]) * (z[i] + alpha_d_aff * dz_aff[i]);
            gap_aff += (s[i] + alpha_p_aff * ds_aff[i]) * (w[i] + alpha_d_aff * dw_aff[i]);
        }
        let mu_aff = gap_aff / (2.0 * n as f64);
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // Corrector direction with centering.
        let rhs_cor: Vec<f64> = (0..n)
            .map(|i| {
                let target_az = sigma * mu - da_aff[i] * dz_aff[i];
                let target_sw = sigma * mu - ds_aff[i] * dw_aff[i];
                r_dual[i] + (z[i] * a[i] - target_az) / a[i]
                    - (s[i] * w[i] - target_sw) / s[i]
                    - (w[i] / s[i]) * r_bound[i]
            })
            .collect();
        let (dl, da) = solve_direction(x, &d_inv, &chol, &r_primal, &rhs_cor);
        let ds: Vec<f64> = (0..n).map(|i| r_bound[i] - da[i]).collect();
        let dz: Vec<f64> = (0..n)
            .map(|i| {
                let target = sigma * mu - da_aff[i] * dz_aff[i];
                (target - a[i] * z[i] - z[i] * da[i]) / a[i]
            })
            .collect();
        let dw: Vec<f64> = (0..n)
            .map(|i| {
                let target = sigma * mu - ds_aff[i] * dw_aff[i];
                (target - s[i] * w[i] - w[i] * ds[i]) / s[i]
            })
            .collect();

        let alpha_p = (STEP_DAMPING * max_step(&a, &da).min(max_step(&s, &ds))).min(1.0);
        let alpha_d = (STEP_DAMPING * max_step(&z, &dz).min(max_step(&w, &dw))).min(1.0);

        for i in 0..n {
            a[i] += alpha_p * da[i];
            s[i] += alpha_p * ds[i];
            z[i] += alpha_d * dz[i];
            w[i] += alpha_d * dw[i];
        }
        for j in 0..m {
            lambda[j] += alpha_d * dl[j];
        }
    }

    let beta = lambda.iter().map(|v| -v).collect();
    Ok(IpmSolution {
        beta,
        iterations,
        converged,
    })
}

/// Largest step in [0, 1] keeping `v + alpha dv` strictly positive.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut alpha = 1.0f64;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            alpha = alpha.min(-v[i] / dv[i]);
        }
    }
    alpha
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// X'v for v of length n.
fn xt_vec(x: ArrayView2<'_, f64>, v: &[f64]) -> Vec<f64> {
    let (n, m) = x.dim();
    let mut out = vec![0.0; m];
    for i in 0..n {
        let vi = v[i];
        for j in 0..m {
            out[j] += x[[i, j]] * vi;
        }
    }
    out
}

/// X v for v of length m.
fn x_vec(x: ArrayView2<'_, f64>, v: &[f64]) -> Vec<f64> {
    let (n, m) = x.dim();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..m {
            acc += x[[i, j]] * v[j];
        }
        out[i] = acc;
    }
    out
}

/// X' diag(d_inv) X.
fn normal_matrix(x: ArrayView2<'_, f64>, d_inv: &[f64]) -> Array2<f64> {
    let (n, m) = x.dim();
    let mut scaled = x.to_owned();
    for i in 0..n {
        let di = d_inv[i];
        for j in 0..m {
            scaled[[i, j]] *= di;
        }
    }
    let mut out = Array2::zeros((m, m));
    ndarray::linalg::general_mat_mul(1.0, &x.t(), &scaled.view(), 0.0, &mut out);
    out
}

/// Solve the Newton system given the factored normal matrix:
/// returns (d_lambda, d_a).
fn solve_direction(
    x: ArrayView2<'_, f64>,
    d_inv: &[f64],
    chol: &Cholesky,
    r_primal: &[f64],
    rhs: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = d_inv.len();
    // d_lambda solves (X' D^-1 X) d_lambda = r_primal + X' D^-1 rhs
    let scaled_rhs: Vec<f64> = (0..n).map(|i| d_inv[i] * rhs[i]).collect();
    let mut sys_rhs = xt_vec(x, &scaled_rhs);
    for (r, rp) in sys_rhs.iter_mut().zip(r_primal) {
        *r += rp;
    }
    let dl = chol.solve(&sys_rhs);
    // d_a = D^-1 (X d_lambda - rhs)
    let xdl = x_vec(x, &dl);
    let da: Vec<f64> = (0..n).map(|i| d_inv[i] * (xdl[i] - rhs[i])).collect();
    (dl, da)
}

/// Dense Cholesky with escalating ridge fallback for degenerate designs,
/// so rank-deficient LPs still return an optimal (analytic-center) point.
struct Cholesky {
    l: Array2<f64>,
    dim: usize,
}

impl Cholesky {
    fn factor(mut m: Array2<f64>) -> Result<Self> {
        let dim = m.nrows();
        let mean_diag = (0..dim).map(|i| m[[i, i]].abs()).sum::<f64>() / dim as f64;
        let mut ridge = 0.0;
        for attempt in 0..6 {
            if attempt > 0 {
                ridge = if ridge == 0.0 {
                    1e-12 * mean_diag.max(1.0)
                } else {
                    ridge * 1e3
                };
                for i in 0..dim {
                    m[[i, i]] += ridge;
                }
            }
            if let Some(l) = Self::try_factor(&m, dim) {
                return Ok(Self { l, dim });
            }
        }
        Err(Error::Solver(
            "normal equations not positive definite after regularization".into(),
        ))
    }

    fn try_factor(m: &Array2<f64>, dim: usize) -> Option<Array2<f64>> {
        let mut l = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..=i {
                let mut sum = m[[i, j]];
                for k in 0..j {
                    sum -= l[[i, k]] * l[[j, k]];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return None;
                    }
                    l[[i, i]] = sum.sqrt();
                } else {
                    l[[i, j]] = sum / l[[j, j]];
                }
            }
        }
        Some(l)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let dim = self.dim;
        let mut y = vec![0.0; dim];
        for i in 0..dim {
            let mut sum = rhs[i];
            for k in 0..i {
                sum -= self.l[[i, k]] * y[k];
            }
            y[i] = sum / self.l[[i, i]];
        }
        let mut out = vec![0.0; dim];
        for i in (0..dim).rev() {
            let mut sum = y[i];
            for k in (i + 1)..dim {
                sum -= self.l[[k, i]] * out[k];
            }
            out[i] = sum / self.l[[i, i]];
        }
        out
    }
}
