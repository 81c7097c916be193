//! Minimum-expected-shortfall portfolio construction from penalized
//! quantile regression, with rolling-window out-of-sample evaluation.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`data`] loads daily return CSVs and compounds them to weekly panels.
//! 2. [`solver`] fits unpenalized, L1-, SCAD-, and MCP-penalized quantile
//!    regressions through a primal-dual interior-point method.
//! 3. [`tuning`] selects the regularization strength by simulation (BCH),
//!    quantile-regression BIC, or K-fold cross-validation.
//! 4. [`strategy`] maps one estimation window to budget-constrained
//!    portfolio weights for each investment rule.
//! 5. [`backtest`] rolls the strategies through the panel one week at a
//!    time; [`metrics`] scores the result and runs pairwise bootstrap
//!    tests; [`report`] serializes everything to CSV/NDJSON.
//! 6. [`runner`] orchestrates full multi-strategy runs behind the CLI.
//!
//! With the default `parallel` feature, windows, grid points, folds, and
//! bootstrap draws run on rayon; per-item seed derivation keeps results
//! bit-identical at any thread count (see [`seeds`]).

pub mod backtest;
pub mod data;
pub mod error;
pub mod metrics;
pub mod parallel;
pub mod report;
pub mod runner;
pub mod seeds;
pub mod solver;
pub mod stats;
pub mod strategy;
pub mod tuning;

pub use error::{Error, Result};
