//! Full-run orchestration behind the CLI: configuration, the
//! (dataset x window x strategy) grid, report emission, the run manifest,
//! and the pairwise-comparison and summary commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::backtest::roll;
use crate::data::{load_daily_csv, to_weekly, CsvLayout, MissingPolicy, ReturnPanel};
use crate::error::{Error, Result};
use crate::metrics::{lw_sharpe_test, lw_variance_test, metric_block, LwConfig, MetricBlock};
use crate::parallel::Threads;
use crate::report::{read_report_dir, write_pvalue_matrix, write_report_dir, write_summary_csv};
use crate::strategy::{HyperParams, StrategyLabel, StrategySpec};

/// One flat key-value run configuration; unknown keys are rejected.
/// Defaults mirror the reference empirical settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Input panels (weekly caches, or raw daily files per `input`).
    pub data: Vec<PathBuf>,
    /// How to interpret `data`: "weekly" cache, or daily "french"/"plain".
    pub input: String,
    pub windows: Vec<usize>,
    pub strategies: Vec<String>,
    pub tau: f64,
    pub eta: f64,
    pub seed: u64,
    pub bch_sims: usize,
    pub bch_multiplier: f64,
    pub bch_tail: f64,
    pub cv_folds: usize,
    pub grid_size: usize,
    pub grid_floor: f64,
    pub scad_a: f64,
    pub mcp_a: f64,
    /// BIC complexity constant; unset means `ln T` per window.
    pub bic_complexity: Option<f64>,
    pub bootstrap_draws: usize,
    pub bootstrap_block_len: usize,
    pub hac_bandwidth: usize,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: Vec::new(),
            input: "weekly".into(),
            windows: vec![100, 200],
            strategies: StrategyLabel::ALL.iter().map(|l| l.to_string()).collect(),
            tau: 0.05,
            eta: 1e-5,
            seed: 0,
            bch_sims: 1000,
            bch_multiplier: 2.0,
            bch_tail: 0.1,
            cv_folds: 5,
            grid_size: 100,
            grid_floor: 1e-4,
            scad_a: 3.7,
            mcp_a: 3.0,
            bic_complexity: None,
            bootstrap_draws: 4999,
            bootstrap_block_len: 5,
            hac_bandwidth: 5,
            threads: 0,
            out: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    /// Parse a flat TOML file, rejecting unknown keys.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("bad configuration: {e}")))
    }

    pub fn hyper_params(&self) -> HyperParams {
        HyperParams {
            tau: self.tau,
            eta: self.eta,
            scad_a: self.scad_a,
            mcp_a: self.mcp_a,
            bch_sims: self.bch_sims,
            bch_multiplier: self.bch_multiplier,
            bch_tail: self.bch_tail,
            cv_folds: self.cv_folds,
            grid_size: self.grid_size,
            grid_floor: self.grid_floor,
            bic_complexity: self.bic_complexity,
        }
    }

    pub fn threads(&self) -> Threads {
        Threads::from_count(self.threads)
    }

    pub fn lw_config(&self) -> LwConfig {
        LwConfig {
            draws: self.bootstrap_draws,
            block_len: self.bootstrap_block_len,
            hac_bandwidth: self.hac_bandwidth,
            seed: self.seed,
            threads: self.threads(),
        }
    }

    fn labels(&self) -> Result<Vec<StrategyLabel>> {
        self.strategies.iter().map(|s| s.parse()).collect()
    }
}

/// Outcome of one (dataset, window, strategy) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub dataset: String,
    pub window: usize,
    pub strategy: String,
    pub status: String,
    pub n_windows: usize,
    pub runtime_s: f64,
}

/// Everything needed to recompute any emitted number: the full config,
/// the code version, documented conventions, and per-cell outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config: RunConfig,
    pub notes: BTreeMap<String, String>,
    pub cells: Vec<CellRecord>,
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Load one configured input as a weekly panel.
pub fn load_panel(path: &Path, input: &str) -> Result<ReturnPanel> {
    match input {
        "weekly" => ReturnPanel::read_csv(path),
        "french" | "plain" => {
            let layout = if input == "french" {
                CsvLayout::French
            } else {
                CsvLayout::Plain
            };
            let daily = load_daily_csv(path, layout)?;
            to_weekly(&daily, MissingPolicy::Fail)
        }
        other => Err(Error::Validation(format!(
            "unknown input kind '{other}' (expected weekly, french, or plain)"
        ))),
    }
}

/// Run the whole configured grid; failures abort only their own cell.
pub fn execute(config: &RunConfig) -> Result<Manifest> {
    if config.data.is_empty() {
        return Err(Error::Validation("no input data configured".into()));
    }
    let labels = config.labels()?;
    let params = config.hyper_params();
    let threads = config.threads();
    std::fs::create_dir_all(&config.out)?;

    let mut cells = Vec::new();
    for data_path in &config.data {
        let dataset = dataset_name(data_path);
        let panel = load_panel(data_path, &config.input)?;
        for &window in &config.windows {
            let mut summary_rows: Vec<(String, MetricBlock)> = Vec::new();
            for &label in &labels {
                let spec = StrategySpec::from_label(label, &params);
                let started = Instant::now();
                let cell = (|| -> Result<(usize, MetricBlock)> {
                    let report = roll(&panel, window, &spec, config.seed, threads)?;
                    let block = metric_block(
                        &report.oos_returns,
                        report.weight_history.view(),
                        report.drifted_weights.view(),
                        config.tau,
                        config.eta,
                    )?;
                    let dir = config
                        .out
                        .join(&dataset)
                        .join(format!("T{window}"))
                        .join(label.to_string());
                    write_report_dir(&dir, &report, &block, &dataset)?;
                    Ok((report.oos_returns.len(), block))
                })();
                let runtime_s = started.elapsed().as_secs_f64();
                match cell {
                    Ok((n_windows, block)) => {
                        summary_rows.push((label.to_string(), block));
                        cells.push(CellRecord {
                            dataset: dataset.clone(),
                            window,
                            strategy: label.to_string(),
                            status: "ok".into(),
                            n_windows,
                            runtime_s,
                        });
                    }
                    Err(e) => {
                        cells.push(CellRecord {
                            dataset: dataset.clone(),
                            window,
                            strategy: label.to_string(),
                            status: format!("failed: {e}"),
                            n_windows: 0,
                            runtime_s,
                        });
                    }
                }
            }
            if !summary_rows.is_empty() {
                let path = config
                    .out
                    .join(&dataset)
                    .join(format!("T{window}"))
                    .join("summary.csv");
                write_summary_csv(&path, &summary_rows)?;
            }
        }
    }

    let mut notes = BTreeMap::new();
    notes.insert("week_convention".into(), "ISO-8601 calendar weeks, stamped by last trading day".into());
    notes.insert("partial_boundary_weeks".into(), "kept".into());
    notes.insert("quantile_convention".into(), "type-1 (left-continuous inverse CDF)".into());
    notes.insert("es_tail".into(), "strict inequality r < VaR".into());
    notes.insert(
        "bch_lambda_usage".into(),
        "lambda* from the simulated pivotal quantile is plugged into the weighted-L1 problem as-is".into(),
    );
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        notes,
        cells,
    };
    std::fs::write(
        config.out.join("manifest.json"),
        format!("{}\n", serde_json::to_string_pretty(&manifest).expect("manifest serialize")),
    )?;
    Ok(manifest)
}

fn load_compatible(dirs: &[PathBuf]) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    let mut key: Option<(String, usize, usize)> = None;
    for dir in dirs {
        let loaded = read_report_dir(dir)?;
        let this_key = (
            loaded.meta.dataset.clone(),
            loaded.meta.window_len,
            loaded.oos_returns.len(),
        );
        match &key {
            None => key = Some(this_key),
            Some(k) if *k != this_key => {
                return Err(Error::Validation(format!(
                    "report {} does not match the others (dataset/window/length {:?} vs {:?})",
                    dir.display(),
                    this_key,
                    k
                )));
            }
            _ => {}
        }
        out.push((loaded.meta.label.clone(), loaded.oos_returns));
    }
    Ok(out)
}

/// Pairwise variance and Sharpe-ratio tests over report directories;
/// writes the two p-value matrices into `out_dir`. When a second set of
/// reports is supplied (a different window length), it fills the lower
/// triangle; otherwise the matrix is symmetric.
pub fn compare_reports(
    upper_dirs: &[PathBuf],
    lower_dirs: Option<&[PathBuf]>,
    lw: &LwConfig,
    out_dir: &Path,
) -> Result<()> {
    if upper_dirs.len() < 2 {
        return Err(Error::Validation("compare needs at least two reports".into()));
    }
    let upper = load_compatible(upper_dirs)?;
    let labels: Vec<String> = upper.iter().map(|(l, _)| l.clone()).collect();

    let lower = match lower_dirs {
        None => None,
        Some(dirs) => {
            let set = load_compatible(dirs)?;
            let lower_labels: Vec<String> = set.iter().map(|(l, _)| l.clone()).collect();
            if lower_labels != labels {
                return Err(Error::Validation(format!(
                    "second report set has labels {lower_labels:?}, expected {labels:?}"
                )));
            }
            Some(set)
        }
    };

    let n = labels.len();
    let pair_matrix = |set: &[(String, Vec<f64>)], kind: &str| -> Result<Array2<f64>> {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let result = match kind {
                    "variance" => lw_variance_test(&set[i].1, &set[j].1, lw)?,
                    _ => lw_sharpe_test(&set[i].1, &set[j].1, lw)?,
                };
                m[[i, j]] = result.p_value;
            }
        }
        Ok(m)
    };

    std::fs::create_dir_all(out_dir)?;
    let var_upper = pair_matrix(&upper, "variance")?;
    let sr_upper = pair_matrix(&upper, "sharpe")?;
    let (var_lower, sr_lower) = match &lower {
        None => (None, None),
        Some(set) => (
            Some(pair_matrix(set, "variance")?),
            Some(pair_matrix(set, "sharpe")?),
        ),
    };
    write_pvalue_matrix(
        &out_dir.join("variance_pvalues.csv"),
        &labels,
        &var_upper,
        var_lower.as_ref(),
    )?;
    write_pvalue_matrix(
        &out_dir.join("sharpe_pvalues.csv"),
        &labels,
        &sr_upper,
        sr_lower.as_ref(),
    )?;
    Ok(())
}

/// Recompute the combined statistics table from stored report directories.
pub fn recompute_summary(dirs: &[PathBuf], out_file: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for dir in dirs {
        let loaded = read_report_dir(dir)?;
        let block = metric_block(
            &loaded.oos_returns,
            loaded.weight_history.view(),
            loaded.drifted_weights.view(),
            loaded.meta.tau,
            loaded.meta.eta,
        )?;
        rows.push((loaded.meta.label.clone(), block));
    }
    write_summary_csv(out_file, &rows)
}
