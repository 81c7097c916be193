//! Report directory serialization: CSV tables, NDJSON diagnostics, and
//! p-value matrices. All CSV output is plain text written in a fixed
//! order, so identical runs produce byte-identical files.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::backtest::{wealth_curve, BacktestReport};
use crate::error::{Error, Result};
use crate::metrics::MetricBlock;

/// Identity of one report directory, used to pair reports in comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub label: String,
    pub dataset: String,
    pub window_len: usize,
    pub n_assets: usize,
    pub n_oos: usize,
    pub tau: f64,
    pub eta: f64,
}

fn date_row(date: NaiveDate, values: &[f64]) -> String {
    let mut line = date.format("%Y-%m-%d").to_string();
    for v in values {
        line.push(',');
        line.push_str(&format!("{v}"));
    }
    line.push('\n');
    line
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text.as_bytes())?;
    Ok(())
}

/// Write one strategy's full report into `dir`.
pub fn write_report_dir(
    dir: &Path,
    report: &BacktestReport,
    block: &MetricBlock,
    dataset: &str,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let n = report.asset_ids.len();

    let mut returns_csv = String::from("date,return\n");
    for (date, r) in report.oos_dates.iter().zip(&report.oos_returns) {
        returns_csv.push_str(&date_row(*date, &[*r]));
    }
    write_text(&dir.join("oos_returns.csv"), &returns_csv)?;

    let header = {
        let mut h = String::from("date");
        for id in &report.asset_ids {
            h.push(',');
            h.push_str(id);
        }
        h.push('\n');
        h
    };
    let mut weights_csv = header.clone();
    for (k, date) in report.rebalance_dates.iter().enumerate() {
        let row: Vec<f64> = (0..n).map(|j| report.weight_history[[k, j]]).collect();
        weights_csv.push_str(&date_row(*date, &row));
    }
    write_text(&dir.join("weights.csv"), &weights_csv)?;

    let mut drifted_csv = header;
    for k in 0..report.drifted_weights.nrows() {
        let row: Vec<f64> = (0..n).map(|j| report.drifted_weights[[k, j]]).collect();
        drifted_csv.push_str(&date_row(report.rebalance_dates[k + 1], &row));
    }
    write_text(&dir.join("drifted_weights.csv"), &drifted_csv)?;

    let mut wealth_csv = String::from("date,wealth\n");
    let curve = wealth_curve(&report.oos_returns, 1.0);
    wealth_csv.push_str(&date_row(report.rebalance_dates[0], &[curve[0]]));
    for (date, w) in report.oos_dates.iter().zip(curve.iter().skip(1)) {
        wealth_csv.push_str(&date_row(*date, &[*w]));
    }
    write_text(&dir.join("wealth.csv"), &wealth_csv)?;

    let mut diag_ndjson = String::new();
    for d in &report.diagnostics {
        diag_ndjson.push_str(&serde_json::to_string(d).expect("diagnostics serialize"));
        diag_ndjson.push('\n');
    }
    write_text(&dir.join("diagnostics.ndjson"), &diag_ndjson)?;

    write_summary_csv(
        &dir.join("metrics.csv"),
        &[(report.label.clone(), *block)],
    )?;

    let meta = ReportMeta {
        label: report.label.clone(),
        dataset: dataset.to_string(),
        window_len: report.window_len,
        n_assets: n,
        n_oos: report.oos_returns.len(),
        tau: block.tau,
        eta: block.eta,
    };
    write_text(
        &dir.join("meta.json"),
        &format!("{}\n", serde_json::to_string_pretty(&meta).expect("meta serialize")),
    )?;
    Ok(())
}

/// Combined statistics table, one row per strategy, in the standard
/// column order.
pub fn write_summary_csv(path: &Path, rows: &[(String, MetricBlock)]) -> Result<()> {
    let mut csv = String::from("STRATEGY,ES,SD,SR,TO,AP,SP\n");
    for (label, b) in rows {
        csv.push_str(&format!(
            "{label},{},{},{},{},{},{}\n",
            b.es, b.sd, b.sr, b.to, b.ap, b.sp
        ));
    }
    write_text(path, &csv)
}

fn parse_csv_body(path: &Path) -> Result<(Vec<String>, Vec<NaiveDate>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{} is empty", path.display())))?
        .split(',')
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let date = fields
            .next()
            .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
            .ok_or_else(|| Error::Parse {
                line: i + 2,
                msg: format!("bad date in {}", path.display()),
            })?;
        let row: std::result::Result<Vec<f64>, _> =
            fields.map(|f| f.parse::<f64>()).collect();
        let row = row.map_err(|_| Error::Parse {
            line: i + 2,
            msg: format!("bad number in {}", path.display()),
        })?;
        dates.push(date);
        rows.push(row);
    }
    Ok((header, dates, rows))
}

/// Load the pieces of a report directory needed to recompute statistics
/// and run pairwise tests.
pub struct LoadedReport {
    pub meta: ReportMeta,
    pub oos_dates: Vec<NaiveDate>,
    pub oos_returns: Vec<f64>,
    pub weight_history: Array2<f64>,
    pub drifted_weights: Array2<f64>,
}

pub fn read_report_dir(dir: &Path) -> Result<LoadedReport> {
    let meta_text = fs::read_to_string(dir.join("meta.json"))
        .map_err(|e| Error::Data(format!("cannot read {}/meta.json: {e}", dir.display())))?;
    let meta: ReportMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Data(format!("bad meta.json in {}: {e}", dir.display())))?;

    let (_, oos_dates, return_rows) = parse_csv_body(&dir.join("oos_returns.csv"))?;
    let oos_returns: Vec<f64> = return_rows
        .iter()
        .map(|r| {
            r.first().copied().ok_or_else(|| {
                Error::Data(format!("empty return row in {}", dir.display()))
            })
        })
        .collect::<Result<_>>()?;

    let to_matrix = |rows: Vec<Vec<f64>>, n: usize, name: &str| -> Result<Array2<f64>> {
        let k = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec((k, n), flat)
            .map_err(|_| Error::Data(format!("ragged {name} in {}", dir.display())))
    };
    let (assets, _, weight_rows) = parse_csv_body(&dir.join("weights.csv"))?;
    let weight_history = to_matrix(weight_rows, assets.len(), "weights.csv")?;
    let (_, _, drifted_rows) = parse_csv_body(&dir.join("drifted_weights.csv"))?;
    let drifted_weights = to_matrix(drifted_rows, assets.len(), "drifted_weights.csv")?;

    Ok(LoadedReport {
        meta,
        oos_dates,
        oos_returns,
        weight_history,
        drifted_weights,
    })
}

/// Square p-value matrix (percent) in the two-triangle layout: entries
/// above the diagonal from `upper`, below from `lower` (or mirrored from
/// `upper` when no second run is supplied).
pub fn write_pvalue_matrix(
    path: &Path,
    labels: &[String],
    upper: &Array2<f64>,
    lower: Option<&Array2<f64>>,
) -> Result<()> {
    let n = labels.len();
    let mut csv = String::from("STRATEGY");
    for l in labels {
        csv.push(',');
        csv.push_str(l);
    }
    csv.push('\n');
    for i in 0..n {
        csv.push_str(&labels[i]);
        for j in 0..n {
            csv.push(',');
            if i == j {
                csv.push('-');
            } else if i < j {
                csv.push_str(&format!("{:.3}", 100.0 * upper[[i, j]]));
            } else {
                let source = lower.unwrap_or(upper);
                csv.push_str(&format!("{:.3}", 100.0 * source[[j, i]]));
            }
        }
        csv.push('\n');
    }
    write_text(path, &csv)
}
