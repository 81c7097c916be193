//! Daily return ingestion and weekly compounding.
//!
//! Input files follow the French-library convention: one header row naming
//! the assets, a date in the first column (YYYYMMDD or YYYY-MM-DD), and
//! percent returns in the remaining columns. The raw library files carry a
//! text preamble and trailing sections; the `FrenchDaily` layout reads the
//! first data block and ignores the rest. Sentinel codes (-99.99, -999)
//! become missing markers (NaN) at load time.

use std::fs::File;
use std::io::{BufRead, BufReader, Write as IoWrite};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvLayout {
    /// Strict: header row, then data rows only.
    Plain,
    /// Raw French-library daily file: preamble text, first data block,
    /// trailing sections.
    French,
}

impl std::str::FromStr for CsvLayout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(CsvLayout::Plain),
            "french" => Ok(CsvLayout::French),
            other => Err(Error::Validation(format!(
                "unknown csv layout '{other}' (expected 'plain' or 'french')"
            ))),
        }
    }
}

/// What to do with a week containing missing daily cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Refuse to aggregate (the replication panels are complete).
    Fail,
    /// Drop the whole calendar week for every asset.
    DropWeek,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail" => Ok(MissingPolicy::Fail),
            "drop-week" => Ok(MissingPolicy::DropWeek),
            other => Err(Error::Validation(format!(
                "unknown missing-data policy '{other}' (expected 'fail' or 'drop-week')"
            ))),
        }
    }
}

/// Daily simple returns in percent; missing cells are NaN markers.
#[derive(Debug, Clone)]
pub struct DailyPanel {
    pub dates: Vec<NaiveDate>,
    pub asset_ids: Vec<String>,
    pub returns: Array2<f64>,
}

impl DailyPanel {
    /// Restrict to dates in `[start, end]` (either bound optional).
    pub fn clip(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> DailyPanel {
        let keep: Vec<usize> = (0..self.dates.len())
            .filter(|&i| {
                start.map_or(true, |s| self.dates[i] >= s)
                    && end.map_or(true, |e| self.dates[i] <= e)
            })
            .collect();
        DailyPanel {
            dates: keep.iter().map(|&i| self.dates[i]).collect(),
            asset_ids: self.asset_ids.clone(),
            returns: self.returns.select(ndarray::Axis(0), &keep),
        }
    }
}

/// Weekly simple returns in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    /// Last trading day of each week, strictly increasing.
    pub week_ends: Vec<NaiveDate>,
    pub asset_ids: Vec<String>,
    pub returns: Array2<f64>,
}

impl ReturnPanel {
    pub fn n_weeks(&self) -> usize {
        self.week_ends.len()
    }

    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    /// Serialize to the same layout as the plain input CSV, full precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("date");
        for id in &self.asset_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (i, date) in self.week_ends.iter().enumerate() {
            out.push_str(&date.format("%Y-%m-%d").to_string());
            for j in 0..self.n_assets() {
                out.push(',');
                out.push_str(&format!("{}", self.returns[[i, j]]));
            }
            out.push('\n');
        }
        let mut file = File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Read a cached weekly panel written by [`ReturnPanel::write_csv`].
    pub fn read_csv(path: &Path) -> Result<ReturnPanel> {
        let daily = load_daily_csv(path, CsvLayout::Plain)?;
        if daily.returns.iter().any(|v| v.is_nan()) {
            return Err(Error::Data(format!(
                "weekly cache {} contains missing values",
                path.display()
            )));
        }
        Ok(ReturnPanel {
            week_ends: daily.dates,
            asset_ids: daily.asset_ids,
            returns: daily.returns,
        })
    }
}

const SENTINELS: [f64; 2] = [-99.99, -999.0];

fn parse_date(field: &str, line_no: usize) -> Result<NaiveDate> {
    let field = field.trim();
    NaiveDate::parse_from_str(field, "%Y%m%d")
        .or_else(|_| NaiveDate::parse_from_str(field, "%Y-%m-%d"))
        .map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("unparseable date '{field}'"),
        })
}

fn looks_like_date(field: &str) -> bool {
    let f = field.trim();
    (f.len() == 8 && f.bytes().all(|b| b.is_ascii_digit()))
        || NaiveDate::parse_from_str(f, "%Y-%m-%d").is_ok()
}

/// Load a daily return CSV into a panel with sentinels mapped to missing.
pub fn load_daily_csv(path: &Path, layout: CsvLayout) -> Result<DailyPanel> {
    let file = File::open(path).map_err(|e| {
        Error::Data(format!("cannot open {}: {e}", path.display()))
    })?;
    parse_daily_csv(BufReader::new(file), layout)
}

/// Parse a daily return CSV from any reader (see module docs for layout).
pub fn parse_daily_csv<R: BufRead>(reader: R, layout: CsvLayout) -> Result<DailyPanel> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            msg: format!("read failure: {e}"),
        })?;
        lines.push(line);
    }

    // Locate the header: line 1 for the plain layout; for the raw library
    // file, the last non-empty line before the first date-keyed row.
    let header_idx = match layout {
        CsvLayout::Plain => 0,
        CsvLayout::French => {
            let first_data = lines
                .iter()
                .position(|l| looks_like_date(l.split(',').next().unwrap_or("")))
                .ok_or_else(|| Error::Data("no data rows found in file".into()))?;
            (0..first_data)
                .rev()
                .find(|&i| !lines[i].trim().is_empty())
                .ok_or_else(|| Error::Data("no header row before the data block".into()))?
        }
    };
    if header_idx >= lines.len() {
        return Err(Error::Data("empty input file".into()));
    }
    let asset_ids: Vec<String> = lines[header_idx]
        .split(',')
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if asset_ids.len() < 2 || asset_ids.iter().any(String::is_empty) {
        return Err(Error::Parse {
            line: header_idx + 1,
            msg: format!(
                "header must name at least 2 assets, found {:?}",
                asset_ids
            ),
        });
    }
    let n = asset_ids.len();

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(header_idx + 1) {
        let line_no = i + 1;
        if line.trim().is_empty() {
            match layout {
                CsvLayout::French => break, // end of the first data block
                CsvLayout::Plain => continue,
            }
        }
        let mut fields = line.split(',');
        let date_field = fields.next().unwrap_or("");
        if layout == CsvLayout::French && !looks_like_date(date_field) {
            break; // trailing section header
        }
        let date = parse_date(date_field, line_no)?;
        if let Some(last) = dates.last() {
            if date <= *last {
                return Err(Error::Validation(format!(
                    "dates not strictly increasing at line {line_no}: {date} after {last}"
                )));
            }
        }
        let row: Vec<&str> = fields.collect();
        if row.len() != n {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {n} return fields, found {}", row.len()),
            });
        }
        for field in row {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("unparseable return '{}'", field.trim()),
            })?;
            let missing = SENTINELS.iter().any(|s| (v - s).abs() < 1e-9);
            values.push(if missing { f64::NAN } else { v });
        }
        dates.push(date);
    }
    if dates.is_empty() {
        return Err(Error::Data("no data rows found in file".into()));
    }
    let returns = Array2::from_shape_vec((dates.len(), n), values)
        .expect("row-major panel construction");
    Ok(DailyPanel {
        dates,
        asset_ids,
        returns,
    })
}

/// Compound a validated daily panel to weekly frequency.
///
/// Weeks are ISO-8601 calendar weeks; each weekly return compounds that
/// asset's daily returns within the week, `(prod(1 + r/100) - 1) * 100`,
/// and the week is stamped with its last trading day. Partial boundary
/// weeks are kept (recorded in the run manifest).
pub fn to_weekly(panel: &DailyPanel, policy: MissingPolicy) -> Result<ReturnPanel> {
    let n = panel.asset_ids.len();
    if n < 2 {
        return Err(Error::Validation(format!(
            "panel must hold at least 2 assets, found {n}"
        )));
    }
    let t_d = panel.dates.len();
    if t_d == 0 {
        return Err(Error::Data("empty daily panel".into()));
    }

    // Contiguous runs of equal ISO week; ascending dates make keys ascend.
    let mut groups: Vec<(usize, usize)> = Vec::new(); // [start, end)
    let mut start = 0;
    let key = |d: &NaiveDate| (d.iso_week().year(), d.iso_week().week());
    for i in 1..t_d {
        if key(&panel.dates[i]) != key(&panel.dates[i - 1]) {
            groups.push((start, i));
            start = i;
        }
    }
    groups.push((start, t_d));

    let mut week_ends = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut complete_weeks = vec![0usize; n];
    for &(lo, hi) in &groups {
        let week_end = panel.dates[hi - 1];
        let missing: Vec<usize> = (0..n)
            .filter(|&j| (lo..hi).any(|i| panel.returns[[i, j]].is_nan()))
            .collect();
        if !missing.is_empty() {
            match policy {
                MissingPolicy::Fail => {
                    return Err(Error::Data(format!(
                        "week ending {week_end} has missing returns for asset(s) {:?}",
                        missing
                            .iter()
                            .map(|&j| panel.asset_ids[j].as_str())
                            .collect::<Vec<_>>()
                    )));
                }
                MissingPolicy::DropWeek => continue,
            }
        }
        for j in 0..n {
            let mut growth = 1.0;
            for i in lo..hi {
                growth *= 1.0 + panel.returns[[i, j]] / 100.0;
            }
            rows.push((growth - 1.0) * 100.0);
            complete_weeks[j] += 1;
        }
        week_ends.push(week_end);
    }

    if let Some(j) = (0..n).find(|&j| complete_weeks[j] == 0) {
        return Err(Error::Data(format!(
            "asset {} has no complete week of data",
            panel.asset_ids[j]
        )));
    }
    let q = week_ends.len();
    if q < 2 {
        return Err(Error::Data(format!(
            "weekly panel needs at least 2 weeks, got {q}"
        )));
    }
    let returns = Array2::from_shape_vec((q, n), rows).expect("row-major weekly panel");
    Ok(ReturnPanel {
        week_ends,
        asset_ids: panel.asset_ids.clone(),
        returns,
    })
}
