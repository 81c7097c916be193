//! Command-line front end: `ingest`, `backtest`, `compare`, `report`.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use esqr_core::data::{load_daily_csv, to_weekly, CsvLayout, MissingPolicy};
use esqr_core::runner::{compare_reports, execute, recompute_summary, RunConfig};
use esqr_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "esqr",
    version,
    about = "Minimum-expected-shortfall portfolios from penalized quantile regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a daily return CSV into the weekly panel cache.
    Ingest(IngestArgs),
    /// Run the rolling-window backtest grid and emit report directories.
    Backtest(BacktestArgs),
    /// Pairwise variance and Sharpe-ratio tests across report directories.
    Compare(CompareArgs),
    /// Recompute the combined statistics table from report directories.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Daily return CSV to read.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the weekly panel cache.
    #[arg(long)]
    output: PathBuf,
    /// Input layout: 'french' (raw library file) or 'plain'.
    #[arg(long, default_value = "french")]
    layout: String,
    /// Missing-cell policy: 'fail' or 'drop-week'.
    #[arg(long, default_value = "fail")]
    policy: String,
    /// Keep daily returns on or after this date (YYYY-MM-DD).
    #[arg(long)]
    start: Option<NaiveDate>,
    /// Keep daily returns on or before this date (YYYY-MM-DD).
    #[arg(long)]
    end: Option<NaiveDate>,
}

#[derive(Args)]
struct BacktestArgs {
    /// Flat TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input panel(s); repeat for several datasets.
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// How to read --data: 'weekly' cache, 'french', or 'plain' daily.
    #[arg(long)]
    input: Option<String>,
    /// Estimation window length(s); repeat for several.
    #[arg(long = "window")]
    windows: Vec<usize>,
    /// Comma-separated strategy labels (default: all ten).
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Report directories sharing one dataset and window length.
    #[arg(long = "reports", num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    /// Optional second set (same labels, other window length) for the
    /// lower triangle.
    #[arg(long = "reports-lower", num_args = 1..)]
    reports_lower: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4999)]
    draws: usize,
    #[arg(long, default_value_t = 5)]
    block_len: usize,
    #[arg(long, default_value_t = 5)]
    bandwidth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Report directories to summarize.
    #[arg(long = "reports", num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn dispatch(cli: Cli) -> esqr_core::Result<i32> {
    match cli.command {
        Command::Ingest(args) => {
            let layout: CsvLayout = args.layout.parse()?;
            let policy: MissingPolicy = args.policy.parse()?;
            let daily = load_daily_csv(&args.input, layout)?;
            let daily = if args.start.is_some() || args.end.is_some() {
                daily.clip(args.start, args.end)
            } else {
                daily
            };
            let weekly = to_weekly(&daily, policy)?;
            weekly.write_csv(&args.output)?;
            println!(
                "wrote {} weeks x {} assets to {}",
                weekly.n_weeks(),
                weekly.n_assets(),
                args.output.display()
            );
            Ok(EXIT_OK)
        }
        Command::Backtest(args) => {
            let mut config = match &args.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        Error::Data(format!("cannot read config {}: {e}", path.display()))
                    })?;
                    RunConfig::from_toml(&text)?
                }
                None => RunConfig::default(),
            };
            if !args.data.is_empty() {
                config.data = args.data;
            }
            if let Some(input) = args.input {
                config.input = input;
            }
            if !args.windows.is_empty() {
                config.windows = args.windows;
            }
            if !args.strategies.is_empty() {
                config.strategies = args.strategies;
            }
            if let Some(tau) = args.tau {
                config.tau = tau;
            }
            if let Some(eta) = args.eta {
                config.eta = eta;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(out) = args.out {
                config.out = out;
            }
            if let Some(threads) = args.threads {
                config.threads = threads;
            }
            let manifest = execute(&config)?;
            let mut any_failed = false;
            for cell in &manifest.cells {
                println!(
                    "{} T{} {}: {} ({:.2}s)",
                    cell.dataset, cell.window, cell.strategy, cell.status, cell.runtime_s
                );
                if cell.status != "ok" {
                    any_failed = true;
                }
            }
            println!("manifest: {}", config.out.join("manifest.json").display());
            Ok(if any_failed { EXIT_NUMERICAL } else { EXIT_OK })
        }
        Command::Compare(args) => {
            let lw = esqr_core::metrics::LwConfig {
                draws: args.draws,
                block_len: args.block_len,
                hac_bandwidth: args.bandwidth,
                seed: args.seed,
                threads: esqr_core::parallel::Threads::from_count(args.threads),
            };
            let lower = if args.reports_lower.is_empty() {
                None
            } else {
                Some(args.reports_lower.as_slice())
            };
            compare_reports(&args.reports, lower, &lw, &args.out)?;
            println!(
                "wrote {} and {}",
                args.out.join("variance_pvalues.csv").display(),
                args.out.join("sharpe_pvalues.csv").display()
            );
            Ok(EXIT_OK)
        }
        Command::Report(args) => {
            recompute_summary(&args.reports, &args.out)?;
            println!("wrote {}", args.out.display());
            Ok(EXIT_OK)
        }
    }
}
