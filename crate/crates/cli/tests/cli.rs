//! End-to-end checks of the binary surface: commands, exit codes, and
//! output determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn esqr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_esqr"))
}

fn write_toy_daily(path: &Path) {
    // Ten ISO weeks, three assets, deterministic pseudo-returns.
    let mut text = String::from("date,AAA,BBB,CCC\n");
    let start = chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
    for day in 0..50 {
        let date = start + chrono::Duration::days(day + (day / 5) * 2);
        let r = |k: i64| ((day * 7 + k * 13) % 11 - 5) as f64 / 4.0;
        text.push_str(&format!(
            "{},{},{},{}\n",
            date.format("%Y%m%d"),
            r(0),
            r(1),
            r(2)
        ));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn ingest_is_idempotent_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let daily = tmp.path().join("daily.csv");
    write_toy_daily(&daily);
    let weekly = tmp.path().join("weekly.csv");

    let status = esqr()
        .args(["ingest", "--layout", "plain"])
        .arg("--input")
        .arg(&daily)
        .arg("--output")
        .arg(&weekly)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let first = fs::read(&weekly).unwrap();

    let status = esqr()
        .args(["ingest", "--layout", "plain"])
        .arg("--input")
        .arg(&daily)
        .arg("--output")
        .arg(&weekly)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(first, fs::read(&weekly).unwrap(), "rerun must be byte-identical");
    assert_eq!(fs::read_to_string(&weekly).unwrap().lines().count(), 11);
}

#[test]
fn malformed_input_exits_2_with_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let daily = tmp.path().join("bad.csv");
    fs::write(&daily, "date,AAA,BBB\n20210104,1.0,oops\n").unwrap();
    let out = esqr()
        .args(["ingest", "--layout", "plain"])
        .arg("--input")
        .arg(&daily)
        .arg("--output")
        .arg(tmp.path().join("w.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_exits_1() {
    let out = esqr().args(["backtest", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_config_key_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "mystery = 1\n").unwrap();
    let out = esqr()
        .args(["backtest", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery"));
}

#[test]
fn backtest_compare_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let daily = tmp.path().join("daily.csv");
    write_toy_daily(&daily);
    let panel = tmp.path().join("toy.csv");
    // Longer synthetic weekly panel written directly.
    {
        let mut text = String::from("date,AAA,BBB,CCC\n");
        let start = chrono::NaiveDate::from_ymd_opt(2018, 1, 5).unwrap();
        for week in 0..110i64 {
            let date = start + chrono::Duration::weeks(week);
            let market = 2.0 * ((week as f64) * 0.83).sin();
            let r = |k: i64| market + 1.5 * ((week as f64) * 1.7 + k as f64 * 2.1).cos();
            text.push_str(&format!(
                "{},{},{},{}\n",
                date.format("%Y-%m-%d"),
                r(0),
                r(1),
                r(2)
            ));
        }
        fs::write(&panel, text).unwrap();
    }
    let out_dir = tmp.path().join("run");
    let status = esqr()
        .arg("backtest")
        .arg("--data")
        .arg(&panel)
        .args(["--window", "50", "--strategies", "EW,LBCH", "--seed", "7"])
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary = fs::read_to_string(out_dir.join("toy/T50/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.starts_with("STRATEGY,ES,SD,SR,TO,AP,SP\n"));

    let cmp = tmp.path().join("cmp");
    let status = esqr()
        .arg("compare")
        .arg("--reports")
        .arg(out_dir.join("toy/T50/EW"))
        .arg(out_dir.join("toy/T50/LBCH"))
        .arg("--out")
        .arg(&cmp)
        .args(["--draws", "99"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let matrix = fs::read_to_string(cmp.join("variance_pvalues.csv")).unwrap();
    assert_eq!(matrix.lines().count(), 3);

    let summary2 = tmp.path().join("summary2.csv");
    let status = esqr()
        .arg("report")
        .arg("--reports")
        .arg(out_dir.join("toy/T50/EW"))
        .arg(out_dir.join("toy/T50/LBCH"))
        .arg("--out")
        .arg(&summary2)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(
        fs::read(out_dir.join("toy/T50/summary.csv")).unwrap(),
        fs::read(&summary2).unwrap(),
        "report command must reproduce the summary byte-for-byte"
    );
}
