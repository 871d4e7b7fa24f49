use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use subgauss::report::{emit_report, ExperimentReport, Format, CSV_HEADER};

const SMALL_COUNTEREXAMPLE: [&str; 7] = ["counterexample", "--dims", "4,8,32", "--samples", "10000", "--directions", "4"];

fn subgauss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subgauss"))
        .args(args)
        .env_remove("SUBGAUSS_SEED")
        .env_remove("SUBGAUSS_THREADS")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    let out = subgauss(args);
    out.status.code().unwrap_or_else(|| panic!("killed: {out:?}"))
}

fn with_out<'a>(args: &[&'a str], dir: &'a Path) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(["--out", dir.to_str().unwrap()]);
    v
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut args_a = with_out(&SMALL_COUNTEREXAMPLE, &a);
    args_a.extend(["--threads", "1"]);
    let mut args_b = with_out(&SMALL_COUNTEREXAMPLE, &b);
    args_b.extend(["--threads", "3"]);
    assert!(code(&args_a) <= 1);
    assert!(code(&args_b) <= 1);
    for name in ["counterexample.csv", "counterexample.curves.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn refuses_to_overwrite_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let args = with_out(&SMALL_COUNTEREXAMPLE, tmp.path());
    assert!(code(&args) <= 1);
    let before = fs::read(tmp.path().join("counterexample.csv")).unwrap();
    assert_eq!(code(&args), 2);
    assert_eq!(fs::read(tmp.path().join("counterexample.csv")).unwrap(), before);
    let mut forced = args.clone();
    forced.push("--force");
    assert!(code(&forced) <= 1);
    assert_eq!(fs::read(tmp.path().join("counterexample.csv")).unwrap(), before);
}

#[test]
fn unwritable_output_is_an_operational_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    let out = subgauss(&with_out(&SMALL_COUNTEREXAMPLE, &file.join("sub")));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_report_writes_header_only_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let report = ExperimentReport::new("empty", 1).finish();
    emit_report(&report, Format::Csv, tmp.path(), false).unwrap();
    let text = fs::read_to_string(tmp.path().join("empty.csv")).unwrap();
    assert_eq!(text.trim_end(), CSV_HEADER.join(","));
}

#[test]
fn failing_rows_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["wishart", "--dims", "64", "--trials", "200", "--threshold", "1"];
    let out = subgauss(&with_out(&args, tmp.path()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let csv = fs::read_to_string(tmp.path().join("wishart.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("wishart,64,,") && l.ends_with(",false")), "{csv}");
}

#[test]
fn selftest_passes() {
    let out = subgauss(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("PASS").count(), 4);
}

#[test]
fn config_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"experiment":"wishart","trails":1000}"#).unwrap();
    let out = subgauss(&["wishart", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));

    let other = tmp.path().join("other.json");
    fs::write(&other, r#"{"experiment":"theorem"}"#).unwrap();
    assert_eq!(code(&["wishart", "--config", other.to_str().unwrap()]), 64);
    assert_eq!(code(&["theorem", "--maps", "tanh", "--out", tmp.path().to_str().unwrap()]), 64);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut args = with_out(&SMALL_COUNTEREXAMPLE, &a);
    args.extend(["--seed", "123"]);
    assert!(code(&args) <= 1);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(a.join("counterexample.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["metadata"]["seed"], 123);
    let config = tmp.path().join("echo.json");
    fs::write(&config, serde_json::to_vec(&meta["metadata"]["config"]).unwrap()).unwrap();
    let rerun = ["counterexample", "--config", config.to_str().unwrap()];
    assert!(code(&with_out(&rerun, &b)) <= 1);
    assert_eq!(
        fs::read(a.join("counterexample.csv")).unwrap(),
        fs::read(b.join("counterexample.csv")).unwrap()
    );
}
