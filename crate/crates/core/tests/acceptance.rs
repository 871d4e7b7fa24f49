//! End-to-end acceptance run. Prints one `[PASS]`/`[FAIL]` line per
//! criterion and exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use subgauss::cli::run_experiments;
use subgauss::config::{ExperimentKind, RunConfig, DEFAULT_SEED};
use subgauss::report::{ExperimentReport, ReportRow};
use subgauss::selftest::run_selftest;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn run(kind: ExperimentKind) -> (ExperimentReport, Duration) {
    let mut cfg = RunConfig::defaults(kind).expect("default config");
    cfg.set_seed(DEFAULT_SEED);
    let (reports, elapsed) = timed(|| run_experiments(&cfg).expect("experiment run"));
    (reports.into_iter().next().expect("one report"), elapsed)
}

fn within(elapsed: Duration, budget_secs: u64) -> (bool, String) {
    (elapsed.as_secs() < budget_secs, format!("{:.1}s of {budget_secs}s", elapsed.as_secs_f64()))
}

fn rows<'a>(report: &'a ExperimentReport, pred: impl Fn(&ReportRow) -> bool + 'a) -> Vec<&'a ReportRow> {
    report.rows.iter().filter(|r| pred(r)).collect()
}

fn all_pass(rows: &[&ReportRow]) -> bool {
    !rows.is_empty() && rows.iter().all(|r| r.pass && r.is_consistent())
}

fn worst_failure(rows: &[&ReportRow]) -> String {
    match rows.iter().find(|r| !r.pass) {
        Some(r) => format!("; first failure {} {} value={} ci_low={} bound={:?}", r.cell, r.estimator, r.value, r.ci_low, r.bound),
        None => String::new(),
    }
}

fn c1() -> Outcome {
    let (checks, elapsed) = timed(|| run_selftest(DEFAULT_SEED).expect("selftest"));
    let (fast, time) = within(elapsed, 60);
    let summary: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {:.2e}/{:.0e}{}", c.name, c.deviation, c.tolerance, if c.pass { "" } else { " FAIL" }))
        .collect();
    Outcome {
        pass: fast && checks.iter().all(|c| c.pass),
        detail: format!("closed-form oracles [{}], {time}", summary.join(", ")),
    }
}

fn c2(report: &ExperimentReport, elapsed: Duration) -> Outcome {
    let cells = rows(report, |r| r.estimator.starts_with("mgf_fit/"));
    let (fast, time) = within(elapsed, 600);
    let worst = cells
        .iter()
        .map(|r| r.ci_low / r.bound.unwrap_or(f64::NAN))
        .fold(0.0f64, f64::max);
    Outcome {
        pass: fast && cells.len() == 18 && all_pass(&cells),
        detail: format!(
            "MGF envelope holds in {}/{} cells (max sigma_lower/bound {worst:.3}), {time}{}",
            cells.iter().filter(|r| r.pass).count(),
            cells.len(),
            worst_failure(&cells)
        ),
    }
}

fn c3(report: &ExperimentReport) -> Outcome {
    let flat = rows(report, |r| r.estimator == "orlicz_flatness");
    let ratios: Vec<String> = flat.iter().map(|r| format!("{}: {:.3}", r.cell, r.value)).collect();
    Outcome {
        pass: flat.len() == 3 && all_pass(&flat),
        detail: format!("max/min of per-n mean norms [{}] <= 1.3", ratios.join(", ")),
    }
}

fn c4() -> Outcome {
    let (report, elapsed) = run(ExperimentKind::Corollary);
    let (fast, time) = within(elapsed, 1200);
    let flat = rows(&report, |r| r.estimator == "combined_flatness");
    let blocks = rows(&report, |r| r.estimator.ends_with("_mgf_fit"));
    Outcome {
        pass: fast && flat.len() == 1 && all_pass(&flat) && blocks.len() == 2 * 50 * 3 && all_pass(&blocks),
        detail: format!(
            "combined flatness {:.3} <= 1.3, block sigma within 2*sqrt(kappa) in {}/{} blocks, {time}{}",
            flat.first().map_or(f64::NAN, |r| r.value),
            blocks.iter().filter(|r| r.pass).count(),
            blocks.len(),
            worst_failure(&blocks)
        ),
    }
}

fn c5() -> Outcome {
    let (report, elapsed) = run(ExperimentKind::Wishart);
    let (fast, time) = within(elapsed, 300);
    let at_256 = rows(&report, |r| r.n == Some(256) && r.estimator != "kappa_asymptotic");
    let get = |name: &str| at_256.iter().find(|r| r.estimator == name).map_or(f64::NAN, |r| r.value);
    Outcome {
        pass: fast && at_256.len() == 2 && all_pass(&at_256),
        detail: format!(
            "n=256: median kappa {:.2} in [20, 50], exceedance rate {} < 0.01, {time}",
            get("kappa_median"),
            get("kappa_exceedance")
        ),
    }
}

fn c6() -> Outcome {
    let (report, elapsed) = run(ExperimentKind::Counterexample);
    let (fast, time) = within(elapsed, 120);
    let slope = rows(&report, |r| r.estimator == "loglog_slope");
    let n16 = rows(&report, |r| r.estimator == "orlicz" && r.n == Some(16));
    Outcome {
        pass: fast && slope.len() == 1 && n16.len() == 1 && all_pass(&slope) && all_pass(&n16),
        detail: format!(
            "slope {:.4} in [0.45, 0.55], n=16 value {:.4} vs {:.4}, {time}",
            slope.first().map_or(f64::NAN, |r| r.value),
            n16.first().map_or(f64::NAN, |r| r.value),
            (16.0 / std::f64::consts::LN_2).sqrt()
        ),
    }
}

fn cli_csvs(args: &[&str], threads: &str, dir: &Path) -> Vec<(String, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_subgauss"))
        .args(args)
        .args(["--seed", "42", "--threads", threads, "--out", dir.to_str().unwrap()])
        .env_remove("SUBGAUSS_SEED")
        .env_remove("SUBGAUSS_THREADS")
        .output()
        .expect("spawn subgauss")
        .status;
    assert!(matches!(status.code(), Some(0 | 1)), "{args:?}: {status}");
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c7() -> Outcome {
    let runs: [&[&str]; 3] = [
        &["counterexample"],
        &["theorem", "--dims", "16,64", "--kappas", "1,4", "--samples", "20000", "--directions", "8"],
        &["wishart", "--dims", "64", "--trials", "200"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let one = cli_csvs(args, "1", &tmp.path().join(format!("{i}-t1")));
        let three = cli_csvs(args, "3", &tmp.path().join(format!("{i}-t3")));
        if one.is_empty() || one != three {
            mismatched.push(args[0]);
        }
        compared += one.len();
    }
    Outcome {
        pass: mismatched.is_empty(),
        detail: format!("{compared} CSV files byte-identical across --threads 1 and 3; mismatches {mismatched:?}"),
    }
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![("C1", c1())];
    let (theorem, elapsed) = run(ExperimentKind::Theorem);
    results.push(("C2", c2(&theorem, elapsed)));
    results.push(("C3", c3(&theorem)));
    results.push(("C4", c4()));
    results.push(("C5", c5()));
    results.push(("C6", c6()));
    results.push(("C7", c7()));
    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
