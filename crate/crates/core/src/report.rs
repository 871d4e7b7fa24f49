//! Report rows, curves and their CSV/JSON serialisation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psi2::Psi2Estimate;

/// Relative tolerance applied when comparing a value with its bound.
pub const BOUND_RTOL: f64 = 1e-9;

pub const CSV_HEADER: [&str; 9] = [
    "experiment",
    "n",
    "kappa",
    "estimator",
    "value",
    "ci_low",
    "ci_high",
    "bound",
    "pass",
];

/// How a row's pass flag follows from its value, interval and bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// `value ≤ bound`.
    AtMost,
    /// `ci_low ≤ bound`: the bound holds up to bootstrap slack.
    CiLowAtMost,
    /// `low ≤ value ≤ bound`.
    InRange { low: f64 },
    /// `|value − bound| ≤ rel·|bound|`.
    WithinRel { rel: f64 },
    /// Reported for reference only; always passes.
    Informational,
}

fn at_most(value: f64, bound: f64) -> bool {
    value <= bound + BOUND_RTOL * bound.abs().max(1.0)
}

impl Check {
    pub fn evaluate(&self, value: f64, ci_low: f64, bound: Option<f64>) -> bool {
        let Some(bound) = bound else {
            return matches!(self, Check::Informational);
        };
        match *self {
            Check::AtMost => at_most(value, bound),
            Check::CiLowAtMost => at_most(ci_low, bound),
            Check::InRange { low } => at_most(low, value) && at_most(value, bound),
            Check::WithinRel { rel } => (value - bound).abs() <= rel * bound.abs(),
            Check::Informational => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    /// Free-form identifier of the configuration cell, e.g. `sgn/n=64/kappa=4`.
    pub cell: String,
    pub n: Option<usize>,
    pub kappa: Option<f64>,
    pub estimator: String,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: Option<f64>,
    pub check: Check,
    pub pass: bool,
}

impl ReportRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        experiment: &str,
        cell: impl Into<String>,
        n: Option<usize>,
        kappa: Option<f64>,
        estimator: &str,
        (value, ci_low, ci_high): (f64, f64, f64),
        bound: Option<f64>,
        check: Check,
    ) -> Self {
        let pass = check.evaluate(value, ci_low, bound);
        ReportRow {
            experiment: experiment.to_string(),
            cell: cell.into(),
            n,
            kappa,
            estimator: estimator.to_string(),
            value,
            ci_low,
            ci_high,
            bound,
            check,
            pass,
        }
    }

    /// A row carrying a point statistic without an interval.
    #[allow(clippy::too_many_arguments)]
    pub fn point(
        experiment: &str,
        cell: impl Into<String>,
        n: Option<usize>,
        kappa: Option<f64>,
        estimator: &str,
        value: f64,
        bound: Option<f64>,
        check: Check,
    ) -> Self {
        Self::new(experiment, cell, n, kappa, estimator, (value, value, value), bound, check)
    }

    pub fn from_estimate(
        experiment: &str,
        cell: impl Into<String>,
        n: Option<usize>,
        kappa: Option<f64>,
        estimate: &Psi2Estimate,
        bound: Option<f64>,
        check: Check,
    ) -> Self {
        Self::new(
            experiment,
            cell,
            n,
            kappa,
            estimate.estimator.as_str(),
            (estimate.value, estimate.ci_low, estimate.ci_high),
            bound,
            check,
        )
    }

    /// Whether the stored pass flag agrees with the stored numbers.
    pub fn is_consistent(&self) -> bool {
        self.pass == self.check.evaluate(self.value, self.ci_low, self.bound)
    }
}

/// One point of a plot-ready curve in long format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub experiment: String,
    pub series: String,
    pub n: usize,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifact_version: String,
    pub notes: Vec<String>,
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(seed: u64) -> Self {
        Metadata {
            seed,
            started_unix: unix_now(),
            finished_unix: f64::NAN,
            artifact_version: artifact_version(),
            notes: Vec::new(),
            config: serde_json::Value::Null,
        }
    }
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Crate version plus the git revision when one was available at build time.
pub fn artifact_version() -> String {
    match option_env!("SUBGAUSS_GIT_REV") {
        Some(rev) => format!("{}+{}", env!("CARGO_PKG_VERSION"), rev),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
    pub curves: Vec<CurvePoint>,
    pub metadata: Metadata,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            rows: Vec::new(),
            curves: Vec::new(),
            metadata: Metadata::new(seed),
        }
    }

    pub fn finish(mut self) -> Self {
        self.metadata.finished_unix = unix_now();
        self
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn rows_named<'a>(&'a self, estimator: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.estimator == estimator)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// The main CSV table.
pub fn rows_csv(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(CSV_HEADER).map_err(ser)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            opt(r.n),
            opt(r.kappa),
            r.estimator.clone(),
            r.value.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            opt(r.bound),
            r.pass.to_string(),
        ])
        .map_err(ser)?;
    }
    w.into_inner().map_err(|e| Error::Serialization(e.to_string()))
}

/// The long-format curve table.
pub fn curves_csv(curves: &[CurvePoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in curves {
        w.serialize(c).map_err(|e| Error::Serialization(e.to_string()))?;
    }
    if curves.is_empty() {
        w.write_record(["experiment", "series", "n", "value", "ci_low", "ci_high"])
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Serialization(e.to_string()))
}

/// Paths written by [`emit_report`] for a report in `format`.
pub fn output_paths(experiment: &str, format: Format, output_dir: &Path) -> Vec<PathBuf> {
    match format {
        Format::Csv => vec![
            output_dir.join(format!("{experiment}.csv")),
            output_dir.join(format!("{experiment}.curves.csv")),
            output_dir.join(format!("{experiment}.meta.json")),
        ],
        Format::Json => vec![output_dir.join(format!("{experiment}.json"))],
    }
}

/// Fails with [`Error::OutputExists`] if any output would be overwritten.
pub fn check_outputs_free(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(Error::OutputExists(p.clone())),
        None => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    let mut options = fs::OpenOptions::new();
    options.write(true);
    if force {
        options.create(true).truncate(true);
    } else {
        options.create_new(true);
    }
    let mut file = options.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::OutputExists(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn to_json(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes the report into `output_dir` and returns the written paths.
pub fn emit_report(report: &ExperimentReport, format: Format, output_dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let paths = output_paths(&report.experiment, format, output_dir);
    check_outputs_free(&paths, force)?;
    match format {
        Format::Csv => {
            write_file(&paths[0], &rows_csv(&report.rows)?, force)?;
            write_file(&paths[1], &curves_csv(&report.curves)?, force)?;
            let sidecar = serde_json::json!({
                "experiment": report.experiment,
                "metadata": report.metadata,
                "rows": report.rows.len(),
                "failures": report.failures().count(),
            });
            write_file(&paths[2], &to_json(&sidecar)?, force)?;
        }
        Format::Json => write_file(&paths[0], &to_json(report)?, force)?,
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks() {
        assert!(Check::AtMost.evaluate(1.0, 0.0, Some(1.0)));
        assert!(!Check::AtMost.evaluate(1.01, 0.0, Some(1.0)));
        assert!(Check::CiLowAtMost.evaluate(5.0, 0.9, Some(1.0)));
        assert!(Check::InRange { low: 0.45 }.evaluate(0.5, 0.5, Some(0.55)));
        assert!(!Check::InRange { low: 0.45 }.evaluate(0.4, 0.4, Some(0.55)));
        assert!(Check::WithinRel { rel: 0.05 }.evaluate(4.9, 4.9, Some(4.804)));
        assert!(Check::Informational.evaluate(f64::NAN, 0.0, None));
        assert!(!Check::AtMost.evaluate(0.0, 0.0, None));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            ReportRow::point("wishart", "n=64", Some(64), None, "kappa_median", 25.5, Some(50.0), Check::InRange { low: 20.0 }),
            ReportRow::point("theorem", "flat", None, Some(4.0), "flatness_ratio", 1.1, Some(1.3), Check::AtMost),
        ];
        let text = String::from_utf8(rows_csv(&rows).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "experiment,n,kappa,estimator,value,ci_low,ci_high,bound,pass");
        assert_eq!(lines[1], "wishart,64,,kappa_median,25.5,25.5,25.5,50,true");
        assert_eq!(lines[2], "theorem,,4,flatness_ratio,1.1,1.1,1.1,1.3,true");
    }

    #[test]
    fn empty_report_is_header_only() {
        let text = String::from_utf8(rows_csv(&[]).unwrap()).unwrap();
        assert_eq!(text, "experiment,n,kappa,estimator,value,ci_low,ci_high,bound,pass\n");
    }
}
