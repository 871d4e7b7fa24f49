//! `Y = sgn(Wx)` for a Gaussian square matrix `W` and `x ~ N(0, Iₙ)`.
//!
//! Conditionally on `W`, `Wx ~ N(0, WWᵀ)`, but `WWᵀ` is badly conditioned. The
//! rows are therefore split into `W₁` (the first `⌊n/2⌋` rows) and `W₂`; each
//! rectangular block has a well-conditioned Gram matrix, so each half of `Y`
//! is covered by the Gaussian bound and the halves are recombined with the
//! triangle inequality.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{cell_stream, mean, partition_rows, scan_block, spread_ratio};
use crate::bootstrap::order_statistic;
use crate::error::{Error, Result};
use crate::gaussian::{sample_gaussian, CovarianceSpec, SampleBatch};
use crate::nonlinearity::sign;
use crate::psi2::{self, LambdaGrid, Psi2Estimate};
use crate::report::{Check, CurvePoint, ExperimentReport, ReportRow};
use crate::rng::{self, tags};

pub const NAME: &str = "corollary";
pub const FLATNESS_LIMIT: f64 = 1.3;
/// A coordinate mean further than this many standard errors from 0 counts as
/// an exceedance in the symmetry check.
pub const SYMMETRY_Z: f64 = 3.0;
/// Largest admissible fraction of such exceedances.
pub const SYMMETRY_RATE_LIMIT: f64 = 0.01;
pub const MIN_W_DRAWS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorollaryConfig {
    pub dims: Vec<usize>,
    pub w_draws: usize,
    /// Draws of `x` per realisation of `W`.
    pub samples: usize,
    pub directions: usize,
    pub lambdas: Vec<f64>,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for CorollaryConfig {
    fn default() -> Self {
        CorollaryConfig {
            dims: vec![32, 64, 128],
            w_draws: 50,
            samples: 100_000,
            directions: 64,
            lambdas: vec![0.25, 0.5, 1.0],
            seed: 42,
        }
    }
}

impl CorollaryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::validation("dims", "[]", "at least one dimension is required"));
        }
        for (i, &n) in self.dims.iter().enumerate() {
            if n < 4 {
                return Err(Error::validation(format!("dims[{i}]"), n, "dimension must be at least 4"));
            }
        }
        if self.w_draws < MIN_W_DRAWS {
            return Err(Error::validation(
                "w_draws",
                self.w_draws,
                format!("at least {MIN_W_DRAWS} draws of W are required"),
            ));
        }
        if self.samples < psi2::MIN_VECTOR_SAMPLES {
            return Err(Error::validation(
                "samples",
                self.samples,
                format!("at least {} samples per draw of W are required", psi2::MIN_VECTOR_SAMPLES),
            ));
        }
        LambdaGrid::symmetric(&self.lambdas)
            .map_err(|e| Error::validation("lambdas", format!("{:?}", self.lambdas), e.to_string()))?;
        Ok(())
    }
}

/// Condition number of `AAᵀ` for a wide matrix `A`.
pub fn gram_condition(a: &DMatrix<f64>) -> f64 {
    let gram = a * a.transpose();
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// A standard Gaussian `n × n` matrix, draw `index` of the stream for `n`.
pub fn gaussian_matrix(n: usize, seed: u64, index: u64) -> DMatrix<f64> {
    let mut rng = rng::substream(seed, rng::derive_stream(tags::MATRIX_W, n as u64), index);
    DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng))
}

/// Conditional estimates for one realisation of `W`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WAnalysis {
    pub n: usize,
    pub m: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    pub block1: Psi2Estimate,
    pub block2: Psi2Estimate,
    pub block1_mgf: Psi2Estimate,
    pub block2_mgf: Psi2Estimate,
    pub full: Psi2Estimate,
    /// `‖Y⁽¹⁾‖ + ‖Y⁽²⁾‖` from the Orlicz estimates.
    pub combined: f64,
    /// Coordinate means of `Y` in units of their standard errors.
    pub coordinate_z: Vec<f64>,
}

/// Estimates the conditional norms of `sgn(Wx)` given `W`, with `x`
/// resampled `samples` times. `Y` is not centered: its law is symmetric.
pub fn analyze_w(
    w: &DMatrix<f64>,
    samples: usize,
    directions: usize,
    grid: &LambdaGrid,
    seed: u64,
    stream: u64,
) -> Result<WAnalysis> {
    let n = w.ncols();
    if w.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.nrows(),
        });
    }
    let (w1, w2) = partition_rows(w)?;
    let m = w1.nrows();
    let x = sample_gaussian(&CovarianceSpec::identity(n)?, samples, seed, rng::derive_stream(stream, tags::SAMPLES_X))?;
    let y = SampleBatch::from_matrix(&x.data * w.transpose(), seed, stream).map(sign);
    drop(x);
    let scan_seed = rng::derive_stream(seed, stream);
    let y1 = y.data.columns(0, m).into_owned();
    let s1 = scan_block(&y1, directions, Some(grid), scan_seed)?;
    drop(y1);
    let y2 = y.data.columns(m, n - m).into_owned();
    let s2 = scan_block(&y2, directions, Some(grid), scan_seed)?;
    drop(y2);
    let full = scan_block(&y.data, directions, None, scan_seed)?;
    let root_m = (samples as f64).sqrt();
    let coordinate_z = y
        .data
        .column_iter()
        .map(|c| {
            let mu = c.mean();
            let var = c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (samples - 1) as f64;
            if var > 0.0 {
                mu / (var.sqrt() / root_m)
            } else {
                0.0
            }
        })
        .collect();
    let (_, block1_mgf) = s1.mgf.expect("grid supplied");
    let (_, block2_mgf) = s2.mgf.expect("grid supplied");
    Ok(WAnalysis {
        n,
        m,
        kappa1: gram_condition(&w1),
        kappa2: gram_condition(&w2),
        combined: psi2::triangle_combine(&s1.orlicz, &s2.orlicz),
        block1: s1.orlicz,
        block2: s2.orlicz,
        block1_mgf,
        block2_mgf,
        full: full.orlicz,
        coordinate_z,
    })
}

fn interval(values: &[f64]) -> (f64, f64, f64) {
    let mu = mean(values);
    if values.len() < 2 {
        return (mu, mu, mu);
    }
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    let half = 1.96 * (var / values.len() as f64).sqrt();
    (mu, mu - half, mu + half)
}

fn push_w_rows(report: &mut ExperimentReport, draw: usize, a: &WAnalysis) {
    let cell = format!("n={}/w={draw}", a.n);
    let n = Some(a.n);
    let rows = &mut report.rows;
    rows.push(ReportRow::point(NAME, &cell, n, Some(a.kappa1), "kappa_sigma1", a.kappa1, None, Check::Informational));
    rows.push(ReportRow::point(NAME, &cell, n, Some(a.kappa2), "kappa_sigma2", a.kappa2, None, Check::Informational));
    for (label, est, kappa, rows_in_block) in [
        ("block1", &a.block1_mgf, a.kappa1, a.m),
        ("block2", &a.block2_mgf, a.kappa2, a.n - a.m),
    ] {
        rows.push(ReportRow::new(
            NAME,
            &cell,
            n,
            Some(kappa),
            &format!("{label}_mgf_fit"),
            (est.value, est.ci_low, est.ci_high),
            Some(2.0 * kappa.sqrt()),
            Check::CiLowAtMost,
        ));
        let orlicz = if label == "block1" { &a.block1 } else { &a.block2 };
        rows.push(ReportRow::new(
            NAME,
            &cell,
            n,
            Some(kappa),
            &format!("{label}_orlicz"),
            (orlicz.value, orlicz.ci_low, orlicz.ci_high),
            Some((rows_in_block as f64 / LN_2).sqrt()),
            Check::AtMost,
        ));
    }
    rows.push(ReportRow::new(
        NAME,
        &cell,
        n,
        None,
        "full_orlicz",
        (a.full.value, a.full.ci_low, a.full.ci_high),
        Some(a.combined),
        Check::CiLowAtMost,
    ));
    rows.push(ReportRow::point(NAME, &cell, n, None, "block_combined", a.combined, None, Check::Informational));
}

pub fn run_corollary_experiment(cfg: &CorollaryConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let grid = LambdaGrid::symmetric(&cfg.lambdas)?;
    let mut report = ExperimentReport::new(NAME, cfg.seed);
    report.metadata.config = serde_json::to_value(cfg).map_err(|e| Error::Serialization(e.to_string()))?;
    report.metadata.notes.push(
        "blockK_mgf_fit rows gate on sigma <= 2 sqrt(kappa(Sigma_K)) up to bootstrap slack; \
         blockK_orlicz rows gate on the deterministic bound sqrt(rows/ln 2)"
            .into(),
    );
    let mut combined_means = Vec::new();
    for &n in &cfg.dims {
        let mut combined = Vec::with_capacity(cfg.w_draws);
        let mut full = Vec::with_capacity(cfg.w_draws);
        let mut kappas = Vec::with_capacity(cfg.w_draws);
        let (mut exceed, mut coords) = (0usize, 0usize);
        for draw in 0..cfg.w_draws {
            let w = gaussian_matrix(n, cfg.seed, draw as u64);
            let stream = cell_stream(NAME, &[n as u64, draw as u64]);
            let a = analyze_w(&w, cfg.samples, cfg.directions, &grid, cfg.seed, stream)?;
            push_w_rows(&mut report, draw, &a);
            combined.push(a.combined);
            full.push(a.full.value);
            kappas.push(a.kappa1);
            exceed += a.coordinate_z.iter().filter(|z| z.abs() > SYMMETRY_Z).count();
            coords += a.coordinate_z.len();
        }
        let cell = format!("n={n}");
        let c = interval(&combined);
        report.rows.push(ReportRow::new(NAME, &cell, Some(n), None, "mean_block_combined", c, None, Check::Informational));
        let f = interval(&full);
        report.rows.push(ReportRow::new(NAME, &cell, Some(n), None, "mean_full_orlicz", f, None, Check::Informational));
        let median = order_statistic(&mut kappas.clone(), 0.5);
        let k = (
            median,
            order_statistic(&mut kappas.clone(), 0.05),
            order_statistic(&mut kappas, 0.95),
        );
        report.rows.push(ReportRow::new(NAME, &cell, Some(n), None, "kappa1_median", k, None, Check::Informational));
        report.rows.push(ReportRow::point(
            NAME,
            &cell,
            Some(n),
            None,
            "symmetry_exceedance",
            exceed as f64 / coords as f64,
            Some(SYMMETRY_RATE_LIMIT),
            Check::AtMost,
        ));
        for (series, (value, ci_low, ci_high)) in [("block_combined", c), ("full_orlicz", f)] {
            report.curves.push(CurvePoint {
                experiment: NAME.into(),
                series: series.into(),
                n,
                value,
                ci_low,
                ci_high,
            });
        }
        combined_means.push(c.0);
    }
    if cfg.dims.len() > 1 {
        report.rows.push(ReportRow::point(
            NAME,
            "all",
            None,
            None,
            "combined_flatness",
            spread_ratio(&combined_means),
            Some(FLATNESS_LIMIT),
            Check::AtMost,
        ));
    }
    Ok(report.finish())
}
