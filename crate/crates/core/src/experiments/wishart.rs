//! Conditioning of `W₁W₁ᵀ` for the `⌊n/2⌋ × n` Gaussian block `W₁`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corollary::gram_condition;
use super::{cell_stream, kappa_label};
use crate::bootstrap::order_statistic;
use crate::error::{Error, Result};
use crate::report::{Check, CurvePoint, ExperimentReport, ReportRow};
use crate::rng;

pub const NAME: &str = "wishart";
pub const MIN_TRIALS: usize = 100;
pub const DEFAULT_THRESHOLD: f64 = 100.0;
/// Band for the median condition number at aspect ratio 1/2.
pub const MEDIAN_BAND: (f64, f64) = (20.0, 50.0);
/// Smallest `n` whose median is held to [`MEDIAN_BAND`].
pub const MEDIAN_BAND_MIN_N: usize = 64;
pub const EXCEEDANCE_LIMIT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WishartConfig {
    pub dims: Vec<usize>,
    pub trials: usize,
    /// Condition numbers above this count as ill-conditioned draws.
    pub threshold: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for WishartConfig {
    fn default() -> Self {
        WishartConfig {
            dims: vec![64, 128, 256],
            trials: 1000,
            threshold: DEFAULT_THRESHOLD,
            seed: 42,
        }
    }
}

impl WishartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::validation("dims", "[]", "at least one dimension is required"));
        }
        for (i, &n) in self.dims.iter().enumerate() {
            if n < 2 {
                return Err(Error::validation(format!("dims[{i}]"), n, "dimension must be at least 2"));
            }
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::validation("trials", self.trials, format!("at least {MIN_TRIALS} trials are required")));
        }
        if self.threshold < 1.0 || !self.threshold.is_finite() {
            return Err(Error::validation("threshold", self.threshold, "threshold must be a finite number >= 1"));
        }
        Ok(())
    }
}

/// Large-`n` limit `((1 + √r)/(1 − √r))²` of `κ(W₁W₁ᵀ)` for aspect ratio
/// `r = rows/cols < 1`, from the edges of the Marchenko–Pastur law.
pub fn asymptotic_condition(ratio: f64) -> f64 {
    let s = ratio.sqrt();
    ((1.0 + s) / (1.0 - s)).powi(2)
}

/// `κ(W₁W₁ᵀ)` for `trials` independent Gaussian `⌊n/2⌋ × n` blocks.
pub fn block_condition_numbers(n: usize, trials: usize, seed: u64) -> Vec<f64> {
    let m = n / 2;
    let stream = cell_stream(NAME, &[n as u64]);
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::substream(seed, stream, t as u64);
            let w1 = nalgebra::DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
            gram_condition(&w1)
        })
        .collect()
}

pub fn run_wishart_conditioning(cfg: &WishartConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new(NAME, cfg.seed);
    report.metadata.config = serde_json::to_value(cfg).map_err(|e| Error::Serialization(e.to_string()))?;
    report.metadata.notes.push(format!(
        "the exceedance threshold kappa > {} is a reporting choice used as a proxy for the \
         ill-conditioned event; it is not derived from any stated constant",
        kappa_label(cfg.threshold)
    ));
    for &n in &cfg.dims {
        let mut kappas = block_condition_numbers(n, cfg.trials, cfg.seed);
        let median = order_statistic(&mut kappas, 0.5);
        let p5 = order_statistic(&mut kappas, 0.05);
        let p95 = order_statistic(&mut kappas, 0.95);
        let rate = kappas.iter().filter(|&&k| k > cfg.threshold).count() as f64 / kappas.len() as f64;
        let cell = format!("n={n}/m={}", n / 2);
        let (bound, check) = if n >= MEDIAN_BAND_MIN_N {
            (Some(MEDIAN_BAND.1), Check::InRange { low: MEDIAN_BAND.0 })
        } else {
            (None, Check::Informational)
        };
        report.rows.push(ReportRow::new(NAME, &cell, Some(n), None, "kappa_median", (median, p5, p95), bound, check));
        report.rows.push(ReportRow::point(
            NAME,
            &cell,
            Some(n),
            None,
            "kappa_asymptotic",
            asymptotic_condition((n / 2) as f64 / n as f64),
            None,
            Check::Informational,
        ));
        report.rows.push(ReportRow::point(
            NAME,
            &cell,
            Some(n),
            None,
            "kappa_exceedance",
            rate,
            Some(EXCEEDANCE_LIMIT),
            Check::AtMost,
        ));
        report.curves.push(CurvePoint {
            experiment: NAME.into(),
            series: "kappa_median".into(),
            n,
            value: median,
            ci_low: p5,
            ci_high: p95,
        });
    }
    Ok(report.finish())
}
