//! `Σ = 𝟙𝟙ᵀ`: every draw of `X` is a constant vector, so `sgn(X) = ±𝟙` and
//! the marginal along `𝟙/√n` is `±√n`. Its Orlicz norm is exactly
//! `√(n/ln 2)`, which grows like `√n` and rules out a dimension-free bound
//! when `Σ` is singular.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::{cell_stream, loglog_slope};
use crate::error::{Error, Result};
use crate::gaussian::{sample_gaussian, CovarianceSpec};
use crate::nonlinearity::sign;
use crate::psi2::{self, psi2_vector, Centering, DirectionSearch};
use crate::report::{Check, CurvePoint, ExperimentReport, ReportRow};

pub const NAME: &str = "counterexample";
pub const VALUE_RTOL: f64 = 0.05;
pub const SLOPE_BAND: (f64, f64) = (0.45, 0.55);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub dims: Vec<usize>,
    pub samples: usize,
    pub directions: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            dims: vec![16, 64, 256],
            samples: 100_000,
            directions: 16,
            seed: 42,
        }
    }
}

impl CounterexampleConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = format!("{:?}", self.dims);
        if self.dims.len() < 3 {
            return Err(Error::validation("dims", dims, "at least three dimensions are required"));
        }
        for (i, &n) in self.dims.iter().enumerate() {
            if n < 2 {
                return Err(Error::validation(format!("dims[{i}]"), n, "dimension must be at least 2"));
            }
        }
        let lo = *self.dims.iter().min().expect("nonempty");
        let hi = *self.dims.iter().max().expect("nonempty");
        if hi < 8 * lo {
            return Err(Error::validation("dims", dims, "dimensions must span a factor of at least 8"));
        }
        if self.samples < psi2::MIN_VECTOR_SAMPLES {
            return Err(Error::validation(
                "samples",
                self.samples,
                format!("at least {} samples are required", psi2::MIN_VECTOR_SAMPLES),
            ));
        }
        Ok(())
    }
}

/// `√(n/ln 2)`, the Orlicz norm of a `±√n` symmetric two-point variable.
pub fn two_point_norm(n: usize) -> f64 {
    (n as f64 / LN_2).sqrt()
}

pub fn run_counterexample(cfg: &CounterexampleConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new(NAME, cfg.seed);
    report.metadata.config = serde_json::to_value(cfg).map_err(|e| Error::Serialization(e.to_string()))?;
    let mut values = Vec::with_capacity(cfg.dims.len());
    for &n in &cfg.dims {
        let cov = CovarianceSpec::rank_one_ones(n)?;
        let stream = cell_stream(NAME, &[n as u64]);
        let y = sample_gaussian(&cov, cfg.samples, cfg.seed, stream)?.map(sign);
        let search = DirectionSearch::new(cfg.directions, false)
            .centering(Centering::None)
            .seed(crate::rng::derive_stream(cfg.seed, stream));
        let est = psi2_vector(&y, &search)?;
        report.rows.push(ReportRow::from_estimate(
            NAME,
            format!("n={n}"),
            Some(n),
            None,
            &est,
            Some(two_point_norm(n)),
            Check::WithinRel { rel: VALUE_RTOL },
        ));
        report.curves.push(CurvePoint {
            experiment: NAME.into(),
            series: "orlicz".into(),
            n,
            value: est.value,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
        });
        values.push(est.value);
    }
    let ns: Vec<f64> = cfg.dims.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&ns, &values);
    report.rows.push(ReportRow::point(
        NAME,
        "slope",
        None,
        None,
        "loglog_slope",
        slope,
        Some(SLOPE_BAND.1),
        Check::InRange { low: SLOPE_BAND.0 },
    ));
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_value_at_16() {
        assert!((two_point_norm(16) - 4.804).abs() < 1e-3);
    }

    #[test]
    fn validation() {
        let narrow = CounterexampleConfig {
            dims: vec![16, 32, 64],
            ..CounterexampleConfig::default()
        };
        assert!(matches!(narrow.validate(), Err(Error::Validation { .. })));
        let short = CounterexampleConfig {
            dims: vec![16, 256],
            ..CounterexampleConfig::default()
        };
        assert!(matches!(short.validate(), Err(Error::Validation { .. })));
    }
}
