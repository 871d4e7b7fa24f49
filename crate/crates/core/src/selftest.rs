//! Closed-form oracle checks of the numerical building blocks.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::Result;
use crate::experiments::make_conditioned_covariance;
use crate::gaussian::{max_abs_diff, sample_gaussian, split_covariance, CovarianceSpec};
use crate::nonlinearity::{smoothed_mean_numeric, BoundedMap};
use crate::psi2::psi2_scalar;
use crate::rng;

pub const SMOOTHING_AS: [f64; 3] = [0.25, 1.0, 4.0];
pub const SMOOTHING_X_MAX: f64 = 5.0;
pub const SMOOTHING_X_STEP: f64 = 0.1;
pub const SMOOTHING_TOL: f64 = 1e-6;
pub const NORM_SAMPLES: usize = 1_000_000;
pub const GAUSSIAN_TOL: f64 = 0.03;
pub const RADEMACHER_TOL: f64 = 0.02;
pub const SPLIT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    /// Observed deviation from the closed form.
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl SelfCheck {
    fn new(name: &'static str, deviation: f64, tolerance: f64) -> Self {
        SelfCheck {
            name,
            deviation,
            tolerance,
            pass: deviation <= tolerance,
        }
    }
}

/// Quadrature of `E sgn(√a·Z + x)` against `erf(x/√(2a))` on the grid
/// `a ∈ {1/4, 1, 4}`, `x ∈ [−5, 5]` in steps of `0.1`.
pub fn smoothing_check() -> Result<SelfCheck> {
    let sgn = BoundedMap::sgn();
    let steps = (2.0 * SMOOTHING_X_MAX / SMOOTHING_X_STEP).round() as usize;
    let mut worst = 0.0f64;
    for &a in &SMOOTHING_AS {
        for k in 0..=steps {
            let x = -SMOOTHING_X_MAX + k as f64 * SMOOTHING_X_STEP;
            let numeric = smoothed_mean_numeric(&sgn, a, x)?;
            worst = worst.max((numeric - erf(x / (2.0 * a).sqrt())).abs());
        }
    }
    Ok(SelfCheck::new("smoothed_mean_sgn_vs_erf", worst, SMOOTHING_TOL))
}

/// Orlicz norm of `N(0, 1)`, whose exact value is `√(8/3)`.
pub fn gaussian_norm_check(seed: u64) -> Result<SelfCheck> {
    let batch = sample_gaussian(&CovarianceSpec::identity(1)?, NORM_SAMPLES, seed, rng::label_stream("selftest/gaussian"))?;
    let est = psi2_scalar(batch.data.as_slice())?;
    Ok(SelfCheck::new(
        "psi2_gaussian",
        (est.value - (8.0f64 / 3.0).sqrt()).abs(),
        GAUSSIAN_TOL,
    ))
}

/// Orlicz norm of a Rademacher variable, whose exact value is `1/√ln 2`.
pub fn rademacher_norm_check(seed: u64) -> Result<SelfCheck> {
    let mut rng = rng::substream(seed, rng::label_stream("selftest/rademacher"), 0);
    let xs: Vec<f64> = (0..NORM_SAMPLES)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let est = psi2_scalar(&xs)?;
    Ok(SelfCheck::new(
        "psi2_rademacher",
        (est.value - 1.0 / LN_2.sqrt()).abs(),
        RADEMACHER_TOL,
    ))
}

/// Worst reconstruction error of `a·I + Σ_G` over a few covariances.
pub fn split_check(seed: u64) -> Result<SelfCheck> {
    let covariances = [
        CovarianceSpec::identity(8)?,
        CovarianceSpec::diagonal(&[1.0, 2.0, 5.0, 10.0])?,
        make_conditioned_covariance(32, 10.0, seed)?,
        make_conditioned_covariance(128, 1000.0, seed)?,
    ];
    let mut worst = 0.0f64;
    for cov in &covariances {
        let split = split_covariance(cov)?;
        worst = worst.max(max_abs_diff(&split.reconstruct(), cov.matrix()));
    }
    Ok(SelfCheck::new("split_reconstruction", worst, SPLIT_TOL))
}

pub fn run_selftest(seed: u64) -> Result<Vec<SelfCheck>> {
    Ok(vec![
        smoothing_check()?,
        gaussian_norm_check(seed)?,
        rademacher_norm_check(seed)?,
        split_check(seed)?,
    ])
}
