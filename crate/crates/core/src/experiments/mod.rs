//! The four studies and the helpers they share.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::bootstrap::{BlockBootstrap, BootstrapConfig};
use crate::error::{Error, Result};
use crate::gaussian::CovarianceSpec;
use crate::psi2::{self, DirectionSet, Estimator, LambdaGrid, MgfFit, Orlicz, Psi2Estimate};
use crate::rng::{self, tags};

pub mod corollary;
pub mod counterexample;
pub mod theorem;
pub mod wishart;

pub use corollary::{analyze_w, run_corollary_experiment, CorollaryConfig, WAnalysis};
pub use counterexample::{run_counterexample, CounterexampleConfig};
pub use theorem::{conditional_hoeffding_check, run_theorem_experiment, HoeffdingCheck, TheoremConfig};
pub use wishart::{run_wishart_conditioning, WishartConfig};

/// Variance proxy `4 + (2/π)(κ − 1)` of the MGF bound for condition number `κ`.
pub fn sigma_sq_bound(kappa: f64) -> Result<f64> {
    if kappa < 1.0 || !kappa.is_finite() {
        return Err(Error::Domain(format!("condition number must be at least 1, got {kappa}")));
    }
    let bound = 4.0 + std::f64::consts::FRAC_2_PI * (kappa - 1.0);
    debug_assert!(bound <= 4.0 * kappa * (1.0 + 1e-15));
    Ok(bound)
}

/// `Q·diag(λ)·Qᵀ` with a random orthogonal `Q` and eigenvalues spaced
/// geometrically on `[1, κ]`. `κ = 1` gives the identity exactly.
pub fn make_conditioned_covariance(n: usize, kappa: f64, seed: u64) -> Result<CovarianceSpec> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    if kappa < 1.0 || !kappa.is_finite() {
        return Err(Error::Domain(format!("condition number must be at least 1, got {kappa}")));
    }
    if kappa == 1.0 {
        return CovarianceSpec::identity(n);
    }
    let q = random_orthogonal(n, seed);
    let eigenvalues: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => 1.0,
            i if i == n - 1 => kappa,
            i => kappa.powf(i as f64 / (n - 1) as f64),
        })
        .collect();
    CovarianceSpec::from_eigen(q, &eigenvalues)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `diag(R)` folded into `Q`.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::substream(seed, rng::derive_stream(tags::COVARIANCE, n as u64), 0);
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// `(W₁, W₂)`: the first `⌊n/2⌋` rows of `W` and the remainder.
pub fn partition_rows(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = w.nrows();
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let m = n / 2;
    Ok((w.rows(0, m).into_owned(), w.rows(m, n - m).into_owned()))
}

/// Stream id of a configuration cell.
pub(crate) fn cell_stream(experiment: &str, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(rng::label_stream(experiment), |s, &p| rng::derive_stream(s, p))
}

/// Per-direction statistics of one block of vectors.
pub(crate) struct BlockScan {
    /// Largest bootstrap-median Orlicz value, with the interval at its direction.
    pub orlicz: Psi2Estimate,
    /// MGF fit at the direction with the largest lower-band `σ`.
    pub mgf: Option<(MgfFit, Psi2Estimate)>,
    /// Largest point fit of `σ` over the directions.
    pub max_sigma_point: f64,
}

/// Scans the standard direction set of `data` (rows are samples, already
/// centered as required) computing Orlicz estimates and, with a grid, MGF fits.
pub(crate) fn scan_block(data: &DMatrix<f64>, budget: usize, grid: Option<&LambdaGrid>, seed: u64) -> Result<BlockScan> {
    let (m, n) = data.shape();
    let directions = DirectionSet::standard(n, budget, seed);
    let plan = BlockBootstrap::new(m, &BootstrapConfig::with_seed(rng::derive_stream(seed, tags::BOOTSTRAP)));
    let results = psi2::scan_directions(data, &directions, |_, projection| {
        let orlicz = Orlicz::new(projection, &plan).quantile(psi2::MEDIAN_Q);
        let fit = grid.map(|g| psi2::mgf_fit_centered(projection, g, &plan)).transpose()?;
        Ok((orlicz, fit))
    })?;
    let medians: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (best, value) = psi2::argmax(&medians);
    let direction = directions.vectors.column(best).into_owned();
    let projection = data * &direction;
    let mut solver = Orlicz::new(projection.as_slice(), &plan);
    let orlicz = Psi2Estimate {
        value,
        ci_low: solver.quantile(psi2::CI_LOW_Q).min(value),
        ci_high: solver.quantile(psi2::CI_HIGH_Q).max(value),
        estimator: Estimator::Orlicz,
        n_samples: m,
        n_directions: Some(directions.len()),
        argmax_direction: Some(direction.iter().copied().collect()),
    };
    let mut max_sigma_point = 0.0f64;
    let mut mgf = None;
    if grid.is_some() {
        let lowers: Vec<f64> = results
            .iter()
            .map(|r| r.1.as_ref().map_or(0.0, |f| f.sigma_lower))
            .collect();
        let (binding, _) = psi2::argmax(&lowers);
        for r in &results {
            max_sigma_point = max_sigma_point.max(r.1.as_ref().map_or(0.0, |f| f.sigma_point));
        }
        let mut results = results;
        if let Some(fit) = results.swap_remove(binding).1 {
            let mut estimate = fit.as_estimate();
            estimate.n_directions = Some(directions.len());
            estimate.argmax_direction = Some(directions.vectors.column(binding).iter().copied().collect());
            mgf = Some((fit, estimate));
        }
    }
    Ok(BlockScan {
        orlicz,
        mgf,
        max_sigma_point,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `max/min` of positive values.
pub fn spread_ratio(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn kappa_label(kappa: f64) -> String {
    format!("{kappa}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::condition_number;

    #[test]
    fn sigma_sq_bound_examples() {
        assert_eq!(sigma_sq_bound(1.0).unwrap(), 4.0);
        assert!((sigma_sq_bound(1.0 + std::f64::consts::FRAC_PI_2).unwrap() - 5.0).abs() < 1e-14);
        let b = sigma_sq_bound(10.0).unwrap();
        assert!((b - (4.0 + 18.0 / std::f64::consts::PI)).abs() < 1e-12 && b <= 40.0);
        assert!(matches!(sigma_sq_bound(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn conditioned_covariance_examples() {
        let id = make_conditioned_covariance(5, 1.0, 3).unwrap();
        assert_eq!(id.matrix(), &DMatrix::<f64>::identity(5, 5));
        let c = make_conditioned_covariance(4, 9.0, 3).unwrap();
        assert!((condition_number(&c).unwrap() / 9.0 - 1.0).abs() < 1e-9);
        let q = random_orthogonal(12, 1);
        let err = (q.transpose() * &q - DMatrix::<f64>::identity(12, 12)).abs().max();
        assert!(err <= 1e-10);
        assert!(matches!(make_conditioned_covariance(1, 2.0, 0), Err(Error::DimensionTooSmall(1))));
    }

    #[test]
    fn partition_examples() {
        let w = DMatrix::from_fn(5, 5, |i, j| (i * 5 + j) as f64);
        let (w1, w2) = partition_rows(&w).unwrap();
        assert_eq!((w1.shape(), w2.shape()), ((2, 5), (3, 5)));
        let mut stacked = DMatrix::zeros(5, 5);
        stacked.rows_mut(0, 2).copy_from(&w1);
        stacked.rows_mut(2, 3).copy_from(&w2);
        assert_eq!(stacked, w);
        let (a, b) = partition_rows(&DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert_eq!((a.shape(), b.shape()), ((1, 2), (1, 2)));
        assert!(matches!(partition_rows(&DMatrix::zeros(1, 3)), Err(Error::DimensionTooSmall(1))));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [16.0, 64.0, 256.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.sqrt()).collect();
        assert!((loglog_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }
}
