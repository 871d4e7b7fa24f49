//! Empirical subgaussian norms.
//!
//! The scalar norm is the Orlicz norm `inf{t > 0 : E exp(X²/t²) ≤ 2}`. The
//! sample mean of `exp(X²/t²)` is heavy-tailed near the root, so the point
//! estimate is the root of the bootstrap-median criterion: the smallest `t`
//! at which at least half of the bootstrap resamples satisfy the Orlicz
//! condition. Because every resample criterion is monotone in `t`, that root
//! is exactly an order statistic of the per-resample roots, and the percentile
//! interval uses the 2.5% and 97.5% order statistics the same way.
//!
//! The vector norm is the supremum over unit directions of the scalar norm of
//! the marginal `⟨v, Y⟩`. The supremum is approximated over a declared, seeded
//! direction set, so the estimate is a lower bound on the true norm.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{order_index, BlockBootstrap, BootstrapConfig};
use crate::error::{Error, Result};
use crate::gaussian::SampleBatch;
use crate::rng::{self, tags};

pub const MIN_SCALAR_SAMPLES: usize = 1_000;
pub const MIN_VECTOR_SAMPLES: usize = 10_000;
/// Samples within this distance of zero count as zero.
pub const ZERO_TOL: f64 = 1e-12;
/// Overflow guard for MGF evaluation: `|λ|·max|x|` may not exceed this.
pub const MGF_EXPONENT_LIMIT: f64 = 30.0;
pub const CI_LOW_Q: f64 = 0.025;
pub const CI_HIGH_Q: f64 = 0.975;
pub const MEDIAN_Q: f64 = 0.5;

const DIRECTION_CHUNK: usize = 64;
const MAX_EXPONENT: f64 = 700.0;
const ROOT_REL_TOL: f64 = 1e-11;
const ROOT_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Orlicz,
    MgfFit,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Orlicz => "orlicz",
            Estimator::MgfFit => "mgf_fit",
        }
    }
}

/// A subgaussian-norm estimate with a bootstrap 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Psi2Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub estimator: Estimator,
    pub n_samples: usize,
    pub n_directions: Option<usize>,
    pub argmax_direction: Option<Vec<f64>>,
}

impl Psi2Estimate {
    fn zero(estimator: Estimator, n_samples: usize) -> Self {
        Psi2Estimate {
            value: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            estimator,
            n_samples,
            n_directions: None,
            argmax_direction: None,
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Upper bound on the norm of a concatenation from the norms of its blocks.
pub fn triangle_combine(first: &Psi2Estimate, second: &Psi2Estimate) -> f64 {
    first.value + second.value
}

fn check_finite(samples: &[f64]) -> Result<()> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("samples contain non-finite values".into()));
    }
    Ok(())
}

fn is_zero_sample(samples: &[f64]) -> bool {
    samples.iter().all(|x| x.abs() <= ZERO_TOL)
}

/// Orlicz-norm root finder over a fixed bootstrap plan.
///
/// For the `j`-th smallest resample root `t_(j)`, work in `u = 1/t²`:
/// `t_(j) = 1/√u*` where `u*` solves `f_[j](u) = 2` and `f_[j]` is the `j`-th
/// smallest resample mean of `exp(X²·u)`, an increasing function of `u`.
pub(crate) struct Orlicz<'a> {
    plan: &'a BlockBootstrap,
    squares: Vec<f64>,
    max_square: f64,
    scratch: Vec<f64>,
    // resample means of X², used for the bracket
    min_mean_square: f64,
    pub evaluations: usize,
}

impl<'a> Orlicz<'a> {
    pub(crate) fn new(samples: &[f64], plan: &'a BlockBootstrap) -> Self {
        let squares: Vec<f64> = samples.iter().map(|x| x * x).collect();
        let max_square = squares.iter().copied().fold(0.0, f64::max);
        let min_mean_square = plan.means(&squares).iter().copied().fold(f64::INFINITY, f64::min);
        Orlicz {
            plan,
            scratch: vec![0.0; squares.len()],
            squares,
            max_square,
            min_mean_square,
            evaluations: 0,
        }
    }

    fn criterion(&mut self, u: f64, rank: usize) -> f64 {
        self.evaluations += 1;
        for (out, s) in self.scratch.iter_mut().zip(&self.squares) {
            *out = (s * u).min(MAX_EXPONENT).exp();
        }
        let mut means: Vec<f64> = self.plan.means(&self.scratch).iter().copied().collect();
        *means.select_nth_unstable_by(rank, f64::total_cmp).1 - 2.0
    }

    /// The `q`-quantile (order statistic `⌈q·R⌉`) of the per-resample roots.
    pub(crate) fn quantile(&mut self, q: f64) -> f64 {
        if self.max_square <= ZERO_TOL * ZERO_TOL {
            return 0.0;
        }
        let resamples = self.plan.resamples();
        // j-th smallest t  <=>  (R+1-j)-th smallest u  <=>  criterion rank j.
        let rank = order_index(q, resamples);
        let u_lo = LN_2 / self.max_square;
        let h_lo = self.criterion(u_lo, rank);
        if h_lo >= 0.0 {
            return 1.0 / u_lo.sqrt();
        }
        let mut u_hi = if self.min_mean_square > 0.0 {
            LN_2 / self.min_mean_square
        } else {
            2.0 * u_lo
        };
        let mut h_hi = self.criterion(u_hi, rank);
        // Only reachable when some resample is identically zero.
        let mut expansions = 0;
        while h_hi < 0.0 {
            expansions += 1;
            if expansions > 100 {
                return 0.0;
            }
            u_hi *= 4.0;
            h_hi = self.criterion(u_hi, rank);
        }
        let u = self.illinois(u_lo, h_lo, u_hi, h_hi, rank);
        1.0 / u.sqrt()
    }

    fn illinois(&mut self, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, rank: usize) -> f64 {
        let mut side = 0i8;
        let mut last_width = b - a;
        for iter in 0..ROOT_MAX_ITER {
            let width = b - a;
            if width <= ROOT_REL_TOL * b {
                break;
            }
            // Fall back to bisection when false position stalls.
            let mut c = if iter % 3 == 2 && width > 0.5 * last_width {
                0.5 * (a + b)
            } else {
                (a * fb - b * fa) / (fb - fa)
            };
            if iter % 3 == 2 {
                last_width = width;
            }
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let fc = self.criterion(c, rank);
            if fc == 0.0 {
                return c;
            }
            if fc < 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        if fa.abs() < fb.abs() {
            a
        } else {
            b
        }
    }

    /// Bootstrap-median point estimate with its percentile interval.
    pub(crate) fn estimate(&mut self) -> (f64, f64, f64) {
        let value = self.quantile(MEDIAN_Q);
        let low = self.quantile(CI_LOW_Q).min(value);
        let high = self.quantile(CI_HIGH_Q).max(value);
        (value, low, high)
    }
}

/// Orlicz `ψ₂` estimate of a scalar sample with the default bootstrap.
pub fn psi2_scalar(samples: &[f64]) -> Result<Psi2Estimate> {
    psi2_scalar_with(samples, &BootstrapConfig::default())
}

pub fn psi2_scalar_with(samples: &[f64], bootstrap: &BootstrapConfig) -> Result<Psi2Estimate> {
    if samples.len() < MIN_SCALAR_SAMPLES {
        return Err(Error::InsufficientSamples {
            required: MIN_SCALAR_SAMPLES,
            got: samples.len(),
        });
    }
    check_finite(samples)?;
    if is_zero_sample(samples) {
        return Ok(Psi2Estimate::zero(Estimator::Orlicz, samples.len()));
    }
    let plan = BlockBootstrap::new(samples.len(), bootstrap);
    let (value, ci_low, ci_high) = Orlicz::new(samples, &plan).estimate();
    Ok(Psi2Estimate {
        value,
        ci_low,
        ci_high,
        estimator: Estimator::Orlicz,
        n_samples: samples.len(),
        n_directions: None,
        argmax_direction: None,
    })
}

/// A finite grid of MGF evaluation points, symmetric about zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    /// `{±λ}` for each given positive `λ`.
    pub fn symmetric(positive: &[f64]) -> Result<Self> {
        if positive.is_empty() {
            return Err(Error::Domain("lambda grid is empty".into()));
        }
        if let Some(bad) = positive.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Domain(format!("lambda grid values must be positive and finite, got {bad}")));
        }
        let mut values: Vec<f64> = positive.iter().flat_map(|&l| [-l, l]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(LambdaGrid(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }
}

/// Variance-proxy fit of the empirical MGF.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MgfFit {
    /// Smallest `σ` with the bootstrap upper band of `log E e^{λX}` below
    /// `σ²λ²/2` on the whole grid.
    pub sigma: f64,
    /// Same fit against the point estimate of the log-MGF.
    pub sigma_point: f64,
    /// Same fit against the bootstrap lower band.
    pub sigma_lower: f64,
    pub lambda_grid: Vec<f64>,
    pub log_mgf: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `log_mgf − σ²λ²/2` at the fitted `σ`.
    pub margins: Vec<f64>,
    pub n_samples: usize,
}

impl MgfFit {
    pub fn as_estimate(&self) -> Psi2Estimate {
        Psi2Estimate {
            value: self.sigma_point,
            ci_low: self.sigma_lower,
            ci_high: self.sigma,
            estimator: Estimator::MgfFit,
            n_samples: self.n_samples,
            n_directions: None,
            argmax_direction: None,
        }
    }

    /// Whether `log E e^{λX} ≤ σ²λ²/2` holds on the grid up to bootstrap
    /// slack, i.e. the lower band lies below the envelope.
    pub fn dominated_by(&self, sigma_sq: f64) -> bool {
        self.lambda_grid
            .iter()
            .zip(&self.lower)
            .all(|(l, lo)| *lo <= sigma_sq * l * l / 2.0)
    }
}

fn sigma_for(grid: &[f64], log_mgf: &[f64]) -> f64 {
    grid.iter()
        .zip(log_mgf)
        .map(|(l, v)| (2.0 * v.max(0.0) / (l * l)).sqrt())
        .fold(0.0, f64::max)
}

/// Fits the variance proxy of an already centered sample.
pub(crate) fn mgf_fit_centered(centered: &[f64], grid: &LambdaGrid, plan: &BlockBootstrap) -> Result<MgfFit> {
    let max_abs = centered.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let product = grid.max_abs() * max_abs;
    if product > MGF_EXPONENT_LIMIT {
        return Err(Error::GridTooWide {
            product,
            limit: MGF_EXPONENT_LIMIT,
        });
    }
    let m = centered.len();
    if max_abs <= ZERO_TOL {
        let zeros = vec![0.0; grid.values().len()];
        return Ok(MgfFit {
            sigma: 0.0,
            sigma_point: 0.0,
            sigma_lower: 0.0,
            lambda_grid: grid.values().to_vec(),
            log_mgf: zeros.clone(),
            lower: zeros.clone(),
            upper: zeros.clone(),
            margins: zeros,
            n_samples: m,
        });
    }
    let resamples = plan.resamples();
    let (lo_rank, hi_rank) = (order_index(CI_LOW_Q, resamples), order_index(CI_HIGH_Q, resamples));
    let mut scratch = vec![0.0; m];
    let mut log_mgf = Vec::with_capacity(grid.values().len());
    let mut lower = Vec::with_capacity(grid.values().len());
    let mut upper = Vec::with_capacity(grid.values().len());
    for &lambda in grid.values() {
        for (out, x) in scratch.iter_mut().zip(centered) {
            *out = (lambda * x).exp();
        }
        let sums = plan.block_sums(&scratch);
        let point = (sums.sum() / m as f64).ln();
        let mut logs: Vec<f64> = plan.resample_means(&sums).iter().map(|v| v.ln()).collect();
        logs.sort_by(f64::total_cmp);
        log_mgf.push(point);
        lower.push(logs[lo_rank].min(point));
        upper.push(logs[hi_rank].max(point));
    }
    let values = grid.values();
    let sigma = sigma_for(values, &upper);
    let margins = values
        .iter()
        .zip(&log_mgf)
        .map(|(l, v)| v - sigma * sigma * l * l / 2.0)
        .collect();
    Ok(MgfFit {
        sigma,
        sigma_point: sigma_for(values, &log_mgf),
        sigma_lower: sigma_for(values, &lower),
        lambda_grid: values.to_vec(),
        log_mgf,
        lower,
        upper,
        margins,
        n_samples: m,
    })
}

/// Variance-proxy fit `σ` of a scalar sample (centered internally).
pub fn mgf_sigma(samples: &[f64], grid: &LambdaGrid) -> Result<MgfFit> {
    mgf_sigma_with(samples, grid, &BootstrapConfig::default())
}

pub fn mgf_sigma_with(samples: &[f64], grid: &LambdaGrid, bootstrap: &BootstrapConfig) -> Result<MgfFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            got: samples.len(),
        });
    }
    check_finite(samples)?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let plan = BlockBootstrap::new(samples.len(), bootstrap);
    mgf_fit_centered(&centered, grid, &plan)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Use the vectors as given.
    None,
    /// Subtract the empirical mean of the whole batch.
    EmpiricalMean,
    /// Center each half of the batch with the mean of the other half.
    CrossFit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Canonical,
    Ones,
    Random,
}

/// Candidate directions, one unit vector per column.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    pub vectors: DMatrix<f64>,
    pub kinds: Vec<DirectionKind>,
}

impl DirectionSet {
    /// The `n` canonical basis vectors, `𝟙/√n`, then `random` uniform unit
    /// vectors. Random direction `j` depends only on `(seed, n, j)`, so a
    /// larger budget extends a smaller one.
    pub fn standard(n: usize, random: usize, seed: u64) -> Self {
        let total = n + 1 + random;
        let mut vectors = DMatrix::zeros(n, total);
        let mut kinds = Vec::with_capacity(total);
        for i in 0..n {
            vectors[(i, i)] = 1.0;
            kinds.push(DirectionKind::Canonical);
        }
        vectors.column_mut(n).fill(1.0 / (n as f64).sqrt());
        kinds.push(DirectionKind::Ones);
        let stream = rng::derive_stream(tags::DIRECTIONS, n as u64);
        for j in 0..random {
            let mut rng = rng::substream(seed, stream, j as u64);
            let v = random_unit(n, &mut rng);
            vectors.column_mut(n + 1 + j).copy_from(&v);
            kinds.push(DirectionKind::Random);
        }
        DirectionSet { vectors, kinds }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }
}

fn random_unit<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Centered copy of the batch data according to `centering`.
pub fn center(data: &DMatrix<f64>, centering: Centering) -> DMatrix<f64> {
    let m = data.nrows();
    match centering {
        Centering::None => data.clone(),
        Centering::EmpiricalMean => {
            let means = data.row_mean();
            let mut out = data.clone();
            for (j, mut col) in out.column_iter_mut().enumerate() {
                col.add_scalar_mut(-means[j]);
            }
            out
        }
        Centering::CrossFit => {
            let half = m / 2;
            if half == 0 {
                return center(data, Centering::EmpiricalMean);
            }
            let first_mean = data.rows(0, half).row_mean();
            let second_mean = data.rows(half, m - half).row_mean();
            let mut out = data.clone();
            for (j, mut col) in out.column_iter_mut().enumerate() {
                for (i, v) in col.iter_mut().enumerate() {
                    *v -= if i < half { second_mean[j] } else { first_mean[j] };
                }
            }
            out
        }
    }
}

/// Applies `f` to the marginal `⟨v, Y⟩` of every direction `v`, in parallel,
/// returning results in direction order.
pub fn scan_directions<T, F>(data: &DMatrix<f64>, directions: &DirectionSet, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[f64]) -> Result<T> + Sync,
{
    if directions.dim() != data.ncols() {
        return Err(Error::DimensionMismatch {
            expected: data.ncols(),
            got: directions.dim(),
        });
    }
    let m = data.nrows();
    let d = directions.len();
    let mut out = Vec::with_capacity(d);
    let mut start = 0;
    while start < d {
        let width = DIRECTION_CHUNK.min(d - start);
        let projections = data * directions.vectors.columns(start, width);
        let slice = projections.as_slice();
        let chunk: Vec<Result<T>> = (0..width)
            .into_par_iter()
            .map(|j| f(start + j, &slice[j * m..(j + 1) * m]))
            .collect();
        for r in chunk {
            out.push(r?);
        }
        start += width;
    }
    Ok(out)
}

/// Options for the direction search of [`psi2_vector`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSearch {
    /// Number of random unit directions added to the canonical and all-ones ones.
    pub budget: usize,
    /// Polish the best candidate by coordinate ascent.
    pub refine: bool,
    pub centering: Centering,
    pub seed: u64,
    pub bootstrap: BootstrapConfig,
}

impl DirectionSearch {
    pub fn new(budget: usize, refine: bool) -> Self {
        DirectionSearch {
            budget,
            refine,
            centering: Centering::EmpiricalMean,
            seed: 0,
            bootstrap: BootstrapConfig::default(),
        }
    }

    pub fn centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.bootstrap.seed = rng::derive_stream(seed, tags::BOOTSTRAP);
        self
    }
}

pub const REFINE_SWEEPS: usize = 50;
pub const REFINE_STEP: f64 = 0.1;
pub const REFINE_MIN_STEP: f64 = 1e-3;

/// Coordinate ascent on the unit sphere starting from `start`.
fn refine_direction(
    data: &DMatrix<f64>,
    plan: &BlockBootstrap,
    start: DVector<f64>,
    start_value: f64,
) -> (DVector<f64>, f64, usize) {
    let n = start.len();
    let objective = |v: &DVector<f64>| {
        let projection = data * v;
        Orlicz::new(projection.as_slice(), plan).quantile(MEDIAN_Q)
    };
    let (mut best_v, mut best) = (start, start_value);
    let mut step = REFINE_STEP;
    let mut evaluations = 0;
    for _ in 0..REFINE_SWEEPS {
        let mut improved = false;
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut candidate = best_v.clone();
                candidate[i] += sign * step;
                let norm = candidate.norm();
                if norm <= 1e-12 {
                    continue;
                }
                candidate /= norm;
                evaluations += 1;
                let value = objective(&candidate);
                if value > best {
                    best = value;
                    best_v = candidate;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < REFINE_MIN_STEP {
                break;
            }
        }
    }
    (best_v, best, evaluations)
}

/// Vector `ψ₂` estimate: the largest scalar estimate over the direction set.
pub fn psi2_vector(batch: &SampleBatch, search: &DirectionSearch) -> Result<Psi2Estimate> {
    if batch.count < MIN_VECTOR_SAMPLES {
        return Err(Error::InsufficientSamples {
            required: MIN_VECTOR_SAMPLES,
            got: batch.count,
        });
    }
    check_finite(batch.data.as_slice())?;
    let data = center(&batch.data, search.centering);
    let n = batch.dim;
    let directions = DirectionSet::standard(n, search.budget, search.seed);
    let plan = BlockBootstrap::new(batch.count, &search.bootstrap);
    let values = scan_directions(&data, &directions, |_, projection| {
        Ok(Orlicz::new(projection, &plan).quantile(MEDIAN_Q))
    })?;
    let (best_index, best_value) = argmax(&values);
    let mut direction = directions.vectors.column(best_index).into_owned();
    let mut value = best_value;
    let mut n_directions = directions.len();
    if search.refine && value > 0.0 {
        let (v, refined, evaluations) = refine_direction(&data, &plan, direction, value);
        direction = v;
        value = refined;
        n_directions += evaluations;
    }
    let projection = &data * &direction;
    let mut orlicz = Orlicz::new(projection.as_slice(), &plan);
    let ci_low = orlicz.quantile(CI_LOW_Q).min(value);
    let ci_high = orlicz.quantile(CI_HIGH_Q).max(value);
    Ok(Psi2Estimate {
        value,
        ci_low,
        ci_high,
        estimator: Estimator::Orlicz,
        n_samples: batch.count,
        n_directions: Some(n_directions),
        argmax_direction: Some(direction.iter().copied().collect()),
    })
}

/// First index of the maximum.
pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rademacher(m: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng::substream(seed, 1, 0);
        (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
    }

    #[test]
    fn rejects_small_samples() {
        assert!(matches!(
            psi2_scalar(&[1.0; 999]),
            Err(Error::InsufficientSamples { required: 1000, got: 999 })
        ));
    }

    #[test]
    fn zero_sample_gives_zero() {
        let est = psi2_scalar(&vec![0.0; 5000]).unwrap();
        assert_eq!((est.value, est.ci_low, est.ci_high), (0.0, 0.0, 0.0));
        let fit = mgf_sigma(&vec![0.0; 5000], &LambdaGrid::symmetric(&[0.5, 1.0]).unwrap()).unwrap();
        assert_eq!(fit.sigma, 0.0);
    }

    #[test]
    fn two_point_values_are_exact() {
        // ±c: E exp(c²/t²) = 2 exactly at t = c/√ln 2.
        let xs: Vec<f64> = rademacher(4000, 3).into_iter().map(|x| 3.0 * x).collect();
        let est = psi2_scalar(&xs).unwrap();
        let exact = 3.0 / LN_2.sqrt();
        assert!((est.value - exact).abs() < 1e-9 * exact);
        assert!((est.ci_low - exact).abs() < 1e-9 && (est.ci_high - exact).abs() < 1e-9);
    }

    #[test]
    fn grid_guard_trips() {
        let mut xs = vec![0.0; 2000];
        xs[0] = 100.0;
        let grid = LambdaGrid::symmetric(&[1.0]).unwrap();
        assert!(matches!(mgf_sigma(&xs, &grid), Err(Error::GridTooWide { .. })));
    }

    #[test]
    fn lambda_grid_is_symmetric() {
        let g = LambdaGrid::symmetric(&[1.0, 0.25, 0.5]).unwrap();
        assert_eq!(g.values(), &[-1.0, -0.5, -0.25, 0.25, 0.5, 1.0]);
        assert!(LambdaGrid::symmetric(&[]).is_err());
        assert!(LambdaGrid::symmetric(&[0.0]).is_err());
    }

    #[test]
    fn triangle_combine_adds() {
        let mut a = Psi2Estimate::zero(Estimator::Orlicz, 1);
        let mut b = a.clone();
        a.value = 1.2;
        b.value = 1.3;
        assert_eq!(triangle_combine(&a, &b), 2.5);
        a.value = 0.0;
        assert_eq!(triangle_combine(&a, &b), 1.3);
    }

    #[test]
    fn direction_set_layout() {
        let set = DirectionSet::standard(4, 3, 9);
        assert_eq!(set.len(), 8);
        assert_eq!(set.kinds[4], DirectionKind::Ones);
        for j in 0..set.len() {
            assert!((set.vectors.column(j).norm() - 1.0).abs() < 1e-12);
        }
        let bigger = DirectionSet::standard(4, 5, 9);
        assert_eq!(bigger.vectors.columns(0, 8), set.vectors.columns(0, 8));
    }

    #[test]
    fn cross_fit_centering_uses_other_half() {
        let data = DMatrix::from_row_slice(4, 1, &[1.0, 3.0, 10.0, 20.0]);
        let c = center(&data, Centering::CrossFit);
        assert_eq!(c.as_slice(), &[1.0 - 15.0, 3.0 - 15.0, 10.0 - 2.0, 20.0 - 2.0]);
    }
}
