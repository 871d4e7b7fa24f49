//! Block bootstrap for statistics built from sample means.
//!
//! The sample is cut into at most `max_blocks` contiguous blocks of nearly
//! equal size and whole blocks are resampled with replacement. With i.i.d.
//! data this is an ordinary bootstrap on a coarser grid; for `m ≤ max_blocks`
//! every block is a single observation. Any mean-type statistic then costs one
//! pass over the data for all resamples at once: block sums are formed once
//! and each resample is a weighted sum of block sums.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, tags};

pub const DEFAULT_RESAMPLES: usize = 200;
pub const DEFAULT_MAX_BLOCKS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub max_blocks: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: DEFAULT_RESAMPLES,
            max_blocks: DEFAULT_MAX_BLOCKS,
            seed: 0x0b00_7575,
        }
    }
}

impl BootstrapConfig {
    pub fn with_seed(seed: u64) -> Self {
        BootstrapConfig {
            seed,
            ..Self::default()
        }
    }
}

/// Precomputed resampling weights for samples of a fixed length.
#[derive(Clone, Debug)]
pub struct BlockBootstrap {
    n_samples: usize,
    block_starts: Vec<usize>,
    // resamples × blocks multiplicities, divided by the resample's sample count
    weights: DMatrix<f64>,
}

impl BlockBootstrap {
    pub fn new(n_samples: usize, config: &BootstrapConfig) -> Self {
        assert!(n_samples > 0, "bootstrap over an empty sample");
        let resamples = config.resamples.max(1);
        let blocks = n_samples.min(config.max_blocks.max(1));
        let block_starts: Vec<usize> = (0..=blocks).map(|k| k * n_samples / blocks).collect();
        let sizes: Vec<f64> = block_starts.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let stream = rng::derive_stream(tags::BOOTSTRAP, n_samples as u64);
        let mut weights = DMatrix::zeros(resamples, blocks);
        for r in 0..resamples {
            let mut rng = rng::substream(config.seed, stream, r as u64);
            let mut counts = vec![0.0; blocks];
            for _ in 0..blocks {
                counts[rng.random_range(0..blocks)] += 1.0;
            }
            let total: f64 = counts.iter().zip(&sizes).map(|(c, s)| c * s).sum();
            for (k, c) in counts.into_iter().enumerate() {
                weights[(r, k)] = c / total;
            }
        }
        BlockBootstrap {
            n_samples,
            block_starts,
            weights,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn resamples(&self) -> usize {
        self.weights.nrows()
    }

    pub fn blocks(&self) -> usize {
        self.weights.ncols()
    }

    /// Per-block sums of `values`.
    pub fn block_sums(&self, values: &[f64]) -> DVector<f64> {
        assert_eq!(values.len(), self.n_samples);
        DVector::from_iterator(
            self.blocks(),
            self.block_starts.windows(2).map(|w| lane_sum(&values[w[0]..w[1]])),
        )
    }

    /// Resample means given per-block sums.
    pub fn resample_means(&self, block_sums: &DVector<f64>) -> DVector<f64> {
        &self.weights * block_sums
    }

    /// Resample means of `values`.
    pub fn means(&self, values: &[f64]) -> DVector<f64> {
        self.resample_means(&self.block_sums(values))
    }
}

/// Sum with independent accumulators so the loop vectorizes.
pub(crate) fn lane_sum(values: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    let chunks = values.chunks_exact(8);
    let tail: f64 = chunks.remainder().iter().sum();
    for c in chunks {
        for (l, v) in lanes.iter_mut().zip(c) {
            *l += v;
        }
    }
    lanes.iter().sum::<f64>() + tail
}

/// Zero-based index of the order statistic used for quantile `q` out of
/// `count` replicates: the `⌈q·count⌉`-th smallest.
pub fn order_index(q: f64, count: usize) -> usize {
    ((q * count as f64).ceil() as usize).clamp(1, count) - 1
}

/// The `⌈q·n⌉`-th smallest entry.
pub fn order_statistic(values: &mut [f64], q: f64) -> f64 {
    let k = order_index(q, values.len());
    *values.select_nth_unstable_by(k, f64::total_cmp).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_means_are_weighted_block_means() {
        let values: Vec<f64> = (0..10).map(f64::from).collect();
        let plan = BlockBootstrap::new(10, &BootstrapConfig::default());
        assert_eq!(plan.blocks(), 10);
        let means = plan.means(&values);
        assert_eq!(means.len(), DEFAULT_RESAMPLES);
        assert!(means.iter().all(|m| (0.0..=9.0).contains(m)));
        // Weights of each resample sum to one over the sample.
        let ones = plan.means(&[1.0; 10]);
        assert!(ones.iter().all(|m| (m - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unequal_blocks_still_average_correctly() {
        let plan = BlockBootstrap::new(2503, &BootstrapConfig::default());
        assert_eq!(plan.blocks(), 1000);
        let ones = plan.means(&vec![3.0; 2503]);
        assert!(ones.iter().all(|m| (m - 3.0).abs() < 1e-12));
    }

    #[test]
    fn bootstrap_spread_matches_standard_error() {
        // Uniform(0, 1) data: bootstrap sd of the mean ≈ 1/√(12m).
        let m = 20_000;
        let mut rng = rng::substream(5, 5, 0);
        let values: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let plan = BlockBootstrap::new(m, &BootstrapConfig::default());
        let means = plan.means(&values);
        let mu = means.mean();
        let sd = (means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
        let expected = (1.0 / 12.0f64).sqrt() / (m as f64).sqrt();
        assert!((sd / expected - 1.0).abs() < 0.3, "sd {sd} vs {expected}");
    }

    #[test]
    fn order_statistics() {
        assert_eq!(order_index(0.5, 200), 99);
        assert_eq!(order_index(0.025, 200), 4);
        assert_eq!(order_index(0.975, 200), 194);
        assert_eq!(order_index(0.0, 5), 0);
        assert_eq!(order_index(1.0, 5), 4);
        let mut v = vec![5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(order_statistic(&mut v, 0.5), 3.0);
    }

    #[test]
    fn lane_sum_matches_naive() {
        let v: Vec<f64> = (0..1003).map(|i| (i as f64).sqrt()).collect();
        let naive: f64 = v.iter().sum();
        assert!((lane_sum(&v) - naive).abs() < 1e-9);
    }
}
