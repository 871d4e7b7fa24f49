//! Covariance matrices with cached spectral decomposition, covariance
//! splitting `Σ = a·I + Σ_G`, and seeded multivariate Gaussian sampling.
//!
//! Sampling uses the spectral factor `Q·Λ^{1/2}` rather than a Cholesky
//! factor, so semidefinite covariances (such as the all-ones matrix) are
//! handled by the same code path as well-conditioned ones.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, tags, CHUNK_ROWS};

/// Max allowed `|Σ_ij − Σ_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues in `[−PSD_TOL, 0)` are clamped to zero; below that is an error.
pub const PSD_TOL: f64 = 1e-10;
/// Max entrywise residual of `Σ − QΛQᵀ`.
pub const DECOMPOSITION_TOL: f64 = 1e-8;
/// A covariance is singular when `λ_min ≤ SINGULARITY_RATIO · λ_max`.
pub const SINGULARITY_RATIO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConstructorTag {
    Explicit,
    Identity,
    ScaledIdentity { scale: f64 },
    Diagonal,
    RankOneOnes,
    WishartOf { rows: usize, cols: usize },
}

/// A symmetric positive semidefinite matrix together with its
/// eigendecomposition (eigenvalues nonincreasing).
#[derive(Clone, Debug)]
pub struct CovarianceSpec {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    factor: DMatrix<f64>,
    tag: ConstructorTag,
}

impl CovarianceSpec {
    /// Builds a covariance from an explicit symmetric matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(matrix, ConstructorTag::Explicit)
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_dim(n)?;
        let mut spec = Self::diagonal(&vec![1.0; n])?;
        spec.tag = ConstructorTag::Identity;
        Ok(spec)
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("identity scale must be finite and >= 0, got {scale}")));
        }
        let mut spec = Self::diagonal(&vec![scale; n])?;
        spec.tag = ConstructorTag::ScaledIdentity { scale };
        Ok(spec)
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let n = entries.len();
        check_dim(n)?;
        if let Some(&bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("diagonal entry {bad} is not finite")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| entries[j].total_cmp(&entries[i]).then(i.cmp(&j)));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| entries[i]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (col, &i) in order.iter().enumerate() {
            eigenvectors[(i, col)] = 1.0;
        }
        let matrix = DMatrix::from_diagonal(&DVector::from_column_slice(entries));
        Self::from_parts(matrix, eigenvalues, eigenvectors, ConstructorTag::Diagonal)
    }

    /// The rank-one matrix `𝟙𝟙ᵀ`, with its decomposition built exactly so that
    /// every sample is a constant vector.
    pub fn rank_one_ones(n: usize) -> Result<Self> {
        check_dim(n)?;
        // Orthonormal basis whose first column is 𝟙/√n.
        let mut seed_basis = DMatrix::<f64>::identity(n, n);
        seed_basis.column_mut(0).fill(1.0);
        let mut q = seed_basis.qr().q();
        let unit = 1.0 / (n as f64).sqrt();
        q.column_mut(0).fill(unit);
        let mut eigenvalues = DVector::zeros(n);
        eigenvalues[0] = n as f64;
        let matrix = DMatrix::from_element(n, n, 1.0);
        Self::from_parts(matrix, eigenvalues, q, ConstructorTag::RankOneOnes)
    }

    /// The Wishart-type matrix `W·Wᵀ`.
    pub fn wishart_of(w: &DMatrix<f64>) -> Result<Self> {
        let gram = w * w.transpose();
        Self::from_matrix(
            gram,
            ConstructorTag::WishartOf {
                rows: w.nrows(),
                cols: w.ncols(),
            },
        )
    }

    /// Builds `Q·diag(λ)·Qᵀ` from a known orthonormal `Q` and spectrum.
    pub fn from_eigen(eigenvectors: DMatrix<f64>, eigenvalues: &[f64]) -> Result<Self> {
        let n = eigenvalues.len();
        check_dim(n)?;
        if eigenvectors.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: eigenvectors.nrows(),
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eigenvalues[j].total_cmp(&eigenvalues[i]).then(i.cmp(&j)));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eigenvalues[i]));
        let vectors = eigenvectors.select_columns(&order);
        let scaled = DMatrix::from_fn(n, n, |i, j| vectors[(i, j)] * values[j]);
        let product = &scaled * vectors.transpose();
        let matrix = (&product + product.transpose()) * 0.5;
        Self::from_parts(matrix, values, vectors, ConstructorTag::Explicit)
    }

    fn from_matrix(matrix: DMatrix<f64>, tag: ConstructorTag) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.ncols(),
            });
        }
        check_dim(n)?;
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariance has non-finite entries".into()));
        }
        let asymmetry = max_abs_diff(&matrix, &matrix.transpose());
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        let eigen = SymmetricEigen::new(matrix.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eigen.eigenvalues[j].total_cmp(&eigen.eigenvalues[i]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eigen.eigenvalues[i]));
        let eigenvectors = eigen.eigenvectors.select_columns(&order);
        Self::from_parts(matrix, eigenvalues, eigenvectors, tag)
    }

    fn from_parts(
        matrix: DMatrix<f64>,
        mut eigenvalues: DVector<f64>,
        eigenvectors: DMatrix<f64>,
        tag: ConstructorTag,
    ) -> Result<Self> {
        let n = matrix.nrows();
        let lambda_min = eigenvalues[n - 1];
        if lambda_min < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite { lambda_min });
        }
        for v in eigenvalues.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let factor = DMatrix::from_fn(n, n, |i, j| eigenvectors[(i, j)] * eigenvalues[j].sqrt());
        let spec = CovarianceSpec {
            matrix,
            eigenvalues,
            eigenvectors,
            factor,
            tag,
        };
        let residual = spec.decomposition_residual();
        if residual.is_nan() || residual > DECOMPOSITION_TOL {
            return Err(Error::Decomposition { residual });
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues, nonincreasing.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, one per column, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Spectral square-root factor `F = Q·Λ^{1/2}` with `F·Fᵀ = Σ`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn tag(&self) -> &ConstructorTag {
        &self.tag
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `max_ij |Σ − QΛQᵀ|`.
    pub fn decomposition_residual(&self) -> f64 {
        let rebuilt = &self.factor * self.factor.transpose();
        max_abs_diff(&self.matrix, &rebuilt)
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("covariance dimension must be positive".into()));
    }
    Ok(())
}

pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `λ_max / λ_min`, rejecting covariances with `λ_min ≤ 1e−12·λ_max`.
pub fn condition_number(cov: &CovarianceSpec) -> Result<f64> {
    let lambda_max = cov.lambda_max();
    let lambda_min = cov.lambda_min();
    let threshold = SINGULARITY_RATIO * lambda_max;
    if lambda_max.is_nan() || lambda_max <= 0.0 || lambda_min <= threshold {
        return Err(Error::SingularCovariance { lambda_min, threshold });
    }
    Ok((lambda_max / lambda_min).max(1.0))
}

/// The isotropic/residual decomposition `Σ = a·I + Σ_G` with `a = λ_min(Σ)`.
#[derive(Clone, Debug)]
pub struct CovarianceSplit {
    a: f64,
    residual: CovarianceSpec,
}

impl CovarianceSplit {
    /// Smoothing variance, the smallest eigenvalue of `Σ`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Residual covariance `Σ_G = Σ − a·I`.
    pub fn residual(&self) -> &CovarianceSpec {
        &self.residual
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.residual.dim();
        self.residual.matrix() + DMatrix::<f64>::identity(n, n) * self.a
    }
}

pub fn split_covariance(cov: &CovarianceSpec) -> Result<CovarianceSplit> {
    condition_number(cov)?;
    let n = cov.dim();
    let a = cov.lambda_min();
    let matrix = cov.matrix() - DMatrix::<f64>::identity(n, n) * a;
    let eigenvalues = cov.eigenvalues().map(|v| (v - a).max(0.0));
    let residual = CovarianceSpec::from_parts(
        matrix,
        eigenvalues,
        cov.eigenvectors().clone(),
        ConstructorTag::Explicit,
    )?;
    Ok(CovarianceSplit { a, residual })
}

/// A block of i.i.d. vector draws, one per row.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub dim: usize,
    pub count: usize,
    pub data: DMatrix<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl SampleBatch {
    /// Wraps an externally produced `count × dim` matrix.
    pub fn from_matrix(data: DMatrix<f64>, seed: u64, stream_id: u64) -> Self {
        SampleBatch {
            dim: data.ncols(),
            count: data.nrows(),
            data,
            seed,
            stream_id,
        }
    }

    /// `√a·Z + G`, the recombination of a split draw.
    pub fn recombine(a: f64, z: &SampleBatch, g: &SampleBatch) -> Result<SampleBatch> {
        if z.data.shape() != g.data.shape() {
            return Err(Error::DimensionMismatch {
                expected: z.dim,
                got: g.dim,
            });
        }
        let data = &z.data * a.sqrt() + &g.data;
        Ok(SampleBatch::from_matrix(data, z.seed, z.stream_id))
    }

    /// Applies `f` to every entry.
    pub fn map(mut self, f: impl Fn(f64) -> f64 + Sync) -> SampleBatch {
        self.data.as_mut_slice().par_chunks_mut(CHUNK_ROWS).for_each(|chunk| {
            for v in chunk {
                *v = f(*v);
            }
        });
        self
    }
}

fn chunk_count(count: usize) -> usize {
    count.div_ceil(CHUNK_ROWS)
}

/// Draws chunk `chunk` (rows `chunk·4096 ..`) of a sampling stream.
pub fn sample_gaussian_chunk(
    cov: &CovarianceSpec,
    chunk: usize,
    rows: usize,
    seed: u64,
    stream_id: u64,
) -> DMatrix<f64> {
    let n = cov.dim();
    let mut rng = rng::substream(seed, stream_id, chunk as u64);
    let normals: Vec<f64> = (0..rows * n).map(|_| rng.sample(StandardNormal)).collect();
    let z = DMatrix::from_row_slice(rows, n, &normals);
    z * cov.factor().transpose()
}

/// `count` i.i.d. draws of `N(0, Σ)`, deterministic in `(seed, stream_id)`
/// and independent of the worker count.
pub fn sample_gaussian(cov: &CovarianceSpec, count: usize, seed: u64, stream_id: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let n = cov.dim();
    let chunks: Vec<DMatrix<f64>> = (0..chunk_count(count))
        .into_par_iter()
        .map(|k| {
            let rows = CHUNK_ROWS.min(count - k * CHUNK_ROWS);
            sample_gaussian_chunk(cov, k, rows, seed, stream_id)
        })
        .collect();
    let mut data = DMatrix::zeros(count, n);
    for (k, chunk) in chunks.into_iter().enumerate() {
        data.view_mut((k * CHUNK_ROWS, 0), (chunk.nrows(), n)).copy_from(&chunk);
    }
    Ok(SampleBatch {
        dim: n,
        count,
        data,
        seed,
        stream_id,
    })
}

/// Draws `Z ~ N(0, I)` and `G ~ N(0, Σ_G)` from independent substreams of
/// `stream_id`, so that `√a·Z + G ~ N(0, Σ)`.
pub fn sample_split_gaussian(
    split: &CovarianceSplit,
    count: usize,
    seed: u64,
    stream_id: u64,
) -> Result<(SampleBatch, SampleBatch)> {
    let n = split.residual().dim();
    let identity = CovarianceSpec::identity(n)?;
    let z = sample_gaussian(&identity, count, seed, rng::derive_stream(stream_id, tags::GAUSS_Z))?;
    let g = sample_gaussian(split.residual(), count, seed, rng::derive_stream(stream_id, tags::GAUSS_G))?;
    Ok((z, g))
}

/// Empirical covariance `XᵀX / m` of mean-zero rows.
pub fn empirical_covariance(batch: &SampleBatch) -> DMatrix<f64> {
    batch.data.tr_mul(&batch.data) / batch.count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn condition_number_examples() {
        assert_eq!(condition_number(&CovarianceSpec::identity(3).unwrap()).unwrap(), 1.0);
        let d = CovarianceSpec::diagonal(&[1.0, 4.0]).unwrap();
        assert_eq!(condition_number(&d).unwrap(), 4.0);
        let ones = CovarianceSpec::new(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert!(matches!(condition_number(&ones), Err(Error::SingularCovariance { .. })));
        let exact_ones = CovarianceSpec::rank_one_ones(2).unwrap();
        assert!(matches!(condition_number(&exact_ones), Err(Error::SingularCovariance { .. })));
    }

    #[test]
    fn split_examples() {
        let split = split_covariance(&CovarianceSpec::identity(5).unwrap()).unwrap();
        assert_eq!(split.a(), 1.0);
        assert!(split.residual().matrix().iter().all(|&v| v == 0.0));

        let split = split_covariance(&CovarianceSpec::diagonal(&[1.0, 4.0]).unwrap()).unwrap();
        assert_eq!(split.a(), 1.0);
        assert_eq!(split.residual().matrix(), &DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 3.0])));
        assert!(split.residual().lambda_min() >= -PSD_TOL);
    }

    #[test]
    fn split_rejects_singular() {
        let cov = CovarianceSpec::rank_one_ones(4).unwrap();
        assert!(matches!(split_covariance(&cov), Err(Error::SingularCovariance { .. })));
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(CovarianceSpec::new(asym), Err(Error::NotSymmetric { .. })));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            CovarianceSpec::new(indefinite),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        // A tiny negative eigenvalue from rounding is clamped.
        let nearly = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 - 1e-12]);
        let spec = CovarianceSpec::new(nearly).unwrap();
        assert!(spec.lambda_min() >= 0.0);
    }

    #[test]
    fn eigenvalues_sorted_and_consistent() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let spec = CovarianceSpec::new(m).unwrap();
        let ev = spec.eigenvalues();
        assert!(ev[0] >= ev[1] && ev[1] >= ev[2]);
        assert!(spec.decomposition_residual() <= DECOMPOSITION_TOL);
        assert_relative_eq!(ev.sum(), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_one_samples_are_constant_rows() {
        let cov = CovarianceSpec::rank_one_ones(16).unwrap();
        let batch = sample_gaussian(&cov, 5000, 11, 2).unwrap();
        for row in batch.data.row_iter() {
            let max = row.max();
            let min = row.min();
            assert!(max - min <= 1e-12, "spread {}", max - min);
        }
    }

    #[test]
    fn identity_split_has_zero_residual_draws() {
        let split = split_covariance(&CovarianceSpec::identity(6).unwrap()).unwrap();
        let (_, g) = sample_split_gaussian(&split, 100, 1, 1).unwrap();
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let cov = CovarianceSpec::diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let a = sample_gaussian(&cov, 10_000, 5, 9).unwrap();
        let b = sample_gaussian(&cov, 10_000, 5, 9).unwrap();
        assert_eq!(a.data, b.data);
        let c = sample_gaussian(&cov, 10_000, 5, 10).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn zero_count_is_rejected() {
        let cov = CovarianceSpec::identity(2).unwrap();
        assert!(sample_gaussian(&cov, 0, 0, 0).is_err());
    }
}
