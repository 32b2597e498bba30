//! Shared numeric kernels: truncated SVD, KS statistic, binary entropy and
//! its inverse, Gaussian CDF, chi-square tail, and a deterministic seeded
//! random source.

mod ks;
mod mat;
mod rng;
mod special;
mod svd;

pub use ks::ks_two_sample;
pub use mat::Mat;
pub use rng::RandomSource;
pub use special::{
    binary_entropy, binary_entropy_inv, chi_square_sf, erf, gaussian_cdf, ln_gamma,
};
pub use svd::{rank_error, singular_values, truncated_svd, SvdFactors};

use crate::error::{Error, Result};
use crate::matio::{SignMatrix, WeightMatrix};

/// i.i.d. {±1} matrix, deterministic per rng state.
pub fn rademacher_matrix(rows: usize, cols: usize, rng: &mut RandomSource) -> Result<SignMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::config("rademacher_matrix: dimensions must be positive"));
    }
    let entries = (0..rows * cols).map(|_| rng.rademacher()).collect();
    SignMatrix::new(rows, cols, entries)
}

/// i.i.d. N(0, sigma^2) matrix, deterministic per rng state.
pub fn gaussian_matrix(
    rows: usize,
    cols: usize,
    sigma: f64,
    rng: &mut RandomSource,
) -> Result<WeightMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::config("gaussian_matrix: dimensions must be positive"));
    }
    if !(sigma > 0.0) {
        return Err(Error::config("gaussian_matrix: sigma must be positive"));
    }
    let data = (0..rows * cols)
        .map(|_| (sigma * rng.normal()) as f32)
        .collect();
    WeightMatrix::new("gaussian", rows, cols, data)
}

/// i.i.d. Uniform[lo, hi) matrix, deterministic per rng state.
pub fn uniform_matrix(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut RandomSource,
) -> Result<WeightMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::config("uniform_matrix: dimensions must be positive"));
    }
    if !(lo < hi) {
        return Err(Error::config("uniform_matrix: requires lo < hi"));
    }
    let data = (0..rows * cols)
        .map(|_| rng.uniform_in(lo, hi) as f32)
        .collect();
    WeightMatrix::new("uniform", rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic_per_seed() {
        let mut a = RandomSource::new(7);
        let mut b = RandomSource::new(7);
        let ra = rademacher_matrix(8, 9, &mut a).unwrap();
        let rb = rademacher_matrix(8, 9, &mut b).unwrap();
        assert_eq!(ra.entries, rb.entries);
        let ga = gaussian_matrix(5, 5, 0.3, &mut a).unwrap();
        let gb = gaussian_matrix(5, 5, 0.3, &mut b).unwrap();
        assert_eq!(ga.data, gb.data);
        let ua = uniform_matrix(5, 5, -1.0, 1.0, &mut a).unwrap();
        let ub = uniform_matrix(5, 5, -1.0, 1.0, &mut b).unwrap();
        assert_eq!(ua.data, ub.data);
    }

    #[test]
    fn rademacher_mean_is_clt_small() {
        let mut rng = RandomSource::new(123);
        let m = rademacher_matrix(100, 1000, &mut rng).unwrap();
        let mean = m.entries.iter().map(|&s| s as f64).sum::<f64>() / 1e5;
        assert!(mean.abs() < 3.0 * (1.0f64 / 1e5).sqrt(), "mean={mean}");
    }

    #[test]
    fn gaussian_std_matches_paper_init_scale() {
        let mut rng = RandomSource::new(5);
        let m = gaussian_matrix(100, 1000, 0.02, &mut rng).unwrap();
        let n = m.data.len() as f64;
        let mean = m.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = m.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!((std - 0.02).abs() < 0.05 * 0.02, "std={std}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut rng = RandomSource::new(0);
        assert!(gaussian_matrix(2, 2, 0.0, &mut rng).is_err());
        assert!(uniform_matrix(2, 2, 1.0, 1.0, &mut rng).is_err());
        assert!(rademacher_matrix(0, 2, &mut rng).is_err());
    }
}
