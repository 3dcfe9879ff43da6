//! Seeded random generation of matrices, kernels and problems.
//!
//! Every sampler draws from [`SplitMix64`], so a seed fixes all probes,
//! sweeps and test corpora bit-for-bit across platforms.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
pub use rand_xoshiro::SplitMix64;

use crate::lqr::{Kernel, LqrProblem};
use crate::matlin::{spectral_norm, Mat, SymMat};

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Entries uniform in `[lo, hi)`.
pub fn uniform_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Mat {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Mat::from_col_major(rows, cols, data).expect("positive dims")
}

pub fn gaussian_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Mat::from_col_major(rows, cols, data).expect("positive dims")
}

/// Random symmetric matrix with unit Frobenius norm.
pub fn unit_symmetric<R: Rng>(rng: &mut R, n: usize) -> SymMat {
    loop {
        let s = SymMat::symmetrize(&gaussian_mat(rng, n, n));
        let norm = s.frob_norm();
        if norm > 1e-12 {
            return s.scale(1.0 / norm);
        }
    }
}

/// Random positive semidefinite matrix `G G^T` with unit Frobenius norm.
pub fn unit_psd<R: Rng>(rng: &mut R, n: usize) -> SymMat {
    loop {
        let g = gaussian_mat(rng, n, n);
        let s = SymMat::symmetrize(&g.matmul(&g.transpose()));
        let norm = s.frob_norm();
        if norm > 1e-12 {
            return s.scale(1.0 / norm);
        }
    }
}

/// `G G^T + shift I` with Gaussian `G`, scaled by `scale`.
pub fn random_pd<R: Rng>(rng: &mut R, n: usize, scale: f64, shift: f64) -> SymMat {
    let g = gaussian_mat(rng, n, n);
    let s = &g.matmul(&g.transpose()).scale(1.0 / n as f64) + &Mat::identity(n).scale(shift);
    SymMat::symmetrize(&s).scale(scale)
}

/// Random PSD kernel with Frobenius norm drawn uniformly in `[0, max_norm)`.
pub fn random_psd_kernel<R: Rng>(rng: &mut R, n: usize, max_norm: f64) -> Kernel {
    let t = rng.random_range(0.0..max_norm);
    Kernel::new(unit_psd(rng, n).scale(t))
}

/// Problem with Gaussian dynamics (generically controllable, hence
/// stabilizable), `Q = G G^T/n + 0.1 I` and `R = H H^T/m + 0.5 I`.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, m: usize) -> LqrProblem {
    let a = gaussian_mat(rng, n, n).scale(1.0 / (n as f64).sqrt());
    let b = gaussian_mat(rng, n, m);
    let q = random_pd(rng, n, 1.0, 0.1);
    let r = random_pd(rng, m, 1.0, 0.5);
    LqrProblem::from_mats(a, b, q.into_mat(), r.into_mat()).expect("valid random problem")
}

/// Problem with `||A||_2 < 1`: a Gaussian `A` rescaled so that its spectral
/// norm is uniform in `[0.1, 0.95)`.
pub fn random_contractive_problem<R: Rng>(rng: &mut R, n: usize, m: usize) -> LqrProblem {
    let a = gaussian_mat(rng, n, n);
    let target = rng.random_range(0.1..0.95);
    let norm = spectral_norm(&a).expect("finite matrix");
    let a = a.scale(target / norm.max(1e-12));
    let b = gaussian_mat(rng, n, m);
    let q = random_pd(rng, n, 1.0, 0.0);
    let r = random_pd(rng, m, 1.0, 0.5);
    LqrProblem::from_mats(a, b, q.into_mat(), r.into_mat()).expect("valid random problem")
}
