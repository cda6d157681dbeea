//! Test-side oracles, written independently of the library paths they check:
//! explicit-power factor assembly, dense multivariate-normal densities, and
//! seeded case generators.

#![allow(dead_code)]

use arcert::SystemMatrix;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Explicit powers A^0..A^{m-1}.
pub fn powers(a: &SystemMatrix, m: usize) -> Vec<DMatrix<f64>> {
    let d = a.dim();
    let mut out = vec![DMatrix::<f64>::identity(d, d)];
    for k in 1..m {
        let next = a.entries() * &out[k - 1];
        out.push(next);
    }
    out
}

/// The unit block-lower-triangular factor, assembled from explicit powers.
pub fn dense_factor(a: &SystemMatrix, n: usize) -> DMatrix<f64> {
    let d = a.dim();
    let pw = powers(a, n);
    let mut l = DMatrix::<f64>::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..=i {
            l.view_mut((i * d, j * d), (d, d)).copy_from(&pw[i - j]);
        }
    }
    l
}

/// Its banded inverse: identity diagonal, `-A` one block below.
pub fn dense_factor_inverse(a: &SystemMatrix, n: usize) -> DMatrix<f64> {
    let d = a.dim();
    let mut l = DMatrix::<f64>::identity(n * d, n * d);
    for i in 1..n {
        let mut block = l.view_mut((i * d, (i - 1) * d), (d, d));
        block.copy_from(a.entries());
        block.neg_mut();
    }
    l
}

/// Joint covariance via the test-side factor.
pub fn dense_sigma(a: &SystemMatrix, n: usize) -> DMatrix<f64> {
    let l = dense_factor(a, n);
    &l * l.transpose()
}

/// Log-determinant of a positive-definite matrix via Cholesky.
pub fn log_det_pd(m: DMatrix<f64>) -> f64 {
    let chol = Cholesky::new(m).expect("oracle matrix must be positive definite");
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|x| x.ln())
        .sum::<f64>()
}

/// Dense zero-mean multivariate-normal log-density at `z` (full formula,
/// including the log-determinant the banded path omits).
pub fn dense_log_density(z: &DVector<f64>, sigma: DMatrix<f64>) -> f64 {
    let dim = z.len() as f64;
    let chol = Cholesky::new(sigma).expect("oracle covariance must be positive definite");
    let log_det = 2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|x| x.ln())
        .sum::<f64>();
    let quad = z.dot(&chol.solve(z));
    -0.5 * (dim * std::f64::consts::TAU.ln() + log_det + quad)
}

/// `Σ_{k=1}^{i} A^{k-1}(A^{k-1})ᵀ` by explicit powers.
pub fn power_sum_covariance(a: &SystemMatrix, i: usize) -> DMatrix<f64> {
    let d = a.dim();
    let mut sum = DMatrix::<f64>::zeros(d, d);
    for p in powers(a, i) {
        sum += &p * p.transpose();
    }
    sum
}

pub fn spectral_radius(a: &SystemMatrix) -> f64 {
    a.entries()
        .complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, ev| m.max(ev.norm()))
}

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> SystemMatrix {
    let entries: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(lo..hi)).collect();
    SystemMatrix::from_row_slice(dim, &entries).unwrap()
}

/// Rejection-sample a matrix with spectral radius at most `rho_cap`, keeping
/// entries in `[lo, hi]`.
pub fn random_matrix_with_radius(
    rng: &mut ChaCha8Rng,
    dim: usize,
    lo: f64,
    hi: f64,
    rho_cap: f64,
) -> SystemMatrix {
    loop {
        let m = random_matrix(rng, dim, lo, hi);
        if spectral_radius(&m) <= rho_cap {
            return m;
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Delta-method standard error of the plug-in entropy of a count vector.
pub fn entropy_se(counts: &[u64]) -> f64 {
    let t: u64 = counts.iter().sum();
    let t = t as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum();
    let second: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            p * p.ln() * p.ln()
        })
        .sum();
    ((second - h * h).max(0.0) / t).sqrt()
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
