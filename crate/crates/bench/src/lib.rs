//! Fixtures shared by the benchmarks.

use chebpd::{AgentTerms, NonsmoothTerm, Problem, SmoothTerm};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `n` agents holding `rows x d` Gaussian least-squares terms plus `l1 ||x||_1`.
pub fn lasso(n: usize, d: usize, rows: usize, l1: f64, seed: u64) -> Problem {
    let mut rng = rng(seed);
    let scale = 1.0 / ((rows + d) as f64).sqrt();
    let agents = (0..n)
        .map(|_| AgentTerms {
            smooth: SmoothTerm::quadratic(
                gaussian_matrix(&mut rng, rows, d) * scale,
                DVector::from_fn(rows, |_, _| rng.sample(StandardNormal)),
            )
            .expect("shapes agree"),
            nonsmooth: NonsmoothTerm::l1(l1).expect("valid weight"),
        })
        .collect();
    Problem::new(d, agents).expect("consistent dimensions")
}
