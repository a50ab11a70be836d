#![allow(dead_code)]

use chebpd::{AgentTerms, NonsmoothTerm, Problem, SmoothTerm};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `n` agents with `rows x d` Gaussian least-squares terms scaled to unit-ish
/// Lipschitz constants, each plus `l1 * ||x||_1`.
pub fn random_lasso(n: usize, d: usize, rows: usize, l1: f64, seed: u64) -> Problem {
    let mut rng = rng(seed);
    let scale = 1.0 / ((rows + d) as f64).sqrt();
    let agents = (0..n)
        .map(|_| {
            let a = gaussian_matrix(&mut rng, rows, d) * scale;
            let b = DVector::from_fn(rows, |_, _| rng.sample::<f64, _>(StandardNormal));
            AgentTerms {
                smooth: SmoothTerm::quadratic(a, b).unwrap(),
                nonsmooth: if l1 > 0.0 {
                    NonsmoothTerm::l1(l1).unwrap()
                } else {
                    NonsmoothTerm::Zero
                },
            }
        })
        .collect();
    Problem::new(d, agents).unwrap()
}

/// Same as [`random_lasso`] but every agent is boxed to `[-0.3, 0.3]^d`.
pub fn random_boxed(n: usize, d: usize, rows: usize, seed: u64) -> Problem {
    let base = random_lasso(n, d, rows, 0.0, seed);
    let agents = base
        .agents()
        .iter()
        .map(|t| AgentTerms {
            smooth: t.smooth.clone(),
            nonsmooth: NonsmoothTerm::boxed(DVector::from_element(d, -0.3), DVector::from_element(d, 0.3)).unwrap(),
        })
        .collect();
    Problem::new(d, agents).unwrap()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
