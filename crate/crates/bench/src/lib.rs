//! Input generators shared by the benchmarks.

use qcontour_core::QrProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random linear quantile regression problem with an intercept column.
pub fn random_problem(n: usize, p: usize, tau: f64, seed: u64) -> QrProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut design = Vec::with_capacity(n * p);
    let mut response = Vec::with_capacity(n);
    for _ in 0..n {
        let mut lin = 0.0;
        for j in 0..p {
            let v: f64 = if j == 0 {
                1.0
            } else {
                rng.sample(StandardNormal)
            };
            lin += v;
            design.push(v);
        }
        let e: f64 = rng.sample(StandardNormal);
        response.push(lin + e);
    }
    QrProblem::new(design, p, response, tau).expect("valid problem")
}

/// Evenly spaced evaluation points on `[lo, hi]`.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
