//! Split R-hat and effective sample size on well-mixed and stuck chains.
//!
//! cargo run --release --example convergence_diagnostics

use lidar_geoloc::samplers::diagnostics::{effective_sample_size, split_rhat};
use lidar_geoloc::samplers::RHAT_THRESHOLD;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn ar1(phi: f64, n: usize, start: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = start;
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = phi * x + (1.0 - phi * phi).sqrt() * e;
            x
        })
        .collect()
}

fn report(label: &str, chains: &[Vec<f64>]) {
    let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
    let rhat = split_rhat(&refs).unwrap_or(f64::NAN);
    let ess = effective_sample_size(&refs).unwrap_or(f64::NAN);
    let verdict = if rhat <= RHAT_THRESHOLD { "ok" } else { "not converged" };
    println!("{label:<28} R-hat {rhat:.3}  ESS {ess:8.0}  {verdict}");
}

fn main() {
    let n = 5_000;
    report("independent draws", &(0..4).map(|s| ar1(0.0, n, 0.0, s)).collect::<Vec<_>>());
    report("AR(1), phi = 0.9", &(0..4).map(|s| ar1(0.9, n, 0.0, s)).collect::<Vec<_>>());
    report("AR(1), phi = 0.999, spread", &(0..4).map(|s| ar1(0.999, n, 10.0 * s as f64, s)).collect::<Vec<_>>());
}
