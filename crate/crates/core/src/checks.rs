//! Reduced-budget self-checks behind the `check` command: simulator
//! oracle, conditional-sampler calibration, multimodal mixing, and chain
//! convergence of an existing fit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::footprint::{kernel_mass_within, weighted_quantiles, KernelParams, RhInterpolation, RhVector, SimSettings};
use crate::geom::Coord;
use crate::ingest::{FocalArea, GeoPoint};
use crate::model::{log_posterior_full, FullModelState, Hierarchy, Hyperparams, ModelData};
use crate::samplers::gibbs::{beta_conditional, sigma2_ell_conditional};
use crate::samplers::{gibbs_update_alpha_beta, gibbs_update_mu_sigma_ell, gibbs_update_tau2};
use crate::samplers::{Diagnostics, RamKernel, RwmKernel};
use crate::stats::{sample_inv_gamma, sample_normal, sorted_copy};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckLine {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Closed-form kernel mass against radial quadrature.
pub fn kernel_mass_check(kernel: &KernelParams, r: f64) -> CheckLine {
    let steps = 100_000;
    let dr = r / steps as f64;
    let s2 = kernel.sigma_f * kernel.sigma_f;
    let numeric: f64 = (0..steps)
        .map(|i| {
            let t = (i as f64 + 0.5) * dr;
            t / s2 * (-0.5 * t * t / s2).exp() * dr
        })
        .sum();
    let closed = kernel_mass_within(r, kernel);
    CheckLine::new(
        "kernel mass",
        (closed - numeric).abs() < 1e-8,
        format!("mass within {r} m = {closed:.6} (quadrature {numeric:.6})"),
    )
}

/// Weighted quantiles against replicating each height by its integer
/// weight and reading plain order statistics.
pub fn weighted_rh_oracle(n_clouds: usize, seed: u64) -> CheckLine {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let percentiles: Vec<f64> = (1..=99).map(f64::from).collect();
    let mut mismatches = 0;
    for _ in 0..n_clouds {
        let k = rng.random_range(1..=12);
        let pairs: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.random_range(0..40) as f64 * 0.5, rng.random_range(1..=9) as f64))
            .collect();
        let got = weighted_quantiles(&pairs, &percentiles, RhInterpolation::None).expect("positive weights");
        let mut replicated: Vec<f64> = pairs
            .iter()
            .flat_map(|&(h, w)| std::iter::repeat_n(h, w as usize))
            .collect();
        replicated = sorted_copy(&replicated);
        let total = replicated.len();
        let want: Vec<f64> = percentiles
            .iter()
            .map(|&p| {
                // smallest order statistic k with 100 k >= p * total
                let k = ((p * total as f64) / 100.0).ceil().max(1.0) as usize;
                replicated[k - 1]
            })
            .collect();
        mismatches += usize::from(got != want);
    }
    CheckLine::new(
        "weighted RH oracle",
        mismatches == 0,
        format!("{mismatches} of {n_clouds} random clouds differ from the replication oracle"),
    )
}

/// Largest gap between the empirical CDF of `draws` and the CDF obtained
/// by trapezoid integration of `exp(log_density)` over `[lo, hi]`.
pub fn ks_against_grid(draws: &[f64], log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize) -> f64 {
    let h = (hi - lo) / (nodes - 1) as f64;
    let xs: Vec<f64> = (0..nodes).map(|i| lo + i as f64 * h).collect();
    let lds: Vec<f64> = xs.iter().map(|&x| log_density(x)).collect();
    let top = lds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lds.iter().map(|l| (l - top).exp()).collect();
    let mut cdf = vec![0.0; nodes];
    for i in 1..nodes {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let total = cdf[nodes - 1];
    let eval = |x: f64| {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let t = (x - lo) / h;
        let i = (t.floor() as usize).min(nodes - 2);
        let f = t - i as f64;
        (cdf[i] + f * (cdf[i + 1] - cdf[i])) / total
    };
    let sorted = sorted_copy(draws);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = eval(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// One-area, one-metric toy used for calibration.
pub fn calibration_toy() -> (ModelData, FullModelState, Hyperparams) {
    let mut pts = Vec::new();
    for i in 0..30 {
        for j in 0..30 {
            let (x, y) = (20.0 + i as f64, 20.0 + j as f64);
            pts.push(GeoPoint::new(x, y, ((x * 0.37).sin() + 1.2) * (y * 0.11 + 1.0) * 3.0));
        }
    }
    let rh = RhVector::new(vec![75.0], vec![14.0]).expect("valid");
    let area = FocalArea::from_local("toy", pts, rh);
    let settings = SimSettings {
        percentiles: vec![75.0],
        ..SimSettings::default()
    };
    let data = ModelData::new(&[area], settings, None).expect("toy data");
    let hyper = Hyperparams::default();
    let state = FullModelState {
        alpha: vec![1.5],
        beta: vec![0.8],
        tau2: vec![2.0],
        ell: vec![Coord::new(37.0, 33.5)],
        mu_ell: Coord::new(36.0, 34.0),
        sigma2_ell: [20.0, 30.0],
    };
    (data, state, hyper)
}

/// KS distance of each conditional sampler against grid integration of
/// the joint log posterior along that coordinate.
pub fn gibbs_calibration(draws: usize, threshold: f64, seed: u64) -> Vec<CheckLine> {
    let (data, st, hyper) = calibration_toy();
    let g = [data.g(0, st.ell[0]).expect("toy footprint")];
    let obs = &data.observed;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let lp = |f: &dyn Fn(&mut FullModelState)| {
        let mut s = st.clone();
        f(&mut s);
        log_posterior_full(&s, &data, &hyper, Hierarchy::Pooled)
    };
    let nodes = 40_001;
    let mut lines = Vec::new();
    let mut push = |name: &str, d: f64| {
        lines.push(CheckLine::new(
            format!("gibbs calibration {name}"),
            d <= threshold,
            format!("KS {d:.4} over {draws} draws (limit {threshold})"),
        ))
    };

    let alpha: Vec<f64> = (0..draws)
        .map(|_| {
            let (mut a, mut b) = (st.alpha.clone(), st.beta.clone());
            gibbs_update_alpha_beta(&mut a, &mut b, &st.tau2, obs, &g, &hyper, &mut rng);
            a[0]
        })
        .collect();
    push("alpha", ks_against_grid(&alpha, |x| lp(&|s| s.alpha[0] = x), -30.0, 30.0, nodes));

    let (m, v) = beta_conditional(0, st.alpha[0], st.tau2[0], obs, &g, &hyper);
    let beta: Vec<f64> = (0..draws).map(|_| sample_normal(&mut rng, m, v)).collect();
    push("beta", ks_against_grid(&beta, |x| lp(&|s| s.beta[0] = x), -10.0, 10.0, nodes));

    let tau2: Vec<f64> = (0..draws)
        .map(|_| {
            let mut t = st.tau2.clone();
            gibbs_update_tau2(&mut t, &st.alpha, &st.beta, obs, &g, &hyper, &mut rng);
            t[0]
        })
        .collect();
    push("tau2", ks_against_grid(&tau2, |x| lp(&|s| s.tau2[0] = x), 1e-9, 2000.0, 400_001));

    let mu: Vec<f64> = (0..draws)
        .map(|_| {
            let (mut mu, mut s2) = (st.mu_ell, st.sigma2_ell);
            gibbs_update_mu_sigma_ell(&mut mu, &mut s2, &st.ell, &hyper, &mut rng);
            mu.x
        })
        .collect();
    push("mu_ell", ks_against_grid(&mu, |x| lp(&|s| s.mu_ell.x = x), 0.0, 70.0, nodes));

    let (a, b) = sigma2_ell_conditional(0, &st.ell, st.mu_ell.x, &hyper);
    let s2: Vec<f64> = (0..draws).map(|_| sample_inv_gamma(&mut rng, a, b)).collect();
    push(
        "sigma2_ell",
        ks_against_grid(&s2, |x| lp(&|s| s.sigma2_ell[0] = x), 1e-9, 100_000.0, 400_001),
    );
    lines
}

/// Three unit-variance modes with weights 0.5/0.3/0.2, pairwise 8 m apart.
pub fn three_mode_mixture() -> ([Coord; 3], [f64; 3]) {
    let h = 8.0 * 3f64.sqrt() / 2.0;
    (
        [Coord::new(0.0, 0.0), Coord::new(8.0, 0.0), Coord::new(4.0, h)],
        [0.5, 0.3, 0.2],
    )
}

fn occupancy(draws: usize, start: Coord, mut step: impl FnMut(Coord) -> Coord) -> [f64; 3] {
    let (modes, _) = three_mode_mixture();
    let mut counts = [0usize; 3];
    let mut x = start;
    for _ in 0..draws {
        x = step(x);
        let k = (0..3)
            .min_by(|&a, &b| x.dist2(modes[a]).total_cmp(&x.dist2(modes[b])))
            .expect("three modes");
        counts[k] += 1;
    }
    counts.map(|c| c as f64 / draws as f64)
}

/// Mode occupancy of RAM and random-walk Metropolis at the same proposal
/// scale and draw count, started in the lightest mode; one entry per
/// replicate.
pub fn mixture_occupancy(draws: usize, scale: f64, replicates: usize, seed: u64) -> Vec<([f64; 3], [f64; 3])> {
    let (modes, w) = three_mode_mixture();
    let target = move |c: Coord| {
        modes
            .iter()
            .zip(&w)
            .map(|(m, w)| w * (-0.5 * c.dist2(*m)).exp())
            .sum::<f64>()
            .ln()
    };
    (0..replicates)
        .map(|r| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let ram = RamKernel::new(scale, 1e-8);
            let ram_occ = occupancy(draws, modes[2], |x| ram.step(x, target, &mut rng).state);
            let rwm = RwmKernel { step: scale };
            let rwm_occ = occupancy(draws, modes[2], |x| rwm.step(x, target, &mut rng).state);
            (ram_occ, rwm_occ)
        })
        .collect()
}

pub fn max_occupancy_error(occ: &[f64; 3]) -> f64 {
    let (_, w) = three_mode_mixture();
    occ.iter().zip(&w).map(|(o, w)| (o - w).abs()).fold(0.0, f64::max)
}

pub fn ram_mixing_check(draws: usize, replicates: usize, seed: u64) -> CheckLine {
    let runs = mixture_occupancy(draws, 1.5, replicates, seed);
    let ram_worst = runs.iter().map(|r| max_occupancy_error(&r.0)).fold(0.0, f64::max);
    let rwm_worst = runs.iter().map(|r| max_occupancy_error(&r.1)).fold(0.0, f64::max);
    CheckLine::new(
        "RAM mode occupancy",
        ram_worst <= 0.05,
        format!("worst occupancy error over {replicates} runs: RAM {ram_worst:.3}, random walk {rwm_worst:.3} (limit 0.05)"),
    )
}

/// R-hat of every parameter below the threshold.
pub fn convergence_check(label: &str, diag: &Diagnostics) -> CheckLine {
    let bad: Vec<&String> = diag
        .rhat
        .iter()
        .filter(|(_, r)| r.is_some_and(|r| r > diag.rhat_threshold))
        .map(|(k, _)| k)
        .collect();
    let detail = match diag.max_rhat {
        Some(r) => format!("max R-hat {r:.4} ({} above {})", bad.len(), diag.rhat_threshold),
        None => "R-hat unavailable (need at least 2 chains)".to_string(),
    };
    CheckLine::new(format!("{label} convergence"), bad.is_empty(), detail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suites_pass() {
        assert!(kernel_mass_check(&KernelParams::default(), 12.5).passed);
        assert!(weighted_rh_oracle(200, 3).passed);
        for line in gibbs_calibration(20_000, 0.03, 5) {
            assert!(line.passed, "{line}");
        }
    }

    #[test]
    fn ks_detects_wrong_distribution() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..5000).map(|_| sample_normal(&mut rng, 0.5, 1.0)).collect();
        let d_right = ks_against_grid(&draws, |x| -0.5 * (x - 0.5).powi(2), -10.0, 10.0, 20_001);
        let d_wrong = ks_against_grid(&draws, |x| -0.5 * x * x, -10.0, 10.0, 20_001);
        assert!(d_right < 0.03);
        assert!(d_wrong > 0.1);
    }
}
