//! Closed-form full conditionals.
//!
//! `g` holds the current simulator output per area (one `m`-vector each).
//! With no areas every conditional collapses to its prior.

use rand::Rng;

use crate::geom::Coord;
use crate::model::Hyperparams;
use crate::stats::{sample_inv_gamma, sample_normal};

/// Mean and variance of `alpha_j` given `beta_j` and `tau2_j`.
pub fn alpha_conditional<G: AsRef<[f64]>>(
    j: usize,
    beta_j: f64,
    tau2_j: f64,
    observed: &[Vec<f64>],
    g: &[G],
    hyper: &Hyperparams,
) -> (f64, f64) {
    let n = observed.len() as f64;
    let precision = 1.0 / hyper.sigma2_alpha + n / tau2_j;
    let sum: f64 = observed
        .iter()
        .zip(g)
        .map(|(z, g)| z[j] - beta_j * g.as_ref()[j])
        .sum();
    let var = 1.0 / precision;
    (var * (hyper.mu_alpha / hyper.sigma2_alpha + sum / tau2_j), var)
}

/// Mean and variance of `beta_j` given `alpha_j` and `tau2_j`.
pub fn beta_conditional<G: AsRef<[f64]>>(
    j: usize,
    alpha_j: f64,
    tau2_j: f64,
    observed: &[Vec<f64>],
    g: &[G],
    hyper: &Hyperparams,
) -> (f64, f64) {
    let (sgg, sgz) = observed.iter().zip(g).fold((0.0, 0.0), |(sgg, sgz), (z, g)| {
        let gj = g.as_ref()[j];
        (sgg + gj * gj, sgz + gj * (z[j] - alpha_j))
    });
    let precision = 1.0 / hyper.sigma2_beta + sgg / tau2_j;
    let var = 1.0 / precision;
    (var * (hyper.mu_beta / hyper.sigma2_beta + sgz / tau2_j), var)
}

/// Inverse-gamma shape and scale of `tau2_j`.
pub fn tau2_conditional<G: AsRef<[f64]>>(
    j: usize,
    alpha_j: f64,
    beta_j: f64,
    observed: &[Vec<f64>],
    g: &[G],
    hyper: &Hyperparams,
) -> (f64, f64) {
    let ss: f64 = observed
        .iter()
        .zip(g)
        .map(|(z, g)| {
            let r = z[j] - alpha_j - beta_j * g.as_ref()[j];
            r * r
        })
        .sum();
    (hyper.a_tau + observed.len() as f64 / 2.0, hyper.b_tau + 0.5 * ss)
}

fn axis(c: &Coord, k: usize) -> f64 {
    if k == 0 {
        c.x
    } else {
        c.y
    }
}

/// Mean and variance of the pooled location mean on axis `k`.
pub fn mu_ell_conditional(k: usize, ell: &[Coord], sigma2_k: f64, hyper: &Hyperparams) -> (f64, f64) {
    let n = ell.len() as f64;
    let precision = 1.0 / hyper.sigma2_mu_ell[k] + n / sigma2_k;
    let var = 1.0 / precision;
    let sum: f64 = ell.iter().map(|c| axis(c, k)).sum();
    (var * (axis(&hyper.s, k) / hyper.sigma2_mu_ell[k] + sum / sigma2_k), var)
}

/// Inverse-gamma shape and scale of the pooled location variance on axis `k`.
pub fn sigma2_ell_conditional(k: usize, ell: &[Coord], mu_k: f64, hyper: &Hyperparams) -> (f64, f64) {
    let ss: f64 = ell.iter().map(|c| (axis(c, k) - mu_k).powi(2)).sum();
    (hyper.a_ell + ell.len() as f64 / 2.0, hyper.b_ell + 0.5 * ss)
}

/// For each metric, draws `alpha_j | beta_j` then `beta_j | alpha_j`.
pub fn gibbs_update_alpha_beta<G: AsRef<[f64]>, R: Rng + ?Sized>(
    alpha: &mut [f64],
    beta: &mut [f64],
    tau2: &[f64],
    observed: &[Vec<f64>],
    g: &[G],
    hyper: &Hyperparams,
    rng: &mut R,
) {
    for j in 0..alpha.len() {
        let (m, v) = alpha_conditional(j, beta[j], tau2[j], observed, g, hyper);
        alpha[j] = sample_normal(rng, m, v);
        let (m, v) = beta_conditional(j, alpha[j], tau2[j], observed, g, hyper);
        beta[j] = sample_normal(rng, m, v);
    }
}

pub fn gibbs_update_tau2<G: AsRef<[f64]>, R: Rng + ?Sized>(
    tau2: &mut [f64],
    alpha: &[f64],
    beta: &[f64],
    observed: &[Vec<f64>],
    g: &[G],
    hyper: &Hyperparams,
    rng: &mut R,
) {
    for j in 0..tau2.len() {
        let (a, b) = tau2_conditional(j, alpha[j], beta[j], observed, g, hyper);
        tau2[j] = sample_inv_gamma(rng, a, b);
    }
}

/// Per axis: draws the pooled mean given the variance, then the variance
/// given the new mean.
pub fn gibbs_update_mu_sigma_ell<R: Rng + ?Sized>(
    mu_ell: &mut Coord,
    sigma2_ell: &mut [f64; 2],
    ell: &[Coord],
    hyper: &Hyperparams,
    rng: &mut R,
) {
    let (m, v) = mu_ell_conditional(0, ell, sigma2_ell[0], hyper);
    mu_ell.x = sample_normal(rng, m, v);
    let (m, v) = mu_ell_conditional(1, ell, sigma2_ell[1], hyper);
    mu_ell.y = sample_normal(rng, m, v);
    for k in 0..2 {
        let (a, b) = sigma2_ell_conditional(k, ell, axis(mu_ell, k), hyper);
        sigma2_ell[k] = sample_inv_gamma(rng, a, b);
    }
}
