//! Log densities of the full (per-footprint location) model and the
//! shared-offset submodel.
//!
//! Observed metric `j` at area `i` is Normal with mean
//! `alpha_j + beta_j * g_j(location)` and variance `tau2_j`. Locations
//! carry a bounded support of [`SEARCH_BOUND`] meters around the reported
//! center; outside it every density below is `-inf`.

mod data;

pub use data::{ModelData, Sim, SimCache};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{within_bound, Coord, LOCAL_CENTER, SEARCH_BOUND};
use crate::stats::{ln_inv_gamma, ln_normal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub mu_alpha: f64,
    pub sigma2_alpha: f64,
    pub mu_beta: f64,
    pub sigma2_beta: f64,
    pub a_tau: f64,
    pub b_tau: f64,
    /// Prior mean of the location hierarchy (the local reported center).
    pub s: Coord,
    pub sigma2_mu_ell: [f64; 2],
    pub a_ell: f64,
    pub b_ell: f64,
    pub sigma2_ell_star: [f64; 2],
    /// Per-axis prior variance of each location when the hierarchy is
    /// centered on the reported location instead of a pooled mean.
    pub sigma2_ell_fixed: [f64; 2],
    pub bound: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            mu_alpha: 0.0,
            sigma2_alpha: 1000.0,
            mu_beta: 1.0,
            sigma2_beta: 1000.0,
            a_tau: 2.0,
            b_tau: 10.0,
            s: LOCAL_CENTER,
            sigma2_mu_ell: [1000.0; 2],
            a_ell: 2.0,
            b_ell: 100.0,
            sigma2_ell_star: [1000.0; 2],
            sigma2_ell_fixed: [1000.0; 2],
            bound: SEARCH_BOUND,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let vars = [
            self.sigma2_alpha,
            self.sigma2_beta,
            self.sigma2_mu_ell[0],
            self.sigma2_mu_ell[1],
            self.sigma2_ell_star[0],
            self.sigma2_ell_star[1],
            self.sigma2_ell_fixed[0],
            self.sigma2_ell_fixed[1],
            self.b_tau,
            self.b_ell,
        ];
        if vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err("prior variances and inverse-gamma scales must be > 0".into());
        }
        if !(self.a_tau > 1.0 && self.a_ell > 1.0) {
            return Err("inverse-gamma shapes must exceed 1".into());
        }
        if !(self.bound > 0.0) {
            return Err("bound must be > 0".into());
        }
        Ok(())
    }
}

/// Prior on per-footprint locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hierarchy {
    /// Locations share an estimated mean and per-axis variance.
    #[default]
    Pooled,
    /// Each location is centered on its reported position with fixed variance.
    FixedCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullModelState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub tau2: Vec<f64>,
    pub ell: Vec<Coord>,
    pub mu_ell: Coord,
    pub sigma2_ell: [f64; 2],
}

impl FullModelState {
    /// The "no geolocation error" starting point.
    pub fn initial(n: usize, m: usize, hyper: &Hyperparams) -> Self {
        FullModelState {
            alpha: vec![0.0; m],
            beta: vec![1.0; m],
            tau2: vec![hyper.b_tau; m],
            ell: vec![hyper.s; n],
            mu_ell: hyper.s,
            sigma2_ell: [hyper.b_ell; 2],
        }
    }

    pub fn satisfies_invariants(&self, bound: f64) -> bool {
        self.ell.iter().all(|&l| within_bound(l, bound))
            && self.tau2.iter().all(|&t| t > 0.0)
            && self.sigma2_ell.iter().all(|&s| s > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubModelState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub tau2: Vec<f64>,
    pub ell_star: Coord,
}

impl SubModelState {
    pub fn initial(m: usize, hyper: &Hyperparams) -> Self {
        SubModelState {
            alpha: vec![0.0; m],
            beta: vec![1.0; m],
            tau2: vec![hyper.b_tau; m],
            ell_star: hyper.s,
        }
    }

    pub fn satisfies_invariants(&self, bound: f64) -> bool {
        within_bound(self.ell_star, bound) && self.tau2.iter().all(|&t| t > 0.0)
    }
}

/// Σ_j log N(z_j | α_j + β_j g_j, τ²_j) for one area.
pub fn area_log_likelihood(z: &[f64], g: &[f64], alpha: &[f64], beta: &[f64], tau2: &[f64]) -> f64 {
    (0..z.len())
        .map(|j| ln_normal(z[j], alpha[j] + beta[j] * g[j], tau2[j]))
        .sum()
}

/// -Σ_j r_j² / (2 τ²_j): the likelihood without its normalizing constant.
pub fn area_residual_kernel(z: &[f64], g: &[f64], alpha: &[f64], beta: &[f64], tau2: &[f64]) -> f64 {
    (0..z.len())
        .map(|j| {
            let r = z[j] - alpha[j] - beta[j] * g[j];
            -0.5 * r * r / tau2[j]
        })
        .sum()
}

fn empty_footprint(c: Coord, data: &ModelData) -> Error {
    Error::EmptyFootprint {
        x: c.x,
        y: c.y,
        radius: data.settings.kernel.radius,
    }
}

/// Full-model log likelihood. Terms are summed in area order.
pub fn log_likelihood_full(state: &FullModelState, data: &ModelData) -> Result<f64> {
    let mut total = 0.0;
    for (i, &l) in state.ell.iter().enumerate() {
        let g = data.g(i, l).ok_or_else(|| empty_footprint(l, data))?;
        total += area_log_likelihood(&data.observed[i], &g, &state.alpha, &state.beta, &state.tau2);
    }
    Ok(total)
}

pub fn log_likelihood_sub(state: &SubModelState, data: &ModelData) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..data.n() {
        let g = data
            .g(i, state.ell_star)
            .ok_or_else(|| empty_footprint(state.ell_star, data))?;
        total += area_log_likelihood(&data.observed[i], &g, &state.alpha, &state.beta, &state.tau2);
    }
    Ok(total)
}

fn adjustment_log_prior(alpha: &[f64], beta: &[f64], tau2: &[f64], h: &Hyperparams) -> f64 {
    let a: f64 = alpha.iter().map(|&x| ln_normal(x, h.mu_alpha, h.sigma2_alpha)).sum();
    let b: f64 = beta.iter().map(|&x| ln_normal(x, h.mu_beta, h.sigma2_beta)).sum();
    let t: f64 = tau2.iter().map(|&x| ln_inv_gamma(x, h.a_tau, h.b_tau)).sum();
    a + b + t
}

/// Log prior of the location block (locations and, when pooled, their
/// mean and variance hyperpriors).
pub fn location_log_prior(state: &FullModelState, hyper: &Hyperparams, hierarchy: Hierarchy) -> f64 {
    match hierarchy {
        Hierarchy::Pooled => {
            let mu = [state.mu_ell.x, state.mu_ell.y];
            let s = [hyper.s.x, hyper.s.y];
            let mut lp = 0.0;
            for l in &state.ell {
                lp += ln_normal(l.x, mu[0], state.sigma2_ell[0]);
                lp += ln_normal(l.y, mu[1], state.sigma2_ell[1]);
            }
            for k in 0..2 {
                lp += ln_normal(mu[k], s[k], hyper.sigma2_mu_ell[k]);
                lp += ln_inv_gamma(state.sigma2_ell[k], hyper.a_ell, hyper.b_ell);
            }
            lp
        }
        Hierarchy::FixedCenter => state
            .ell
            .iter()
            .map(|l| {
                ln_normal(l.x, hyper.s.x, hyper.sigma2_ell_fixed[0])
                    + ln_normal(l.y, hyper.s.y, hyper.sigma2_ell_fixed[1])
            })
            .sum(),
    }
}

/// Unnormalized full-model log posterior; `-inf` outside the location
/// bound or when a location's footprint holds no returns.
pub fn log_posterior_full(
    state: &FullModelState,
    data: &ModelData,
    hyper: &Hyperparams,
    hierarchy: Hierarchy,
) -> f64 {
    if !state.ell.iter().all(|&l| within_bound(l, hyper.bound)) {
        return f64::NEG_INFINITY;
    }
    let Ok(ll) = log_likelihood_full(state, data) else {
        return f64::NEG_INFINITY;
    };
    ll + adjustment_log_prior(&state.alpha, &state.beta, &state.tau2, hyper)
        + location_log_prior(state, hyper, hierarchy)
}

pub fn log_posterior_sub(state: &SubModelState, data: &ModelData, hyper: &Hyperparams) -> f64 {
    if !within_bound(state.ell_star, hyper.bound) {
        return f64::NEG_INFINITY;
    }
    let Ok(ll) = log_likelihood_sub(state, data) else {
        return f64::NEG_INFINITY;
    };
    let prior = ln_normal(state.ell_star.x, hyper.s.x, hyper.sigma2_ell_star[0])
        + ln_normal(state.ell_star.y, hyper.s.y, hyper.sigma2_ell_star[1]);
    ll + adjustment_log_prior(&state.alpha, &state.beta, &state.tau2, hyper) + prior
}

/// Log density of location `i` at `ell` given everything else, up to a
/// constant that does not depend on `ell`. Maximum value is 0.
pub fn ell_conditional_kernel(
    i: usize,
    ell: Coord,
    state: &FullModelState,
    data: &ModelData,
    hyper: &Hyperparams,
    hierarchy: Hierarchy,
) -> f64 {
    if !within_bound(ell, hyper.bound) {
        return f64::NEG_INFINITY;
    }
    let Some(g) = data.g(i, ell) else {
        return f64::NEG_INFINITY;
    };
    let (mean, var) = match hierarchy {
        Hierarchy::Pooled => (state.mu_ell, state.sigma2_ell),
        Hierarchy::FixedCenter => (hyper.s, hyper.sigma2_ell_fixed),
    };
    let dx = ell.x - mean.x;
    let dy = ell.y - mean.y;
    area_residual_kernel(&data.observed[i], &g, &state.alpha, &state.beta, &state.tau2)
        - 0.5 * dx * dx / var[0]
        - 0.5 * dy * dy / var[1]
}

/// Log density of the shared offset at `ell` given everything else, up
/// to a constant. Area terms are evaluated by `sims`, which must return
/// one entry per area in order.
pub fn ell_star_conditional_kernel(
    ell: Coord,
    alpha: &[f64],
    beta: &[f64],
    tau2: &[f64],
    sims: &[Sim],
    data: &ModelData,
    hyper: &Hyperparams,
) -> f64 {
    if !within_bound(ell, hyper.bound) {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for (i, g) in sims.iter().enumerate() {
        let Some(g) = g else {
            return f64::NEG_INFINITY;
        };
        total += area_residual_kernel(&data.observed[i], g, alpha, beta, tau2);
    }
    let dx = ell.x - hyper.s.x;
    let dy = ell.y - hyper.s.y;
    total - 0.5 * dx * dx / hyper.sigma2_ell_star[0] - 0.5 * dy * dy / hyper.sigma2_ell_star[1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footprint::{RhVector, SimSettings};
    use crate::ingest::{FocalArea, GeoPoint};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn one_point_area(z_obs: f64, tree: f64) -> FocalArea {
        let rh = RhVector::new(vec![50.0], vec![z_obs]).unwrap();
        FocalArea::from_local("a", vec![GeoPoint::new(35.0, 35.0, tree)], rh)
    }

    fn settings() -> SimSettings {
        SimSettings {
            percentiles: vec![50.0],
            ..SimSettings::default()
        }
    }

    #[test]
    fn zero_residual_likelihood() {
        let data = ModelData::new(&[one_point_area(10.0, 10.0)], settings(), None).unwrap();
        let h = Hyperparams::default();
        let mut st = FullModelState::initial(1, 1, &h);
        st.tau2 = vec![1.0];
        let ll = log_likelihood_full(&st, &data).unwrap();
        assert_abs_diff_eq!(ll, -0.5 * (2.0 * PI).ln(), epsilon = 1e-12);

        let data = ModelData::new(&[one_point_area(13.0, 10.0)], settings(), None).unwrap();
        let ll3 = log_likelihood_full(&st, &data).unwrap();
        assert_abs_diff_eq!(ll - ll3, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn bound_violation_is_neg_infinity() {
        let data = ModelData::new(&[one_point_area(10.0, 10.0)], settings(), None).unwrap();
        let h = Hyperparams::default();
        let mut st = FullModelState::initial(1, 1, &h);
        st.ell[0] = Coord::new(35.0 + 22.6, 35.0);
        assert_eq!(log_posterior_full(&st, &data, &h, Hierarchy::Pooled), f64::NEG_INFINITY);
        st.ell[0] = Coord::new(35.0 + 22.5, 35.0);
        assert!(log_posterior_full(&st, &data, &h, Hierarchy::Pooled).is_finite());

        let mut sub = SubModelState::initial(1, &h);
        sub.ell_star = Coord::new(35.0, 35.0 - 22.6);
        assert_eq!(log_posterior_sub(&sub, &data, &h), f64::NEG_INFINITY);
    }

    #[test]
    fn empty_footprint_propagates() {
        let rh = RhVector::new(vec![50.0], vec![1.0]).unwrap();
        let area = FocalArea::from_local("e", vec![GeoPoint::new(0.0, 0.0, 3.0)], rh);
        let data = ModelData::new(&[area], settings(), None).unwrap();
        let h = Hyperparams::default();
        let mut st = FullModelState::initial(1, 1, &h);
        st.ell[0] = Coord::new(50.0, 50.0);
        assert!(matches!(log_likelihood_full(&st, &data), Err(Error::EmptyFootprint { .. })));
        assert_eq!(log_posterior_full(&st, &data, &h, Hierarchy::Pooled), f64::NEG_INFINITY);
    }

    #[test]
    fn percentile_mismatch_rejected() {
        let s = SimSettings {
            percentiles: vec![50.0, 98.0],
            ..SimSettings::default()
        };
        assert!(matches!(
            ModelData::new(&[one_point_area(1.0, 1.0)], s, None),
            Err(Error::PercentileMismatch { .. })
        ));
    }

    #[test]
    fn cache_snaps_to_lattice() {
        let pts = (0..50).map(|k| GeoPoint::new(35.0 + k as f64 * 0.3, 35.0, k as f64)).collect();
        let rh = RhVector::new(vec![50.0], vec![1.0]).unwrap();
        let area = FocalArea::from_local("c", pts, rh);
        let exact = ModelData::new(std::slice::from_ref(&area), settings(), None).unwrap();
        let cached = ModelData::new(&[area], settings(), Some(0.1)).unwrap();
        let c = Coord::new(37.04, 35.02);
        assert_eq!(cached.g(0, c), exact.g(0, Coord::new(37.0, 35.0)));
        assert_eq!(cached.g(0, Coord::new(36.96, 34.98)), cached.g(0, c));
        assert_eq!(cached.cache_entries(), 1);
    }
}
