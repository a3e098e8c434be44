//! Footprint simulator: relative-height (RH) metrics at an arbitrary
//! candidate center, from Gaussian-weighted point-cloud returns.
//!
//! Heights are read off the weighted empirical CDF of the returns inside
//! the capture radius. Weights are renormalized over the retained points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Coord;
use crate::ingest::{FocalArea, GeoPoint};

/// RH percentiles 50, 55, ..., 95 and 98.
pub const DEFAULT_PERCENTILES: [f64; 11] = [
    50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0, 85.0, 90.0, 95.0, 98.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    /// Gaussian decay parameter, meters.
    pub sigma_f: f64,
    /// Capture radius, meters.
    pub radius: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            sigma_f: 5.5,
            radius: 25.0,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return Err(format!("sigma_f must be > 0, got {}", self.sigma_f));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(format!("radius must be > 0, got {}", self.radius));
        }
        Ok(())
    }
}

/// How an RH value is read off the weighted CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhInterpolation {
    /// Height of the first return whose cumulative weight reaches p/100.
    #[default]
    None,
    /// Linear interpolation between that return and the previous one.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhVector {
    pub percentiles: Vec<f64>,
    pub values: Vec<f64>,
}

impl RhVector {
    pub fn new(percentiles: Vec<f64>, values: Vec<f64>) -> std::result::Result<Self, String> {
        if percentiles.is_empty() {
            return Err("at least one percentile is required".into());
        }
        if percentiles.len() != values.len() {
            return Err(format!(
                "{} percentiles but {} values",
                percentiles.len(),
                values.len()
            ));
        }
        validate_percentiles(&percentiles)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err("RH values must be finite".into());
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err("RH values must be nondecreasing across percentiles".into());
        }
        Ok(RhVector {
            percentiles,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn validate_percentiles(p: &[f64]) -> std::result::Result<(), String> {
    if p.iter().any(|&v| !(v > 0.0 && v <= 100.0)) {
        return Err("percentiles must lie in (0, 100]".into());
    }
    if p.windows(2).any(|w| w[1] <= w[0]) {
        return Err("percentiles must be strictly increasing".into());
    }
    Ok(())
}

/// Gaussian footprint weight of `point` for a footprint centered at `center`.
pub fn kernel_weight(point: &GeoPoint, center: Coord, params: &KernelParams) -> f64 {
    let d2 = point.xy().dist2(center);
    gaussian_weight(d2, params.sigma_f)
}

#[inline]
fn gaussian_weight(d2: f64, sigma_f: f64) -> f64 {
    (-0.5 * d2 / (sigma_f * sigma_f)).exp() / (sigma_f * (2.0 * PI).sqrt())
}

/// Fraction of a 2D isotropic Gaussian's mass within radius `r`.
pub fn kernel_mass_within(r: f64, params: &KernelParams) -> f64 {
    1.0 - (-0.5 * r * r / (params.sigma_f * params.sigma_f)).exp()
}

/// Weighted quantiles of `heights` (ascending) under `weights`, one per
/// percentile. Returns `None` when the total weight is not positive.
///
/// Under [`RhInterpolation::None`] the result for `p` is the first height
/// whose cumulative weight reaches `p/100` of the total. The comparison is
/// done as `100·cum >= p·total` up to the rounding that summation can
/// accumulate (`n·ε·total`), so equal or integer weights give exact order
/// statistics even when the weights themselves are not representable.
pub fn weighted_quantiles_sorted(
    heights: &[f64],
    weights: &[f64],
    percentiles: &[f64],
    interpolation: RhInterpolation,
) -> Option<Vec<f64>> {
    debug_assert_eq!(heights.len(), weights.len());
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || heights.is_empty() {
        return None;
    }
    let slack = 100.0 * total * f64::EPSILON * heights.len() as f64;
    let mut out = Vec::with_capacity(percentiles.len());
    let mut cum = 0.0;
    let mut prev_cum = 0.0;
    let mut j = 0usize;
    for &p in percentiles {
        let target = p * total;
        while j < heights.len() && cum * 100.0 < target - slack {
            prev_cum = cum;
            cum += weights[j];
            j += 1;
        }
        // j is one past the selected return; j == 0 only when p * total <= 0
        let k = j.max(1) - 1;
        let v = match interpolation {
            RhInterpolation::None => heights[k],
            RhInterpolation::Linear => {
                if k == 0 || cum <= prev_cum {
                    heights[k]
                } else {
                    let frac = ((target / 100.0 - prev_cum) / (cum - prev_cum)).clamp(0.0, 1.0);
                    heights[k - 1] + (heights[k] - heights[k - 1]) * frac
                }
            }
        };
        out.push(v);
    }
    Some(out)
}

/// Weighted quantiles of unsorted `(height, weight)` pairs.
pub fn weighted_quantiles(
    pairs: &[(f64, f64)],
    percentiles: &[f64],
    interpolation: RhInterpolation,
) -> Option<Vec<f64>> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (h, w): (Vec<f64>, Vec<f64>) = sorted.into_iter().unzip();
    weighted_quantiles_sorted(&h, &w, percentiles, interpolation)
}

/// Everything the simulator needs besides the point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub kernel: KernelParams,
    pub percentiles: Vec<f64>,
    pub interpolation: RhInterpolation,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            kernel: KernelParams::default(),
            percentiles: DEFAULT_PERCENTILES.to_vec(),
            interpolation: RhInterpolation::None,
        }
    }
}

/// A focal area's returns, pre-sorted by height for repeated simulation.
#[derive(Debug, Clone)]
pub struct FootprintSimulator {
    xs: Vec<f64>,
    ys: Vec<f64>,
    zs: Vec<f64>,
}

impl FootprintSimulator {
    pub fn new(points: &[GeoPoint]) -> Self {
        let mut sorted = points.to_vec();
        sorted.sort_by(|a, b| a.z.total_cmp(&b.z));
        FootprintSimulator {
            xs: sorted.iter().map(|p| p.x).collect(),
            ys: sorted.iter().map(|p| p.y).collect(),
            zs: sorted.iter().map(|p| p.z).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.zs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zs.is_empty()
    }

    /// Simulated RH metrics for a footprint centered at `center`.
    pub fn rh_at(&self, center: Coord, settings: &SimSettings) -> Result<Vec<f64>> {
        let r2 = settings.kernel.radius * settings.kernel.radius;
        let sigma = settings.kernel.sigma_f;
        let mut heights = Vec::new();
        let mut weights = Vec::new();
        for k in 0..self.zs.len() {
            let dx = self.xs[k] - center.x;
            let dy = self.ys[k] - center.y;
            let d2 = dx * dx + dy * dy;
            if d2 <= r2 {
                heights.push(self.zs[k]);
                weights.push(gaussian_weight(d2, sigma));
            }
        }
        weighted_quantiles_sorted(&heights, &weights, &settings.percentiles, settings.interpolation)
            .ok_or(Error::EmptyFootprint {
                x: center.x,
                y: center.y,
                radius: settings.kernel.radius,
            })
    }
}

/// One-shot simulation over a focal area.
pub fn simulate_rh(area: &FocalArea, center: Coord, settings: &SimSettings) -> Result<RhVector> {
    let values = FootprintSimulator::new(&area.points).rh_at(center, settings)?;
    Ok(RhVector {
        percentiles: settings.percentiles.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn area(points: Vec<GeoPoint>) -> FocalArea {
        let rh = RhVector::new(vec![50.0], vec![0.0]).unwrap();
        FocalArea::from_local("t", points, rh)
    }

    fn settings(percentiles: &[f64]) -> SimSettings {
        SimSettings {
            percentiles: percentiles.to_vec(),
            ..SimSettings::default()
        }
    }

    #[test]
    fn weight_at_center_and_at_footprint_edge() {
        let k = KernelParams::default();
        let c = Coord::new(35.0, 35.0);
        assert_abs_diff_eq!(kernel_weight(&GeoPoint::new(35.0, 35.0, 1.0), c, &k), 0.0725349, epsilon = 1e-7);
        assert_abs_diff_eq!(kernel_weight(&GeoPoint::new(47.5, 35.0, 1.0), c, &k), 0.0054818, epsilon = 1e-6);
    }

    #[test]
    fn weight_is_decreasing_in_distance() {
        let k = KernelParams::default();
        let c = Coord::new(0.0, 0.0);
        let ws: Vec<f64> = (0..50)
            .map(|i| kernel_weight(&GeoPoint::new(i as f64 * 0.5, 0.0, 0.0), c, &k))
            .collect();
        assert!(ws.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn kernel_mass_values() {
        let k = KernelParams::default();
        // midpoint rule over the radial density of an isotropic 2D Gaussian
        let steps = 200_000;
        let dr = 12.5 / steps as f64;
        let s2 = k.sigma_f * k.sigma_f;
        let numeric: f64 = (0..steps)
            .map(|i| {
                let r = (i as f64 + 0.5) * dr;
                r / s2 * (-0.5 * r * r / s2).exp() * dr
            })
            .sum();
        assert_abs_diff_eq!(kernel_mass_within(12.5, &k), numeric, epsilon = 1e-9);
        assert_abs_diff_eq!(kernel_mass_within(12.5, &k), 0.9244, epsilon = 1e-4);
        assert_abs_diff_eq!(kernel_mass_within(1e6, &k), 1.0, epsilon = 1e-12);
        let half = k.sigma_f * (2.0 * 2f64.ln()).sqrt();
        assert_abs_diff_eq!(kernel_mass_within(half, &k), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_point_gives_constant_rh() {
        let a = area(vec![GeoPoint::new(35.0, 36.0, 10.0)]);
        let rh = simulate_rh(&a, Coord::new(35.0, 35.0), &SimSettings::default()).unwrap();
        assert!(rh.values.iter().all(|&v| v == 10.0));
    }

    #[test]
    fn equal_weights_give_order_statistics() {
        let pts = (1..=100).map(|z| GeoPoint::new(35.0, 35.0, z as f64)).collect();
        let rh = simulate_rh(&area(pts), Coord::new(35.0, 35.0), &settings(&[50.0, 98.0])).unwrap();
        assert_eq!(rh.values, vec![50.0, 98.0]);
    }

    #[test]
    fn near_point_dominates() {
        let pts = vec![GeoPoint::new(35.0, 35.0, 5.0), GeoPoint::new(46.0, 35.0, 20.0)];
        let k = KernelParams::default();
        let w_near = kernel_weight(&pts[0], Coord::new(35.0, 35.0), &k);
        let w_far = kernel_weight(&pts[1], Coord::new(35.0, 35.0), &k);
        // an 11 m offset at sigma 5.5 is two sigmas: weight ratio exp(-2)
        let share = w_near / (w_near + w_far);
        assert!((share - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
        assert!(share > 0.5);
        let rh = simulate_rh(&area(pts), Coord::new(35.0, 35.0), &settings(&[50.0, 98.0])).unwrap();
        assert_eq!(rh.values, vec![5.0, 20.0]);
    }

    #[test]
    fn empty_footprint_is_error() {
        let a = area(vec![GeoPoint::new(0.0, 0.0, 3.0)]);
        assert!(matches!(
            simulate_rh(&a, Coord::new(60.0, 60.0), &SimSettings::default()),
            Err(Error::EmptyFootprint { .. })
        ));
    }

    #[test]
    fn linear_interpolation_between_steps() {
        let h = [0.0, 10.0];
        let w = [1.0, 1.0];
        let step = weighted_quantiles_sorted(&h, &w, &[50.0, 75.0], RhInterpolation::None).unwrap();
        assert_eq!(step, vec![0.0, 10.0]);
        let lin = weighted_quantiles_sorted(&h, &w, &[50.0, 75.0], RhInterpolation::Linear).unwrap();
        assert_eq!(lin, vec![0.0, 5.0]);
    }

    fn cloud_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((10.0..60.0f64, 10.0..60.0f64, 0.0..40.0f64), 1..60)
    }

    proptest! {
        #[test]
        fn rh_nondecreasing_and_permutation_invariant(
            pts in cloud_strategy(),
            cx in 30.0..40.0f64,
            cy in 30.0..40.0f64,
            rot in 0usize..60,
        ) {
            let points: Vec<GeoPoint> = pts.iter().map(|&(x, y, z)| GeoPoint::new(x, y, z)).collect();
            let s = SimSettings::default();
            let c = Coord::new(cx, cy);
            let base = simulate_rh(&area(points.clone()), c, &s);
            let mut rotated = points.clone();
            rotated.rotate_left(rot % points.len());
            rotated.reverse();
            let other = simulate_rh(&area(rotated), c, &s);
            match (base, other) {
                (Ok(a), Ok(b)) => {
                    prop_assert!(a.values.windows(2).all(|w| w[0] <= w[1]));
                    prop_assert_eq!(a.values, b.values);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "permutation changed emptiness"),
            }
        }

        #[test]
        fn translation_invariance(
            pts in cloud_strategy(),
            tx in -5.0..5.0f64,
            ty in -5.0..5.0f64,
        ) {
            // integer-valued shifts keep coordinate differences exact
            let (tx, ty) = (tx.round(), ty.round());
            let points: Vec<GeoPoint> = pts.iter().map(|&(x, y, z)| GeoPoint::new(x.round(), y.round(), z)).collect();
            let moved: Vec<GeoPoint> = points.iter().map(|p| GeoPoint::new(p.x + tx, p.y + ty, p.z)).collect();
            let s = SimSettings::default();
            let a = simulate_rh(&area(points), Coord::new(35.0, 35.0), &s).ok();
            let b = simulate_rh(&area(moved), Coord::new(35.0 + tx, 35.0 + ty), &s).ok();
            prop_assert_eq!(a, b);
        }
    }
}
