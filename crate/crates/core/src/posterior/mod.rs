//! Posterior products: distances and angles by composition, KDE surfaces
//! and their modes, ECDFs, fitted values and RMSE tables.

mod fitted;
mod kde;
mod report;

pub use fitted::{fitted_values, FittedMode};
pub use kde::{composite_map, kde2d, log_likelihood_surface, map_estimate, GridSpec, KdeSurface, MapEstimate};
pub use report::{summarize, AreaSummary, LocationSummary, SummaryOptions, SummaryReport, SystematicSummary};

use serde::{Deserialize, Serialize};

use crate::geom::Coord;
use crate::stats::{quantile_sorted, sorted_copy};

/// Euclidean distance of every draw from `reference`.
pub fn distance_draws(draws: &[Coord], reference: Coord) -> Vec<f64> {
    draws.iter().map(|c| c.dist(reference)).collect()
}

/// Direction of `to - from` in degrees, counterclockwise from +easting,
/// in `[0, 360)`.
pub fn angle_deg(to: Coord, from: Coord) -> f64 {
    let a = (to.y - from.y).atan2(to.x - from.x).to_degrees();
    wrap_deg(a)
}

fn wrap_deg(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

pub fn angle_draws(draws: &[Coord], reference: Coord) -> Vec<f64> {
    draws.iter().map(|&c| angle_deg(c, reference)).collect()
}

/// Median and equal-tailed 95% credible interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn from_draws(xs: &[f64]) -> Self {
        let s = sorted_copy(xs);
        Interval {
            median: quantile_sorted(&s, 0.5),
            lower: quantile_sorted(&s, 0.025),
            upper: quantile_sorted(&s, 0.975),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Circular mean direction in degrees; `None` when the resultant vanishes.
pub fn circular_mean_deg(angles: &[f64]) -> Option<f64> {
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| {
        let r = a.to_radians();
        (s + r.sin(), c + r.cos())
    });
    if s.hypot(c) < 1e-12 * angles.len().max(1) as f64 {
        None
    } else {
        Some(wrap_deg(s.atan2(c).to_degrees()))
    }
}

/// Angle median and 95% interval. Quantiles are taken after rotating the
/// draws so their circular mean sits at 180°, then rotated back; `lower`
/// can exceed `upper` when the interval straddles 0°.
pub fn angle_interval(angles: &[f64]) -> Interval {
    let pivot = circular_mean_deg(angles).unwrap_or(180.0);
    let shift = 180.0 - pivot;
    let rotated: Vec<f64> = angles.iter().map(|a| wrap_deg(a + shift)).collect();
    let iv = Interval::from_draws(&rotated);
    Interval {
        median: wrap_deg(iv.median - shift),
        lower: wrap_deg(iv.lower - shift),
        upper: wrap_deg(iv.upper - shift),
    }
}

/// True when `angle` lies on the arc running counterclockwise from
/// `iv.lower` to `iv.upper`.
pub fn angle_interval_contains(iv: &Interval, angle: f64) -> bool {
    let span = wrap_deg(iv.upper - iv.lower);
    wrap_deg(angle - iv.lower) <= span
}

/// Distance and angle posteriors of a location relative to a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub distance: Interval,
    pub angle: Interval,
}

impl ErrorSummary {
    pub fn from_draws(draws: &[Coord], reference: Coord) -> Self {
        ErrorSummary {
            distance: Interval::from_draws(&distance_draws(draws, reference)),
            angle: angle_interval(&angle_draws(draws, reference)),
        }
    }
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Self {
        Ecdf {
            sorted: sorted_copy(values),
        }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of values `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Whether `self` lies on or above `other` at every jump of either.
    pub fn dominates(&self, other: &Ecdf) -> bool {
        self.sorted
            .iter()
            .chain(&other.sorted)
            .all(|&x| self.eval(x) >= other.eval(x))
    }
}

pub fn ecdf(values: &[f64]) -> Ecdf {
    Ecdf::new(values)
}

/// Per-metric RMSE over areas; rows are areas, columns metrics.
pub fn rmse_table(observed: &[Vec<f64>], fitted: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(observed.len(), fitted.len(), "row count mismatch");
    let m = observed.first().map_or(0, Vec::len);
    let n = observed.len() as f64;
    (0..m)
        .map(|j| {
            let ss: f64 = observed.iter().zip(fitted).map(|(o, f)| (o[j] - f[j]).powi(2)).sum();
            (ss / n).sqrt()
        })
        .collect()
}
