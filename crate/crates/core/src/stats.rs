//! Small numeric helpers shared across modules.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * (2.0 * PI * var).ln() - 0.5 * r * r / var
}

/// Inverse-gamma log density with shape `a` and scale `b`
/// (density ∝ x^-(a+1) e^(-b/x), mean b/(a-1)).
pub fn ln_inv_gamma(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let g = Gamma::new(a, 1.0).expect("inverse-gamma shape must be positive");
    b / g.sample(rng)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn sd(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Quantile of already-sorted data, linear interpolation between order
/// statistics (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted_copy(xs), q)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Interquartile range.
pub fn iqr(xs: &[f64]) -> f64 {
    let s = sorted_copy(xs);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
