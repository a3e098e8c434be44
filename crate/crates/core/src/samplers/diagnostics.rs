//! Split R-hat and effective sample size for one scalar parameter across
//! chains. Chains are trimmed to the shortest length and each is split in
//! half before either statistic is computed.

use crate::stats::{mean, variance};

fn split_halves<'a>(chains: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = n / 2;
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        out.push(&c[..half]);
        out.push(&c[n - half..n]);
    }
    out
}

/// Between-chain variance B and mean within-chain variance W.
fn between_within(split: &[&[f64]]) -> (f64, f64) {
    let n = split[0].len() as f64;
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let b = n * variance(&means);
    let w = mean(&split.iter().map(|c| variance(c)).collect::<Vec<_>>());
    (b, w)
}

/// Potential scale reduction on split chains. `None` for fewer than two
/// chains, fewer than four draws per chain, or zero within-chain variance.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    if chains.len() < 2 {
        return None;
    }
    let split = split_halves(chains);
    let n = split[0].len();
    if n < 2 {
        return None;
    }
    let (b, w) = between_within(&split);
    if !(w > 0.0) {
        return None;
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Some((var_plus / w).sqrt())
}

/// Effective sample size with Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(chains: &[&[f64]]) -> Option<f64> {
    if chains.is_empty() {
        return None;
    }
    let split = split_halves(chains);
    let n = split[0].len();
    if n < 4 {
        return None;
    }
    let m = split.len();
    let nf = n as f64;
    let (b, w) = between_within(&split);
    let var_plus = (nf - 1.0) / nf * w + if m > 1 { b / nf } else { 0.0 };
    if !(var_plus > 0.0) {
        return None;
    }
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let mean_acov = |t: usize| -> f64 {
        split
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                (0..n - t)
                    .map(|i| (c[i] - mu) * (c[i + t] - mu))
                    .sum::<f64>()
                    / nf
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |t: usize| 1.0 - (w - mean_acov(t)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = if t == 0 { 1.0 + rho(1) } else { rho(t) + rho(t + 1) };
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    let total = (m * n) as f64;
    Some(total / tau.max(1.0 / total.log10()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| { let e: f64 = StandardNormal.sample(&mut rng); shift + e }).collect::<Vec<f64>>()
    }

    #[test]
    fn single_chain_has_no_rhat() {
        let c = iid(1, 100, 0.0);
        assert_eq!(split_rhat(&[&c]), None);
    }

    #[test]
    fn iid_chains_converged() {
        let a = iid(1, 4000, 0.0);
        let b = iid(2, 4000, 0.0);
        let r = split_rhat(&[&a, &b]).unwrap();
        assert!((r - 1.0).abs() < 0.01, "{r}");
        let ess = effective_sample_size(&[&a, &b]).unwrap();
        assert!(ess > 6000.0 && ess < 10_000.0, "{ess}");
    }

    #[test]
    fn separated_chains_flagged() {
        let a = iid(1, 1000, 0.0);
        let b = iid(2, 1000, 3.0);
        assert!(split_rhat(&[&a, &b]).unwrap() > 1.5);
    }

    #[test]
    fn ar1_ess_matches_theory() {
        // AR(1) with phi = 0.9 has integrated autocorrelation (1+phi)/(1-phi) = 19
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let phi: f64 = 0.9;
        let mut x = 0.0;
        let chain: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + (1.0 - phi * phi).sqrt() * e;
                x
            })
            .collect();
        let ess = effective_sample_size(&[&chain]).unwrap();
        let expected = 200_000.0 / 19.0;
        assert!((ess / expected - 1.0).abs() < 0.15, "{ess} vs {expected}");
    }
}
