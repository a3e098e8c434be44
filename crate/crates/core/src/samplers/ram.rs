//! Location proposals: repelling-attracting Metropolis (RAM) and plain
//! random-walk Metropolis, both with isotropic Gaussian steps in 2D.
//!
//! A RAM transition from `x`:
//!
//! 1. forced downhill: draw `x1 ~ N(x, s²I)` until accepted with
//!    probability `min(1, (π(x)+ε)/(π(x1)+ε))`;
//! 2. forced uphill: draw `x2 ~ N(x1, s²I)` until accepted with
//!    probability `min(1, (π(x2)+ε)/(π(x1)+ε))`;
//! 3. refresh the auxiliary `z ~ N(x, s²I)`;
//! 4. forced downhill from `x2` to a new auxiliary `z2`;
//! 5. accept `x2` with probability
//!    `min(1, π(x2)·min(1, (π(x)+ε)/(π(z)+ε)) / (π(x)·min(1, (π(x2)+ε)/(π(z2)+ε))))`.
//!
//! Steps 3–5 are a Metropolis–Hastings move on the pair `(x, z)` with
//! target `π(x)·q(z | x)`. The intractable normalizers of the forced
//! downhill kernel cancel against the auxiliary terms, so the chain on `x`
//! keeps `π` invariant. All densities are handled as logs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geom::Coord;
use crate::stats::log_add_exp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamKernel {
    pub step: f64,
    pub epsilon: f64,
    /// Proposal budget for each forced stage; exhausting it rejects the move.
    pub max_tries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub state: Coord,
    pub accepted: bool,
    /// Target evaluations spent.
    pub evals: usize,
    /// A forced stage ran out of tries.
    pub capped: bool,
}

fn gaussian_step<R: Rng + ?Sized>(rng: &mut R, from: Coord, scale: f64) -> Coord {
    let dx: f64 = StandardNormal.sample(rng);
    let dy: f64 = StandardNormal.sample(rng);
    Coord::new(from.x + scale * dx, from.y + scale * dy)
}

/// `ln u` for `u ~ U(0, 1)`.
fn log_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (1.0 - u).ln()
}

/// Difference of two log densities where `-inf - -inf` counts as 0.
fn log_ratio(num: f64, den: f64) -> f64 {
    if num == f64::NEG_INFINITY && den == f64::NEG_INFINITY {
        0.0
    } else {
        num - den
    }
}

impl RamKernel {
    pub fn new(step: f64, epsilon: f64) -> Self {
        RamKernel {
            step,
            epsilon,
            max_tries: 10_000,
        }
    }

    /// `ln(π + ε)` from `ln π`.
    fn floor(&self, lp: f64) -> f64 {
        if self.epsilon > 0.0 {
            log_add_exp(lp, self.epsilon.ln())
        } else {
            lp
        }
    }

    /// Repeats proposals from `from` until one passes; `uphill` selects the
    /// acceptance direction. Returns the point, its log density and the
    /// number of evaluations, or `None` if the budget ran out.
    fn forced<R: Rng + ?Sized, F: Fn(Coord) -> f64>(
        &self,
        from: Coord,
        lp_from: f64,
        uphill: bool,
        target: &F,
        rng: &mut R,
    ) -> (Option<(Coord, f64)>, usize) {
        let base = self.floor(lp_from);
        for tries in 1..=self.max_tries {
            let cand = gaussian_step(rng, from, self.step);
            let lp = target(cand);
            let lr = if uphill {
                log_ratio(self.floor(lp), base)
            } else {
                log_ratio(base, self.floor(lp))
            };
            if lr >= 0.0 || log_uniform(rng) < lr {
                return (Some((cand, lp)), tries);
            }
        }
        (None, self.max_tries)
    }

    /// One RAM transition of `x` under log density `target`.
    pub fn step<R: Rng + ?Sized, F: Fn(Coord) -> f64>(&self, x: Coord, target: F, rng: &mut R) -> MoveOutcome {
        let reject = |evals, capped| MoveOutcome {
            state: x,
            accepted: false,
            evals,
            capped,
        };
        let lx = target(x);
        let mut evals = 1;

        let (down, n) = self.forced(x, lx, false, &target, rng);
        evals += n;
        let Some((x1, l1)) = down else {
            return reject(evals, true);
        };
        let (up, n) = self.forced(x1, l1, true, &target, rng);
        evals += n;
        let Some((x2, l2)) = up else {
            return reject(evals, true);
        };
        if l2 == f64::NEG_INFINITY {
            return reject(evals, false);
        }

        let z = gaussian_step(rng, x, self.step);
        let lz = target(z);
        evals += 1;
        let (aux, n) = self.forced(x2, l2, false, &target, rng);
        evals += n;
        let Some((_, lz2)) = aux else {
            return reject(evals, true);
        };

        let fx = self.floor(lx);
        let f2 = self.floor(l2);
        let log_alpha = (l2 - lx) + log_ratio(fx, self.floor(lz)).min(0.0)
            - log_ratio(f2, self.floor(lz2)).min(0.0);
        if log_alpha >= 0.0 || log_uniform(rng) < log_alpha {
            MoveOutcome {
                state: x2,
                accepted: true,
                evals,
                capped: false,
            }
        } else {
            reject(evals, false)
        }
    }
}

/// Random-walk Metropolis with an isotropic Gaussian step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwmKernel {
    pub step: f64,
}

impl RwmKernel {
    pub fn step<R: Rng + ?Sized, F: Fn(Coord) -> f64>(&self, x: Coord, target: F, rng: &mut R) -> MoveOutcome {
        let lx = target(x);
        let cand = gaussian_step(rng, x, self.step);
        let lc = target(cand);
        let lr = lc - lx;
        let accepted = lc > f64::NEG_INFINITY && (lr >= 0.0 || log_uniform(rng) < lr);
        MoveOutcome {
            state: if accepted { cand } else { x },
            accepted,
            evals: 2,
            capped: false,
        }
    }
}

/// Batch-wise proposal-scale tuning used only during warmup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepAdapter {
    pub target_rate: f64,
    pub batch: usize,
    accepted: usize,
    proposed: usize,
}

impl StepAdapter {
    pub fn new(target_rate: f64) -> Self {
        StepAdapter {
            target_rate,
            batch: 50,
            accepted: 0,
            proposed: 0,
        }
    }

    /// Records one move and, at batch boundaries, rescales `step`.
    pub fn record(&mut self, accepted: bool, step: &mut f64) {
        self.proposed += 1;
        self.accepted += usize::from(accepted);
        if self.proposed == self.batch {
            let rate = self.accepted as f64 / self.batch as f64;
            *step = (*step * (2.0 * (rate - self.target_rate)).exp()).clamp(1e-3, 50.0);
            self.accepted = 0;
            self.proposed = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn gauss(c: Coord) -> f64 {
        -0.5 * ((c.x - 1.0).powi(2) + (c.y + 2.0).powi(2))
    }

    #[test]
    fn ram_never_leaves_support() {
        let target = |c: Coord| {
            if c.dist(Coord::new(0.0, 0.0)) <= 1.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        };
        let k = RamKernel::new(0.8, 1e-8);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut x = Coord::new(0.0, 0.0);
        let mut acc = 0;
        for _ in 0..20_000 {
            let o = k.step(x, target, &mut rng);
            x = o.state;
            acc += usize::from(o.accepted);
            assert!(x.dist(Coord::new(0.0, 0.0)) <= 1.0);
        }
        assert!(acc > 1000);
    }

    #[test]
    fn ram_gaussian_moments() {
        let k = RamKernel::new(1.5, 1e-8);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut x = Coord::new(0.0, 0.0);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40_000 {
            x = k.step(x, gauss, &mut rng).state;
            if i >= 1000 {
                xs.push(x.x);
                ys.push(x.y);
            }
        }
        assert!((crate::stats::mean(&xs) - 1.0).abs() < 0.05);
        assert!((crate::stats::mean(&ys) + 2.0).abs() < 0.05);
        assert!((crate::stats::variance(&xs) - 1.0).abs() < 0.06);
    }

    #[test]
    fn rwm_rejects_outside_support_and_adapter_shrinks_step() {
        let target = |c: Coord| if c.x.abs() < 0.1 { 0.0 } else { f64::NEG_INFINITY };
        let mut k = RwmKernel { step: 5.0 };
        let mut ad = StepAdapter::new(0.3);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut x = Coord::new(0.0, 0.0);
        for _ in 0..2000 {
            let o = k.step(x, target, &mut rng);
            x = o.state;
            assert!(x.x.abs() < 0.1);
            ad.record(o.accepted, &mut k.step);
        }
        assert!(k.step < 1.0);
    }

    #[test]
    fn forced_budget_exhaustion_rejects() {
        // a pit: every proposal is far uphill, so the downhill stage never passes
        let target = |c: Coord| if c == Coord::new(0.0, 0.0) { -1e6 } else { 0.0 };
        let k = RamKernel {
            step: 1.0,
            epsilon: 0.0,
            max_tries: 5,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let o = k.step(Coord::new(0.0, 0.0), target, &mut rng);
        assert!(o.capped && !o.accepted);
        assert_eq!(o.state, Coord::new(0.0, 0.0));
    }
}
