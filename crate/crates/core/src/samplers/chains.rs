use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{effective_sample_size, split_rhat};
use super::gibbs::{gibbs_update_alpha_beta, gibbs_update_mu_sigma_ell, gibbs_update_tau2};
use super::ram::{MoveOutcome, RamKernel, RwmKernel, StepAdapter};
use crate::error::{Error, Result};
use crate::geom::Coord;
use crate::model::{
    ell_conditional_kernel, ell_star_conditional_kernel, log_posterior_full, log_posterior_sub, FullModelState,
    Hierarchy, Hyperparams, ModelData, Sim, SubModelState,
};

pub const RHAT_THRESHOLD: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Full,
    Sub,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::Sub => "sub",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EllStarSampler {
    #[default]
    Metropolis,
    Ram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_chains: usize,
    /// Kept (post-thinning) draws per chain.
    pub kept: usize,
    /// Warmup iterations per chain; defaults to `kept * thin`.
    pub warmup: Option<usize>,
    pub thin: usize,
    pub seed: u64,
    /// RAM proposal scale for per-footprint locations, meters.
    pub ram_step: f64,
    pub ram_epsilon: f64,
    pub ram_max_tries: usize,
    /// Tune each footprint's RAM scale during warmup.
    pub adapt_ram_step: bool,
    pub ell_star_sampler: EllStarSampler,
    /// Proposal scale for the shared offset, meters.
    pub ell_star_step: f64,
    /// Tune the shared-offset scale during warmup.
    pub adapt_ell_star_step: bool,
    pub target_accept: f64,
    pub parallel_ell: bool,
    /// After each RAM step, also try an independence move drawn from the
    /// location's current prior. Lets a footprint leave a local mode that
    /// the RAM scale cannot bridge.
    pub prior_moves: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_chains: 5,
            kept: 10_000,
            warmup: None,
            thin: 1,
            seed: 1,
            ram_step: 2.0,
            ram_epsilon: 1e-8,
            ram_max_tries: 10_000,
            adapt_ram_step: false,
            ell_star_sampler: EllStarSampler::Metropolis,
            ell_star_step: 2.0,
            adapt_ell_star_step: true,
            target_accept: 0.3,
            parallel_ell: true,
            prior_moves: true,
        }
    }
}

impl ChainConfig {
    pub fn warmup_iters(&self) -> usize {
        self.warmup.unwrap_or(self.kept * self.thin)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.n_chains == 0 || self.kept == 0 || self.thin == 0 {
            return Err("n_chains, kept and thin must be at least 1".into());
        }
        if !(self.ram_step > 0.0 && self.ell_star_step > 0.0) {
            return Err("proposal steps must be > 0".into());
        }
        if !(self.ram_epsilon >= 0.0) || self.ram_max_tries == 0 {
            return Err("ram_epsilon must be >= 0 and ram_max_tries >= 1".into());
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err("target_accept must lie in (0, 1)".into());
        }
        Ok(())
    }

    fn ram_kernel(&self, step: f64) -> RamKernel {
        RamKernel {
            step,
            epsilon: self.ram_epsilon,
            max_tries: self.ram_max_tries,
        }
    }
}

/// Generator for `slot` of chain `chain`: the master seed keys a ChaCha20
/// stream, and the stream id is `(chain << 32) | slot`. Slot 0 drives a
/// chain's Gibbs and shared-offset updates; slot `i + 1` drives area `i`.
pub fn chain_rng(seed: u64, chain: usize, slot: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((chain as u64) << 32) | slot as u64);
    rng
}

/// One RAM transition of location `i` against its full conditional.
pub fn ram_update_ell<R: Rng + ?Sized>(
    state: &mut FullModelState,
    i: usize,
    data: &ModelData,
    hyper: &Hyperparams,
    hierarchy: Hierarchy,
    kernel: &RamKernel,
    rng: &mut R,
) -> MoveOutcome {
    let out = {
        let st = &*state;
        kernel.step(st.ell[i], |c| ell_conditional_kernel(i, c, st, data, hyper, hierarchy), rng)
    };
    state.ell[i] = out.state;
    out
}

/// Independence Metropolis move for location `i` with its current prior
/// as the proposal, so the acceptance ratio reduces to the likelihood
/// ratio. Returns whether the move was taken.
pub fn prior_move_ell<R: Rng + ?Sized>(
    state: &mut FullModelState,
    i: usize,
    data: &ModelData,
    hyper: &Hyperparams,
    hierarchy: Hierarchy,
    rng: &mut R,
) -> bool {
    match prior_proposal(&*state, i, state.ell[i], data, hyper, hierarchy, rng) {
        Some(c) => {
            state.ell[i] = c;
            true
        }
        None => false,
    }
}

fn prior_proposal<R: Rng + ?Sized>(
    st: &FullModelState,
    i: usize,
    from: Coord,
    data: &ModelData,
    hyper: &Hyperparams,
    hierarchy: Hierarchy,
    rng: &mut R,
) -> Option<Coord> {
    let (mean, var) = match hierarchy {
        Hierarchy::Pooled => (st.mu_ell, st.sigma2_ell),
        Hierarchy::FixedCenter => (hyper.s, hyper.sigma2_ell_fixed),
    };
    let cand = Coord::new(
        crate::stats::sample_normal(rng, mean.x, var[0]),
        crate::stats::sample_normal(rng, mean.y, var[1]),
    );
    // the conditional kernel carries the prior; remove it from both ends
    let prior = |c: Coord| -0.5 * (c.x - mean.x).powi(2) / var[0] - 0.5 * (c.y - mean.y).powi(2) / var[1];
    let lc = ell_conditional_kernel(i, cand, st, data, hyper, hierarchy);
    if lc == f64::NEG_INFINITY {
        return None;
    }
    let lx = ell_conditional_kernel(i, from, st, data, hyper, hierarchy);
    let log_alpha = (lc - prior(cand)) - (lx - prior(from));
    let u: f64 = rng.random();
    (log_alpha >= 0.0 || (1.0 - u).ln() < log_alpha).then_some(cand)
}

fn sims_at(data: &ModelData, c: Coord) -> Vec<Sim> {
    (0..data.n()).into_par_iter().map(|i| data.g(i, c)).collect()
}

fn ell_star_target<'a>(state: &'a SubModelState, data: &'a ModelData, hyper: &'a Hyperparams) -> impl Fn(Coord) -> f64 + 'a {
    move |c| {
        if !crate::geom::within_bound(c, hyper.bound) {
            return f64::NEG_INFINITY;
        }
        let sims = sims_at(data, c);
        ell_star_conditional_kernel(c, &state.alpha, &state.beta, &state.tau2, &sims, data, hyper)
    }
}

/// Random-walk Metropolis step for the shared offset.
pub fn metropolis_update_ell_star<R: Rng + ?Sized>(
    state: &mut SubModelState,
    data: &ModelData,
    hyper: &Hyperparams,
    step: f64,
    rng: &mut R,
) -> MoveOutcome {
    let out = RwmKernel { step }.step(state.ell_star, ell_star_target(state, data, hyper), rng);
    state.ell_star = out.state;
    out
}

/// RAM step for the shared offset.
pub fn ram_update_ell_star<R: Rng + ?Sized>(
    state: &mut SubModelState,
    data: &ModelData,
    hyper: &Hyperparams,
    kernel: &RamKernel,
    rng: &mut R,
) -> MoveOutcome {
    let out = kernel.step(state.ell_star, ell_star_target(state, data, hyper), rng);
    state.ell_star = out.state;
    out
}

fn coord_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).flat_map(move |i| [format!("{prefix}_x_{i}"), format!("{prefix}_y_{i}")])
}

fn adjustment_columns(m: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(3 * m);
    for name in ["alpha", "beta", "tau2"] {
        cols.extend((1..=m).map(|j| format!("{name}_{j}")));
    }
    cols
}

fn full_columns(n: usize, m: usize) -> Vec<String> {
    let mut cols = adjustment_columns(m);
    cols.extend(coord_columns("ell", n));
    cols.extend(["mu_ell_x", "mu_ell_y", "sigma2_ell_x", "sigma2_ell_y"].map(String::from));
    cols
}

fn sub_columns(m: usize) -> Vec<String> {
    let mut cols = adjustment_columns(m);
    cols.extend(["ell_star_x", "ell_star_y"].map(String::from));
    cols
}

fn flatten_full(st: &FullModelState) -> Vec<f64> {
    let mut v = Vec::with_capacity(3 * st.alpha.len() + 2 * st.ell.len() + 4);
    v.extend(&st.alpha);
    v.extend(&st.beta);
    v.extend(&st.tau2);
    for l in &st.ell {
        v.push(l.x);
        v.push(l.y);
    }
    v.extend([st.mu_ell.x, st.mu_ell.y, st.sigma2_ell[0], st.sigma2_ell[1]]);
    v
}

fn flatten_sub(st: &SubModelState) -> Vec<f64> {
    let mut v = Vec::with_capacity(3 * st.alpha.len() + 2);
    v.extend(&st.alpha);
    v.extend(&st.beta);
    v.extend(&st.tau2);
    v.extend([st.ell_star.x, st.ell_star.y]);
    v
}

/// Result of a single chain.
struct ChainRun {
    draws: Vec<Vec<f64>>,
    accepted: Vec<usize>,
    proposed: Vec<usize>,
    capped: usize,
    steps: Vec<f64>,
}

fn run_full_chain(
    chain: usize,
    data: &ModelData,
    hyper: &Hyperparams,
    hierarchy: Hierarchy,
    cfg: &ChainConfig,
) -> ChainRun {
    let (n, m) = (data.n(), data.m());
    let mut st = FullModelState::initial(n, m, hyper);
    let mut rng = chain_rng(cfg.seed, chain, 0);
    let mut area_rngs: Vec<ChaCha20Rng> = (0..n).map(|i| chain_rng(cfg.seed, chain, i + 1)).collect();
    let mut g: Vec<Arc<[f64]>> = (0..n)
        .map(|i| data.g(i, st.ell[i]).expect("initial footprints checked"))
        .collect();
    let mut steps = vec![cfg.ram_step; n];
    let mut adapters = vec![StepAdapter::new(cfg.target_accept); n];
    let mut accepted = vec![0usize; n];
    let mut proposed = vec![0usize; n];
    let mut capped = 0;

    let warmup = cfg.warmup_iters();
    let total = warmup + cfg.kept * cfg.thin;
    let mut draws = Vec::with_capacity(cfg.kept);
    for it in 0..total {
        gibbs_update_alpha_beta(&mut st.alpha, &mut st.beta, &st.tau2, &data.observed, &g, hyper, &mut rng);
        gibbs_update_tau2(&mut st.tau2, &st.alpha, &st.beta, &data.observed, &g, hyper, &mut rng);

        let moves: Vec<(MoveOutcome, bool)> = {
            let st = &st;
            let step_one = |(i, r): (usize, &mut ChaCha20Rng)| {
                let kernel = cfg.ram_kernel(steps[i]);
                let mut mv = kernel.step(st.ell[i], |c| ell_conditional_kernel(i, c, st, data, hyper, hierarchy), r);
                let mut moved = mv.accepted;
                if cfg.prior_moves {
                    if let Some(c) = prior_proposal(st, i, mv.state, data, hyper, hierarchy, r) {
                        mv.state = c;
                        moved = true;
                    }
                }
                (mv, moved)
            };
            if cfg.parallel_ell {
                area_rngs.par_iter_mut().enumerate().map(step_one).collect()
            } else {
                area_rngs.iter_mut().enumerate().map(step_one).collect()
            }
        };
        let in_warmup = it < warmup;
        for (i, (mv, moved)) in moves.into_iter().enumerate() {
            if moved {
                st.ell[i] = mv.state;
                g[i] = data.g(i, mv.state).expect("accepted locations have returns");
            }
            if in_warmup {
                if cfg.adapt_ram_step {
                    adapters[i].record(mv.accepted, &mut steps[i]);
                }
            } else {
                proposed[i] += 1;
                accepted[i] += usize::from(mv.accepted);
                capped += usize::from(mv.capped);
            }
        }

        if hierarchy == Hierarchy::Pooled {
            gibbs_update_mu_sigma_ell(&mut st.mu_ell, &mut st.sigma2_ell, &st.ell, hyper, &mut rng);
        }

        if !in_warmup && (it - warmup + 1).is_multiple_of(cfg.thin) {
            draws.push(flatten_full(&st));
        }
    }
    ChainRun {
        draws,
        accepted,
        proposed,
        capped,
        steps,
    }
}

fn run_sub_chain(chain: usize, data: &ModelData, hyper: &Hyperparams, cfg: &ChainConfig) -> ChainRun {
    let m = data.m();
    let mut st = SubModelState::initial(m, hyper);
    let mut rng = chain_rng(cfg.seed, chain, 0);
    let refresh = |c: Coord| -> Vec<Arc<[f64]>> {
        sims_at(data, c)
            .into_iter()
            .map(|s| s.expect("in-support offsets have returns in every area"))
            .collect()
    };
    let mut g = refresh(st.ell_star);
    let mut step = cfg.ell_star_step;
    let mut adapter = StepAdapter::new(cfg.target_accept);
    let (mut accepted, mut proposed, mut capped) = (0usize, 0usize, 0usize);

    let warmup = cfg.warmup_iters();
    let total = warmup + cfg.kept * cfg.thin;
    let mut draws = Vec::with_capacity(cfg.kept);
    for it in 0..total {
        gibbs_update_alpha_beta(&mut st.alpha, &mut st.beta, &st.tau2, &data.observed, &g, hyper, &mut rng);
        gibbs_update_tau2(&mut st.tau2, &st.alpha, &st.beta, &data.observed, &g, hyper, &mut rng);

        let mv = match cfg.ell_star_sampler {
            EllStarSampler::Metropolis => metropolis_update_ell_star(&mut st, data, hyper, step, &mut rng),
            EllStarSampler::Ram => ram_update_ell_star(&mut st, data, hyper, &cfg.ram_kernel(step), &mut rng),
        };
        if mv.accepted {
            g = refresh(st.ell_star);
        }
        if it < warmup {
            if cfg.adapt_ell_star_step {
                adapter.record(mv.accepted, &mut step);
            }
        } else {
            proposed += 1;
            accepted += usize::from(mv.accepted);
            capped += usize::from(mv.capped);
            if (it - warmup + 1).is_multiple_of(cfg.thin) {
                draws.push(flatten_sub(&st));
            }
        }
    }
    ChainRun {
        draws,
        accepted: vec![accepted],
        proposed: vec![proposed],
        capped,
        steps: vec![step],
    }
}

/// Kept draws from all chains plus their diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub model: ModelKind,
    pub n_areas: usize,
    pub m: usize,
    pub columns: Vec<String>,
    /// `chains[c][d]` is draw `d` of chain `c`, laid out as `columns`.
    pub chains: Vec<Vec<Vec<f64>>>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub model: ModelKind,
    pub n_areas: usize,
    pub m: usize,
    pub n_chains: usize,
    pub kept_per_chain: usize,
    pub warmup: usize,
    pub thin: usize,
    pub seed: u64,
    /// Post-warmup acceptance rate of the location block.
    pub acceptance: f64,
    /// Per-area location acceptance (full model only).
    pub area_acceptance: Vec<f64>,
    /// Forced RAM stages that exhausted their proposal budget.
    pub capped_moves: usize,
    /// Proposal scales in force after warmup, per chain.
    pub final_steps: Vec<Vec<f64>>,
    pub rhat: BTreeMap<String, Option<f64>>,
    pub ess: BTreeMap<String, Option<f64>>,
    pub max_rhat: Option<f64>,
    pub rhat_threshold: f64,
}

impl ChainOutput {
    fn assemble(
        model: ModelKind,
        data: &ModelData,
        columns: Vec<String>,
        runs: Vec<ChainRun>,
        cfg: &ChainConfig,
    ) -> Self {
        let n_slots = runs[0].accepted.len();
        let mut acc = vec![0usize; n_slots];
        let mut prop = vec![0usize; n_slots];
        for r in &runs {
            for k in 0..n_slots {
                acc[k] += r.accepted[k];
                prop[k] += r.proposed[k];
            }
        }
        let rate = |a: usize, p: usize| if p == 0 { 0.0 } else { a as f64 / p as f64 };
        let acceptance = rate(acc.iter().sum(), prop.iter().sum());
        let area_acceptance = match model {
            ModelKind::Full => acc.iter().zip(&prop).map(|(&a, &p)| rate(a, p)).collect(),
            ModelKind::Sub => Vec::new(),
        };
        let capped_moves = runs.iter().map(|r| r.capped).sum();
        let final_steps = runs.iter().map(|r| r.steps.clone()).collect();
        let chains: Vec<Vec<Vec<f64>>> = runs.into_iter().map(|r| r.draws).collect();

        let mut out = ChainOutput {
            model,
            n_areas: data.n(),
            m: data.m(),
            columns,
            chains,
            diagnostics: Diagnostics {
                model,
                n_areas: data.n(),
                m: data.m(),
                n_chains: cfg.n_chains,
                kept_per_chain: cfg.kept,
                warmup: cfg.warmup_iters(),
                thin: cfg.thin,
                seed: cfg.seed,
                acceptance,
                area_acceptance,
                capped_moves,
                final_steps,
                rhat: BTreeMap::new(),
                ess: BTreeMap::new(),
                max_rhat: None,
                rhat_threshold: RHAT_THRESHOLD,
            },
        };
        out.compute_convergence();
        out
    }

    fn compute_convergence(&mut self) {
        let stats: Vec<(Option<f64>, Option<f64>)> = (0..self.columns.len())
            .into_par_iter()
            .map(|k| {
                let per_chain: Vec<Vec<f64>> = (0..self.chains.len()).map(|c| self.chain_column(c, k)).collect();
                let refs: Vec<&[f64]> = per_chain.iter().map(Vec::as_slice).collect();
                (split_rhat(&refs), effective_sample_size(&refs))
            })
            .collect();
        let d = &mut self.diagnostics;
        d.rhat.clear();
        d.ess.clear();
        for (name, (r, e)) in self.columns.iter().zip(stats) {
            d.rhat.insert(name.clone(), r);
            d.ess.insert(name.clone(), e);
        }
        d.max_rhat = d.rhat.values().flatten().copied().fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))));
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn chain_column(&self, chain: usize, k: usize) -> Vec<f64> {
        self.chains[chain].iter().map(|d| d[k]).collect()
    }

    /// Column `k` pooled over chains, chain-major.
    pub fn pooled_column(&self, k: usize) -> Vec<f64> {
        self.draws().map(|d| d[k]).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|k| self.pooled_column(k))
    }

    /// All kept draws, chain-major.
    pub fn draws(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flatten()
    }

    fn coord_draws(&self, kx: usize) -> Vec<Coord> {
        self.draws().map(|d| Coord::new(d[kx], d[kx + 1])).collect()
    }

    /// Draws of area `i`'s location (full model).
    pub fn ell_draws(&self, i: usize) -> Vec<Coord> {
        assert_eq!(self.model, ModelKind::Full);
        self.coord_draws(3 * self.m + 2 * i)
    }

    /// Draws of the shared offset (submodel).
    pub fn ell_star_draws(&self) -> Vec<Coord> {
        assert_eq!(self.model, ModelKind::Sub);
        self.coord_draws(3 * self.m)
    }

    /// `(alpha, beta, tau2)` slices of one draw.
    pub fn adjustments<'a>(&self, draw: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let m = self.m;
        (&draw[..m], &draw[m..2 * m], &draw[2 * m..3 * m])
    }

    pub fn full_state(&self, draw: &[f64]) -> FullModelState {
        let (a, b, t) = self.adjustments(draw);
        let base = 3 * self.m;
        let ell = (0..self.n_areas)
            .map(|i| Coord::new(draw[base + 2 * i], draw[base + 2 * i + 1]))
            .collect();
        let h = base + 2 * self.n_areas;
        FullModelState {
            alpha: a.to_vec(),
            beta: b.to_vec(),
            tau2: t.to_vec(),
            ell,
            mu_ell: Coord::new(draw[h], draw[h + 1]),
            sigma2_ell: [draw[h + 2], draw[h + 3]],
        }
    }

    pub fn sub_state(&self, draw: &[f64]) -> SubModelState {
        let (a, b, t) = self.adjustments(draw);
        let k = 3 * self.m;
        SubModelState {
            alpha: a.to_vec(),
            beta: b.to_vec(),
            tau2: t.to_vec(),
            ell_star: Coord::new(draw[k], draw[k + 1]),
        }
    }

    /// Writes one row per kept draw: `chain,draw,<columns...>`.
    pub fn write_draws_csv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "chain,draw,{}", self.columns.join(",")).map_err(io)?;
        for (c, chain) in self.chains.iter().enumerate() {
            for (d, draw) in chain.iter().enumerate() {
                write!(w, "{},{}", c + 1, d + 1).map_err(io)?;
                for v in draw {
                    write!(w, ",{v}").map_err(io)?;
                }
                writeln!(w).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn write_diagnostics_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.diagnostics)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Reads a draws file written by [`ChainOutput::write_draws_csv`]
    /// together with its diagnostics JSON.
    pub fn read(draws_path: &Path, diagnostics_path: &Path) -> Result<Self> {
        let diag_text = std::fs::read_to_string(diagnostics_path).map_err(|e| Error::io(diagnostics_path, e))?;
        let diagnostics: Diagnostics = serde_json::from_str(&diag_text)?;
        let name = draws_path.display().to_string();
        let f = File::open(draws_path).map_err(|e| Error::io(draws_path, e))?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::EmptyInput(name.clone()))?
            .map_err(|e| Error::io(draws_path, e))?;
        let columns: Vec<String> = header.split(',').skip(2).map(String::from).collect();
        let (model, n_areas, m) = (diagnostics.model, diagnostics.n_areas, diagnostics.m);
        let expected = match model {
            ModelKind::Full => full_columns(n_areas, m),
            ModelKind::Sub => sub_columns(m),
        };
        if columns != expected {
            return Err(Error::parse(&name, 1, "header does not match the diagnostics file"));
        }
        let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
        for (idx, line) in lines.enumerate() {
            let row = idx + 2;
            let line = line.map_err(|e| Error::io(draws_path, e))?;
            let mut fields = line.split(',');
            let chain: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .filter(|&c: &usize| c >= 1)
                .ok_or_else(|| Error::parse(&name, row, "bad chain index"))?;
            fields.next();
            let vals = fields
                .map(|s| s.parse::<f64>().map_err(|_| Error::parse(&name, row, format!("bad value '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != columns.len() {
                return Err(Error::parse(&name, row, "column count mismatch"));
            }
            while chains.len() < chain {
                chains.push(Vec::new());
            }
            chains[chain - 1].push(vals);
        }
        Ok(ChainOutput {
            model,
            n_areas,
            m,
            columns,
            chains,
            diagnostics,
        })
    }
}

fn check_inputs(data: &ModelData, cfg: &ChainConfig, hyper: &Hyperparams) -> Result<()> {
    cfg.validate().map_err(Error::Config)?;
    hyper.validate().map_err(Error::Config)?;
    if data.n() == 0 {
        return Err(Error::Config("no focal areas to fit".into()));
    }
    Ok(())
}

/// Runs `cfg.n_chains` independent chains of the full model.
pub fn run_full(data: &ModelData, hyper: &Hyperparams, hierarchy: Hierarchy, cfg: &ChainConfig) -> Result<ChainOutput> {
    check_inputs(data, cfg, hyper)?;
    let init = FullModelState::initial(data.n(), data.m(), hyper);
    if !log_posterior_full(&init, data, hyper, hierarchy).is_finite() {
        return Err(Error::Init(
            "log posterior is not finite at the reported centers (empty footprint?)".into(),
        ));
    }
    let runs: Vec<ChainRun> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_full_chain(c, data, hyper, hierarchy, cfg))
        .collect();
    Ok(ChainOutput::assemble(ModelKind::Full, data, full_columns(data.n(), data.m()), runs, cfg))
}

/// Runs `cfg.n_chains` independent chains of the shared-offset submodel.
pub fn run_sub(data: &ModelData, hyper: &Hyperparams, cfg: &ChainConfig) -> Result<ChainOutput> {
    check_inputs(data, cfg, hyper)?;
    let init = SubModelState::initial(data.m(), hyper);
    if !log_posterior_sub(&init, data, hyper).is_finite() {
        return Err(Error::Init(
            "log posterior is not finite at the reported center (empty footprint?)".into(),
        ));
    }
    let runs: Vec<ChainRun> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_sub_chain(c, data, hyper, cfg))
        .collect();
    Ok(ChainOutput::assemble(ModelKind::Sub, data, sub_columns(data.m()), runs, cfg))
}

pub fn run_chains(
    model: ModelKind,
    data: &ModelData,
    hyper: &Hyperparams,
    hierarchy: Hierarchy,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    match model {
        ModelKind::Full => run_full(data, hyper, hierarchy, cfg),
        ModelKind::Sub => run_sub(data, hyper, cfg),
    }
}
