//! MCMC engine: Gibbs blocks for the conjugate parameters, RAM or
//! random-walk Metropolis for locations, multi-chain orchestration and
//! convergence diagnostics.

mod chains;
pub mod diagnostics;
pub mod gibbs;
pub mod ram;

pub use chains::{
    chain_rng, metropolis_update_ell_star, prior_move_ell, ram_update_ell, ram_update_ell_star, run_chains, run_full, run_sub,
    ChainConfig, ChainOutput, Diagnostics, EllStarSampler, ModelKind, RHAT_THRESHOLD,
};
pub use gibbs::{gibbs_update_alpha_beta, gibbs_update_mu_sigma_ell, gibbs_update_tau2};
pub use ram::{MoveOutcome, RamKernel, RwmKernel, StepAdapter};
