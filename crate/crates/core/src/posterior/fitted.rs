use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::LOCAL_CENTER;
use crate::model::ModelData;
use crate::samplers::{ChainOutput, ModelKind};
use crate::stats::{median, sample_normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FittedMode {
    /// Adjusted simulator at each area's own location draws, with noise.
    Full,
    /// Adjusted simulator at the shared offset draws, with noise.
    Sub,
    /// Raw simulator at the reported center.
    Center,
}

impl FittedMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FittedMode::Full => "full",
            FittedMode::Sub => "sub",
            FittedMode::Center => "center",
        }
    }
}

fn noise_rng(seed: u64, area: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((1 << 63) | area as u64);
    rng
}

/// Per-area, per-metric fitted values (rows are areas). For the model
/// modes each value is the median over draws of one noisy realization
/// `N(alpha + beta g, tau2)` per draw; `seed` drives that noise.
pub fn fitted_values(mode: FittedMode, draws: Option<&ChainOutput>, data: &ModelData, seed: u64) -> Result<Vec<Vec<f64>>> {
    if mode == FittedMode::Center {
        return (0..data.n())
            .map(|i| {
                data.g(i, LOCAL_CENTER).map(|g| g.to_vec()).ok_or(Error::EmptyFootprint {
                    x: LOCAL_CENTER.x,
                    y: LOCAL_CENTER.y,
                    radius: data.settings.kernel.radius,
                })
            })
            .collect();
    }
    let out = draws.ok_or_else(|| Error::Internal(format!("{} fitted values need draws", mode.as_str())))?;
    let expected = match mode {
        FittedMode::Full => ModelKind::Full,
        _ => ModelKind::Sub,
    };
    if out.model != expected || out.m != data.m() || out.n_areas != data.n() {
        return Err(Error::Internal("draws do not match the model data".into()));
    }
    let m = data.m();
    (0..data.n())
        .into_par_iter()
        .map(|i| {
            let locs = match mode {
                FittedMode::Full => out.ell_draws(i),
                _ => out.ell_star_draws(),
            };
            let mut rng = noise_rng(seed, i);
            let mut realized: Vec<Vec<f64>> = vec![Vec::with_capacity(locs.len()); m];
            for (draw, loc) in out.draws().zip(&locs) {
                let (alpha, beta, tau2) = out.adjustments(draw);
                let g = data.g(i, *loc).ok_or(Error::EmptyFootprint {
                    x: loc.x,
                    y: loc.y,
                    radius: data.settings.kernel.radius,
                })?;
                for j in 0..m {
                    realized[j].push(sample_normal(&mut rng, alpha[j] + beta[j] * g[j], tau2[j]));
                }
            }
            Ok(realized.iter().map(|r| median(r)).collect())
        })
        .collect()
}
