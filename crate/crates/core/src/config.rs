//! Run configuration: one TOML file drives every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprint::{validate_percentiles, KernelParams, RhInterpolation, SimSettings, DEFAULT_PERCENTILES};
use crate::ingest::DEFAULT_MIN_POINTS;
use crate::model::{Hierarchy, Hyperparams};
use crate::posterior::SummaryOptions;
use crate::samplers::ChainConfig;
use crate::synthetic::SceneSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Full,
    Sub,
    #[default]
    Both,
}

impl ModelChoice {
    pub fn fits_full(self) -> bool {
        matches!(self, ModelChoice::Full | ModelChoice::Both)
    }

    pub fn fits_sub(self) -> bool {
        matches!(self, ModelChoice::Sub | ModelChoice::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub observations: PathBuf,
    /// Directory holding one `<id>.xyz` per observation.
    pub clouds: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            observations: PathBuf::from("scene/observations.csv"),
            clouds: PathBuf::from("scene"),
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    pub percentiles: Vec<f64>,
    pub interpolation: RhInterpolation,
    /// Lattice spacing (m) for memoized simulator calls; 0 disables it.
    pub cache_quantum: f64,
    /// Fewest points a focal area may hold.
    pub min_points: usize,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            percentiles: DEFAULT_PERCENTILES.to_vec(),
            interpolation: RhInterpolation::None,
            cache_quantum: 0.1,
            min_points: DEFAULT_MIN_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Draws per calibration test in `check`.
    pub calibration_draws: usize,
    pub ks_threshold: f64,
    pub oracle_clouds: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            calibration_draws: 20_000,
            ks_threshold: 0.03,
            oracle_clouds: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; copied into the chain, scene and fitted-value seeds.
    pub seed: u64,
    pub model: ModelChoice,
    pub hierarchy: Hierarchy,
    pub paths: Paths,
    pub kernel: KernelParams,
    pub simulator: SimulatorConfig,
    pub hyper: Hyperparams,
    pub chain: ChainConfig,
    pub posterior: SummaryOptions,
    pub synthetic: SceneSpec,
    pub check: CheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            seed: 1,
            model: ModelChoice::Both,
            hierarchy: Hierarchy::Pooled,
            paths: Paths::default(),
            kernel: KernelParams::default(),
            simulator: SimulatorConfig::default(),
            hyper: Hyperparams::default(),
            chain: ChainConfig::default(),
            posterior: SummaryOptions::default(),
            synthetic: SceneSpec::default(),
            check: CheckConfig::default(),
        };
        cfg.propagate_seed();
        cfg
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.propagate_seed();
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.paths.resolve_against(base);
        }
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.propagate_seed();
    }

    fn propagate_seed(&mut self) {
        self.chain.seed = self.seed;
        self.synthetic.seed = self.seed;
        self.posterior.noise_seed = self.seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        self.synthetic.percentiles = self.simulator.percentiles.clone();
    }

    pub fn sim_settings(&self) -> SimSettings {
        SimSettings {
            kernel: self.kernel,
            percentiles: self.simulator.percentiles.clone(),
            interpolation: self.simulator.interpolation,
        }
    }

    pub fn cache_quantum(&self) -> Option<f64> {
        (self.simulator.cache_quantum > 0.0).then_some(self.simulator.cache_quantum)
    }

    /// Checks every numeric range. Path existence is checked by the
    /// commands that read them.
    pub fn validate(&self) -> Result<()> {
        fn ctx(section: &'static str) -> impl Fn(String) -> Error {
            move |e| Error::Config(format!("[{section}] {e}"))
        }
        self.kernel.validate().map_err(ctx("kernel"))?;
        validate_percentiles(&self.simulator.percentiles).map_err(ctx("simulator"))?;
        if !(self.simulator.cache_quantum >= 0.0 && self.simulator.cache_quantum.is_finite()) {
            return Err(Error::Config("[simulator] cache_quantum must be >= 0".into()));
        }
        self.hyper.validate().map_err(ctx("hyper"))?;
        self.chain.validate().map_err(ctx("chain"))?;
        self.posterior.validate().map_err(ctx("posterior"))?;
        self.synthetic.validate().map_err(ctx("synthetic"))?;
        let c = &self.check;
        if c.calibration_draws < 100 || c.oracle_clouds == 0 || !(c.ks_threshold > 0.0 && c.ks_threshold < 1.0) {
            return Err(Error::Config("[check] budgets out of range".into()));
        }
        Ok(())
    }

    /// Stable serialized form, used for the manifest and its hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

impl Paths {
    fn resolve_against(&mut self, base: &Path) {
        for p in [&mut self.observations, &mut self.clouds, &mut self.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn require_inputs(&self) -> Result<()> {
        if !self.observations.is_file() {
            return Err(Error::Config(format!(
                "observations file {} does not exist",
                self.observations.display()
            )));
        }
        if !self.clouds.is_dir() {
            return Err(Error::Config(format!("cloud directory {} does not exist", self.clouds.display())));
        }
        Ok(())
    }
}
