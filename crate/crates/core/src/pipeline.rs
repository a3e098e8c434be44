//! The four commands behind the binary. Each writes under the configured
//! output directory and records what it wrote in `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checks::{self, CheckLine};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::{load_focal_areas, read_observations, FocalArea};
use crate::model::ModelData;
use crate::posterior::{summarize, SummaryReport};
use crate::samplers::{run_full, run_sub, ChainOutput, ModelKind};
use crate::synthetic::{generate_scene, write_scene_files};

pub const MANIFEST: &str = "manifest.json";

/// Files a command wrote plus human-readable result lines.
#[derive(Debug, Clone, Default)]
pub struct CommandReport {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
    /// Names of failed checks (`check` only).
    pub failed: Vec<String>,
}

impl CommandReport {
    /// `Err(ChecksFailed)` when any check failed.
    pub fn into_result(self) -> Result<Self> {
        if self.failed.is_empty() {
            Ok(self)
        } else {
            Err(Error::ChecksFailed(self.failed))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub config_hash: String,
    pub seed: u64,
    /// Fully resolved configuration; rerunning with it reproduces every file.
    pub config: serde_json::Value,
    /// Per command, output path (relative to the output directory when
    /// inside it) to SHA-256.
    pub commands: BTreeMap<String, BTreeMap<String, String>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn draws_path(out: &Path, model: ModelKind) -> PathBuf {
    out.join(format!("draws_{}.csv", model.as_str()))
}

pub fn diagnostics_path(out: &Path, model: ModelKind) -> PathBuf {
    out.join(format!("diagnostics_{}.json", model.as_str()))
}

/// Adds `files` under `command` to the output directory's manifest,
/// starting a fresh manifest when the config changed.
fn record(cfg: &RunConfig, command: &str, files: &[PathBuf]) -> Result<PathBuf> {
    let out = &cfg.paths.output;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let canonical = cfg.canonical_json();
    let hash = sha256_hex(canonical.as_bytes());
    let path = out.join(MANIFEST);
    let mut manifest = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str::<Manifest>(&t).ok())
        .filter(|m| m.config_hash == hash)
        .unwrap_or_else(|| Manifest {
            tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            config_hash: hash,
            seed: cfg.seed,
            config: serde_json::from_str(&canonical).expect("config is valid json"),
            commands: BTreeMap::new(),
        });
    let mut entries = BTreeMap::new();
    for f in files {
        let key = f.strip_prefix(out).unwrap_or(f).display().to_string();
        entries.insert(key, file_hash(f)?);
    }
    manifest.commands.insert(command.to_string(), entries);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<CommandReport> {
    cfg.validate()?;
    let scene = generate_scene(&cfg.synthetic, &cfg.kernel)?;
    let truth = cfg
        .paths
        .observations
        .parent()
        .map_or_else(|| PathBuf::from("truth.json"), |p| p.join("truth.json"));
    let files = write_scene_files(&scene, &cfg.paths.observations, &cfg.paths.clouds, &truth)?;
    let redraws: usize = scene.truth.areas.iter().map(|a| a.jitter_redraws).sum();
    let manifest = record(cfg, "generate", &files)?;
    Ok(CommandReport {
        failed: Vec::new(),
        lines: vec![format!(
            "generated {} areas ({:?}), {} jitter redraws",
            scene.observations.len(),
            cfg.synthetic.pattern,
            redraws
        )],
        files: files.into_iter().chain([manifest]).collect(),
    })
}

/// Reads observations and clouds and prepares them for the model.
pub fn load_inputs(cfg: &RunConfig) -> Result<(Vec<FocalArea>, ModelData)> {
    cfg.validate()?;
    cfg.paths.require_inputs()?;
    let (percentiles, observations) = read_observations(&cfg.paths.observations)?;
    if percentiles != cfg.simulator.percentiles {
        return Err(Error::PercentileMismatch {
            config: cfg.simulator.percentiles.clone(),
            header: percentiles,
        });
    }
    if observations.is_empty() {
        return Err(Error::EmptyInput(cfg.paths.observations.display().to_string()));
    }
    let areas = load_focal_areas(&observations, &cfg.paths.clouds, cfg.simulator.min_points)?;
    let data = ModelData::new(&areas, cfg.sim_settings(), cfg.cache_quantum())?;
    info!("loaded {} focal areas", areas.len());
    Ok((areas, data))
}

/// Runs the configured model(s) and returns the chain outputs in
/// `(full, sub)` order.
pub fn fit(cfg: &RunConfig, data: &ModelData) -> Result<(Option<ChainOutput>, Option<ChainOutput>)> {
    let full = if cfg.model.fits_full() {
        Some(run_full(data, &cfg.hyper, cfg.hierarchy, &cfg.chain)?)
    } else {
        None
    };
    let sub = if cfg.model.fits_sub() {
        Some(run_sub(data, &cfg.hyper, &cfg.chain)?)
    } else {
        None
    };
    Ok((full, sub))
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<CommandReport> {
    let (_, data) = load_inputs(cfg)?;
    let out = &cfg.paths.output;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (full, sub) = fit(cfg, &data)?;
    let mut report = CommandReport::default();
    for o in [full.as_ref(), sub.as_ref()].into_iter().flatten() {
        let d = draws_path(out, o.model);
        o.write_draws_csv(&d)?;
        let g = diagnostics_path(out, o.model);
        o.write_diagnostics_json(&g)?;
        report.files.extend([d, g]);
        let diag = &o.diagnostics;
        let rhat = diag.max_rhat.map_or("n/a".to_string(), |r| format!("{r:.4}"));
        if diag.max_rhat.is_some_and(|r| r > diag.rhat_threshold) {
            warn!("{} model: max R-hat {rhat} exceeds {}", o.model.as_str(), diag.rhat_threshold);
        }
        report.lines.push(format!(
            "{} model: {} chains x {} draws, acceptance {:.3}, max R-hat {rhat}",
            o.model.as_str(),
            o.chains.len(),
            diag.kept_per_chain,
            diag.acceptance
        ));
    }
    report.files.push(record(cfg, "fit", &report.files)?);
    Ok(report)
}

/// Loads whichever fits exist in the output directory.
pub fn read_fits(out: &Path) -> Result<(Option<ChainOutput>, Option<ChainOutput>)> {
    let load = |m| {
        let d = draws_path(out, m);
        let g = diagnostics_path(out, m);
        if d.is_file() && g.is_file() {
            ChainOutput::read(&d, &g).map(Some)
        } else {
            Ok(None)
        }
    };
    Ok((load(ModelKind::Full)?, load(ModelKind::Sub)?))
}

pub fn summarize_fits(cfg: &RunConfig, data: &ModelData) -> Result<SummaryReport> {
    let (full, sub) = read_fits(&cfg.paths.output)?;
    summarize(data, full.as_ref(), sub.as_ref(), &cfg.posterior, &cfg.paths.output)
}

pub fn cmd_summarize(cfg: &RunConfig) -> Result<CommandReport> {
    let (_, data) = load_inputs(cfg)?;
    let s = summarize_fits(cfg, &data)?;
    let mut lines = Vec::new();
    if let Some(p) = &s.systematic.ell_star {
        lines.push(format!(
            "shared offset mode: {:.2} m at {:.2} deg",
            p.map_distance, p.map_angle
        ));
    }
    if let Some(p) = &s.systematic.pooled {
        lines.push(format!("pooled location mode: {:.2} m at {:.2} deg", p.map_distance, p.map_angle));
    }
    for (mode, r) in &s.rmse {
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        lines.push(format!("mean RMSE ({mode}): {mean:.3}"));
    }
    let manifest = record(cfg, "summarize", &s.files)?;
    Ok(CommandReport {
        files: s.files.into_iter().chain([manifest]).collect(),
        lines,
        failed: Vec::new(),
    })
}

/// Reduced-budget self-checks plus convergence of any fit in the output
/// directory.
/// Mode occupancy needs about this many draws to resolve +/-0.05.
const RAM_CHECK_DRAWS: usize = 100_000;

pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckLine>> {
    cfg.validate()?;
    let c = &cfg.check;
    let mut lines = vec![
        checks::kernel_mass_check(&cfg.kernel, 12.5),
        checks::weighted_rh_oracle(c.oracle_clouds, cfg.seed),
    ];
    lines.extend(checks::gibbs_calibration(c.calibration_draws, c.ks_threshold, cfg.seed));
    lines.push(checks::ram_mixing_check(RAM_CHECK_DRAWS, 3, cfg.seed));
    let (full, sub) = read_fits(&cfg.paths.output)?;
    for o in [full, sub].into_iter().flatten() {
        lines.push(checks::convergence_check(o.model.as_str(), &o.diagnostics));
    }
    Ok(lines)
}

pub fn cmd_check(cfg: &RunConfig) -> Result<CommandReport> {
    let lines = run_checks(cfg)?;
    let out = &cfg.paths.output;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("check_report.json");
    let text = serde_json::to_string_pretty(&lines)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    let manifest = record(cfg, "check", std::slice::from_ref(&path))?;
    let failed: Vec<String> = lines.iter().filter(|l| !l.passed).map(|l| l.name.clone()).collect();
    Ok(CommandReport {
        files: vec![path, manifest],
        lines: lines.iter().map(ToString::to_string).collect(),
        failed,
    })
}
