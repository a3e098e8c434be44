//! Scenes with known truth: canopy height fields sampled into point
//! clouds, a known shared offset plus per-area jitter, and observations
//! produced by the forward model.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprint::{simulate_rh, validate_percentiles, KernelParams, RhVector, SimSettings, DEFAULT_PERCENTILES};
use crate::geom::{within_bound, Coord, LOCAL_CENTER, SEARCH_BOUND};
use crate::ingest::{clip_focal_area, cloud_path, write_observations, write_point_cloud, GeoPoint, Observation};
use crate::stats::sample_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CanopyPattern {
    /// Constant height plus per-point noise.
    Uniform,
    /// Square blocks of random height, some of them gaps at 0.
    GapMosaic,
    /// Tall stand on one side of a straight edge, short on the other.
    Edge,
    /// Scattered parabolic crowns over bare ground.
    SingleTreeClusters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternParams {
    pub uniform_height: f64,
    pub height_noise_sd: f64,
    pub block_size: f64,
    pub gap_fraction: f64,
    pub height_min: f64,
    pub height_max: f64,
    pub edge_low: f64,
    /// Crowns per square meter.
    pub crown_density: f64,
    pub crown_radius_min: f64,
    pub crown_radius_max: f64,
    /// Probability that a return under canopy comes from the ground.
    pub ground_fraction: f64,
}

impl Default for PatternParams {
    fn default() -> Self {
        PatternParams {
            uniform_height: 20.0,
            height_noise_sd: 0.5,
            block_size: 8.0,
            gap_fraction: 0.4,
            height_min: 8.0,
            height_max: 32.0,
            edge_low: 2.0,
            crown_density: 0.006,
            crown_radius_min: 2.5,
            crown_radius_max: 6.0,
            ground_fraction: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub n_areas: usize,
    /// Points per square meter.
    pub density: f64,
    pub pattern: CanopyPattern,
    pub pattern_params: PatternParams,
    /// Shared location offset, meters, in the local frame.
    pub true_offset: Coord,
    /// Per-area location jitter sd, meters, per axis.
    pub jitter_sd: f64,
    /// Observation noise variance per metric; a single value applies to all.
    pub tau2_true: Vec<f64>,
    pub alpha_true: Vec<f64>,
    pub beta_true: Vec<f64>,
    pub percentiles: Vec<f64>,
    /// Half-width of the generated cloud around each reported center.
    pub cloud_half_width: f64,
    /// Spacing between reported centers in the source frame.
    pub area_spacing: f64,
    pub origin: Coord,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_areas: 50,
            density: 2.0,
            pattern: CanopyPattern::GapMosaic,
            pattern_params: PatternParams::default(),
            true_offset: Coord::new(-5.60, -7.83),
            jitter_sd: 0.0,
            tau2_true: vec![1.0],
            alpha_true: vec![0.0],
            beta_true: vec![1.0],
            percentiles: DEFAULT_PERCENTILES.to_vec(),
            cloud_half_width: 40.0,
            area_spacing: 1000.0,
            origin: Coord::new(500_000.0, 4_900_000.0),
            seed: 1,
        }
    }
}

const MAX_JITTER_REDRAWS: usize = 10_000;

fn per_metric(name: &str, v: &[f64], m: usize) -> std::result::Result<Vec<f64>, String> {
    match v.len() {
        1 => Ok(vec![v[0]; m]),
        k if k == m => Ok(v.to_vec()),
        k => Err(format!("{name} has {k} values; expected 1 or {m}")),
    }
}

impl SceneSpec {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.n_areas == 0 {
            return Err("n_areas must be >= 1".into());
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err("density must be > 0".into());
        }
        if !(self.jitter_sd >= 0.0) {
            return Err("jitter_sd must be >= 0".into());
        }
        let reach = self.true_offset.dist(Coord::default()) + 3.0 * self.jitter_sd;
        if !(reach <= SEARCH_BOUND) {
            return Err(format!(
                "|true_offset| + 3 jitter_sd = {reach:.3} m exceeds the {SEARCH_BOUND} m search bound"
            ));
        }
        validate_percentiles(&self.percentiles)?;
        let m = self.percentiles.len();
        per_metric("alpha_true", &self.alpha_true, m)?;
        per_metric("beta_true", &self.beta_true, m)?;
        let tau2 = per_metric("tau2_true", &self.tau2_true, m)?;
        if tau2.iter().any(|t| !(*t >= 0.0)) {
            return Err("tau2_true must be >= 0".into());
        }
        if !(self.cloud_half_width >= 35.0) {
            return Err("cloud_half_width must cover the 35 m focal half-width".into());
        }
        let p = &self.pattern_params;
        if !(p.block_size > 0.0 && p.crown_radius_min > 0.0 && p.crown_radius_max >= p.crown_radius_min) {
            return Err("pattern sizes must be positive".into());
        }
        if !(0.0..=1.0).contains(&p.gap_fraction) || !(0.0..=1.0).contains(&p.ground_fraction) {
            return Err("fractions must lie in [0, 1]".into());
        }
        if !(p.height_max >= p.height_min && p.height_min >= 0.0) {
            return Err("need 0 <= height_min <= height_max".into());
        }
        Ok(())
    }

    pub fn area_id(&self, i: usize) -> String {
        format!("fp{:04}", i + 1)
    }

    fn source_center(&self, i: usize) -> Coord {
        Coord::new(self.origin.x + self.area_spacing * i as f64, self.origin.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaTruth {
    pub id: String,
    pub reported_center: Coord,
    /// True measurement location in the local frame.
    pub ell_true: Coord,
    pub jitter: Coord,
    /// Jitter draws discarded to keep the location in-bound.
    pub jitter_redraws: usize,
    /// Simulator output at the true location.
    pub g_true: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: SceneSpec,
    pub kernel: KernelParams,
    /// Each noisy metric vector is sorted so observations stay nondecreasing.
    pub monotone_rearranged: bool,
    pub areas: Vec<AreaTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub percentiles: Vec<f64>,
    pub observations: Vec<Observation>,
    /// Clouds in the source frame, one per observation.
    pub clouds: Vec<Vec<GeoPoint>>,
    pub truth: Truth,
}

/// Canopy top height at a local-frame location.
enum HeightField {
    Uniform(f64),
    Mosaic { phase: Coord, size: f64, heights: Vec<f64>, cols: usize },
    Edge { normal: Coord, offset: f64, high: f64, low: f64 },
    Crowns(Vec<(Coord, f64, f64)>),
}

impl HeightField {
    fn sample(pattern: CanopyPattern, p: &PatternParams, half: f64, rng: &mut ChaCha20Rng) -> Self {
        let lo = LOCAL_CENTER.x - half;
        let side = 2.0 * half;
        match pattern {
            CanopyPattern::Uniform => HeightField::Uniform(p.uniform_height),
            CanopyPattern::GapMosaic => {
                let phase = Coord::new(rng.random::<f64>() * p.block_size, rng.random::<f64>() * p.block_size);
                let cols = (side / p.block_size).ceil() as usize + 2;
                let heights = (0..cols * cols)
                    .map(|_| {
                        if rng.random::<f64>() < p.gap_fraction {
                            0.0
                        } else {
                            rng.random_range(p.height_min..=p.height_max)
                        }
                    })
                    .collect();
                HeightField::Mosaic {
                    phase: Coord::new(lo - phase.x, lo - phase.y),
                    size: p.block_size,
                    heights,
                    cols,
                }
            }
            CanopyPattern::Edge => {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                HeightField::Edge {
                    normal: Coord::new(theta.cos(), theta.sin()),
                    offset: rng.random_range(-10.0..10.0),
                    high: rng.random_range(p.height_min..=p.height_max),
                    low: p.edge_low,
                }
            }
            CanopyPattern::SingleTreeClusters => {
                let lambda = p.crown_density * side * side;
                let count = Poisson::new(lambda).map(|d| d.sample(rng) as usize).unwrap_or(0);
                let crowns = (0..count)
                    .map(|_| {
                        let c = Coord::new(lo + rng.random::<f64>() * side, lo + rng.random::<f64>() * side);
                        let r = rng.random_range(p.crown_radius_min..=p.crown_radius_max);
                        let h = rng.random_range(p.height_min..=p.height_max);
                        (c, r, h)
                    })
                    .collect();
                HeightField::Crowns(crowns)
            }
        }
    }

    fn height(&self, at: Coord) -> f64 {
        match self {
            HeightField::Uniform(h) => *h,
            HeightField::Mosaic { phase, size, heights, cols } => {
                let cx = (((at.x - phase.x) / size).floor().max(0.0) as usize).min(cols - 1);
                let cy = (((at.y - phase.y) / size).floor().max(0.0) as usize).min(cols - 1);
                heights[cy * cols + cx]
            }
            HeightField::Edge { normal, offset, high, low } => {
                let s = (at.x - LOCAL_CENTER.x) * normal.x + (at.y - LOCAL_CENTER.y) * normal.y;
                if s > *offset {
                    *high
                } else {
                    *low
                }
            }
            HeightField::Crowns(crowns) => crowns
                .iter()
                .filter_map(|(c, r, h)| {
                    let d2 = at.dist2(*c);
                    (d2 < r * r).then(|| h * (1.0 - d2 / (r * r)))
                })
                .fold(0.0, f64::max),
        }
    }
}

fn area_rng(seed: u64, i: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Point cloud in the local frame: uniform positions, heights drawn
/// through the canopy below the local top.
fn sample_cloud(spec: &SceneSpec, field: &HeightField, rng: &mut ChaCha20Rng) -> Vec<GeoPoint> {
    let half = spec.cloud_half_width;
    let lo = LOCAL_CENTER.x - half;
    let side = 2.0 * half;
    let n = (spec.density * side * side).round() as usize;
    let p = &spec.pattern_params;
    let noise = Normal::new(0.0, p.height_noise_sd.max(0.0)).unwrap();
    (0..n)
        .map(|_| {
            let at = Coord::new(lo + rng.random::<f64>() * side, lo + rng.random::<f64>() * side);
            let top = field.height(at);
            let ground = rng.random::<f64>() < p.ground_fraction;
            let u: f64 = rng.random();
            let z = if top <= 0.0 || ground {
                0.0
            } else {
                // returns concentrate near the top of the canopy
                top * u.sqrt() + noise.sample(rng)
            };
            GeoPoint::new(at.x, at.y, z)
        })
        .collect()
}

fn generate_area(spec: &SceneSpec, settings: &SimSettings, i: usize) -> Result<(Observation, Vec<GeoPoint>, AreaTruth)> {
    let m = spec.percentiles.len();
    let alpha = per_metric("alpha_true", &spec.alpha_true, m).map_err(Error::Config)?;
    let beta = per_metric("beta_true", &spec.beta_true, m).map_err(Error::Config)?;
    let tau2 = per_metric("tau2_true", &spec.tau2_true, m).map_err(Error::Config)?;

    let mut rng = area_rng(spec.seed, i);
    let field = HeightField::sample(spec.pattern, &spec.pattern_params, spec.cloud_half_width, &mut rng);
    let local = sample_cloud(spec, &field, &mut rng);
    let id = spec.area_id(i);
    let center = spec.source_center(i);
    let cloud: Vec<GeoPoint> = local
        .iter()
        .map(|p| GeoPoint::new(p.x - LOCAL_CENTER.x + center.x, p.y - LOCAL_CENTER.y + center.y, p.z))
        .collect();

    // the forward model sees exactly what ingest will keep
    let placeholder = RhVector::new(spec.percentiles.clone(), vec![0.0; m]).map_err(Error::Config)?;
    let probe = Observation {
        id: id.clone(),
        center,
        rh: placeholder,
    };
    let area = clip_focal_area(&probe, &cloud, 1)?;

    let base = LOCAL_CENTER + spec.true_offset;
    let mut redraws = 0;
    let (jitter, g_true) = loop {
        let jitter = if spec.jitter_sd > 0.0 {
            Coord::new(
                sample_normal(&mut rng, 0.0, spec.jitter_sd * spec.jitter_sd),
                sample_normal(&mut rng, 0.0, spec.jitter_sd * spec.jitter_sd),
            )
        } else {
            Coord::default()
        };
        let ell = base + jitter;
        if within_bound(ell, SEARCH_BOUND) {
            if let Ok(rh) = simulate_rh(&area, ell, settings) {
                break (jitter, rh.values);
            }
        }
        redraws += 1;
        if redraws > MAX_JITTER_REDRAWS || spec.jitter_sd == 0.0 {
            return Err(Error::Config(format!(
                "area {id}: could not place the true location in-bound on a non-empty footprint"
            )));
        }
    };
    let mut z: Vec<f64> = (0..m)
        .map(|j| sample_normal(&mut rng, alpha[j] + beta[j] * g_true[j], tau2[j]))
        .collect();
    z.sort_by(f64::total_cmp);

    let obs = Observation {
        id: id.clone(),
        center,
        rh: RhVector::new(spec.percentiles.clone(), z).map_err(Error::Internal)?,
    };
    let truth = AreaTruth {
        id,
        reported_center: center,
        ell_true: base + jitter,
        jitter,
        jitter_redraws: redraws,
        g_true,
    };
    Ok((obs, cloud, truth))
}

/// Builds a scene. Every area has its own generator stream, so the result
/// does not depend on the thread count.
pub fn generate_scene(spec: &SceneSpec, kernel: &KernelParams) -> Result<Scene> {
    spec.validate().map_err(Error::Config)?;
    kernel.validate().map_err(Error::Config)?;
    let settings = SimSettings {
        kernel: *kernel,
        percentiles: spec.percentiles.clone(),
        ..SimSettings::default()
    };
    let parts = (0..spec.n_areas)
        .into_par_iter()
        .map(|i| generate_area(spec, &settings, i))
        .collect::<Result<Vec<_>>>()?;
    let mut observations = Vec::with_capacity(parts.len());
    let mut clouds = Vec::with_capacity(parts.len());
    let mut areas = Vec::with_capacity(parts.len());
    for (o, c, t) in parts {
        observations.push(o);
        clouds.push(c);
        areas.push(t);
    }
    Ok(Scene {
        percentiles: spec.percentiles.clone(),
        observations,
        clouds,
        truth: Truth {
            spec: spec.clone(),
            kernel: *kernel,
            monotone_rearranged: true,
            areas,
        },
    })
}

/// Writes `observations.csv`, `truth.json` and one `<id>.xyz` per area
/// into `dir`.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<Vec<PathBuf>> {
    write_scene_files(scene, &dir.join("observations.csv"), dir, &dir.join("truth.json"))
}

/// Like [`write_scene`] with each output placed explicitly.
pub fn write_scene_files(scene: &Scene, observations: &Path, cloud_dir: &Path, truth: &Path) -> Result<Vec<PathBuf>> {
    for d in [observations.parent(), Some(cloud_dir), truth.parent()].into_iter().flatten() {
        if !d.as_os_str().is_empty() {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
    }
    let mut files = Vec::new();
    write_observations(observations, &scene.percentiles, &scene.observations)?;
    files.push(observations.to_path_buf());
    let text = serde_json::to_string_pretty(&scene.truth)?;
    std::fs::write(truth, text + "\n").map_err(|e| Error::io(truth, e))?;
    files.push(truth.to_path_buf());
    let clouds: Vec<PathBuf> = scene
        .observations
        .par_iter()
        .zip(&scene.clouds)
        .map(|(o, c)| {
            let p = cloud_path(cloud_dir, &o.id);
            write_point_cloud(&p, c).map(|_| p)
        })
        .collect::<Result<_>>()?;
    files.extend(clouds);
    Ok(files)
}

pub fn read_truth(path: &Path) -> Result<Truth> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
