//! The same fit on thread pools of different sizes gives identical draws:
//! every chain and every area has its own random stream.
//!
//! cargo run --release --example deterministic_threads

use lidar_geoloc::footprint::{KernelParams, SimSettings};
use lidar_geoloc::ingest::clip_focal_area;
use lidar_geoloc::model::{Hierarchy, Hyperparams, ModelData};
use lidar_geoloc::samplers::{run_full, ChainConfig, ChainOutput};
use lidar_geoloc::synthetic::{generate_scene, SceneSpec};

fn fit(threads: usize) -> ChainOutput {
    let spec = SceneSpec {
        n_areas: 6,
        jitter_sd: 2.0,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec, &KernelParams::default()).unwrap();
    let areas: Vec<_> = scene
        .observations
        .iter()
        .zip(&scene.clouds)
        .map(|(o, c)| clip_focal_area(o, c, 100).unwrap())
        .collect();
    let data = ModelData::new(&areas, SimSettings::default(), Some(0.1)).unwrap();
    let cfg = ChainConfig {
        n_chains: 3,
        kept: 200,
        ..ChainConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| run_full(&data, &Hyperparams::default(), Hierarchy::Pooled, &cfg).unwrap())
}

fn main() {
    let one = fit(1);
    let four = fit(4);
    println!("{} chains, {} columns per draw", one.chains.len(), one.columns.len());
    println!("identical across 1 and 4 threads: {}", one.chains == four.chains);
}
