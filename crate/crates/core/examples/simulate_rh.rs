//! Simulate footprint RH metrics from a point cloud at several candidate
//! centers, and show how much kernel mass the 12.5 m truncation keeps.
//!
//! cargo run --release --example simulate_rh

use lidar_geoloc::footprint::{kernel_mass_within, simulate_rh, KernelParams, RhVector, SimSettings};
use lidar_geoloc::geom::{Coord, LOCAL_CENTER};
use lidar_geoloc::ingest::{FocalArea, GeoPoint};

fn main() -> lidar_geoloc::Result<()> {
    // a 70 m focal area: tall stand in the west half, a gap in the east
    let mut points = Vec::new();
    for i in 0..140 {
        for j in 0..140 {
            let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
            let z = if x < 35.0 { 25.0 + 0.1 * y } else { 2.0 + 0.05 * x };
            points.push(GeoPoint::new(x, y, z));
        }
    }
    let rh = RhVector::new(vec![50.0, 98.0], vec![0.0, 0.0]).map_err(lidar_geoloc::Error::Config)?;
    let area = FocalArea::from_local("demo", points, rh);
    let settings = SimSettings::default();

    let kernel = KernelParams::default();
    println!(
        "kernel sd {} m: {:.4} of the 2D mass lies within 12.5 m, {:.6} within the {} m capture radius",
        kernel.sigma_f,
        kernel_mass_within(12.5, &kernel),
        kernel_mass_within(kernel.radius, &kernel),
        kernel.radius
    );
    println!("{:>14} {}", "center", settings.percentiles.iter().map(|p| format!("rh{p:<5}")).collect::<String>());
    for dx in [-10.0, -5.0, 0.0, 5.0, 10.0] {
        let c = LOCAL_CENTER + Coord::new(dx, 0.0);
        let rh = simulate_rh(&area, c, &settings)?;
        let row: String = rh.values.iter().map(|v| format!("{v:<8.2}")).collect();
        println!("({:5.1},{:5.1}) {row}", c.x, c.y);
    }
    Ok(())
}
