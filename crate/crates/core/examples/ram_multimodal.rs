//! RAM against random-walk Metropolis on a three-mode 2D mixture with
//! modes 8 m apart. Both start in the lightest mode with the same scale.
//!
//! cargo run --release --example ram_multimodal

use lidar_geoloc::geom::Coord;
use lidar_geoloc::samplers::{RamKernel, RwmKernel};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let h = 8.0 * 3f64.sqrt() / 2.0;
    let modes = [Coord::new(0.0, 0.0), Coord::new(8.0, 0.0), Coord::new(4.0, h)];
    let weights = [0.5, 0.3, 0.2];
    let target = |c: Coord| {
        modes
            .iter()
            .zip(weights)
            .map(|(m, w)| w * (-0.5 * c.dist2(*m)).exp())
            .sum::<f64>()
            .ln()
    };
    let occupancy = |xs: &[Coord]| {
        let mut n = [0usize; 3];
        for x in xs {
            let k = (0..3).min_by(|&a, &b| x.dist2(modes[a]).total_cmp(&x.dist2(modes[b]))).unwrap();
            n[k] += 1;
        }
        n.map(|c| c as f64 / xs.len() as f64)
    };

    let draws = 100_000;
    let scale = 1.5;
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let ram = RamKernel::new(scale, 1e-8);
    let mut x = modes[2];
    let mut evals = 0;
    let xs: Vec<Coord> = (0..draws)
        .map(|_| {
            let o = ram.step(x, target, &mut rng);
            evals += o.evals;
            x = o.state;
            x
        })
        .collect();
    let rwm = RwmKernel { step: scale };
    let mut y = modes[2];
    let ys: Vec<Coord> = (0..draws)
        .map(|_| {
            y = rwm.step(y, target, &mut rng).state;
            y
        })
        .collect();

    println!("target occupancy      {weights:.3?}");
    println!("RAM                   {:.3?}  ({:.1} evaluations per draw)", occupancy(&xs), evals as f64 / draws as f64);
    println!("random-walk Metropolis {:.3?}", occupancy(&ys));
}
