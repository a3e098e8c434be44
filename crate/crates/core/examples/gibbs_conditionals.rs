//! The conjugate full conditionals on a tiny data set: closed-form means
//! and variances, and sampled moments that match them.
//!
//! cargo run --release --example gibbs_conditionals

use lidar_geoloc::model::Hyperparams;
use lidar_geoloc::samplers::gibbs::{alpha_conditional, beta_conditional, tau2_conditional};
use lidar_geoloc::samplers::{gibbs_update_alpha_beta, gibbs_update_tau2};
use lidar_geoloc::stats::{mean, variance};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let hyper = Hyperparams::default();
    // three areas, one metric: observed z and simulated g
    let z = vec![vec![11.0], vec![17.5], vec![8.2]];
    let g = vec![vec![10.0], vec![16.0], vec![8.0]];
    let (alpha, beta, tau2) = (0.5, 1.05, 0.8);

    let (ma, va) = alpha_conditional(0, beta, tau2, &z, &g, &hyper);
    let (mb, vb) = beta_conditional(0, alpha, tau2, &z, &g, &hyper);
    let (a, b) = tau2_conditional(0, alpha, beta, &z, &g, &hyper);
    println!("alpha | beta, tau2 ~ N({ma:.4}, {va:.4})");
    println!("beta | alpha, tau2 ~ N({mb:.4}, {vb:.5})");
    println!("tau2 | alpha, beta ~ InvGamma({a}, {b:.4}), mean {:.4}", b / (a - 1.0));

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let n = 200_000;
    let mut t = [0.0];
    let taus: Vec<f64> = (0..n)
        .map(|_| {
            gibbs_update_tau2(&mut t, &[alpha], &[beta], &z, &g, &hyper, &mut rng);
            t[0]
        })
        .collect();
    println!("sampled tau2 mean {:.4} over {n} draws", mean(&taus));

    // a full alpha/beta/tau2 Gibbs run on the same data
    let (mut al, mut be, mut ta) = ([0.0], [1.0], [1.0]);
    let mut betas = Vec::new();
    for it in 0..50_000 {
        gibbs_update_alpha_beta(&mut al, &mut be, &ta, &z, &g, &hyper, &mut rng);
        gibbs_update_tau2(&mut ta, &al, &be, &z, &g, &hyper, &mut rng);
        if it >= 5_000 {
            betas.push(be[0]);
        }
    }
    println!("joint Gibbs: posterior beta mean {:.3}, sd {:.3}", mean(&betas), variance(&betas).sqrt());
}
