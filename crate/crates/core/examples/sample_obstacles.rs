//! Sample a Poisson obstacle field and report its vacancy components.
//!
//! cargo run --example sample_obstacles -- [seed]

use kl_lab::disorder::{sample_realization, volume_fraction, DisorderConfig};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = DisorderConfig { d: 2, rho: 1.0, n_particles: 100, nu: 0.5, r: 0.5, h: 0.2, seed };
    let real = sample_realization(&cfg).expect("valid config");
    let vf = volume_fraction(&real, 0.1);
    println!("box side {:.3}, grid {:?}", cfg.box_side(), real.domain.lattice().shape());
    println!("{} obstacles, {} vacant nodes, {} components", real.centers.len(), real.vacant_count(), real.component_count());
    println!("volume fraction {:.4} (expected {:.4}, in omega1: {})", vf.fraction, vf.expected, vf.in_omega1);
    let mut vols = real.component_volumes();
    vols.sort_by(|a, b| b.total_cmp(a));
    println!("largest component volumes: {:?}", &vols[..vols.len().min(5)]);
}
