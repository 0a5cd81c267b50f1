//! Median lambda1 and gap against the logarithmic scales, with a free-box control.

use kl_lab::disorder::DisorderConfig;
use kl_lab::ensemble::{derive_seeds, scaling_sweep, EnsembleSpec, PipelineOptions};
use kl_lab::interaction::PotentialSpec;

fn main() {
    let spec = EnsembleSpec {
        base: DisorderConfig { d: 2, rho: 1.0, n_particles: 0, nu: 0.5, r: 1.0, h: 0.5, seed: 0 },
        seeds: derive_seeds(7, 4),
        n_values: vec![256, 1024, 4096],
        potential: PotentialSpec::gaussian(0.0, 1.0),
        options: PipelineOptions::default(),
    };
    let rep = scaling_sweep(&spec);
    for r in &rep.rows {
        println!(
            "N = {:5}: median lambda1 {:?}, median gap {:?}, free box {:?}",
            r.n_particles, r.median_lambda1, r.median_gap, r.free_box_lambda1
        );
    }
    println!("lambda1 fit: {:?}", rep.lambda1_fit);
    println!("free box slope {:?} (expected {})", rep.free_box_fit.map(|f| f.slope), rep.free_box_expected_slope);
}
