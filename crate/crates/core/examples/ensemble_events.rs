//! Event frequencies over a seeded ensemble, run on the `KL_WORKERS` pool.

use kl_lab::disorder::DisorderConfig;
use kl_lab::ensemble::{derive_seeds, estimate_event_probabilities, run_ensemble, worker_pool, EnsembleSpec, PipelineOptions};
use kl_lab::interaction::PotentialSpec;

fn main() {
    let spec = EnsembleSpec {
        base: DisorderConfig { d: 2, rho: 1.0, n_particles: 64, nu: 0.4, r: 0.5, h: 0.2, seed: 0 },
        seeds: derive_seeds(2024, 40),
        n_values: Vec::new(),
        potential: PotentialSpec::gaussian(1.0, 1.0),
        options: PipelineOptions::default(),
    };
    let records = worker_pool().unwrap().install(|| run_ensemble(&spec));
    let summary = estimate_event_probabilities(&records, spec.options.sigma_ref);
    for row in summary.rows() {
        println!("{:10} {:3}/{:3} = {:.3}  [{:.3}, {:.3}]", row.event, row.successes, row.trials, row.estimate, row.lower, row.upper);
    }
    println!("failures: {}", summary.failures);
}
