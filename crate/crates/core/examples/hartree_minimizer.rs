//! Hartree minimizer on the ground-state component, cross-checked by damped SCF.

use kl_lab::disorder::{sample_realization, DisorderConfig};
use kl_lab::hartree::{damped_scf, minimize_hartree, HartreeOptions};
use kl_lab::interaction::{build_interaction, PotentialSpec};
use kl_lab::laplace::{assemble_laplacian, ground_state_component, lowest_eigenpairs};

fn main() {
    let cfg = DisorderConfig { d: 2, rho: 1.0, n_particles: 64, nu: 0.4, r: 0.5, h: 0.2, seed: 5 };
    let dom = sample_realization(&cfg).unwrap().domain;
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-9).unwrap();
    let k = ground_state_component(&dom, &sp).component;
    let v = build_interaction(&PotentialSpec::gaussian(20.0, 1.0), cfg.n_particles, dom.lattice()).unwrap();
    let opts = HartreeOptions::default();
    let hs = minimize_hartree(&dom, k, &v, cfg.n_particles, &opts).unwrap();
    println!("lambda1 = {:.6}, Hartree energy = {:.6}, e1 = {:.6}, e2 = {:.6}", sp.lambda1, hs.energy, hs.e1, hs.e2);
    println!("iterations {}, EL residual {:.2e}, |<u,h u> - e1| = {:.2e}", hs.iterations, hs.el_residual, hs.lemma_defect);
    let scf = damped_scf(&dom, k, &v, cfg.n_particles, 0.5, &opts).unwrap();
    let diff: Vec<f64> = scf.iter().zip(&hs.u).map(|(a, b)| a - b).collect();
    println!("L2 distance to damped SCF: {:.2e}", dom.norm(&diff));
}
