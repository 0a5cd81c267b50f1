//! Certificate for one realization, as emitted by `kl-lab certify`.

use kl_lab::certify::{certify, CertificateInputs};
use kl_lab::disorder::{sample_realization, volume_fraction, DisorderConfig};
use kl_lab::hartree::{minimize_hartree, HartreeOptions};
use kl_lab::interaction::{build_interaction, PotentialSpec};
use kl_lab::laplace::{assemble_laplacian, ground_state_component, lowest_eigenpairs};

fn main() {
    let cfg = DisorderConfig { d: 2, rho: 1.0, n_particles: 64, nu: 0.3, r: 0.5, h: 0.2, seed: 11 };
    let real = sample_realization(&cfg).unwrap();
    let vf = volume_fraction(&real, 0.1);
    let dom = &real.domain;
    let sp = lowest_eigenpairs(&assemble_laplacian(dom).unwrap(), 1e-9).unwrap();
    let k = ground_state_component(dom, &sp).component;
    let v = build_interaction(&PotentialSpec::gaussian(0.5, 1.0), cfg.n_particles, dom.lattice()).unwrap();
    let hs = minimize_hartree(dom, k, &v, cfg.n_particles, &HartreeOptions::default()).unwrap();
    let cert = certify(&CertificateInputs {
        volume: Some(&vf),
        spectrum: &sp,
        hartree: Some(&hs),
        potential: &v,
        n_particles: cfg.n_particles,
        oracle: None,
        eta: 0.1,
        sigma_ref: 1.0,
        eigen_tol: 1e-9,
    });
    println!("{}", serde_json::to_string_pretty(&cert).unwrap());
}
