mod common;

use common::{dense_eigen, lcg, masked, open_box, rel};
use kl_lab::domain::VacancyDomain;
use kl_lab::hartree::{
    assemble_effective_operator, damped_scf, hartree_energy, minimize_hartree, HartreeInit, HartreeOptions,
};
use kl_lab::interaction::{build_interaction, interaction_energy, InteractionPotential, PotentialSpec};
use kl_lab::laplace::{assemble_laplacian, component_ground_state, lowest_eigenpairs};

fn potential(dom: &VacancyDomain, kappa: f64, width: f64, n: usize) -> InteractionPotential {
    build_interaction(&PotentialSpec::gaussian(kappa, width), n, dom.lattice()).unwrap()
}

#[test]
fn weak_coupling_matches_first_order_perturbation() {
    let dom = open_box(&[10, 10], 0.1);
    let n = 6;
    let phi = component_ground_state(&dom, 1, 1e-12).unwrap();
    let rho: Vec<f64> = phi.phi.iter().map(|x| x * x).collect();
    // E(κ) = λ1 + κ c1 + O(κ²): Richardson on κ and κ/2 removes the quadratic term
    let unit = potential(&dom, 1.0, 0.3, n);
    let c1 = 0.5 * (n as f64 - 1.0) * interaction_energy(&dom, &rho, &unit);
    let energy = |kappa: f64| {
        let v = potential(&dom, kappa, 0.3, n);
        minimize_hartree(&dom, 1, &v, n, &HartreeOptions::default()).unwrap().energy
    };
    let k = 1e-2;
    let slope = (4.0 * (energy(k / 2.0) - phi.value) - (energy(k) - phi.value)) / k;
    assert!(rel(slope, c1) < 1e-3, "{slope} vs {c1}");
}

#[test]
fn agrees_with_damped_scf() {
    let dom = open_box(&[16, 16], 0.25);
    let n = 10;
    let v = potential(&dom, 5.0, 0.8, n);
    let opts = HartreeOptions::default();
    let hs = minimize_hartree(&dom, 1, &v, n, &opts).unwrap();
    let scf = damped_scf(&dom, 1, &v, n, 0.5, &opts).unwrap();
    let diff: Vec<f64> = hs.u.iter().zip(&scf).map(|(a, b)| a - b).collect();
    assert!(dom.norm(&diff) < 1e-6);
}

#[test]
fn variational_ordering() {
    let r = lcg(12, 400);
    let dom = masked(&[20, 20], 0.2, |i| r[i] > 0.1);
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-11).unwrap();
    let k = kl_lab::laplace::ground_state_component(&dom, &sp).component;
    let n = 20;
    let v = potential(&dom, 3.0, 0.6, n);
    let hs = minimize_hartree(&dom, k, &v, n, &HartreeOptions::default()).unwrap();
    let phi_k = component_ground_state(&dom, k, 1e-12).unwrap();
    let phi_full = dom.embed_from(&dom.component_domain(k).unwrap(), &phi_k.phi);
    let trial = hartree_energy(&dom, k, &phi_full, &v, n).unwrap();
    assert!(sp.lambda1 <= hs.energy + 1e-10);
    assert!(hs.energy <= trial + 1e-10);
    // trace is non-increasing up to roundoff
    for w in hs.energy_trace.windows(2) {
        assert!(w[1] <= w[0] + 64.0 * f64::EPSILON * w[0].abs());
    }
}

#[test]
fn effective_spectrum_matches_dense_oracle() {
    let r = lcg(30, 144);
    let dom = masked(&[12, 12], 0.2, |i| r[i] > 0.15);
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-11).unwrap();
    let k = kl_lab::laplace::ground_state_component(&dom, &sp).component;
    let n = 8;
    let v = potential(&dom, 2.0, 0.5, n);
    let hs = minimize_hartree(&dom, k, &v, n, &HartreeOptions::default()).unwrap();
    let hop = assemble_effective_operator(&dom, &hs.u, &v, n).unwrap();
    let (vals, _) = dense_eigen(dom.site_count(), &hop.to_dense());
    assert!((hs.e1 - vals[0]).abs() < 1e-8 * vals[0].abs().max(1.0));
    assert!((hs.e2 - vals[1]).abs() < 1e-8 * vals[1].abs().max(1.0));
    assert!((hs.e1 - hs.energy).abs() < 1e-7);
}

#[test]
fn random_initializations_reach_the_same_minimizer() {
    let dom = open_box(&[12, 12], 0.25);
    let n = 12;
    let v = potential(&dom, 4.0, 0.7, n);
    let reference = minimize_hartree(&dom, 1, &v, n, &HartreeOptions::default()).unwrap();
    for seed in 0..3 {
        let init: Vec<f64> = lcg(seed, dom.site_count()).iter().map(|x| 0.1 + x).collect();
        let opts = HartreeOptions { init: HartreeInit::Custom(init), ..HartreeOptions::default() };
        let hs = minimize_hartree(&dom, 1, &v, n, &opts).unwrap();
        let diff: Vec<f64> = hs.u.iter().zip(&reference.u).map(|(a, b)| a - b).collect();
        assert!(dom.norm(&diff) < 1e-6);
    }
}
