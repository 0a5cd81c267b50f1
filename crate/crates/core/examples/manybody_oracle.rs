//! Exact bosonic ground state on a tiny domain against the Hartree bounds.

use kl_lab::certify::theorem41_certificate;
use kl_lab::domain::{Lattice, VacancyDomain};
use kl_lab::hartree::{minimize_hartree, HartreeOptions};
use kl_lab::interaction::{build_interaction, PotentialSpec};
use kl_lab::manybody::{build_manybody_hamiltonian, condensate_occupation, ground_state, DEFAULT_BASIS_CAP};

fn main() {
    let lat = Lattice::from_shape(vec![3, 3], 0.25).unwrap();
    let mut mask = vec![true; 9];
    mask[4] = false;
    let dom = VacancyDomain::from_mask(lat, mask).unwrap();
    for n in [2, 3, 4] {
        let v = build_interaction(&PotentialSpec::gaussian(0.3, 0.3), n, dom.lattice()).unwrap();
        let hs = minimize_hartree(&dom, 1, &v, n, &HartreeOptions::default()).unwrap();
        let ham = build_manybody_hamiltonian(&dom, Some(&v), n, DEFAULT_BASIS_CAP).unwrap();
        let mut gs = ground_state(&ham, 1e-12).unwrap();
        gs.n_condensate = Some(condensate_occupation(&gs.rho1, n, &dom, &hs.u).unwrap());
        let t = theorem41_certificate(&hs, &v, n, gs.observation().as_ref(), 1e-9, 1e-7);
        println!(
            "N = {n}: dim {}, E/N - e1 = {:.3e} (bound {:.3e}), depletion {:.3e} (bound {:.3e})",
            gs.basis_dim,
            gs.e_qm / n as f64 - hs.e1,
            t.energy_bound,
            t.depletion_observed.unwrap_or(f64::NAN),
            t.depletion_bound.unwrap_or(f64::NAN),
        );
    }
}
