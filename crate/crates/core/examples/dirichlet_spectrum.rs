//! Two lowest Dirichlet eigenvalues of a vacancy set, compared with the free box.

use kl_lab::disorder::{sample_realization, DisorderConfig};
use kl_lab::domain::{Lattice, VacancyDomain};
use kl_lab::laplace::{assemble_laplacian, ground_state_component, lowest_eigenpairs};

fn main() {
    let lat = Lattice::for_box(2, 1.0, 0.02).unwrap();
    let free = VacancyDomain::from_mask(lat.clone(), vec![true; lat.node_count()]).unwrap();
    let sp = lowest_eigenpairs(&assemble_laplacian(&free).unwrap(), 1e-10).unwrap();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    println!("unit square: lambda1 = {:.6} (continuum {exact:.6}), lambda2 = {:.6}", sp.lambda1, sp.lambda2);

    let cfg = DisorderConfig { d: 2, rho: 1.0, n_particles: 256, nu: 0.6, r: 0.5, h: 0.2, seed: 3 };
    let real = sample_realization(&cfg).unwrap();
    let sp = lowest_eigenpairs(&assemble_laplacian(&real.domain).unwrap(), 1e-9).unwrap();
    let pick = ground_state_component(&real.domain, &sp);
    println!(
        "disordered box: lambda1 = {:.5}, lambda2 = {:.5}, gap = {:.5}, phi1 lives on component {} of {}",
        sp.lambda1,
        sp.lambda2,
        sp.gap(),
        pick.component,
        real.component_count()
    );
    println!("sup-norm check: {:?}", sp.supnorm_check(2));
}
