//! Build the N-scaled pair potential and check its structural assumptions.

use kl_lab::domain::Lattice;
use kl_lab::interaction::{build_interaction, check_assumptions, PotentialSpec};

fn main() {
    let lat = Lattice::for_box(2, 16.0, 0.25).unwrap();
    for n in [16, 256, 4096] {
        let v = build_interaction(&PotentialSpec::gaussian(1.0, 0.5), n, &lat).unwrap();
        let rep = check_assumptions(&v);
        println!(
            "N = {n:5}: prefactor {:.3e}, v(0) = {:.4e}, |v|_1 = {:.4e}, N|v|_1 = {:.4}, positive definite: {}",
            v.prefactor, v.v_at_zero, v.l1_norm, rep.s1, rep.pos_def
        );
    }
    let err = build_interaction(&PotentialSpec { allow_non_positive_definite: false, ..PotentialSpec::top_hat(1.0, 1.0) }, 16, &lat);
    println!("top hat without override: {}", err.unwrap_err());
}
