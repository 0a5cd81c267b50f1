//! Write a vacancy dump and an eigenvector field, then read them back.

use kl_lab::disorder::{sample_realization, DisorderConfig};
use kl_lab::dump::{read_field_dump, read_vacancy_dump, write_field_dump, write_vacancy_dump};
use kl_lab::laplace::{assemble_laplacian, lowest_eigenpairs};

fn main() {
    let dir = std::env::temp_dir().join("kl-lab-dump-example");
    let cfg = DisorderConfig { d: 2, rho: 1.0, n_particles: 36, nu: 0.5, r: 0.5, h: 0.25, seed: 9 };
    let dom = sample_realization(&cfg).unwrap().domain;
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-9).unwrap();
    let vac = dir.join("realization.klvac");
    let phi = dir.join("phi1.kleig");
    write_vacancy_dump(&vac, &dom, &cfg).unwrap();
    write_field_dump(&phi, dom.lattice(), &dom.to_grid(&sp.phi1), &serde_json::json!({ "lambda1": sp.lambda1 })).unwrap();
    let back = read_vacancy_dump(&vac).unwrap();
    let (_, field) = read_field_dump(&phi).unwrap();
    println!("{} components read back, mask equal: {}", back.component_count(), back.mask() == dom.mask());
    println!("field max {:.4}, written to {}", field.iter().cloned().fold(0.0, f64::max), dir.display());
}
