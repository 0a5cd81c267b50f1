#![allow(dead_code)]

use kl_lab::domain::{Lattice, VacancyDomain};
use nalgebra::{DMatrix, SymmetricEigen};

pub fn open_box(shape: &[usize], h: f64) -> VacancyDomain {
    let lat = Lattice::from_shape(shape.to_vec(), h).unwrap();
    let n = lat.node_count();
    VacancyDomain::from_mask(lat, vec![true; n]).unwrap()
}

pub fn masked(shape: &[usize], h: f64, vacant: impl Fn(usize) -> bool) -> VacancyDomain {
    let lat = Lattice::from_shape(shape.to_vec(), h).unwrap();
    let mask = (0..lat.node_count()).map(vacant).collect();
    VacancyDomain::from_mask(lat, mask).unwrap()
}

/// Ascending eigenvalues and column eigenvectors of a dense row-major matrix.
pub fn dense_eigen(n: usize, a: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = DMatrix::from_row_slice(n, n, a);
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Deterministic pseudo-random numbers in [0, 1) for fixtures.
pub fn lcg(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}
