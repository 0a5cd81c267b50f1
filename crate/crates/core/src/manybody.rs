//! Exact bosonic ground states on small vacancy grids.
//!
//! States are occupation vectors `(n_0, …, n_{M-1})` with `Σ n = N`, ordered
//! lexicographically and ranked by a combinatorial perfect hash. The
//! Hamiltonian is the second-quantized form of
//! `Σ_j (-Δ_h)_j + Σ_{i<j} v(x_i - x_j)` with the one-body stencil of
//! [`crate::laplace`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::OracleObservation;
use crate::domain::{VacancyDomain, NO_SITE};
use crate::eigen::{self, EigenError, EigenOptions, SymmetricOperator};
use crate::interaction::InteractionPotential;

pub const DEFAULT_BASIS_CAP: usize = 2_000_000;

/// Basis size from which the matvec runs on the rayon pool.
const PARALLEL_DIM: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManyBodyError {
    #[error("bosonic basis dimension {dim} exceeds cap {cap} (M = {sites} sites, N = {particles})")]
    BasisTooLarge { dim: u128, cap: usize, sites: usize, particles: usize },
    #[error("need at least one particle and one vacant site")]
    Empty,
    #[error("vector has {got} entries, grid has {expected} vacant sites")]
    GridMismatch { expected: usize, got: usize },
    #[error("potential grid (h = {potential_h}) does not match domain (h = {grid_h})")]
    PotentialMismatch { potential_h: f64, grid_h: f64 },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// `C(m + p - 1, p)`: ways to place `p` bosons on `m` sites.
pub fn bosonic_dimension(sites: usize, particles: usize) -> u128 {
    if sites == 0 {
        return (particles == 0) as u128;
    }
    let mut c: u128 = 1;
    let n = (sites + particles - 1) as u128;
    let k = particles.min(sites - 1) as u128;
    for i in 0..k {
        c = c.saturating_mul(n - i) / (i + 1);
    }
    c
}

/// Occupation-number basis of the `N`-boson sector on `M` sites.
#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    occupations: Vec<u8>,
    /// `count[m][p] = C(m + p - 1, p)`.
    count: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(sites: usize, particles: usize, cap: usize) -> Result<Self, ManyBodyError> {
        if sites == 0 || particles == 0 {
            return Err(ManyBodyError::Empty);
        }
        let dim = bosonic_dimension(sites, particles);
        if dim > cap as u128 || particles > u8::MAX as usize {
            return Err(ManyBodyError::BasisTooLarge { dim, cap, sites, particles });
        }
        let count = (0..=sites)
            .map(|m| (0..=particles).map(|p| bosonic_dimension(m, p) as usize).collect())
            .collect();
        let mut occupations = Vec::with_capacity(dim as usize * sites);
        let mut state = vec![0u8; sites];
        enumerate(&mut state, 0, particles, &mut occupations);
        Ok(Self { sites, particles, occupations, count })
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.sites
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn state(&self, index: usize) -> &[u8] {
        &self.occupations[index * self.sites..(index + 1) * self.sites]
    }

    /// Position of an occupation vector in lexicographic order.
    pub fn rank(&self, state: &[u8]) -> usize {
        let mut left = self.particles;
        let mut r = 0;
        for (i, &n) in state[..self.sites - 1].iter().enumerate() {
            let rest = self.sites - i - 1;
            for k in 0..n as usize {
                r += self.count[rest][left - k];
            }
            left -= n as usize;
        }
        r
    }
}

fn enumerate(state: &mut [u8], site: usize, left: usize, out: &mut Vec<u8>) {
    if site == state.len() - 1 {
        state[site] = left as u8;
        out.extend_from_slice(state);
        return;
    }
    for k in 0..=left {
        state[site] = k as u8;
        enumerate(state, site + 1, left - k, out);
    }
    state[site] = 0;
}

/// Matrix-free `H_N` on the bosonic sector of a vacancy domain.
#[derive(Debug, Clone)]
pub struct ManyBodyHamiltonian {
    basis: FockBasis,
    diagonal: Vec<f64>,
    /// Undirected hopping bonds `(x, y)` with `x < y`.
    bonds: Vec<(usize, usize)>,
    hop: f64,
}

/// Pair interaction `W(x - y) = v(x - y)` between sites of `domain`.
pub fn pair_matrix(domain: &VacancyDomain, v: &InteractionPotential) -> Vec<f64> {
    let m = domain.site_count();
    let lat = domain.lattice();
    let d = lat.dim();
    let pos: Vec<[usize; 3]> = domain.sites().iter().map(|&g| lat.unravel(g)).collect();
    let mut w = vec![0.0; m * m];
    for x in 0..m {
        for y in 0..m {
            let mut off = [0i64; 3];
            for a in 0..d {
                off[a] = pos[x][a] as i64 - pos[y][a] as i64;
            }
            w[x * m + y] = v.value_at(&off[..d]);
        }
    }
    w
}

pub fn build_manybody_hamiltonian(
    domain: &VacancyDomain,
    v: Option<&InteractionPotential>,
    n_particles: usize,
    cap: usize,
) -> Result<ManyBodyHamiltonian, ManyBodyError> {
    let m = domain.site_count();
    let basis = FockBasis::new(m, n_particles, cap)?;
    let lat = domain.lattice();
    if let Some(v) = v {
        if (v.h - lat.spacing()).abs() > 1e-12 * lat.spacing() || v.d != lat.dim() {
            return Err(ManyBodyError::PotentialMismatch { potential_h: v.h, grid_h: lat.spacing() });
        }
    }
    let h2 = lat.spacing().powi(2);
    let kinetic = 2.0 * lat.dim() as f64 / h2 * n_particles as f64;
    let w = v.map(|v| pair_matrix(domain, v));
    let diagonal = (0..basis.dim())
        .map(|j| {
            let s = basis.state(j);
            let mut e = kinetic;
            if let Some(w) = &w {
                for x in 0..m {
                    let nx = s[x] as f64;
                    if nx == 0.0 {
                        continue;
                    }
                    e += 0.5 * w[x * m + x] * nx * (nx - 1.0);
                    for y in x + 1..m {
                        e += w[x * m + y] * nx * s[y] as f64;
                    }
                }
            }
            e
        })
        .collect();
    let mut bonds = Vec::new();
    for x in 0..m {
        for &y in domain.neighbors(x) {
            if y != NO_SITE && (y as usize) > x {
                bonds.push((x, y as usize));
            }
        }
    }
    Ok(ManyBodyHamiltonian { basis, diagonal, bonds, hop: 1.0 / h2 })
}

impl ManyBodyHamiltonian {
    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    fn row(&self, j: usize, x: &[f64], scratch: &mut [u8]) -> f64 {
        let s = self.basis.state(j);
        let mut acc = self.diagonal[j] * x[j];
        for &(a, b) in &self.bonds {
            for (from, to) in [(a, b), (b, a)] {
                if s[from] == 0 {
                    continue;
                }
                scratch.copy_from_slice(s);
                scratch[from] -= 1;
                scratch[to] += 1;
                let amp = ((s[from] as f64) * (s[to] as f64 + 1.0)).sqrt();
                acc -= self.hop * amp * x[self.basis.rank(scratch)];
            }
        }
        acc
    }
}

impl SymmetricOperator for ManyBodyHamiltonian {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.basis.sites;
        if y.len() >= PARALLEL_DIM {
            y.par_chunks_mut(1024).enumerate().for_each(|(c, chunk)| {
                let mut scratch = vec![0u8; m];
                for (i, yj) in chunk.iter_mut().enumerate() {
                    *yj = self.row(c * 1024 + i, x, &mut scratch);
                }
            });
        } else {
            let mut scratch = vec![0u8; m];
            for (j, yj) in y.iter_mut().enumerate() {
                *yj = self.row(j, x, &mut scratch);
            }
        }
    }
}

/// Exact ground state with its one-body density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManyBodyGroundState {
    pub n_particles: usize,
    pub site_count: usize,
    pub basis_dim: usize,
    pub e_qm: f64,
    pub residual: f64,
    #[serde(skip)]
    pub psi: Vec<f64>,
    /// Row-major `M × M`, trace one.
    #[serde(skip)]
    pub rho1: Vec<f64>,
    pub n_condensate: Option<f64>,
}

impl ManyBodyGroundState {
    pub fn observation(&self) -> Option<OracleObservation> {
        self.n_condensate.map(|n| OracleObservation { e_qm: self.e_qm, n_condensate: n, residual: self.residual })
    }
}

/// Lowest `count` eigenvalues of `H` (ascending) with relative residual `tol`.
pub fn lowest_energies(hamiltonian: &ManyBodyHamiltonian, count: usize, tol: f64) -> Result<Vec<f64>, ManyBodyError> {
    let opts = EigenOptions { tol, ..EigenOptions::default() };
    Ok(eigen::lowest(hamiltonian, count, &opts)?.into_iter().map(|p| p.value).collect())
}

pub fn ground_state(hamiltonian: &ManyBodyHamiltonian, tol: f64) -> Result<ManyBodyGroundState, ManyBodyError> {
    let opts = EigenOptions { tol, ..EigenOptions::default() };
    let pair = eigen::lowest(hamiltonian, 1, &opts)?.remove(0);
    let sign = if pair.vector.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let psi: Vec<f64> = pair.vector.iter().map(|x| sign * x).collect();
    let rho1 = one_body_density_matrix(&hamiltonian.basis, &psi);
    Ok(ManyBodyGroundState {
        n_particles: hamiltonian.basis.particles,
        site_count: hamiltonian.basis.sites,
        basis_dim: hamiltonian.basis.dim(),
        e_qm: pair.value,
        residual: pair.residual,
        psi,
        rho1,
        n_condensate: None,
    })
}

/// `ρ1[x][y] = ⟨ψ| a†_y a_x |ψ⟩ / N` for a real normalized `ψ`.
pub fn one_body_density_matrix(basis: &FockBasis, psi: &[f64]) -> Vec<f64> {
    let m = basis.sites;
    let mut rho = vec![0.0; m * m];
    let mut scratch = vec![0u8; m];
    for (j, &c) in psi.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let s = basis.state(j);
        for x in 0..m {
            if s[x] == 0 {
                continue;
            }
            rho[x * m + x] += s[x] as f64 * c * c;
            for y in 0..m {
                if y == x {
                    continue;
                }
                scratch.copy_from_slice(s);
                scratch[x] -= 1;
                scratch[y] += 1;
                let amp = ((s[x] as f64) * (s[y] as f64 + 1.0)).sqrt();
                rho[x * m + y] += amp * c * psi[basis.rank(&scratch)];
            }
        }
    }
    let n = basis.particles as f64;
    rho.iter_mut().for_each(|r| *r /= n);
    rho
}

/// `n = N h^d Σ_{x,y} u(x) ρ1[x][y] u(y)` for discrete-L²-normalized `u`.
pub fn condensate_occupation(
    rho1: &[f64],
    n_particles: usize,
    domain: &VacancyDomain,
    u: &[f64],
) -> Result<f64, ManyBodyError> {
    let m = domain.site_count();
    if u.len() != m || rho1.len() != m * m {
        return Err(ManyBodyError::GridMismatch { expected: m, got: u.len() });
    }
    let mut acc = 0.0;
    for x in 0..m {
        for y in 0..m {
            acc += u[x] * rho1[x * m + y] * u[y];
        }
    }
    Ok(n_particles as f64 * acc * domain.lattice().cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Lattice;

    #[test]
    fn dimensions() {
        assert_eq!(bosonic_dimension(2, 2), 3);
        assert_eq!(bosonic_dimension(9, 4), 495);
        assert_eq!(bosonic_dimension(1, 7), 1);
        assert_eq!(bosonic_dimension(0, 0), 1);
        assert_eq!(bosonic_dimension(0, 3), 0);
    }

    #[test]
    fn rank_inverts_enumeration() {
        for (m, n) in [(1, 3), (4, 3), (6, 2), (5, 5)] {
            let basis = FockBasis::new(m, n, usize::MAX).unwrap();
            assert_eq!(basis.dim() as u128, bosonic_dimension(m, n));
            for j in 0..basis.dim() {
                assert_eq!(basis.rank(basis.state(j)), j);
                assert_eq!(basis.state(j).iter().map(|&x| x as usize).sum::<usize>(), n);
            }
            for j in 1..basis.dim() {
                assert!(basis.state(j - 1) < basis.state(j));
            }
        }
    }

    #[test]
    fn cap_reports_dimension() {
        let err = FockBasis::new(40, 6, 1000).unwrap_err();
        assert!(err.to_string().contains(&bosonic_dimension(40, 6).to_string()));
    }

    #[test]
    fn two_sites_two_bosons_dense() {
        let lat = Lattice::from_shape(vec![2, 1], 0.5).unwrap();
        let dom = VacancyDomain::from_mask(lat, vec![true, true]).unwrap();
        let h = build_manybody_hamiltonian(&dom, None, 2, DEFAULT_BASIS_CAP).unwrap();
        // basis (0,2), (1,1), (2,0); hopping -1/h² √2, diagonal 2·(4/h²)
        let t = 4.0;
        let dg = 32.0;
        let r2 = 2f64.sqrt();
        let dense = [dg, -t * r2, 0.0, -t * r2, dg, -t * r2, 0.0, -t * r2, dg];
        let mut y = vec![0.0; 3];
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            h.apply(&e, &mut y);
            for i in 0..3 {
                assert!((y[i] - dense[i * 3 + j]).abs() < 1e-12);
            }
        }
        let gs = ground_state(&h, 1e-12).unwrap();
        // one-body ground energy 4/h² - 1/h² = 12
        assert!((gs.e_qm - 24.0).abs() < 1e-9);
        let tr: f64 = (0..2).map(|x| gs.rho1[x * 2 + x]).sum();
        assert!((tr - 1.0).abs() < 1e-12);
    }
}
