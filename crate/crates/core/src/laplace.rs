//! Discrete Dirichlet Laplacian on a vacancy mask and its lowest eigenpairs.
//!
//! The operator uses the `(2d+1)`-point stencil: `2d/h²` on the diagonal and
//! `-1/h²` between face-adjacent vacant nodes. Blocked and boundary nodes are
//! hard zeros, so the matrix is block diagonal over components.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::c1;
use crate::domain::{VacancyDomain, NO_SITE};
use crate::eigen::{self, EigenError, EigenOptions, ProfileCholesky, SymmetricOperator};

/// Envelope entries above which the inverse transformation is skipped.
const FACTOR_BUDGET: usize = 40_000_000;

/// Relative threshold below which `lambda2 - lambda1` counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Mass outside the host component above which phi1 is flagged "multiple".
pub const MULTIPLE_MASS_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplaceError {
    #[error("vacancy set is empty")]
    EmptyDomain,
    #[error("domain has a single vacant node (lambda1 = {lambda1}); no second eigenvalue")]
    DegenerateSize { lambda1: f64 },
    #[error("potential has {got} entries for {expected} sites")]
    PotentialSize { expected: usize, got: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// `-Δ_h + V - shift` acting on the vacant sites of a domain, matrix-free.
#[derive(Debug, Clone)]
pub struct MaskedOperator<'a> {
    domain: &'a VacancyDomain,
    potential: Option<Vec<f64>>,
    diagonal_shift: f64,
}

impl<'a> MaskedOperator<'a> {
    pub fn domain(&self) -> &'a VacancyDomain {
        self.domain
    }

    pub fn potential(&self) -> Option<&[f64]> {
        self.potential.as_deref()
    }

    pub fn diagonal_shift(&self) -> f64 {
        self.diagonal_shift
    }

    /// Add a one-body potential (per site) and a constant subtracted from the diagonal.
    pub fn with_potential(mut self, potential: Vec<f64>, diagonal_shift: f64) -> Result<Self, LaplaceError> {
        if potential.len() != self.domain.site_count() {
            return Err(LaplaceError::PotentialSize { expected: self.domain.site_count(), got: potential.len() });
        }
        self.potential = Some(potential);
        self.diagonal_shift = diagonal_shift;
        Ok(self)
    }

    fn stencil(&self) -> (f64, f64) {
        let h2 = self.domain.lattice().spacing().powi(2);
        (2.0 * self.domain.lattice().dim() as f64 / h2, 1.0 / h2)
    }

    /// Diagonal of the operator without the constant shift.
    fn unshifted_diagonal(&self) -> Vec<f64> {
        let (center, _) = self.stencil();
        match &self.potential {
            Some(p) => p.iter().map(|v| center + v).collect(),
            None => vec![center; self.domain.site_count()],
        }
    }

    fn lower_entries(&self) -> Vec<(usize, usize, f64)> {
        let (_, link) = self.stencil();
        let mut out = Vec::new();
        for s in 0..self.domain.site_count() {
            for &t in self.domain.neighbors(s) {
                if t != NO_SITE && (t as usize) < s {
                    out.push((s, t as usize, -link));
                }
            }
        }
        out
    }

    fn envelope_size(&self) -> usize {
        let first: Vec<usize> = (0..self.domain.site_count())
            .map(|s| {
                self.domain
                    .neighbors(s)
                    .iter()
                    .filter(|&&t| t != NO_SITE)
                    .map(|&t| t as usize)
                    .min()
                    .unwrap_or(s)
                    .min(s)
            })
            .collect();
        ProfileCholesky::envelope_size(&first)
    }

    /// Dense copy of the matrix, row-major (small domains only).
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut dense = vec![0.0; n * n];
        for (i, d) in self.unshifted_diagonal().into_iter().enumerate() {
            dense[i * n + i] = d - self.diagonal_shift;
        }
        for (i, j, v) in self.lower_entries() {
            dense[i * n + j] = v;
            dense[j * n + i] = v;
        }
        dense
    }

    /// Cholesky factor of the unshifted operator, when its envelope fits the budget.
    pub fn factor(&self) -> Option<ProfileCholesky> {
        if self.envelope_size() > FACTOR_BUDGET {
            return None;
        }
        ProfileCholesky::factor(&self.unshifted_diagonal(), &self.lower_entries()).ok()
    }

    /// Operator without the constant shift (same eigenvectors).
    fn unshifted(&self) -> MaskedOperator<'a> {
        Self { diagonal_shift: 0.0, ..self.clone() }
    }
}

impl SymmetricOperator for MaskedOperator<'_> {
    fn dim(&self) -> usize {
        self.domain.site_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (center, link) = self.stencil();
        let d2 = 2 * self.domain.lattice().dim();
        for (s, ys) in y.iter_mut().enumerate() {
            let nb = self.domain.neighbors(s);
            let mut acc = 0.0;
            for &t in &nb[..d2] {
                if t != NO_SITE {
                    acc += x[t as usize];
                }
            }
            let mut diag = center - self.diagonal_shift;
            if let Some(p) = &self.potential {
                diag += p[s];
            }
            *ys = diag * x[s] - link * acc;
        }
    }
}

/// Pure Dirichlet Laplacian on the vacancy set.
pub fn assemble_laplacian(domain: &VacancyDomain) -> Result<MaskedOperator<'_>, LaplaceError> {
    if domain.site_count() == 0 {
        return Err(LaplaceError::EmptyDomain);
    }
    Ok(MaskedOperator { domain, potential: None, diagonal_shift: 0.0 })
}

/// Where the ground state lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentOf {
    Single(u32),
    Multiple,
}

/// One eigenpair with a discrete-L²-normalized grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub value: f64,
    /// Site values, `h^d Σ φ² = 1`.
    pub phi: Vec<f64>,
    pub residual: f64,
}

/// The two lowest eigenpairs of a masked operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub lambda1: f64,
    pub lambda2: f64,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub residual1: f64,
    pub residual2: f64,
    pub component_of_phi1: ComponentOf,
}

impl SpectralPair {
    pub fn gap(&self) -> f64 {
        self.lambda2 - self.lambda1
    }

    /// `lambda2 - lambda1 < 1e-10 · lambda1`.
    pub fn is_degenerate(&self) -> bool {
        self.gap() < DEGENERACY_THRESHOLD * self.lambda1.abs()
    }
}

fn eigen_options(tol: f64) -> EigenOptions {
    EigenOptions { tol, ..EigenOptions::default() }
}

/// Lowest `count` eigenpairs of `op`; vectors normalized in discrete L² with a
/// nonnegative sum.
pub fn lowest_modes(op: &MaskedOperator<'_>, count: usize, tol: f64) -> Result<Vec<Mode>, LaplaceError> {
    let dim = op.dim();
    if dim == 0 {
        return Err(LaplaceError::EmptyDomain);
    }
    let opts = eigen_options(tol);
    let unshifted = op.unshifted();
    let pairs = if dim == 1 {
        let mut y = [0.0];
        unshifted.apply(&[1.0], &mut y);
        if count > 1 {
            return Err(LaplaceError::DegenerateSize { lambda1: y[0] - op.diagonal_shift });
        }
        vec![eigen::EigenPair { value: y[0], vector: vec![1.0], residual: 0.0 }]
    } else if op.envelope_size() <= FACTOR_BUDGET {
        let factor = ProfileCholesky::factor(&unshifted.unshifted_diagonal(), &unshifted.lower_entries())?;
        eigen::lowest_by_inverse(&unshifted, &factor, count, &opts)?
    } else {
        eigen::lowest(&unshifted, count, &opts)?
    };
    let scale = op.domain.lattice().cell_volume().sqrt();
    Ok(pairs
        .into_iter()
        .map(|p| {
            let sign = if p.vector.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            Mode {
                value: p.value - op.diagonal_shift,
                phi: p.vector.iter().map(|v| sign * v / scale).collect(),
                residual: p.residual,
            }
        })
        .collect())
}

/// Two lowest eigenpairs with the residual, orthogonality and normalization
/// contract of [`SpectralPair`].
pub fn lowest_eigenpairs(op: &MaskedOperator<'_>, tol: f64) -> Result<SpectralPair, LaplaceError> {
    let mut modes = lowest_modes(op, 2, tol)?.into_iter();
    let first = modes.next().unwrap();
    let second = modes.next().unwrap();
    let pick = component_of(op.domain, &first.phi);
    Ok(SpectralPair {
        lambda1: first.value,
        lambda2: second.value,
        phi1: first.phi,
        phi2: second.phi,
        residual1: first.residual,
        residual2: second.residual,
        component_of_phi1: if pick.multiple { ComponentOf::Multiple } else { ComponentOf::Single(pick.component) },
    })
}

/// Host component of a ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentPick {
    /// Component carrying the largest L² mass.
    pub component: u32,
    /// `1 - mass on component`.
    pub mass_outside: f64,
    /// `mass_outside > 0.01`.
    pub multiple: bool,
}

fn component_of(domain: &VacancyDomain, phi: &[f64]) -> ComponentPick {
    let mass = domain.mass_per_component(phi);
    let total: f64 = mass.iter().sum();
    let (k, m) = mass
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &m)| if m > best.1 { (k, m) } else { best });
    let mass_outside = ((total - m) / total).max(0.0);
    ComponentPick { component: k as u32 + 1, mass_outside, multiple: mass_outside > MULTIPLE_MASS_THRESHOLD }
}

/// The component on which `phi1` lives (the condensate host).
pub fn ground_state_component(domain: &VacancyDomain, sp: &SpectralPair) -> ComponentPick {
    component_of(domain, &sp.phi1)
}

/// Lowest Dirichlet eigenpair restricted to one component.
pub fn component_ground_state(domain: &VacancyDomain, component: u32, tol: f64) -> Result<Mode, LaplaceError> {
    let sub = domain.component_domain(component).map_err(|_| LaplaceError::EmptyDomain)?;
    let op = assemble_laplacian(&sub)?;
    let mode = lowest_modes(&op, 1, tol)?.remove(0);
    Ok(Mode { phi: domain.embed_from(&sub, &mode.phi), ..mode })
}

/// Discrete check of `‖φ₁‖²_∞ ≤ C₁² λ₁^{d/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupNormCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
    /// Set for single-node domains, where no spectral pair exists.
    pub skipped: bool,
}

pub fn supnorm_bound_check(phi1: &[f64], lambda1: f64, d: usize) -> SupNormCheck {
    let rhs = c1(d).powi(2) * lambda1.powf(d as f64 / 2.0);
    if phi1.len() < 2 {
        return SupNormCheck { lhs: f64::NAN, rhs, ok: false, skipped: true };
    }
    let lhs = phi1.iter().fold(0.0f64, |m, v| m.max(v * v));
    SupNormCheck { lhs, rhs, ok: lhs <= rhs, skipped: false }
}

impl SpectralPair {
    pub fn supnorm_check(&self, d: usize) -> SupNormCheck {
        supnorm_bound_check(&self.phi1, self.lambda1, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Lattice;

    fn full_box(n: usize, h: f64) -> VacancyDomain {
        let lat = Lattice::from_shape(vec![n, n], h).unwrap();
        let count = lat.node_count();
        VacancyDomain::from_mask(lat, vec![true; count]).unwrap()
    }

    #[test]
    fn single_node_operator_is_scalar() {
        let lat = Lattice::from_shape(vec![3, 3], 0.5).unwrap();
        let mut mask = vec![false; 9];
        mask[4] = true;
        let dom = VacancyDomain::from_mask(lat, mask).unwrap();
        let op = assemble_laplacian(&dom).unwrap();
        assert_eq!(op.to_dense(), vec![16.0]);
        match lowest_eigenpairs(&op, 1e-9) {
            Err(LaplaceError::DegenerateSize { lambda1 }) => assert_eq!(lambda1, 16.0),
            other => panic!("{other:?}"),
        }
        let check = supnorm_bound_check(&[2.0], 16.0, 2);
        assert!(check.skipped);
    }

    #[test]
    fn empty_domain_rejected() {
        let lat = Lattice::from_shape(vec![2, 2], 0.5).unwrap();
        let dom = VacancyDomain::from_mask(lat, vec![false; 4]).unwrap();
        assert_eq!(assemble_laplacian(&dom).unwrap_err(), LaplaceError::EmptyDomain);
    }

    #[test]
    fn free_box_matches_sine_formula() {
        let n = 20;
        let h = 1.0 / (n + 1) as f64;
        let dom = full_box(n, h);
        let op = assemble_laplacian(&dom).unwrap();
        let sp = lowest_eigenpairs(&op, 1e-10).unwrap();
        let s = |p: f64| (p * std::f64::consts::PI * h / 2.0).sin().powi(2);
        let exact1 = 4.0 / (h * h) * (s(1.0) + s(1.0));
        let exact2 = 4.0 / (h * h) * (s(1.0) + s(2.0));
        assert!((sp.lambda1 - exact1).abs() < 1e-9 * exact1);
        assert!((sp.lambda2 - exact2).abs() < 1e-9 * exact2);
        assert!(sp.residual1 <= 1e-10 && sp.residual2 <= 1e-10);
        assert!((dom.norm(&sp.phi1) - 1.0).abs() < 1e-12);
        assert!(dom.dot(&sp.phi1, &sp.phi2).abs() < 1e-9);
        assert!(sp.phi1.iter().sum::<f64>() > 0.0);
        assert_eq!(sp.component_of_phi1, ComponentOf::Single(1));
    }

    #[test]
    fn shift_moves_spectrum_only() {
        let dom = full_box(6, 0.1);
        let op = assemble_laplacian(&dom).unwrap();
        let pot: Vec<f64> = (0..36).map(|i| (i % 5) as f64).collect();
        let a = lowest_eigenpairs(&op.clone().with_potential(pot.clone(), 0.0).unwrap(), 1e-10).unwrap();
        let b = lowest_eigenpairs(&op.with_potential(pot, 3.5).unwrap(), 1e-10).unwrap();
        assert!((a.lambda1 - 3.5 - b.lambda1).abs() < 1e-9);
        assert!((a.lambda2 - 3.5 - b.lambda2).abs() < 1e-9);
    }

    #[test]
    fn c1_squared_free_box_supnorm() {
        let c1sq = c1(2).powi(2);
        assert!((c1sq - std::f64::consts::E.powi(2) / std::f64::consts::PI).abs() < 1e-12);
        let check = supnorm_bound_check(&[0.5, 2.0, -1.0], 2.0 * std::f64::consts::PI.powi(2), 2);
        assert_eq!(check.lhs, 4.0);
        assert!((check.rhs - c1sq * 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!(check.ok && !check.skipped);
    }
}
