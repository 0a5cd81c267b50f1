//! Poisson Boolean obstacle model on a grid.
//!
//! Obstacle centres are drawn from a homogeneous Poisson process in the box
//! dilated by the obstacle radius, so that balls centred just outside the box
//! still cut into it. A node is vacant iff its Euclidean distance to every
//! centre exceeds `r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, Lattice, VacancyDomain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error("invalid disorder.{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("grid spacing disorder.h = {h} must be smaller than obstacle radius disorder.r = {r}")]
    SpacingNotBelowRadius { h: f64, r: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Parameters of one disorder realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    /// Spatial dimension, 2 or 3.
    pub d: usize,
    /// Particle density.
    pub rho: f64,
    /// Particle number; together with `rho` fixes the box side.
    #[serde(rename = "N")]
    pub n_particles: usize,
    /// Poisson intensity of obstacle centres.
    pub nu: f64,
    /// Obstacle radius.
    pub r: f64,
    /// Maximal grid spacing.
    pub h: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DisorderConfig {
    /// Box side `L = rho^{-1/d} N^{1/d}`.
    pub fn box_side(&self) -> f64 {
        (self.n_particles as f64 / self.rho).powf(1.0 / self.d as f64)
    }

    pub fn validate(&self) -> Result<(), DisorderError> {
        let invalid = |field, reason: &str| Err(DisorderError::Invalid { field, reason: reason.to_string() });
        if !(2..=3).contains(&self.d) {
            return invalid("d", "only d = 2 and d = 3 are supported");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return invalid("rho", "must be positive and finite");
        }
        if self.n_particles == 0 {
            return invalid("N", "must be at least 1");
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return invalid("nu", "must be non-negative and finite");
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return invalid("r", "must be positive and finite");
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return invalid("h", "must be positive and finite");
        }
        if self.h >= self.r {
            return Err(DisorderError::SpacingNotBelowRadius { h: self.h, r: self.r });
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice, DisorderError> {
        Ok(Lattice::for_box(self.d, self.box_side(), self.h)?)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Volume of the unit ball in `d` dimensions, `pi^{d/2} / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half_integer(d + 2)
}

/// `Gamma(k / 2)` for a positive integer `k`.
fn gamma_half_integer(k: usize) -> f64 {
    let mut x = if k.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut arg = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    while arg < k as f64 / 2.0 - 1e-12 {
        x *= arg;
        arg += 1.0;
    }
    x
}

/// Draw obstacle centres: `Poisson(nu |B|)` points uniform on the dilated box
/// `B = [-L/2 - r, L/2 + r]^d`. Deterministic in `config.seed`.
pub fn sample_centers(config: &DisorderConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 * config.box_side() + config.r;
    let mean = config.nu * (2.0 * half).powi(config.d as i32);
    let count = if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(&mut rng) as usize).unwrap_or(0)
    } else {
        0
    };
    (0..count)
        .map(|_| (0..config.d).map(|_| rng.random_range(-half..half)).collect())
        .collect()
}

/// One sampled (or injected) obstacle configuration and its vacancy domain.
#[derive(Debug, Clone)]
pub struct DisorderRealization {
    pub config: DisorderConfig,
    pub centers: Vec<Vec<f64>>,
    pub domain: VacancyDomain,
}

impl DisorderRealization {
    pub fn mask(&self) -> &[bool] {
        self.domain.mask()
    }

    pub fn labels(&self) -> &[u32] {
        self.domain.labels()
    }

    pub fn component_count(&self) -> usize {
        self.domain.component_count()
    }

    pub fn component_volumes(&self) -> Vec<f64> {
        self.domain.component_volumes()
    }

    pub fn vacant_count(&self) -> usize {
        self.domain.site_count()
    }
}

/// Resolve the obstacles on the grid and label the vacancy components.
pub fn build_realization(
    config: &DisorderConfig,
    centers: Vec<Vec<f64>>,
) -> Result<DisorderRealization, DisorderError> {
    config.validate()?;
    let lattice = config.lattice()?;
    let mask = vacancy_mask(&lattice, &centers, config.r);
    let domain = VacancyDomain::from_mask(lattice, mask)?;
    Ok(DisorderRealization { config: config.clone(), centers, domain })
}

/// Sample centres from `config.seed` and build the realization.
pub fn sample_realization(config: &DisorderConfig) -> Result<DisorderRealization, DisorderError> {
    config.validate()?;
    build_realization(config, sample_centers(config))
}

fn vacancy_mask(lattice: &Lattice, centers: &[Vec<f64>], r: f64) -> Vec<bool> {
    let d = lattice.dim();
    let h = lattice.spacing();
    let mut mask = vec![true; lattice.node_count()];
    let r2 = r * r;
    for c in centers {
        // index range of nodes within the bounding box of the ball
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for axis in 0..d {
            let origin = -0.5 * lattice.side(axis);
            let n = lattice.shape()[axis] as i64;
            let a = (((c[axis] - r - origin) / h).floor() as i64 - 1).max(1);
            let b = (((c[axis] + r - origin) / h).ceil() as i64 + 1).min(n);
            if a > b {
                empty = true;
                break;
            }
            lo[axis] = (a - 1) as usize;
            hi[axis] = (b - 1) as usize;
        }
        if empty {
            continue;
        }
        let mut multi = lo;
        'nodes: loop {
            let g = lattice.ravel(&multi);
            if mask[g] {
                let x = lattice.coord(g);
                let dist2: f64 = (0..d).map(|a| (x[a] - c[a]).powi(2)).sum();
                if dist2 <= r2 {
                    mask[g] = false;
                }
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    break 'nodes;
                }
                axis -= 1;
                if multi[axis] < hi[axis] {
                    multi[axis] += 1;
                    multi[axis + 1..d].copy_from_slice(&lo[axis + 1..d]);
                    continue 'nodes;
                }
            }
        }
    }
    mask
}

/// Vacant volume fraction and membership in the typical-volume event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeFraction {
    pub fraction: f64,
    /// `exp(-nu omega_d r^d)`.
    pub expected: f64,
    pub eta: f64,
    pub in_omega1: bool,
    /// `eta - |fraction - expected|`; positive inside the event.
    pub margin: f64,
}

/// Fraction of interior nodes that are vacant, compared with the
/// continuum law `exp(-nu omega_d r^d)` at tolerance `eta`.
pub fn volume_fraction(real: &DisorderRealization, eta: f64) -> VolumeFraction {
    let total = real.domain.lattice().node_count() as f64;
    let fraction = real.vacant_count() as f64 / total;
    let c = &real.config;
    let expected = (-c.nu * unit_ball_volume(c.d) * c.r.powi(c.d as i32)).exp();
    let margin = eta - (fraction - expected).abs();
    VolumeFraction { fraction, expected, eta, in_omega1: margin > 0.0, margin }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> DisorderConfig {
        DisorderConfig { d: 2, rho: 1.0, n_particles: 100, nu: 1.0, r: 0.5, h: 0.2, seed: 7 }
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_intensity_has_no_centers() {
        let cfg = DisorderConfig { nu: 0.0, ..base() };
        assert!(sample_centers(&cfg).is_empty());
        let real = sample_realization(&cfg).unwrap();
        assert!(real.mask().iter().all(|&m| m));
        assert_eq!(real.component_count(), 1);
        let vf = volume_fraction(&real, 0.1);
        assert_eq!(vf.fraction, 1.0);
        assert!(vf.in_omega1);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_centers(&base());
        let b = sample_centers(&base());
        assert_eq!(a, b);
        let c = sample_centers(&base().with_seed(8));
        assert_ne!(a, c);
    }

    #[test]
    fn centers_live_in_dilated_box() {
        let cfg = base();
        let half = 0.5 * cfg.box_side() + cfg.r;
        for c in sample_centers(&cfg) {
            assert_eq!(c.len(), 2);
            assert!(c.iter().all(|x| x.abs() <= half));
        }
    }

    #[test]
    fn spacing_must_be_below_radius() {
        let cfg = DisorderConfig { h: 0.5, ..base() };
        let err = build_realization(&cfg, vec![]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("disorder.h") && msg.contains("disorder.r"), "{msg}");
    }

    #[test]
    fn invalid_fields_are_named() {
        let cfg = DisorderConfig { d: 4, ..base() };
        assert!(cfg.validate().unwrap_err().to_string().contains("disorder.d"));
        let cfg = DisorderConfig { rho: -1.0, ..base() };
        assert!(cfg.validate().unwrap_err().to_string().contains("disorder.rho"));
    }

    #[test]
    fn box_side_formula() {
        let cfg = DisorderConfig { d: 3, rho: 0.5, n_particles: 4, ..base() };
        assert!((cfg.box_side() - 2.0).abs() < 1e-12);
    }
}
