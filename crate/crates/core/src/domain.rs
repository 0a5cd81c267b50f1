//! Uniform interior grids and masked vacancy domains.
//!
//! A [`Lattice`] is the set of interior nodes of the box `(-L/2, L/2)^d`
//! sampled with spacing `h`; boundary nodes are implicit Dirichlet zeros.
//! A [`VacancyDomain`] marks which interior nodes are vacant, labels the
//! face-connected components, and provides the compact "site" indexing that
//! every grid function in this crate uses.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marker for "no site here" in the grid-to-site map and neighbour tables.
pub const NO_SITE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("unsupported dimension {0} (expected 1..=3)")]
    Dimension(usize),
    #[error("box side {side} leaves no interior node at spacing {spacing}")]
    NoInterior { side: f64, spacing: f64 },
    #[error("mask has {got} entries, lattice has {expected} nodes")]
    MaskSize { expected: usize, got: usize },
    #[error("component {0} does not exist")]
    NoSuchComponent(u32),
    #[error("vector length {got} does not match site count {expected}")]
    Length { expected: usize, got: usize },
}

/// Interior nodes of a `d`-dimensional box, row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    shape: Vec<usize>,
    spacing: f64,
}

impl Lattice {
    /// Lattice for a box of side `side` with spacing at most `max_spacing`.
    ///
    /// The number of cells per axis is `ceil(side / max_spacing)`, and the
    /// actual spacing is `side / cells` so that boundary nodes land exactly
    /// on `±side/2`.
    pub fn for_box(dim: usize, side: f64, max_spacing: f64) -> Result<Self, DomainError> {
        if !(1..=3).contains(&dim) {
            return Err(DomainError::Dimension(dim));
        }
        let cells = (side / max_spacing - 1e-9).ceil().max(1.0) as usize;
        if cells < 2 {
            return Err(DomainError::NoInterior { side, spacing: max_spacing });
        }
        Ok(Self { dim, shape: vec![cells - 1; dim], spacing: side / cells as f64 })
    }

    /// Lattice with an explicit shape and spacing (used by dump readers and fixtures).
    pub fn from_shape(shape: Vec<usize>, spacing: f64) -> Result<Self, DomainError> {
        let dim = shape.len();
        if !(1..=3).contains(&dim) {
            return Err(DomainError::Dimension(dim));
        }
        if shape.contains(&0) {
            return Err(DomainError::NoInterior { side: 0.0, spacing });
        }
        Ok(Self { dim, shape, spacing })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Volume weight `h^d` of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    /// Side length of the box along `axis` (boundary node to boundary node).
    pub fn side(&self, axis: usize) -> f64 {
        (self.shape[axis] + 1) as f64 * self.spacing
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    pub fn unravel(&self, mut index: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = index % self.shape[axis];
            index /= self.shape[axis];
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Physical coordinate of node `index`, box centred at the origin.
    pub fn coord(&self, index: usize) -> [f64; 3] {
        let multi = self.unravel(index);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = -0.5 * self.side(axis) + (multi[axis] + 1) as f64 * self.spacing;
        }
        x
    }

    /// Node index reached by moving `offset` from `index`, if still interior.
    pub fn shifted(&self, index: usize, offset: &[i64]) -> Option<usize> {
        let multi = self.unravel(index);
        let mut moved = [0usize; 3];
        for axis in 0..self.dim {
            let p = multi[axis] as i64 + offset[axis];
            if p < 0 || p >= self.shape[axis] as i64 {
                return None;
            }
            moved[axis] = p as usize;
        }
        Some(self.ravel(&moved))
    }
}

/// Vacant nodes of a lattice with their face-connected component labels.
#[derive(Debug, Clone)]
pub struct VacancyDomain {
    lattice: Lattice,
    mask: Vec<bool>,
    labels: Vec<u32>,
    component_count: usize,
    sites: Vec<usize>,
    site_of: Vec<u32>,
    site_labels: Vec<u32>,
    neighbors: Vec<u32>,
}

impl VacancyDomain {
    /// Build from a vacancy mask (`true` = vacant). Components are labelled
    /// `1..=K` by flood fill, in order of each component's first node in
    /// row-major scan order.
    pub fn from_mask(lattice: Lattice, mask: Vec<bool>) -> Result<Self, DomainError> {
        let n = lattice.node_count();
        if mask.len() != n {
            return Err(DomainError::MaskSize { expected: n, got: mask.len() });
        }
        let labels = flood_fill_labels(&lattice, &mask);
        let component_count = labels.iter().copied().max().unwrap_or(0) as usize;
        Ok(Self::with_labels(lattice, mask, labels, component_count))
    }

    /// Build from a mask and externally supplied labels (dump readers). The
    /// labels are trusted to partition the vacant nodes.
    pub fn from_parts(lattice: Lattice, mask: Vec<bool>, labels: Vec<u32>) -> Result<Self, DomainError> {
        let n = lattice.node_count();
        if mask.len() != n {
            return Err(DomainError::MaskSize { expected: n, got: mask.len() });
        }
        if labels.len() != n {
            return Err(DomainError::MaskSize { expected: n, got: labels.len() });
        }
        let component_count = labels.iter().copied().max().unwrap_or(0) as usize;
        Ok(Self::with_labels(lattice, mask, labels, component_count))
    }

    fn with_labels(lattice: Lattice, mask: Vec<bool>, labels: Vec<u32>, component_count: usize) -> Self {
        let mut sites = Vec::new();
        let mut site_of = vec![NO_SITE; mask.len()];
        for (g, &vacant) in mask.iter().enumerate() {
            if vacant {
                site_of[g] = sites.len() as u32;
                sites.push(g);
            }
        }
        let site_labels = sites.iter().map(|&g| labels[g]).collect();
        let d = lattice.dim();
        let mut neighbors = vec![NO_SITE; sites.len() * 2 * d];
        for (s, &g) in sites.iter().enumerate() {
            let multi = lattice.unravel(g);
            for axis in 0..d {
                let stride = lattice.stride(axis);
                if multi[axis] > 0 {
                    neighbors[s * 2 * d + 2 * axis] = site_of[g - stride];
                }
                if multi[axis] + 1 < lattice.shape()[axis] {
                    neighbors[s * 2 * d + 2 * axis + 1] = site_of[g + stride];
                }
            }
        }
        Self { lattice, mask, labels, component_count, sites, site_of, site_labels, neighbors }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Per-node component label, 0 for blocked nodes.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    /// Grid index of each site.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn site_of(&self, grid_index: usize) -> Option<usize> {
        match self.site_of[grid_index] {
            NO_SITE => None,
            s => Some(s as usize),
        }
    }

    pub fn site_label(&self, site: usize) -> u32 {
        self.site_labels[site]
    }

    pub fn site_labels(&self) -> &[u32] {
        &self.site_labels
    }

    /// The `2d` face neighbours of `site` (entries are [`NO_SITE`] where the
    /// neighbour is blocked or on the boundary). Order: `-x0, +x0, -x1, ...`.
    pub fn neighbors(&self, site: usize) -> &[u32] {
        let k = 2 * self.lattice.dim();
        &self.neighbors[site * k..(site + 1) * k]
    }

    /// Node counts per component, index `k - 1` for label `k`.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.component_count];
        for &l in &self.site_labels {
            sizes[l as usize - 1] += 1;
        }
        sizes
    }

    pub fn component_volumes(&self) -> Vec<f64> {
        let w = self.lattice.cell_volume();
        self.component_sizes().into_iter().map(|c| c as f64 * w).collect()
    }

    /// Sub-domain containing only component `label` (relabelled to 1).
    pub fn component_domain(&self, label: u32) -> Result<VacancyDomain, DomainError> {
        if label == 0 || label as usize > self.component_count {
            return Err(DomainError::NoSuchComponent(label));
        }
        let mask: Vec<bool> = self.labels.iter().map(|&l| l == label).collect();
        let labels = mask.iter().map(|&m| m as u32).collect();
        Ok(Self::with_labels(self.lattice.clone(), mask, labels, 1))
    }

    /// Copy a site vector of `sub` (a domain on the same lattice) into this
    /// domain's indexing. Values at sites of `sub` that are not vacant here are dropped.
    pub fn embed_from(&self, sub: &VacancyDomain, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.site_count()];
        for (s, &g) in sub.sites.iter().enumerate() {
            if let Some(t) = self.site_of(g) {
                out[t] = values[s];
            }
        }
        out
    }

    /// Discrete inner product `h^d Σ a b`.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.lattice.cell_volume() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    /// Discrete L² mass of `values` per component (index `k - 1`).
    pub fn mass_per_component(&self, values: &[f64]) -> Vec<f64> {
        let w = self.lattice.cell_volume();
        let mut mass = vec![0.0; self.component_count];
        for (s, v) in values.iter().enumerate() {
            mass[self.site_labels[s] as usize - 1] += v * v * w;
        }
        mass
    }

    /// Scatter a site vector onto the full grid (zeros at blocked nodes).
    pub fn to_grid(&self, values: &[f64]) -> Vec<f64> {
        let mut grid = vec![0.0; self.lattice.node_count()];
        for (s, &g) in self.sites.iter().enumerate() {
            grid[g] = values[s];
        }
        grid
    }

    pub fn check_len(&self, values: &[f64]) -> Result<(), DomainError> {
        if values.len() != self.site_count() {
            return Err(DomainError::Length { expected: self.site_count(), got: values.len() });
        }
        Ok(())
    }
}

fn flood_fill_labels(lattice: &Lattice, mask: &[bool]) -> Vec<u32> {
    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    let d = lattice.dim();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(g) = queue.pop_front() {
            let multi = lattice.unravel(g);
            for axis in 0..d {
                let stride = lattice.stride(axis);
                if multi[axis] > 0 && mask[g - stride] && labels[g - stride] == 0 {
                    labels[g - stride] = next;
                    queue.push_back(g - stride);
                }
                if multi[axis] + 1 < lattice.shape()[axis] && mask[g + stride] && labels[g + stride] == 0 {
                    labels[g + stride] = next;
                    queue.push_back(g + stride);
                }
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_lattice_spacing_divides_side() {
        let lat = Lattice::for_box(2, 1.0, 1.0 / 9.0).unwrap();
        assert_eq!(lat.shape(), &[8, 8]);
        assert!((lat.spacing() - 1.0 / 9.0).abs() < 1e-15);
        let lat = Lattice::for_box(2, 1.0, 0.3).unwrap();
        assert_eq!(lat.shape(), &[3, 3]);
        assert!(lat.spacing() <= 0.3);
        assert!((lat.side(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_coarse_box_has_no_interior() {
        assert!(matches!(Lattice::for_box(2, 1.0, 1.0), Err(DomainError::NoInterior { .. })));
    }

    #[test]
    fn ravel_unravel_roundtrip() {
        let lat = Lattice::from_shape(vec![3, 4, 5], 0.1).unwrap();
        for i in 0..lat.node_count() {
            assert_eq!(lat.ravel(&lat.unravel(i)), i);
        }
        assert_eq!(lat.stride(0), 20);
        assert_eq!(lat.stride(2), 1);
    }

    #[test]
    fn coordinates_are_centred() {
        let lat = Lattice::from_shape(vec![3, 3], 0.25).unwrap();
        let c = lat.coord(4);
        assert!(c[0].abs() < 1e-15 && c[1].abs() < 1e-15);
        let c = lat.coord(0);
        assert!((c[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn labels_follow_scan_order() {
        // 1 0 1
        // 1 0 1
        // 0 0 1
        let lat = Lattice::from_shape(vec![3, 3], 0.1).unwrap();
        let mask = vec![true, false, true, true, false, true, false, false, true];
        let dom = VacancyDomain::from_mask(lat, mask).unwrap();
        assert_eq!(dom.component_count(), 2);
        assert_eq!(dom.labels(), &[1, 0, 2, 1, 0, 2, 0, 0, 2]);
        assert_eq!(dom.component_sizes(), vec![2, 3]);
    }

    #[test]
    fn diagonal_contact_is_not_connected() {
        let lat = Lattice::from_shape(vec![2, 2], 0.1).unwrap();
        let dom = VacancyDomain::from_mask(lat, vec![true, false, false, true]).unwrap();
        assert_eq!(dom.component_count(), 2);
    }

    #[test]
    fn component_domain_and_embedding() {
        let lat = Lattice::from_shape(vec![1, 5], 0.1).unwrap();
        let dom = VacancyDomain::from_mask(lat, vec![true, true, false, true, true]).unwrap();
        let sub = dom.component_domain(2).unwrap();
        assert_eq!(sub.site_count(), 2);
        let full = dom.embed_from(&sub, &[3.0, 4.0]);
        assert_eq!(full, vec![0.0, 0.0, 3.0, 4.0]);
        assert!(dom.component_domain(3).is_err());
    }
}
