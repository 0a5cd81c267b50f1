//! Symmetric eigensolver for the lowest eigenpairs of matrix-free operators.
//!
//! The engine is a thick-restart Lanczos iteration (symmetric Krylov–Schur)
//! with full reorthogonalization. Eigenpairs are found one at a time; every
//! converged vector is locked and later runs stay orthogonal to it, so exact
//! multiplicities (e.g. two congruent disjoint components) are resolved.
//!
//! Two spectral transformations are available:
//! * direct: iterate with `-A`, needs only matvecs;
//! * inverse: iterate with `A^{-1}` through a [`ProfileCholesky`] factor of an
//!   SPD operator. The lowest eigenvalues become the best separated ones, which
//!   cuts the iteration count by orders of magnitude on fine grids.
//!
//! Convergence is always confirmed with an explicit residual `‖Ax − λx‖`
//! on the original operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A real symmetric linear operator acting on `R^dim`.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("operator has dimension 0")]
    Empty,
    #[error("requested {requested} eigenpairs from an operator of dimension {dim}")]
    TooFew { dim: usize, requested: usize },
    #[error("eigensolver did not converge after {restarts} restarts (last residual estimates {residuals:?})")]
    NotConverged { restarts: usize, residuals: Vec<f64> },
    #[error("factorization failed: pivot {pivot} at row {row} is not positive")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Target relative residual `‖Ax − λx‖ ≤ tol · |λ|` (absolute when `λ = 0`).
    pub tol: f64,
    /// Krylov basis size before a thick restart.
    pub basis_size: usize,
    pub max_restarts: usize,
    /// Seed of the random start vectors.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-9, basis_size: 48, max_restarts: 4000, seed: 0x6b6c_6569_6765_6e31 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Euclidean unit vector.
    pub vector: Vec<f64>,
    /// Relative residual `‖Ax − λx‖ / |λ|` (absolute when `λ = 0`).
    pub residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Explicit relative residual of `(value, x)` for `op`.
pub fn residual(op: &dyn SymmetricOperator, value: f64, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    op.apply(x, &mut ax);
    axpy(-value, x, &mut ax);
    let r = dot(&ax, &ax).sqrt() / dot(x, x).sqrt();
    if value != 0.0 {
        r / value.abs()
    } else {
        r
    }
}

/// Rayleigh quotient `⟨x, Ax⟩ / ⟨x, x⟩`.
pub fn rayleigh_quotient(op: &dyn SymmetricOperator, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    op.apply(x, &mut ax);
    dot(x, &ax) / dot(x, x)
}

/// Lowest `count` eigenpairs of `op` by direct Lanczos on `-A`.
pub fn lowest(op: &dyn SymmetricOperator, count: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>, EigenError> {
    let negated = Negated(op);
    lowest_with(op, &negated, count, opts)
}

/// Lowest `count` eigenpairs of the SPD operator `op`, iterating with `inverse ≈ A^{-1}`.
pub fn lowest_by_inverse(
    op: &dyn SymmetricOperator,
    inverse: &dyn SymmetricOperator,
    count: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>, EigenError> {
    lowest_with(op, inverse, count, opts)
}

struct Negated<'a>(&'a dyn SymmetricOperator);

impl SymmetricOperator for Negated<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    }
}

fn lowest_with(
    op: &dyn SymmetricOperator,
    iterated: &dyn SymmetricOperator,
    count: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>, EigenError> {
    let dim = op.dim();
    if dim == 0 {
        return Err(EigenError::Empty);
    }
    if count > dim {
        return Err(EigenError::TooFew { dim, requested: count });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let pair = largest_unlocked(op, iterated, &locked, opts, &mut rng)?;
        locked.push(pair.vector.clone());
        pairs.push(pair);
    }
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pairs)
}

fn random_orthogonal(dim: usize, against: &[&[f64]], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        for _ in 0..2 {
            for q in against {
                let c = dot(q, &x);
                axpy(-c, q, &mut x);
            }
        }
        if normalize(&mut x) > 1e-8 {
            return Some(x);
        }
    }
    None
}

/// Thick-restart Lanczos for the largest eigenvalue of `iterated` on the
/// orthogonal complement of `locked`.
fn largest_unlocked(
    op: &dyn SymmetricOperator,
    iterated: &dyn SymmetricOperator,
    locked: &[Vec<f64>],
    opts: &EigenOptions,
    rng: &mut ChaCha8Rng,
) -> Result<EigenPair, EigenError> {
    let dim = op.dim();
    let free = dim - locked.len();
    let m = opts.basis_size.max(4).min(free);
    let keep = (m / 2).max(1).min(m - 1);
    let locked_refs: Vec<&[f64]> = locked.iter().map(|v| v.as_slice()).collect();

    let start = random_orthogonal(dim, &locked_refs, rng).ok_or(EigenError::Empty)?;
    let mut basis: Vec<Vec<f64>> = vec![start];
    // projected matrix, row-major m x m, plus the sub-diagonal entry for the residual
    let mut proj = vec![0.0; m * m];
    let mut est_threshold = opts.tol;
    let mut last_estimates = Vec::new();
    let mut w = vec![0.0; dim];

    for restart in 0..=opts.max_restarts {
        // expand the basis up to m vectors; `residual_vec` couples to column m-1
        let mut residual_vec: Option<Vec<f64>> = None;
        let mut exhausted = false;
        while residual_vec.is_none() {
            let j = basis.len() - 1;
            iterated.apply(&basis[j], &mut w);
            let scale = dot(&w, &w).sqrt();
            for _ in 0..2 {
                for q in &locked_refs {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                    proj[i * m + j] += c;
                }
            }
            for i in 0..j {
                proj[j * m + i] = proj[i * m + j];
            }
            let beta = dot(&w, &w).sqrt();
            let broke_down = beta <= 1e-13 * scale.max(f64::MIN_POSITIVE);
            if j + 1 == m {
                if broke_down {
                    w.iter_mut().for_each(|x| *x = 0.0);
                }
                residual_vec = Some(w.clone());
                exhausted = m == free;
            } else if broke_down {
                let mut against = locked_refs.clone();
                against.extend(basis.iter().map(|v| v.as_slice()));
                match random_orthogonal(dim, &against, rng) {
                    Some(v) => basis.push(v),
                    None => {
                        residual_vec = Some(vec![0.0; dim]);
                        exhausted = true;
                    }
                }
            } else {
                let v: Vec<f64> = w.iter().map(|x| x / beta).collect();
                proj[(j + 1) * m + j] = beta;
                basis.push(v);
            }
        }
        let f = residual_vec.unwrap();
        let size = basis.len();
        let beta_m = dot(&f, &f).sqrt();

        let small = DMatrix::from_fn(size, size, |i, k| 0.5 * (proj[i * m + k] + proj[k * m + i]));
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let top = order[0];
        let theta = eig.eigenvalues[top];
        let estimate = beta_m * eig.eigenvectors[(size - 1, top)].abs();
        last_estimates = vec![estimate / theta.abs().max(f64::MIN_POSITIVE)];

        let ritz = |col: usize| -> Vec<f64> {
            let mut x = vec![0.0; dim];
            for (i, v) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(i, col)], v, &mut x);
            }
            x
        };

        if exhausted || estimate <= est_threshold * theta.abs() {
            let mut x = ritz(top);
            for _ in 0..2 {
                for q in &locked_refs {
                    let c = dot(q, &x);
                    axpy(-c, q, &mut x);
                }
            }
            normalize(&mut x);
            let value = rayleigh_quotient(op, &x);
            let res = residual(op, value, &x);
            if res <= opts.tol || exhausted {
                return Ok(EigenPair { value, vector: x, residual: res });
            }
            est_threshold *= 0.1;
            if est_threshold < 1e-3 * f64::EPSILON {
                return Err(EigenError::NotConverged { restarts: restart, residuals: vec![res] });
            }
        }

        // thick restart: keep the `keep` largest Ritz vectors
        let kept: Vec<usize> = order[..keep.min(size - 1)].to_vec();
        let mut new_basis: Vec<Vec<f64>> = kept.iter().map(|&c| ritz(c)).collect();
        let mut next = f;
        if beta_m > 0.0 {
            next.iter_mut().for_each(|x| *x /= beta_m);
        }
        proj.iter_mut().for_each(|x| *x = 0.0);
        for (a, &c) in kept.iter().enumerate() {
            proj[a * m + a] = eig.eigenvalues[c];
            let b = beta_m * eig.eigenvectors[(size - 1, c)];
            proj[kept.len() * m + a] = b;
            proj[a * m + kept.len()] = b;
        }
        if beta_m == 0.0 {
            let mut against = locked_refs.clone();
            against.extend(new_basis.iter().map(|v| v.as_slice()));
            next = random_orthogonal(dim, &against, rng).ok_or(EigenError::Empty)?;
        } else {
            // keep the restarted basis orthonormal against drift
            for _ in 0..2 {
                for q in locked_refs.iter().copied().chain(new_basis.iter().map(|v| v.as_slice())) {
                    let c = dot(q, &next);
                    axpy(-c, q, &mut next);
                }
            }
            normalize(&mut next);
        }
        // the diagonal entry of `next` is accumulated by Gram–Schmidt on expansion;
        // clear the couplings GS will recompute
        for a in 0..kept.len() {
            proj[a * m + kept.len()] = 0.0;
        }
        new_basis.push(next);
        basis = new_basis;
    }
    Err(EigenError::NotConverged { restarts: opts.max_restarts, residuals: last_estimates })
}

/// Envelope (profile) Cholesky factor `A = L Lᵀ` of a sparse SPD matrix.
///
/// Row `i` of `L` is stored densely from its first nonzero column to the
/// diagonal. Natural grid orderings give an envelope of width one grid row
/// (2d) or one grid plane (3d).
#[derive(Debug, Clone)]
pub struct ProfileCholesky {
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl ProfileCholesky {
    /// Number of stored entries for a matrix whose row `i` starts at column `first[i]`.
    pub fn envelope_size(first: &[usize]) -> usize {
        first.iter().enumerate().map(|(i, &f)| i - f + 1).sum()
    }

    /// Factor the matrix given by its diagonal and strictly-lower entries
    /// `(row, col, value)` with `col < row`.
    pub fn factor(diagonal: &[f64], lower: &[(usize, usize, f64)]) -> Result<Self, EigenError> {
        let n = diagonal.len();
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in lower {
            first[i] = first[i].min(j);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            offsets.push(total);
            total += i - f + 1;
        }
        offsets.push(total);
        let mut values = vec![0.0; total];
        for (i, &d) in diagonal.iter().enumerate() {
            values[offsets[i] + i - first[i]] = d;
        }
        for &(i, j, v) in lower {
            values[offsets[i] + j - first[i]] += v;
        }
        for i in 0..n {
            let fi = first[i];
            let row_i = offsets[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let row_j = offsets[j];
                let mut s = values[row_i + j - fi];
                for k in start..j {
                    s -= values[row_i + k - fi] * values[row_j + k - fj];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(EigenError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    values[row_i + i - fi] = s.sqrt();
                } else {
                    values[row_i + j - fi] = s / values[row_j + j - fj];
                }
            }
        }
        Ok(Self { first, offsets, values })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            let mut s = x[i];
            for k in fi..i {
                s -= row[k - fi] * x[k];
            }
            x[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for k in fi..i {
                x[k] -= row[k - fi] * xi;
            }
        }
    }
}

impl SymmetricOperator for ProfileCholesky {
    fn dim(&self) -> usize {
        self.first.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.solve_in_place(y);
    }
}

/// Dense symmetric matrix as an operator (small problems and tests).
#[derive(Debug, Clone)]
pub struct DenseSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymmetric {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        Self { n, data }
    }
}

impl SymmetricOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            y[i] = dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
    }
}
