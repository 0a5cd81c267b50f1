//! Component-wise Hartree minimization and the effective one-particle operator.
//!
//! The functional on the host component is
//! `E[u] = h^d ⟨u, -Δ_h u⟩ + (N-1)/2 h^d ⟨|u|², |u|² ∗ v⟩` on the unit sphere
//! of the discrete L² space. The effective operator at `u` is
//! `h^u = -Δ_h + (N-1)(|u|² ∗ v) - shift`, with the constant chosen so that
//! `⟨u, h^u u⟩ = E[u]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, VacancyDomain};
use crate::eigen::{ProfileCholesky, SymmetricOperator};
use crate::interaction::{convolve_density, Convolver, InteractionPotential};
use crate::laplace::{self, assemble_laplacian, LaplaceError, MaskedOperator};

/// Mass outside the host component tolerated by [`hartree_energy`].
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HartreeError {
    #[error("u has mass {mass:e} outside component {component}")]
    MassOutside { component: u32, mass: f64 },
    #[error("potential sampled with h = {potential_h}, d = {potential_d} but grid has h = {grid_h}, d = {grid_d}")]
    GridMismatch { potential_h: f64, potential_d: usize, grid_h: f64, grid_d: usize },
    #[error("initial guess has no positive mass on component {0}")]
    BadInitialGuess(u32),
    #[error("Hartree flow did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64, energy_trace: Vec<f64> },
    #[error("energy became NaN at iteration {iteration}")]
    NotANumber { iteration: usize, energy_trace: Vec<f64> },
    #[error(transparent)]
    Laplace(#[from] LaplaceError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Starting point of the minimization.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum HartreeInit {
    /// Dirichlet ground state of the component.
    #[default]
    Dirichlet,
    /// Site vector on the full domain; its modulus restricted to the component is used.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HartreeOptions {
    /// Euler–Lagrange residual target.
    pub tol: f64,
    pub max_iterations: usize,
    /// Relative residual for the eigen solves.
    pub eigen_tol: f64,
    pub init: HartreeInit,
}

impl Default for HartreeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iterations: 5000, eigen_tol: 1e-9, init: HartreeInit::Dirichlet }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HartreeSolution {
    /// Site vector on the full domain, supported on `component`.
    #[serde(skip)]
    pub u: Vec<f64>,
    pub component: u32,
    pub energy: f64,
    pub e1: f64,
    pub e2: f64,
    pub shift: f64,
    pub iterations: usize,
    pub el_residual: f64,
    #[serde(skip)]
    pub energy_trace: Vec<f64>,
    /// Steps in which negative entries were clipped.
    pub clipped_steps: usize,
    /// `|⟨u, h^u u⟩ - e1|`.
    pub lemma_defect: f64,
    /// Discrete L² mass of the effective ground vector on `component`.
    pub ground_mass_on_component: f64,
    pub eigen_residuals: [f64; 2],
}

fn check_grid(domain: &VacancyDomain, v: &InteractionPotential) -> Result<(), HartreeError> {
    let lat = domain.lattice();
    if v.d != lat.dim() || (v.h - lat.spacing()).abs() > 1e-12 * lat.spacing() {
        return Err(HartreeError::GridMismatch {
            potential_h: v.h,
            potential_d: v.d,
            grid_h: lat.spacing(),
            grid_d: lat.dim(),
        });
    }
    Ok(())
}

fn check_support(domain: &VacancyDomain, component: u32, u: &[f64]) -> Result<(), HartreeError> {
    domain.check_len(u)?;
    let w = domain.lattice().cell_volume();
    let mass: f64 = u
        .iter()
        .zip(domain.site_labels())
        .filter(|(_, &l)| l != component)
        .map(|(x, _)| x * x * w)
        .sum();
    if mass > SUPPORT_TOLERANCE {
        return Err(HartreeError::MassOutside { component, mass });
    }
    Ok(())
}

/// `E[u]` for `u` supported on `component`.
pub fn hartree_energy(
    domain: &VacancyDomain,
    component: u32,
    u: &[f64],
    v: &InteractionPotential,
    n_particles: usize,
) -> Result<f64, HartreeError> {
    check_grid(domain, v)?;
    check_support(domain, component, u)?;
    let lap = assemble_laplacian(domain)?;
    Ok(Functional::new(domain, lap, v, n_particles).eval(u).energy)
}

/// `(N-1)/2 h^d ⟨|u|², |u|² ∗ v⟩`, the constant removed from `h^u`.
pub fn effective_shift(domain: &VacancyDomain, u: &[f64], v: &InteractionPotential, n_particles: usize) -> f64 {
    let rho: Vec<f64> = u.iter().map(|x| x * x).collect();
    let conv = convolve_density(domain, &rho, v);
    0.5 * (n_particles as f64 - 1.0) * domain.dot(&rho, &conv)
}

/// `h^u` on the full vacancy set.
pub fn assemble_effective_operator<'a>(
    domain: &'a VacancyDomain,
    u: &[f64],
    v: &InteractionPotential,
    n_particles: usize,
) -> Result<MaskedOperator<'a>, HartreeError> {
    check_grid(domain, v)?;
    domain.check_len(u)?;
    let coupling = n_particles as f64 - 1.0;
    let rho: Vec<f64> = u.iter().map(|x| x * x).collect();
    let conv = convolve_density(domain, &rho, v);
    let shift = 0.5 * coupling * domain.dot(&rho, &conv);
    let potential = conv.iter().map(|c| coupling * c).collect();
    Ok(assemble_laplacian(domain)?.with_potential(potential, shift)?)
}

/// Two lowest eigenvalues of an effective operator and its ground vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSpectrum {
    pub e1: f64,
    pub e2: f64,
    pub ground: Vec<f64>,
    pub residuals: [f64; 2],
}

pub fn effective_spectrum(hop: &MaskedOperator<'_>, tol: f64) -> Result<EffectiveSpectrum, LaplaceError> {
    let sp = laplace::lowest_eigenpairs(hop, tol)?;
    Ok(EffectiveSpectrum { e1: sp.lambda1, e2: sp.lambda2, ground: sp.phi1, residuals: [sp.residual1, sp.residual2] })
}

struct Functional<'a> {
    domain: &'a VacancyDomain,
    lap: MaskedOperator<'a>,
    conv: Option<Convolver>,
    coupling: f64,
    weight: f64,
}

struct Evaluation {
    energy: f64,
    grad: Vec<f64>,
    residual: f64,
    lu: Vec<f64>,
    conv: Vec<f64>,
}

impl<'a> Functional<'a> {
    fn new(domain: &'a VacancyDomain, lap: MaskedOperator<'a>, v: &InteractionPotential, n: usize) -> Self {
        let coupling = n as f64 - 1.0;
        let conv = (!v.is_zero() && coupling > 0.0).then(|| Convolver::new(domain.lattice(), v));
        Self { domain, lap, conv, coupling, weight: domain.lattice().cell_volume() }
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    fn eval(&self, u: &[f64]) -> Evaluation {
        let mut lu = vec![0.0; u.len()];
        self.lap.apply(u, &mut lu);
        let kinetic = self.dot(u, &lu);
        let mut hu = lu.clone();
        let mut interaction = 0.0;
        let mut conv = Vec::new();
        if let Some(cv) = &self.conv {
            let rho: Vec<f64> = u.iter().map(|x| x * x).collect();
            conv = cv.convolve(self.domain, &rho);
            interaction = 0.5 * self.coupling * self.dot(&rho, &conv);
            for ((y, c), x) in hu.iter_mut().zip(&conv).zip(u) {
                *y += self.coupling * c * x;
            }
        }
        let mu = self.dot(u, &hu);
        let grad: Vec<f64> = hu.iter().zip(u).map(|(y, x)| y - mu * x).collect();
        let residual = self.dot(&grad, &grad).sqrt();
        Evaluation { energy: kinetic + interaction, grad, residual, lu, conv }
    }

    /// `E(b) − E(a)` from the cached vectors, free of the cancellation in the
    /// difference of the two totals.
    fn difference(&self, a: &[f64], ea: &Evaluation, b: &[f64], eb: &Evaluation) -> f64 {
        let s: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        let lsum: Vec<f64> = ea.lu.iter().zip(&eb.lu).map(|(x, y)| x + y).collect();
        let mut diff = self.dot(&s, &lsum);
        if !ea.conv.is_empty() {
            let drho: Vec<f64> = s.iter().zip(a.iter().zip(b)).map(|(d, (x, y))| d * (x + y)).collect();
            let csum: Vec<f64> = ea.conv.iter().zip(&eb.conv).map(|(x, y)| x + y).collect();
            diff += 0.5 * self.coupling * self.dot(&drho, &csum);
        }
        diff
    }
}

fn normalize(domain: &VacancyDomain, u: &mut [f64]) -> f64 {
    let n = domain.norm(u);
    if n > 0.0 {
        u.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Result of the flow on the component alone.
struct Flow {
    u: Vec<f64>,
    energy: f64,
    residual: f64,
    iterations: usize,
    trace: Vec<f64>,
    clipped: usize,
}

/// Tangent descent direction `P⁻¹g − (⟨u,P⁻¹g⟩/⟨u,P⁻¹u⟩) P⁻¹u`, `P` the
/// component Laplacian (identity when it could not be factored).
fn direction(f: &Functional<'_>, pre: Option<&ProfileCholesky>, u: &[f64], g: &[f64]) -> Vec<f64> {
    let Some(pre) = pre else {
        return g.to_vec();
    };
    let mut pg = g.to_vec();
    pre.solve_in_place(&mut pg);
    let mut pu = u.to_vec();
    pre.solve_in_place(&mut pu);
    let c = f.dot(u, &pg) / f.dot(u, &pu);
    pg.iter().zip(&pu).map(|(a, b)| a - c * b).collect()
}

/// Tangent Hessian of the constrained functional at `u`, applied to `x`.
fn hessian_apply(f: &Functional<'_>, u: &[f64], at: &Evaluation, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    f.lap.apply(x, &mut y);
    let mu = f.dot(u, &at.lu) + f.coupling * u.iter().zip(&at.conv).map(|(a, c)| a * a * c).sum::<f64>() * f.weight;
    if let Some(conv) = &f.conv {
        let ux: Vec<f64> = u.iter().zip(x).map(|(a, b)| a * b).collect();
        let cx = conv.convolve(f.domain, &ux);
        for (((y, a), c), (xi, cxi)) in y.iter_mut().zip(u).zip(&at.conv).zip(x.iter().zip(&cx)) {
            *y += f.coupling * (c * xi + 2.0 * a * cxi);
        }
    }
    for (y, xi) in y.iter_mut().zip(x) {
        *y -= mu * xi;
    }
    let c = f.dot(u, &y);
    y.iter_mut().zip(u).for_each(|(y, a)| *y -= c * a);
    y
}

/// Preconditioned conjugate gradients for `H δ = −g` on the tangent space.
fn newton_direction(f: &Functional<'_>, pre: Option<&ProfileCholesky>, u: &[f64], at: &Evaluation) -> Vec<f64> {
    let mut x = vec![0.0; u.len()];
    let mut r: Vec<f64> = at.grad.iter().map(|g| -g).collect();
    let mut z = direction(f, pre, u, &r);
    let mut p = z.clone();
    let mut rz = f.dot(&r, &z);
    let target = 1e-4 * at.residual;
    for _ in 0..500 {
        let hp = hessian_apply(f, u, at, &p);
        let php = f.dot(&p, &hp);
        if php <= 0.0 {
            break;
        }
        let a = rz / php;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += a * p);
        r.iter_mut().zip(&hp).for_each(|(r, h)| *r -= a * h);
        if f.dot(&r, &r).sqrt() < target {
            break;
        }
        z = direction(f, pre, u, &r);
        let next = f.dot(&r, &z);
        let b = next / rz;
        rz = next;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + b * *p);
    }
    x
}

/// Newton steps on the Euler–Lagrange residual, kept while they lower it.
fn newton_polish(
    f: &Functional<'_>,
    pre: Option<&ProfileCholesky>,
    mut u: Vec<f64>,
    mut cur: Evaluation,
    mut trace: Vec<f64>,
    clipped: usize,
    opts: &HartreeOptions,
) -> Result<Flow, HartreeError> {
    let slack = 64.0 * f64::EPSILON * cur.energy.abs();
    for _ in 0..20 {
        if cur.residual < opts.tol {
            break;
        }
        let delta = newton_direction(f, pre, &u, &cur);
        let mut cand: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| (a + d).max(0.0)).collect();
        if normalize(f.domain, &mut cand) == 0.0 {
            break;
        }
        let next = f.eval(&cand);
        if !(next.residual < cur.residual && next.energy <= cur.energy + slack) {
            break;
        }
        trace.push(next.energy);
        u = cand;
        cur = next;
    }
    let iterations = trace.len() - 1;
    if cur.residual < opts.tol {
        return Ok(Flow { u, energy: cur.energy, residual: cur.residual, iterations, trace, clipped });
    }
    Err(HartreeError::NotConverged { iterations, residual: cur.residual, energy_trace: trace })
}

fn gradient_flow(
    sub: &VacancyDomain,
    v: &InteractionPotential,
    n: usize,
    mut u: Vec<f64>,
    opts: &HartreeOptions,
) -> Result<Flow, HartreeError> {
    let lap = assemble_laplacian(sub)?;
    let pre = lap.factor();
    let f = Functional::new(sub, lap, v, n);
    let h = sub.lattice().spacing();
    let (mut tau, tau_min) = match pre {
        Some(_) => (1.0, 1e-8),
        None => (h * h / (2.0 * sub.lattice().dim() as f64), 1e-6 * h * h),
    };
    let mut cur = f.eval(&u);
    let mut z = direction(&f, pre.as_ref(), &u, &cur.grad);
    let mut dir = z.clone();
    let mut gz = f.dot(&cur.grad, &z);
    let mut trace = vec![cur.energy];
    let mut clipped = 0;
    let mut restarted = false;
    let mut flat = 0;
    for iteration in 0..opts.max_iterations {
        if !cur.energy.is_finite() {
            return Err(HartreeError::NotANumber { iteration, energy_trace: trace });
        }
        if cur.residual < opts.tol {
            return Ok(Flow { u, energy: cur.energy, residual: cur.residual, iterations: iteration, trace, clipped });
        }
        // dE along -dir is -2⟨g, dir⟩
        let mut slope = 2.0 * f.dot(&cur.grad, &dir);
        if slope <= 0.0 {
            dir.clone_from(&z);
            slope = 2.0 * gz;
        }
        let step = |tau: f64| {
            let mut cand: Vec<f64> = u.iter().zip(&dir).map(|(x, g)| x - tau * g).collect();
            let negative = cand.iter().any(|&x| x < 0.0);
            if negative {
                cand.iter_mut().for_each(|x| *x = x.max(0.0));
            }
            if normalize(sub, &mut cand) == 0.0 {
                return None;
            }
            let next = f.eval(&cand);
            let de = f.difference(&u, &cur, &cand, &next);
            Some((cand, next, negative, de))
        };
        let mut accepted = None;
        for _ in 0..80 {
            let Some(mut trial) = step(tau) else {
                tau *= 0.5;
                continue;
            };
            if trial.1.energy.is_nan() {
                trace.push(trial.1.energy);
                return Err(HartreeError::NotANumber { iteration, energy_trace: trace });
            }
            // minimizer of the parabola through E(0), E'(0) and E(tau)
            let curv = (trial.3 + slope * tau) / (tau * tau);
            if !trial.2 && curv > 0.0 {
                let t = slope / (2.0 * curv);
                if (t - tau).abs() > 1e-3 * tau {
                    if let Some(fit) = step(t) {
                        if fit.3 < trial.3 {
                            tau = t;
                            trial = fit;
                        }
                    }
                }
            }
            if trial.3 <= -1e-4 * tau * slope {
                accepted = Some(trial);
                break;
            }
            tau *= 0.5;
        }
        let Some((cand, next, negative, de)) = accepted else {
            if !restarted {
                restarted = true;
                dir.clone_from(&z);
                tau = 1.0f64.max(tau_min);
                continue;
            }
            // the energy no longer resolves the residual: finish with Newton
            return newton_polish(&f, pre.as_ref(), u, cur, trace, clipped, opts);
        };
        restarted = false;
        clipped += negative as usize;
        let next_z = direction(&f, pre.as_ref(), &cand, &next.grad);
        let next_gz = f.dot(&next.grad, &next_z);
        // Polak–Ribière+ with restart after clipping
        let beta = if negative || gz <= 0.0 {
            0.0
        } else {
            let dz: Vec<f64> = next_z.iter().zip(&z).map(|(a, b)| a - b).collect();
            (f.dot(&next.grad, &dz) / gz).max(0.0)
        };
        dir = next_z.iter().zip(&dir).map(|(a, b)| a + beta * b).collect();
        let c = f.dot(&cand, &dir);
        dir.iter_mut().zip(&cand).for_each(|(d, x)| *d -= c * x);
        tau = tau.clamp(tau_min, 1e6);
        flat = if -de < 64.0 * f64::EPSILON * cur.energy.abs() { flat + 1 } else { 0 };
        trace.push(next.energy);
        u = cand;
        cur = next;
        z = next_z;
        gz = next_gz;
        if flat >= 20 {
            return newton_polish(&f, pre.as_ref(), u, cur, trace, clipped, opts);
        }
    }
    if cur.residual < opts.tol {
        let iterations = opts.max_iterations;
        return Ok(Flow { u, energy: cur.energy, residual: cur.residual, iterations, trace, clipped });
    }
    Err(HartreeError::NotConverged { iterations: opts.max_iterations, residual: cur.residual, energy_trace: trace })
}

fn initial_guess(
    domain: &VacancyDomain,
    sub: &VacancyDomain,
    component: u32,
    opts: &HartreeOptions,
) -> Result<Vec<f64>, HartreeError> {
    let mut u = match &opts.init {
        HartreeInit::Dirichlet => {
            let op = assemble_laplacian(sub)?;
            laplace::lowest_modes(&op, 1, opts.eigen_tol)?.remove(0).phi
        }
        HartreeInit::Custom(full) => {
            domain.check_len(full)?;
            let restricted = sub.embed_from(domain, full);
            restricted.into_iter().map(f64::abs).collect()
        }
    };
    if normalize(sub, &mut u) == 0.0 {
        return Err(HartreeError::BadInitialGuess(component));
    }
    Ok(u)
}

/// Minimize the Hartree functional on `component` by projected gradient flow,
/// then diagonalize the effective operator on the full domain.
pub fn minimize_hartree(
    domain: &VacancyDomain,
    component: u32,
    v: &InteractionPotential,
    n_particles: usize,
    opts: &HartreeOptions,
) -> Result<HartreeSolution, HartreeError> {
    check_grid(domain, v)?;
    let sub = domain.component_domain(component)?;
    let init = initial_guess(domain, &sub, component, opts)?;
    let flow = gradient_flow(&sub, v, n_particles, init, opts)?;
    let u = domain.embed_from(&sub, &flow.u);
    finish(domain, component, v, n_particles, opts.eigen_tol, u, flow)
}

fn finish(
    domain: &VacancyDomain,
    component: u32,
    v: &InteractionPotential,
    n_particles: usize,
    eigen_tol: f64,
    u: Vec<f64>,
    flow: Flow,
) -> Result<HartreeSolution, HartreeError> {
    let hop = assemble_effective_operator(domain, &u, v, n_particles)?;
    let spec = effective_spectrum(&hop, eigen_tol)?;
    let mut hu = vec![0.0; u.len()];
    hop.apply(&u, &mut hu);
    let form = domain.dot(&u, &hu);
    let ground_mass = domain.mass_per_component(&spec.ground)[component as usize - 1];
    Ok(HartreeSolution {
        component,
        energy: flow.energy,
        e1: spec.e1,
        e2: spec.e2,
        shift: hop.diagonal_shift(),
        iterations: flow.iterations,
        el_residual: flow.residual,
        energy_trace: flow.trace,
        clipped_steps: flow.clipped,
        lemma_defect: (form - spec.e1).abs(),
        ground_mass_on_component: ground_mass,
        eigen_residuals: spec.residuals,
        u,
    })
}

/// Damped self-consistent field iteration on the relaxed (mixed-state)
/// functional: `ρ ← (1-α) ρ + α φ²`, `φ` the ground state of `h^{√ρ}` on the
/// component, with `α ≤ alpha` chosen to minimize the relaxed energy (it is
/// quadratic in `α`). Returns `√ρ` at the fixed point (full-domain site vector).
pub fn damped_scf(
    domain: &VacancyDomain,
    component: u32,
    v: &InteractionPotential,
    n_particles: usize,
    alpha: f64,
    opts: &HartreeOptions,
) -> Result<Vec<f64>, HartreeError> {
    check_grid(domain, v)?;
    let sub = domain.component_domain(component)?;
    let u0 = initial_guess(domain, &sub, component, opts)?;
    let lap = assemble_laplacian(&sub)?;
    let kinetic = |x: &[f64]| {
        let mut y = vec![0.0; x.len()];
        lap.apply(x, &mut y);
        sub.dot(x, &y)
    };
    let mut rho: Vec<f64> = u0.iter().map(|x| x * x).collect();
    let mut t = kinetic(&u0);
    let coupling = n_particles as f64 - 1.0;
    let tight = opts.eigen_tol.min(1e-11);
    let mut change = f64::INFINITY;
    let convolver = Convolver::new(sub.lattice(), v);
    let mut trace = Vec::new();
    for _ in 0..opts.max_iterations {
        let conv = convolver.convolve(&sub, &rho);
        let op = assemble_laplacian(&sub)?.with_potential(conv.iter().map(|c| coupling * c).collect(), 0.0)?;
        let phi = laplace::lowest_modes(&op, 1, tight)?.remove(0).phi;
        let target: Vec<f64> = phi.iter().map(|x| x * x).collect();
        let delta: Vec<f64> = target.iter().zip(&rho).map(|(a, b)| a - b).collect();
        change = sub.norm(&delta);
        if change < opts.tol * 1e-2 {
            return Ok(domain.embed_from(&sub, &phi.iter().map(|x| x.abs()).collect::<Vec<_>>()));
        }
        let vd = convolver.convolve(&sub, &delta);
        let quad = 0.5 * coupling * sub.dot(&delta, &vd);
        let lin = kinetic(&phi) - t + coupling * sub.dot(&delta, &conv);
        let relaxed = |a: f64| a * lin + a * a * quad;
        let mut step = alpha;
        if quad > 0.0 {
            step = (-lin / (2.0 * quad)).clamp(0.0, alpha);
        }
        if relaxed(step) > relaxed(alpha) {
            step = alpha;
        }
        if step == 0.0 {
            step = alpha.min(1e-3);
        }
        trace.push(relaxed(step));
        t += step * (kinetic(&phi) - t);
        for (r, d) in rho.iter_mut().zip(&delta) {
            *r += step * d;
        }
    }
    Err(HartreeError::NotConverged { iterations: opts.max_iterations, residual: change, energy_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Lattice;
    use crate::interaction::{build_interaction, PotentialSpec};

    fn open_box(n: usize, h: f64) -> VacancyDomain {
        let lat = Lattice::from_shape(vec![n, n], h).unwrap();
        VacancyDomain::from_mask(lat, vec![true; n * n]).unwrap()
    }

    #[test]
    fn zero_coupling_reduces_to_laplacian() {
        let dom = open_box(8, 0.1);
        let v = build_interaction(&PotentialSpec::gaussian(0.0, 0.3), 5, dom.lattice()).unwrap();
        let sol = minimize_hartree(&dom, 1, &v, 5, &HartreeOptions::default()).unwrap();
        let sp = laplace::lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-10).unwrap();
        assert!((sol.energy - sp.lambda1).abs() < 1e-8 * sp.lambda1);
        assert!((sol.e1 - sp.lambda1).abs() < 1e-8 * sp.lambda1);
        assert!((sol.e2 - sp.lambda2).abs() < 1e-8 * sp.lambda2);
        assert_eq!(sol.shift, 0.0);
        let diff: Vec<f64> = sol.u.iter().zip(&sp.phi1).map(|(a, b)| a - b).collect();
        assert!(dom.norm(&diff) < 1e-6);
    }

    #[test]
    fn form_identity_at_own_u() {
        let dom = open_box(7, 0.125);
        let v = build_interaction(&PotentialSpec::gaussian(3.0, 0.3), 6, dom.lattice()).unwrap();
        let mut u: Vec<f64> = (0..49).map(|i| 1.0 + (i % 3) as f64).collect();
        normalize(&dom, &mut u);
        let e = hartree_energy(&dom, 1, &u, &v, 6).unwrap();
        let hop = assemble_effective_operator(&dom, &u, &v, 6).unwrap();
        let mut hu = vec![0.0; 49];
        hop.apply(&u, &mut hu);
        assert!((dom.dot(&u, &hu) - e).abs() < 1e-12 * e.abs());
        let flipped: Vec<f64> = u.iter().map(|x| -x).collect();
        assert_eq!(hartree_energy(&dom, 1, &flipped, &v, 6).unwrap(), e);
    }

    #[test]
    fn mass_outside_component_rejected() {
        let lat = Lattice::from_shape(vec![5, 1], 0.1).unwrap();
        let dom = VacancyDomain::from_mask(lat, vec![true, true, false, true, true]).unwrap();
        let v = build_interaction(&PotentialSpec::gaussian(1.0, 0.2), 2, dom.lattice()).unwrap();
        let u = vec![1.0, 1.0, 0.0, 0.5];
        assert!(matches!(hartree_energy(&dom, 1, &u, &v, 2), Err(HartreeError::MassOutside { .. })));
    }

    #[test]
    fn trace_is_monotone_and_residual_small() {
        let dom = open_box(10, 0.1);
        let v = build_interaction(&PotentialSpec::gaussian(20.0, 0.2), 8, dom.lattice()).unwrap();
        let sol = minimize_hartree(&dom, 1, &v, 8, &HartreeOptions::default()).unwrap();
        assert!(sol.el_residual < 1e-8);
        assert!(sol.energy_trace.windows(2).all(|w| w[1] <= w[0] + 64.0 * f64::EPSILON * w[0].abs()));
        assert!(sol.u.iter().all(|&x| x >= 0.0));
        assert!((dom.norm(&sol.u) - 1.0).abs() < 1e-12);
        assert!(sol.lemma_defect < 1e-7, "{}", sol.lemma_defect);
    }
}
