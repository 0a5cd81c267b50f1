//! Scaled pair potentials `v_N = κ V / (N (ln N)^{2/d})` sampled on the grid.
//!
//! Profiles are radial. Values live on a cubic stencil of offsets
//! `[-R, R]^d` (grid units), clipped to the largest offset that can occur on
//! the lattice. Norms are computed over the full truncation ball.

use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Lattice, VacancyDomain};

/// Gaussian cutoff in standard deviations. At 6σ the truncated lattice kernel
/// already has DFT lobes near -1e-9 of the peak; 8σ pushes them below 1e-13.
pub const DEFAULT_GAUSSIAN_CUTOFF: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InteractionError {
    #[error("invalid potential.{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("interaction scaling needs N >= 2 (ln N > 0), got N = {0}")]
    TooFewParticles(usize),
    #[error("potential takes negative value {value} at radius {radius}")]
    Negative { radius: f64, value: f64 },
    #[error("top_hat is not positive-definite; set potential.allow_non_positive_definite = true to use it")]
    TopHatNeedsOverride,
    #[error("potential is not positive-definite (min DFT / max DFT = {ratio:e})")]
    NotPositiveDefinite { ratio: f64 },
    #[error("potential table {path}: {reason}")]
    Table { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Gaussian,
    TopHat,
    CustomTable,
}

fn one() -> f64 {
    1.0
}

/// Potential section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub kappa: f64,
    /// Standard deviation (gaussian) or radius (top_hat).
    #[serde(default = "one")]
    pub width: f64,
    /// Cutoff radius; defaults to `8 width` for gaussian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    /// Plain text, one `offset value` pair per line (radial offset in length units).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_path: Option<PathBuf>,
    /// Inline alternative to `table_path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub allow_non_positive_definite: bool,
}

impl PotentialSpec {
    pub fn gaussian(kappa: f64, width: f64) -> Self {
        Self {
            kind: PotentialKind::Gaussian,
            kappa,
            width,
            truncation: None,
            table_path: None,
            table: None,
            allow_non_positive_definite: false,
        }
    }

    pub fn top_hat(kappa: f64, width: f64) -> Self {
        Self { kind: PotentialKind::TopHat, allow_non_positive_definite: true, ..Self::gaussian(kappa, width) }
    }

    pub fn custom(kappa: f64, table: Vec<(f64, f64)>) -> Self {
        Self { kind: PotentialKind::CustomTable, table: Some(table), ..Self::gaussian(kappa, 1.0) }
    }

    pub fn validate(&self) -> Result<(), InteractionError> {
        let invalid = |field, reason: &str| Err(InteractionError::Invalid { field, reason: reason.to_string() });
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return invalid("kappa", "must be non-negative and finite");
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return invalid("width", "must be positive and finite");
        }
        if let Some(t) = self.truncation {
            if !(t >= 0.0 && t.is_finite()) {
                return invalid("truncation", "must be non-negative and finite");
            }
        }
        if self.kind == PotentialKind::CustomTable && self.table.is_none() && self.table_path.is_none() {
            return invalid("table_path", "custom_table needs table_path or table");
        }
        if self.kind == PotentialKind::TopHat && !self.allow_non_positive_definite {
            return Err(InteractionError::TopHatNeedsOverride);
        }
        Ok(())
    }
}

/// Read a radial table: one `offset value` pair per line, `#` comments allowed.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, InteractionError> {
    let err = |reason: String| InteractionError::Table { path: path.to_path_buf(), reason };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|e| err(format!("line {}: {e}", no + 1)));
        match fields.as_slice() {
            [a, b] => rows.push((parse(a)?, parse(b)?)),
            _ => return Err(err(format!("line {}: expected two numbers", no + 1))),
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
enum Profile {
    Gaussian { sigma: f64 },
    TopHat { radius: f64 },
    Table(Vec<(f64, f64)>),
}

impl Profile {
    fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Gaussian { sigma } => (-0.5 * (r / sigma).powi(2)).exp(),
            Profile::TopHat { radius } => {
                if r <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Table(rows) => {
                let last = rows[rows.len() - 1];
                if r > last.0 {
                    return 0.0;
                }
                let i = rows.partition_point(|p| p.0 <= r);
                if i == 0 {
                    return rows[0].1;
                }
                if i == rows.len() {
                    return last.1;
                }
                let (a, b) = (rows[i - 1], rows[i]);
                a.1 + (b.1 - a.1) * (r - a.0) / (b.0 - a.0)
            }
        }
    }
}

/// Spectral diagnostics of the sampled stencil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierDiagnostics {
    /// Padded DFT length per axis.
    pub padded: usize,
    pub min_real: f64,
    pub max_real: f64,
    /// `(2π)^{-d/2} ‖v̂‖₁` by frequency quadrature; equals `v(0)` for a positive-definite stencil.
    pub v0_from_fourier: f64,
    pub hat_l1: f64,
}

/// Sampled `v_N` with its norms and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionPotential {
    pub kind: PotentialKind,
    pub kappa: f64,
    pub n_particles: usize,
    pub d: usize,
    pub h: f64,
    /// Stencil radius in grid units.
    pub radius: usize,
    #[serde(skip)]
    values: Vec<f64>,
    pub l1_norm: f64,
    pub v_at_zero: f64,
    pub prefactor: f64,
    pub scaling_tag: String,
    pub truncation_radius: f64,
    /// Relative mass of the untruncated profile beyond the cutoff.
    pub truncation_mass: f64,
    pub fourier: FourierDiagnostics,
}

fn for_each_offset(d: usize, radius: usize, mut f: impl FnMut(&[i64])) {
    let r = radius as i64;
    let mut k = vec![-r; d];
    loop {
        f(&k);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if k[axis] < r {
                k[axis] += 1;
                break;
            }
            k[axis] = -r;
        }
    }
}

fn radial_tail_fraction(d: usize, sigma: f64, cutoff: f64) -> f64 {
    let f = |r: f64| r.powi(d as i32 - 1) * (-0.5 * (r / sigma).powi(2)).exp();
    let simpson = |a: f64, b: f64| {
        let n = 4000;
        let step = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * step / 3.0
    };
    let end = cutoff.max(0.0) + 40.0 * sigma;
    let tail = simpson(cutoff, end);
    let total = simpson(0.0, cutoff) + tail;
    tail / total
}

/// Sample `v_N` on the lattice.
pub fn build_interaction(
    spec: &PotentialSpec,
    n_particles: usize,
    lattice: &Lattice,
) -> Result<InteractionPotential, InteractionError> {
    spec.validate()?;
    if n_particles < 2 {
        return Err(InteractionError::TooFewParticles(n_particles));
    }
    let d = lattice.dim();
    let h = lattice.spacing();
    let (profile, cutoff, truncation_mass) = match spec.kind {
        PotentialKind::Gaussian => {
            let cutoff = spec.truncation.unwrap_or(DEFAULT_GAUSSIAN_CUTOFF * spec.width);
            (Profile::Gaussian { sigma: spec.width }, cutoff, radial_tail_fraction(d, spec.width, cutoff))
        }
        PotentialKind::TopHat => {
            let cutoff = spec.truncation.unwrap_or(spec.width).min(spec.width);
            (Profile::TopHat { radius: spec.width }, cutoff, 0.0)
        }
        PotentialKind::CustomTable => {
            let rows = match (&spec.table, &spec.table_path) {
                (Some(rows), _) => rows.clone(),
                (None, Some(path)) => read_table(path)?,
                (None, None) => unreachable!("validated"),
            };
            check_table(&rows)?;
            let last = rows[rows.len() - 1].0;
            (Profile::Table(rows), spec.truncation.unwrap_or(last).min(last), 0.0)
        }
    };
    let ln_n = (n_particles as f64).ln();
    let prefactor = spec.kappa / (n_particles as f64 * ln_n.powf(2.0 / d as f64));
    let sample = |k: &[i64]| {
        let r = h * (k.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt();
        if r <= cutoff * (1.0 + 1e-12) {
            prefactor * profile.eval(r)
        } else {
            0.0
        }
    };

    let full_radius = (cutoff / h + 1e-9).floor() as usize;
    let mut full = Vec::with_capacity((2 * full_radius + 1).pow(d as u32));
    for_each_offset(d, full_radius, |k| full.push(sample(k)));
    debug_assert!(full.iter().all(|&x| x >= 0.0), "profiles are checked for sign");
    let l1: f64 = full.iter().sum();
    // positive-definiteness is a property of the whole kernel, so the DFT
    // runs on the full stencil before clipping to the lattice extent
    let fourier = fourier_diagnostics(d, full_radius, &full);

    let extent = lattice.shape().iter().copied().max().unwrap_or(1) - 1;
    let radius = full_radius.min(extent);
    let side = 2 * full_radius + 1;
    let shift = (full_radius - radius) as i64;
    let mut values = Vec::with_capacity((2 * radius + 1).pow(d as u32));
    for_each_offset(d, radius, |k| {
        let pos = k.iter().fold(0usize, |acc, &x| acc * side + (x + radius as i64 + shift) as usize);
        values.push(full[pos]);
    });
    drop(full);

    let v = InteractionPotential {
        kind: spec.kind,
        kappa: spec.kappa,
        n_particles,
        d,
        h,
        radius,
        values,
        l1_norm: l1 * h.powi(d as i32),
        v_at_zero: prefactor * profile.eval(0.0),
        prefactor,
        scaling_tag: format!("kappa V(x) / (N (ln N)^(2/{d})), N = {n_particles}"),
        truncation_radius: cutoff,
        truncation_mass,
        fourier,
    };
    if !v.is_positive_definite() && !spec.allow_non_positive_definite {
        return Err(InteractionError::NotPositiveDefinite { ratio: v.fourier.min_real / v.fourier.max_real });
    }
    Ok(v)
}

fn check_table(rows: &[(f64, f64)]) -> Result<(), InteractionError> {
    let invalid = |reason: &str| Err(InteractionError::Invalid { field: "table", reason: reason.to_string() });
    if rows.is_empty() {
        return invalid("table is empty");
    }
    if rows[0].0 != 0.0 {
        return invalid("first offset must be 0");
    }
    if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        return invalid("offsets must be strictly increasing");
    }
    if rows.iter().any(|r| !r.0.is_finite() || !r.1.is_finite()) {
        return invalid("entries must be finite");
    }
    if let Some(&(radius, value)) = rows.iter().find(|r| r.1 < 0.0) {
        return Err(InteractionError::Negative { radius, value });
    }
    Ok(())
}

/// In-place multi-dimensional FFT of a row-major complex array.
fn fft_nd(buf: &mut [Complex<f64>], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::new();
    let total: usize = shape.iter().product();
    for (axis, &n) in shape.iter().enumerate() {
        if n == 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride: usize = shape[axis + 1..].iter().product();
        let mut line = vec![Complex::new(0.0, 0.0); n];
        for start in 0..total {
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for (j, c) in line.iter_mut().enumerate() {
                *c = buf[start + j * stride];
            }
            fft.process(&mut line);
            for (j, c) in line.iter().enumerate() {
                buf[start + j * stride] = *c;
            }
        }
    }
}

fn fourier_diagnostics(d: usize, radius: usize, values: &[f64]) -> FourierDiagnostics {
    let side = 2 * radius + 1;
    let mut p = side.next_power_of_two();
    if (2 * p).pow(d as u32) <= 1 << 22 {
        p *= 2;
    }
    let total = p.pow(d as u32);
    let mut buf = vec![Complex::new(0.0, 0.0); total];
    let mut idx = 0;
    for_each_offset(d, radius, |k| {
        let pos = k.iter().fold(0usize, |acc, &x| acc * p + (x.rem_euclid(p as i64)) as usize);
        buf[pos] = Complex::new(values[idx], 0.0);
        idx += 1;
    });
    debug_assert_eq!(idx, side.pow(d as u32));

    fft_nd(&mut buf, &vec![p; d], false);
    let (mut min_real, mut max_real, mut abs_sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for c in &buf {
        min_real = min_real.min(c.re);
        max_real = max_real.max(c.re);
        abs_sum += c.norm();
    }
    let v0_from_fourier = abs_sum / total as f64;
    FourierDiagnostics {
        padded: p,
        min_real,
        max_real,
        v0_from_fourier,
        hat_l1: (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0) * v0_from_fourier,
    }
}

impl InteractionPotential {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    /// `min Re v̂ ≥ -1e-10 max Re v̂`.
    pub fn is_positive_definite(&self) -> bool {
        self.fourier.min_real >= -1e-10 * self.fourier.max_real.abs()
    }

    /// `v_N` at a lattice offset (grid units); zero outside the stencil.
    pub fn value_at(&self, offset: &[i64]) -> f64 {
        let r = self.radius as i64;
        let mut pos = 0usize;
        for &k in &offset[..self.d] {
            if k.abs() > r {
                return 0.0;
            }
            pos = pos * (2 * self.radius + 1) + (k + r) as usize;
        }
        self.values[pos]
    }

    /// Nonzero stencil entries as `(offset, value)`.
    pub fn support(&self) -> Vec<([i64; 3], f64)> {
        let mut out = Vec::new();
        let mut idx = 0;
        for_each_offset(self.d, self.radius, |k| {
            let v = self.values[idx];
            idx += 1;
            if v != 0.0 {
                let mut off = [0i64; 3];
                off[..k.len()].copy_from_slice(k);
                out.push((off, v));
            }
        });
        out
    }
}

/// Standing assumptions on `v_N` and the two normalized scaling ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub nonneg: bool,
    pub even: bool,
    pub pos_def: bool,
    pub l1_finite: bool,
    /// `‖v_N‖₁ N (ln N)^{2/d}`.
    pub s1: f64,
    /// `v_N(0) (ln N)^{1+2/d}`.
    pub s2: f64,
    /// `|v(0) - (2π)^{-d/2}‖v̂‖₁| / max(v(0), tiny)`.
    pub fourier_v0_mismatch: f64,
}

pub fn check_assumptions(v: &InteractionPotential) -> AssumptionReport {
    let nonneg = v.values.iter().all(|&x| x >= 0.0);
    let n = v.values.len();
    let even = (0..n).all(|i| v.values[i] == v.values[n - 1 - i]);
    let ln_n = (v.n_particles as f64).ln();
    let d = v.d as f64;
    AssumptionReport {
        nonneg,
        even,
        pos_def: v.is_positive_definite(),
        l1_finite: v.l1_norm.is_finite(),
        s1: v.l1_norm * v.n_particles as f64 * ln_n.powf(2.0 / d),
        s2: v.v_at_zero * ln_n.powf(1.0 + 2.0 / d),
        fourier_v0_mismatch: (v.v_at_zero - v.fourier.v0_from_fourier).abs() / v.v_at_zero.max(f64::MIN_POSITIVE),
    }
}

/// Smallest `n ≥ m` with no prime factor above 7.
fn smooth_size(m: usize) -> usize {
    (m.max(1)..)
        .find(|&n| {
            let mut k = n;
            for p in [2, 3, 5, 7] {
                while k % p == 0 {
                    k /= p;
                }
            }
            k == 1
        })
        .unwrap()
}

/// Cached kernel transform for repeated `ρ ∗ v` on one lattice.
///
/// The density is zero-padded to a period of at least `n + R` per axis, so the
/// circular product equals the linear sum on every grid node.
#[derive(Debug, Clone)]
pub struct Convolver {
    lattice: Lattice,
    padded: Vec<usize>,
    kernel_hat: Vec<Complex<f64>>,
    /// Direct summation is used when it is cheaper.
    direct: Option<Vec<([i64; 3], f64)>>,
}

impl Convolver {
    pub fn new(lattice: &Lattice, v: &InteractionPotential) -> Self {
        let shape = lattice.shape();
        let d = lattice.dim();
        let support = v.support();
        let r = v.radius;
        let padded: Vec<usize> = shape.iter().map(|&n| smooth_size(n + r.min(n))).collect();
        let total: usize = padded.iter().product();
        let fft_cost = 3.0 * total as f64 * (total as f64).log2().max(1.0);
        if (support.len() as f64) * (lattice.node_count() as f64) <= fft_cost {
            return Self { lattice: lattice.clone(), padded, kernel_hat: Vec::new(), direct: Some(support) };
        }
        let mut kernel = vec![Complex::new(0.0, 0.0); total];
        for (off, val) in &support {
            if (0..d).any(|a| off[a].unsigned_abs() as usize >= shape[a]) {
                continue;
            }
            let pos = (0..d).fold(0usize, |acc, a| acc * padded[a] + off[a].rem_euclid(padded[a] as i64) as usize);
            kernel[pos].re += val * lattice.cell_volume();
        }
        fft_nd(&mut kernel, &padded, false);
        Self { lattice: lattice.clone(), padded, kernel_hat: kernel, direct: None }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// `(ρ ∗ v)` on every vacant site of `domain` (which must live on this lattice).
    pub fn convolve(&self, domain: &VacancyDomain, density: &[f64]) -> Vec<f64> {
        debug_assert_eq!(domain.lattice(), &self.lattice);
        if let Some(support) = &self.direct {
            return convolve_direct(domain, density, support);
        }
        let d = self.lattice.dim();
        let total: usize = self.padded.iter().product();
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        let pos = |grid: usize| {
            let m = self.lattice.unravel(grid);
            (0..d).fold(0usize, |acc, a| acc * self.padded[a] + m[a])
        };
        for (&g, &rho) in domain.sites().iter().zip(density) {
            buf[pos(g)].re = rho;
        }
        fft_nd(&mut buf, &self.padded, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        fft_nd(&mut buf, &self.padded, true);
        let scale = 1.0 / total as f64;
        domain.sites().iter().map(|&g| buf[pos(g)].re * scale).collect()
    }
}

fn convolve_direct(domain: &VacancyDomain, density: &[f64], support: &[([i64; 3], f64)]) -> Vec<f64> {
    let lattice = domain.lattice();
    let w = lattice.cell_volume();
    let d = lattice.dim();
    let shape = lattice.shape();
    let mut out = vec![0.0; domain.site_count()];
    for (s, &rho) in density.iter().enumerate() {
        if rho == 0.0 {
            continue;
        }
        let y = lattice.unravel(domain.sites()[s]);
        'offsets: for (off, val) in support {
            let mut x = [0usize; 3];
            for a in 0..d {
                let p = y[a] as i64 + off[a];
                if p < 0 || p >= shape[a] as i64 {
                    continue 'offsets;
                }
                x[a] = p as usize;
            }
            if let Some(t) = domain.site_of(lattice.ravel(&x)) {
                out[t] += rho * val * w;
            }
        }
    }
    out
}

/// `(ρ ∗ v)(x) = Σ_y ρ(y) v(x - y) h^d` on every vacant site, by direct summation.
pub fn convolve_density_direct(domain: &VacancyDomain, density: &[f64], v: &InteractionPotential) -> Vec<f64> {
    convolve_direct(domain, density, &v.support())
}

/// `(ρ ∗ v)(x)` on every vacant site (direct or FFT, whichever is cheaper).
pub fn convolve_density(domain: &VacancyDomain, density: &[f64], v: &InteractionPotential) -> Vec<f64> {
    Convolver::new(domain.lattice(), v).convolve(domain, density)
}

/// `h^d ⟨ρ, ρ ∗ v⟩ = Σ_{x,y} ρ(x) ρ(y) v(x - y) h^{2d}`.
pub fn interaction_energy(domain: &VacancyDomain, density: &[f64], v: &InteractionPotential) -> f64 {
    let conv = convolve_density(domain, density, v);
    domain.dot(density, &conv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: usize, h: f64) -> Lattice {
        Lattice::from_shape(vec![n, n], h).unwrap()
    }

    #[test]
    fn zero_coupling_is_zero() {
        let v = build_interaction(&PotentialSpec::gaussian(0.0, 1.0), 10, &lattice(10, 0.2)).unwrap();
        assert!(v.is_zero());
        assert_eq!(v.l1_norm, 0.0);
        assert_eq!(v.v_at_zero, 0.0);
        let rep = check_assumptions(&v);
        assert!(rep.nonneg && rep.even && rep.pos_def && rep.l1_finite);
        assert_eq!((rep.s1, rep.s2), (0.0, 0.0));
    }

    #[test]
    fn gaussian_l1_matches_closed_form() {
        let n = 50;
        let v = build_interaction(&PotentialSpec::gaussian(1.3, 1.0), n, &lattice(80, 0.1)).unwrap();
        let nf = n as f64;
        let exact = 2.0 * std::f64::consts::PI * 1.3 / (nf * nf.ln());
        assert!((v.l1_norm - exact).abs() < 1e-8 * exact, "{} vs {exact}", v.l1_norm);
        assert!(v.truncation_mass < 1e-7 && v.truncation_mass > 0.0);
        assert!(check_assumptions(&v).pos_def);
    }

    #[test]
    fn doubling_n_scales_l1() {
        let lat = lattice(20, 0.25);
        let spec = PotentialSpec::gaussian(0.7, 1.0);
        for n in [2usize, 7, 100] {
            let a = build_interaction(&spec, n, &lat).unwrap();
            let b = build_interaction(&spec, 2 * n, &lat).unwrap();
            let nf = n as f64;
            let expected = (nf * nf.ln()) / (2.0 * nf * (2.0 * nf).ln());
            assert!((b.l1_norm / a.l1_norm - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn top_hat_needs_override_and_fails_dft_check() {
        let lat = lattice(30, 0.1);
        let mut spec = PotentialSpec::top_hat(1.0, 1.0);
        spec.allow_non_positive_definite = false;
        assert_eq!(build_interaction(&spec, 4, &lat).unwrap_err(), InteractionError::TopHatNeedsOverride);
        let v = build_interaction(&PotentialSpec::top_hat(1.0, 1.0), 4, &lat).unwrap();
        assert!(!check_assumptions(&v).pos_def);
        assert!(v.fourier.min_real < 0.0);
    }

    #[test]
    fn fourier_v0_identity() {
        let v = build_interaction(&PotentialSpec::gaussian(2.0, 0.6), 9, &lattice(24, 0.15)).unwrap();
        assert!(check_assumptions(&v).fourier_v0_mismatch < 1e-12);
    }

    #[test]
    fn custom_table_interpolates_and_rejects_negative() {
        let lat = lattice(10, 0.2);
        let mut spec = PotentialSpec::custom(1.0, vec![(0.0, 2.0), (1.0, 0.0)]);
        spec.allow_non_positive_definite = true;
        let v = build_interaction(&spec, 3, &lat).unwrap();
        let pf = v.prefactor;
        assert!((v.value_at(&[0, 0]) - 2.0 * pf).abs() < 1e-15);
        assert!((v.value_at(&[1, 0]) - 1.6 * pf).abs() < 1e-14);
        assert_eq!(v.value_at(&[6, 0]), 0.0);
        let bad = PotentialSpec::custom(1.0, vec![(0.0, 1.0), (0.5, -0.1)]);
        assert!(matches!(build_interaction(&bad, 3, &lat), Err(InteractionError::Negative { .. })));
    }

    #[test]
    fn table_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        std::fs::write(&path, "# r V\n0 1.0\n0.5 0.5\n\n1.0 0\n").unwrap();
        assert_eq!(read_table(&path).unwrap(), vec![(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]);
        std::fs::write(&path, "0 1 2\n").unwrap();
        assert!(read_table(&path).unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn single_particle_rejected() {
        let err = build_interaction(&PotentialSpec::gaussian(1.0, 1.0), 1, &lattice(4, 0.2)).unwrap_err();
        assert_eq!(err, InteractionError::TooFewParticles(1));
    }

    #[test]
    fn delta_density_translates_potential() {
        let lat = lattice(12, 0.2);
        let dom = VacancyDomain::from_mask(lat.clone(), vec![true; 144]).unwrap();
        let v = build_interaction(&PotentialSpec::gaussian(1.0, 0.5), 5, &lat).unwrap();
        let x0 = lat.ravel(&[5, 7]);
        let mut rho = vec![0.0; 144];
        rho[dom.site_of(x0).unwrap()] = 1.0 / lat.cell_volume();
        let out = convolve_density(&dom, &rho, &v);
        for (s, &g) in dom.sites().iter().enumerate() {
            let m = lat.unravel(g);
            let expected = v.value_at(&[m[0] as i64 - 5, m[1] as i64 - 7]);
            assert!((out[s] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn fft_convolution_matches_direct() {
        for (shape, h, width) in [(vec![13, 9], 0.2, 1.0), (vec![5, 6, 7], 0.25, 0.4), (vec![30, 30], 0.1, 0.05)] {
            let lat = Lattice::from_shape(shape, h).unwrap();
            let n = lat.node_count();
            let mask: Vec<bool> = (0..n).map(|i| (i * 7919) % 11 != 3).collect();
            let dom = VacancyDomain::from_mask(lat.clone(), mask).unwrap();
            let v = build_interaction(&PotentialSpec::gaussian(1.0, width), 8, &lat).unwrap();
            let rho: Vec<f64> = (0..dom.site_count()).map(|i| ((i * 31) % 17) as f64 / 17.0).collect();
            let direct = convolve_density_direct(&dom, &rho, &v);
            let conv = Convolver::new(&lat, &v);
            let fast = conv.convolve(&dom, &rho);
            let scale = direct.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (a, b) in direct.iter().zip(&fast) {
                assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
            }
        }
    }
}
