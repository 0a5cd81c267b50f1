//! Full per-realization pipeline and Monte Carlo aggregation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::certify::{certify, reference_gap_scale, Certificate, CertificateInputs};
use crate::disorder::{sample_realization, volume_fraction, DisorderConfig, VolumeFraction};
use crate::domain::{Lattice, VacancyDomain};
use crate::hartree::{minimize_hartree, HartreeOptions};
use crate::interaction::{build_interaction, check_assumptions, PotentialKind, PotentialSpec};
use crate::laplace::{assemble_laplacian, ground_state_component, lowest_eigenpairs, lowest_modes, ComponentOf};

pub const RECORD_SCHEMA: &str = "kl-lab.run-record.v1";

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "KL_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOptions {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_sigma_ref")]
    pub sigma_ref: f64,
    #[serde(default = "default_eigen_tol")]
    pub eigen_tol: f64,
    #[serde(default = "default_hartree_tol")]
    pub hartree_tol: f64,
    #[serde(default = "default_hartree_max")]
    pub hartree_max_iterations: usize,
}

fn default_eta() -> f64 {
    0.1
}
fn default_sigma_ref() -> f64 {
    1.0
}
fn default_eigen_tol() -> f64 {
    1e-9
}
fn default_hartree_tol() -> f64 {
    1e-8
}
fn default_hartree_max() -> usize {
    5000
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            eta: default_eta(),
            sigma_ref: default_sigma_ref(),
            eigen_tol: default_eigen_tol(),
            hartree_tol: default_hartree_tol(),
            hartree_max_iterations: default_hartree_max(),
        }
    }
}

impl PipelineOptions {
    pub fn hartree(&self) -> HartreeOptions {
        HartreeOptions {
            tol: self.hartree_tol,
            max_iterations: self.hartree_max_iterations,
            eigen_tol: self.eigen_tol,
            ..HartreeOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub lambda1: f64,
    pub lambda2: f64,
    pub residual1: f64,
    pub residual2: f64,
    pub degenerate: bool,
    pub component_of_phi1: ComponentOf,
    pub k_tilde: u32,
    pub mass_outside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSummary {
    pub kind: PotentialKind,
    pub kappa: f64,
    pub l1_norm: f64,
    pub v_at_zero: f64,
    pub s1: f64,
    pub s2: f64,
    pub pos_def: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HartreeSummary {
    pub component: u32,
    pub energy: f64,
    pub e1: f64,
    pub e2: f64,
    pub shift: f64,
    pub iterations: usize,
    pub el_residual: f64,
    pub lemma_defect: f64,
}

/// One line of the JSON-lines record stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub seed: u64,
    pub d: usize,
    pub rho: f64,
    #[serde(rename = "N")]
    pub n_particles: usize,
    pub nu: f64,
    pub r: f64,
    pub h: f64,
    pub spacing: Option<f64>,
    pub box_side: f64,
    pub grid: Vec<usize>,
    pub centers: usize,
    pub vacant_nodes: usize,
    #[serde(rename = "K")]
    pub components: usize,
    pub volume: Option<VolumeFraction>,
    pub spectrum: Option<SpectrumSummary>,
    pub potential: Option<PotentialSummary>,
    pub hartree: Option<HartreeSummary>,
    pub certificate: Option<Certificate>,
    pub error: Option<StageError>,
}

impl RunRecord {
    fn empty(config: &DisorderConfig) -> Self {
        Self {
            schema: RECORD_SCHEMA.to_string(),
            seed: config.seed,
            d: config.d,
            rho: config.rho,
            n_particles: config.n_particles,
            nu: config.nu,
            r: config.r,
            h: config.h,
            spacing: None,
            box_side: config.box_side(),
            grid: Vec::new(),
            centers: 0,
            vacant_nodes: 0,
            components: 0,
            volume: None,
            spectrum: None,
            potential: None,
            hartree: None,
            certificate: None,
            error: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

fn fail(mut rec: RunRecord, stage: &str, err: impl std::fmt::Display) -> RunRecord {
    rec.error = Some(StageError { stage: stage.to_string(), message: err.to_string() });
    rec
}

/// Disorder → spectra → host component → Hartree → certificate. Stage errors
/// are stored in the record.
pub fn run_realization(config: &DisorderConfig, potential: &PotentialSpec, opts: &PipelineOptions) -> RunRecord {
    let mut rec = RunRecord::empty(config);
    let real = match sample_realization(config) {
        Ok(r) => r,
        Err(e) => return fail(rec, "disorder", e),
    };
    let dom = &real.domain;
    rec.spacing = Some(dom.lattice().spacing());
    rec.grid = dom.lattice().shape().to_vec();
    rec.centers = real.centers.len();
    rec.vacant_nodes = real.vacant_count();
    rec.components = real.component_count();
    let vf = volume_fraction(&real, opts.eta);
    rec.volume = Some(vf);

    let sp = match assemble_laplacian(dom).and_then(|op| lowest_eigenpairs(&op, opts.eigen_tol)) {
        Ok(sp) => sp,
        Err(e) => return fail(rec, "spectrum", e),
    };
    let pick = ground_state_component(dom, &sp);
    rec.spectrum = Some(SpectrumSummary {
        lambda1: sp.lambda1,
        lambda2: sp.lambda2,
        residual1: sp.residual1,
        residual2: sp.residual2,
        degenerate: sp.is_degenerate(),
        component_of_phi1: sp.component_of_phi1,
        k_tilde: pick.component,
        mass_outside: pick.mass_outside,
    });

    let v = match build_interaction(potential, config.n_particles, dom.lattice()) {
        Ok(v) => v,
        Err(e) => return fail(rec, "potential", e),
    };
    let rep = check_assumptions(&v);
    rec.potential = Some(PotentialSummary {
        kind: v.kind,
        kappa: v.kappa,
        l1_norm: v.l1_norm,
        v_at_zero: v.v_at_zero,
        s1: rep.s1,
        s2: rep.s2,
        pos_def: rep.pos_def,
    });

    let hs = match minimize_hartree(dom, pick.component, &v, config.n_particles, &opts.hartree()) {
        Ok(hs) => hs,
        Err(e) => return fail(rec, "hartree", e),
    };
    rec.hartree = Some(HartreeSummary {
        component: hs.component,
        energy: hs.energy,
        e1: hs.e1,
        e2: hs.e2,
        shift: hs.shift,
        iterations: hs.iterations,
        el_residual: hs.el_residual,
        lemma_defect: hs.lemma_defect,
    });
    rec.certificate = Some(certify(&CertificateInputs {
        volume: Some(&vf),
        spectrum: &sp,
        hartree: Some(&hs),
        potential: &v,
        n_particles: config.n_particles,
        oracle: None,
        eta: opts.eta,
        sigma_ref: opts.sigma_ref,
        eigen_tol: opts.eigen_tol,
    }));
    rec
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index` under `master`: the `index`-th SplitMix64
/// output, computable independently for every index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(master, i)).collect()
}

/// Worker count from `KL_WORKERS` (unset or invalid: rayon default).
pub fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok().and_then(|s| s.trim().parse().ok()).filter(|&n| n > 0)
}

pub fn worker_pool() -> Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count() {
        b = b.num_threads(n);
    }
    b.build()
}

/// Ensemble over explicit seeds, in seed-list order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    /// Seed field is ignored.
    pub base: DisorderConfig,
    pub seeds: Vec<u64>,
    /// Strictly increasing; only used by [`scaling_sweep`].
    pub n_values: Vec<usize>,
    pub potential: PotentialSpec,
    pub options: PipelineOptions,
}

/// Run every seed on the current rayon pool; output order follows `seeds`.
pub fn run_ensemble(spec: &EnsembleSpec) -> Vec<RunRecord> {
    run_seeds(&spec.base, &spec.seeds, &spec.potential, &spec.options)
}

fn run_seeds(base: &DisorderConfig, seeds: &[u64], potential: &PotentialSpec, opts: &PipelineOptions) -> Vec<RunRecord> {
    seeds.par_iter().map(|&s| run_realization(&base.with_seed(s), potential, opts)).collect()
}

pub fn write_jsonl(out: &mut impl Write, records: &[RunRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

/// Empirical frequency with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

const Z95: f64 = 1.959_963_984_540_054;

pub fn wilson(successes: usize, trials: usize) -> Frequency {
    if trials == 0 {
        return Frequency { successes, trials, estimate: 0.0, lower: 0.0, upper: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Frequency {
        successes,
        trials,
        estimate: p,
        lower: (center - half).max(0.0).min(p),
        upper: (center + half).min(1.0).max(p),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub total: usize,
    pub failures: usize,
    pub omega1: Frequency,
    pub omega2: Frequency,
    /// `{e² − e¹ ≥ σ_ref (ln N)^{-(1+2/d)}}`.
    pub gap_event: Frequency,
    pub gap_scale: Option<f64>,
    /// `in_omega2 ⇒ e² − e¹ > 0` violations among successful runs.
    pub positive_gap_violations: usize,
}

/// Event frequencies over successful records; failures are counted, not used.
pub fn estimate_event_probabilities(records: &[RunRecord], sigma_ref: f64) -> EventSummary {
    if records.len() < 30 {
        log::warn!("estimating event probabilities from {} realizations (< 30)", records.len());
    }
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed()).collect();
    let certs: Vec<&Certificate> = ok.iter().filter_map(|r| r.certificate.as_ref()).collect();
    let count = |f: &dyn Fn(&Certificate) -> bool| certs.iter().filter(|c| f(c)).count();
    let gap_scale = ok.first().map(|r| reference_gap_scale(sigma_ref, r.n_particles, r.d));
    let scale = gap_scale.unwrap_or(f64::INFINITY);
    EventSummary {
        total: records.len(),
        failures: records.len() - ok.len(),
        omega1: wilson(count(&|c| c.in_omega1 == Some(true)), certs.len()),
        omega2: wilson(count(&|c| c.in_omega2), certs.len()),
        gap_event: wilson(count(&|c| c.gap_actual.is_some_and(|g| g >= scale)), certs.len()),
        gap_scale,
        positive_gap_violations: count(&|c| c.in_omega2 && !c.gap_actual.is_some_and(|g| g > 0.0)),
    }
}

/// Least-squares line with a 95% interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
    pub slope_lower: Option<f64>,
    pub slope_upper: Option<f64>,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let (mut lo, mut hi) = (None, None);
    if n > 2 {
        let se = (ss_res / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(Z95);
        lo = Some(slope - t * se);
        hi = Some(slope + t * se);
    }
    Some(LinearFit { slope, intercept, r2, points: n, slope_lower: lo, slope_upper: hi })
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n_particles: usize,
    pub runs: usize,
    pub failures: usize,
    pub median_lambda1: Option<f64>,
    pub median_gap: Option<f64>,
    pub median_effective_gap: Option<f64>,
    pub median_depletion_bound: Option<f64>,
    /// `(ln N)^{-2/d}`.
    pub lambda_scale: f64,
    /// `(ln N)^{-(1+2/d)}`.
    pub gap_scale: f64,
    /// λ¹ of the obstacle-free box at the same grid spacing.
    pub free_box_lambda1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `log median λ¹` against `log (ln N)^{-2/d}`.
    pub lambda1_fit: Option<LinearFit>,
    /// `log median gap` against `log (ln N)^{-(1+2/d)}`.
    pub gap_fit: Option<LinearFit>,
    /// `log λ¹_free` against `log N`; expected slope `-2/d`.
    pub free_box_fit: Option<LinearFit>,
    pub free_box_expected_slope: f64,
}

/// λ¹ of the obstacle-free box for `config` (seed and obstacles ignored).
pub fn free_box_lambda1(config: &DisorderConfig, eigen_tol: f64) -> Option<f64> {
    let lat = Lattice::for_box(config.d, config.box_side(), config.h).ok()?;
    let n = lat.node_count();
    let dom = VacancyDomain::from_mask(lat, vec![true; n]).ok()?;
    let op = assemble_laplacian(&dom).ok()?;
    lowest_modes(&op, 1, eigen_tol).ok().map(|m| m[0].value)
}

fn log_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        points.iter().filter(|(a, b)| *a > 0.0 && *b > 0.0).map(|(a, b)| (a.ln(), b.ln())).unzip();
    linear_fit(&x, &y)
}

/// Medians per `N` and log-log trend fits. Exploratory.
pub fn scaling_sweep(spec: &EnsembleSpec) -> SweepReport {
    let d = spec.base.d as f64;
    let mut rows = Vec::new();
    for &n in &spec.n_values {
        let base = DisorderConfig { n_particles: n, ..spec.base.clone() };
        let records = run_seeds(&base, &spec.seeds, &spec.potential, &spec.options);
        let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed()).collect();
        let collect = |f: &dyn Fn(&RunRecord) -> Option<f64>| median(&mut ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
        let ln_n = (n as f64).ln();
        rows.push(SweepRow {
            n_particles: n,
            runs: records.len(),
            failures: records.len() - ok.len(),
            median_lambda1: collect(&|r| r.spectrum.as_ref().map(|s| s.lambda1)),
            median_gap: collect(&|r| r.spectrum.as_ref().map(|s| s.lambda2 - s.lambda1)),
            median_effective_gap: collect(&|r| r.hartree.as_ref().map(|h| h.e2 - h.e1)),
            median_depletion_bound: collect(&|r| r.certificate.as_ref().and_then(|c| c.thm41_depletion_bound)),
            lambda_scale: ln_n.powf(-2.0 / d),
            gap_scale: ln_n.powf(-(1.0 + 2.0 / d)),
            free_box_lambda1: free_box_lambda1(&base, spec.options.eigen_tol),
        });
    }
    let pts = |f: &dyn Fn(&SweepRow) -> Option<(f64, f64)>| rows.iter().filter_map(f).collect::<Vec<_>>();
    SweepReport {
        lambda1_fit: log_fit(&pts(&|r| r.median_lambda1.map(|l| (r.lambda_scale, l)))),
        gap_fit: log_fit(&pts(&|r| r.median_gap.map(|g| (r.gap_scale, g)))),
        free_box_fit: log_fit(&pts(&|r| r.free_box_lambda1.map(|l| (r.n_particles as f64, l)))),
        free_box_expected_slope: -2.0 / d,
        rows,
    }
}

pub fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Flat row for the event-probability CSV.
#[derive(Debug, Clone, Serialize)]
pub struct EventRow {
    pub event: &'static str,
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl EventSummary {
    pub fn rows(&self) -> Vec<EventRow> {
        [("omega1", self.omega1), ("omega2", self.omega2), ("gap_event", self.gap_event)]
            .into_iter()
            .map(|(event, f)| EventRow {
                event,
                successes: f.successes,
                trials: f.trials,
                estimate: f.estimate,
                lower: f.lower,
                upper: f.upper,
            })
            .collect()
    }
}
