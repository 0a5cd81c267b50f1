//! Command-line front end.
//!
//! Exit codes: 0 success, 1 an asserted certificate inequality failed,
//! 2 usage or configuration error, 3 solver failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::certify::{certify, theorem41_certificate, CertificateInputs, OracleObservation, BASE_TOLERANCE};
use crate::config::{load_config, ConfigError, RunConfig};
use crate::disorder::{sample_realization, volume_fraction, DisorderError, VolumeFraction};
use crate::domain::VacancyDomain;
use crate::dump::{read_vacancy_dump, write_field_dump, write_vacancy_dump, DumpError};
use crate::ensemble::{
    estimate_event_probabilities, run_ensemble, scaling_sweep, worker_pool, write_csv, write_jsonl, SweepRow,
};
use crate::hartree::{minimize_hartree, HartreeError, HartreeSolution};
use crate::interaction::{build_interaction, check_assumptions, InteractionError, InteractionPotential};
use crate::laplace::{assemble_laplacian, ground_state_component, lowest_eigenpairs, LaplaceError, SpectralPair};
use crate::manybody::{build_manybody_hamiltonian, condensate_occupation, ground_state, ManyBodyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kl-lab", version, about = "Bose gas in a Poisson obstacle field: spectra, Hartree states, certificates")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set disorder.nu=0.5` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Shorthand for `--set output_dir=...`.
    #[arg(short, long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Shorthand for `--set disorder.seed=...`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one obstacle realization and dump its vacancy set.
    Sample,
    /// Two lowest Dirichlet eigenpairs of the vacancy set.
    Spectrum,
    /// Hartree minimizer on the ground-state component.
    Hartree {
        /// Also dump the minimizer as a grid field.
        #[arg(long)]
        dump_u: bool,
    },
    /// Certificate for one realization.
    Certify {
        /// Include the exact many-body oracle (small domains only).
        #[arg(long)]
        oracle: bool,
    },
    /// Exact many-body ground state on a small domain.
    Oracle {
        /// Vacancy dump to use instead of sampling from the config.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Particle number (defaults to disorder.N).
        #[arg(long = "particles")]
        particles: Option<usize>,
        /// Write the full ground-state vector.
        #[arg(long)]
        dump_state: bool,
    },
    /// Monte Carlo ensemble over seeds.
    Ensemble,
    /// Ensemble medians across ensemble.N_values.
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Spectrum => "spectrum",
            Command::Hartree { .. } => "hartree",
            Command::Certify { .. } => "certify",
            Command::Oracle { .. } => "oracle",
            Command::Ensemble => "ensemble",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{stage}: {message}")]
    Solver { stage: &'static str, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("certificate: {0}")]
    Certificate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Certificate(_) => EXIT_CERTIFICATE,
            CliError::Solver { .. } => EXIT_SOLVER,
            _ => EXIT_USAGE,
        }
    }
}

impl From<DisorderError> for CliError {
    fn from(e: DisorderError) -> Self {
        CliError::Config(e.into())
    }
}

impl From<InteractionError> for CliError {
    fn from(e: InteractionError) -> Self {
        CliError::Config(e.into())
    }
}

impl From<LaplaceError> for CliError {
    fn from(e: LaplaceError) -> Self {
        CliError::Solver { stage: "spectrum", message: e.to_string() }
    }
}

impl From<HartreeError> for CliError {
    fn from(e: HartreeError) -> Self {
        CliError::Solver { stage: "hartree", message: e.to_string() }
    }
}

impl From<ManyBodyError> for CliError {
    fn from(e: ManyBodyError) -> Self {
        match e {
            ManyBodyError::BasisTooLarge { .. } | ManyBodyError::Empty => CliError::Usage(e.to_string()),
            other => CliError::Solver { stage: "oracle", message: other.to_string() },
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("outputs serialize") + "\n";
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn print_line(value: &impl Serialize) {
    println!("{}", serde_json::to_string(value).expect("outputs serialize"));
}

/// Realization, spectrum and potential shared by most subcommands.
struct Prepared {
    domain: VacancyDomain,
    volume: Option<VolumeFraction>,
    spectrum: SpectralPair,
    component: u32,
    potential: InteractionPotential,
    n_particles: usize,
}

fn prepare(cfg: &RunConfig, domain: Option<VacancyDomain>, n_particles: usize) -> Result<Prepared, CliError> {
    let (domain, volume) = match domain {
        Some(d) => (d, None),
        None => {
            let real = sample_realization(&cfg.disorder)?;
            let vf = volume_fraction(&real, cfg.ensemble.eta);
            (real.domain, Some(vf))
        }
    };
    let spectrum = lowest_eigenpairs(&assemble_laplacian(&domain)?, cfg.solver.eigen_tol)?;
    let component = ground_state_component(&domain, &spectrum).component;
    let potential = build_interaction(&cfg.potential, n_particles, domain.lattice())?;
    Ok(Prepared { domain, volume, spectrum, component, potential, n_particles })
}

fn hartree(cfg: &RunConfig, p: &Prepared) -> Result<HartreeSolution, CliError> {
    let opts = cfg.pipeline_options().hartree();
    Ok(minimize_hartree(&p.domain, p.component, &p.potential, p.n_particles, &opts)?)
}

#[derive(Serialize)]
struct OracleReport {
    #[serde(flatten)]
    ground: crate::manybody::ManyBodyGroundState,
    hartree_energy: f64,
    e1: f64,
    e2: f64,
    v_at_zero: f64,
    theorem41: crate::certify::Theorem41,
}

fn oracle(cfg: &RunConfig, p: &Prepared, hs: &HartreeSolution) -> Result<(OracleReport, OracleObservation), CliError> {
    let ham = build_manybody_hamiltonian(&p.domain, Some(&p.potential), p.n_particles, cfg.solver.basis_cap)?;
    let mut gs = ground_state(&ham, cfg.solver.eigen_tol.min(1e-10))?;
    gs.n_condensate = Some(condensate_occupation(&gs.rho1, p.n_particles, &p.domain, &hs.u)?);
    let obs = gs.observation().expect("occupation set");
    let thm = theorem41_certificate(hs, &p.potential, p.n_particles, Some(&obs), cfg.solver.eigen_tol, BASE_TOLERANCE);
    let report = OracleReport {
        ground: gs,
        hartree_energy: hs.energy,
        e1: hs.e1,
        e2: hs.e2,
        v_at_zero: p.potential.v_at_zero,
        theorem41: thm,
    };
    Ok((report, obs))
}

/// Run one subcommand on a resolved config.
pub fn dispatch(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    cfg.write_run_stamp(command.name())?;
    let out = &cfg.output_dir;
    let n = cfg.disorder.n_particles;
    match command {
        Command::Sample => {
            let real = sample_realization(&cfg.disorder)?;
            let vf = volume_fraction(&real, cfg.ensemble.eta);
            let side = serde_json::json!({
                "seed": cfg.disorder.seed,
                "centers": real.centers.len(),
                "vacant_nodes": real.vacant_count(),
                "K": real.component_count(),
                "component_volumes": real.component_volumes(),
                "volume": vf,
            });
            write_vacancy_dump(&out.join("realization.klvac"), &real.domain, &side)?;
            print_line(&side);
        }
        Command::Spectrum => {
            let p = prepare(cfg, None, n)?;
            let sp = &p.spectrum;
            let lat = p.domain.lattice();
            let summary = serde_json::json!({
                "lambda1": sp.lambda1,
                "lambda2": sp.lambda2,
                "gap": sp.gap(),
                "residuals": [sp.residual1, sp.residual2],
                "degenerate": sp.is_degenerate(),
                "component_of_phi1": sp.component_of_phi1,
                "k_tilde": p.component,
                "supnorm": sp.supnorm_check(lat.dim()),
            });
            write_field_dump(&out.join("phi1.kleig"), lat, &p.domain.to_grid(&sp.phi1), &summary)?;
            write_field_dump(&out.join("phi2.kleig"), lat, &p.domain.to_grid(&sp.phi2), &summary)?;
            write_json(&out.join("spectrum.json"), &summary)?;
            print_line(&summary);
        }
        Command::Hartree { dump_u } => {
            let p = prepare(cfg, None, n)?;
            let hs = hartree(cfg, &p)?;
            let line = serde_json::json!({
                "solution": hs,
                "assumptions": check_assumptions(&p.potential),
                "energy_trace": hs.energy_trace,
            });
            let mut f = create(&out.join("hartree.jsonl"))?;
            writeln!(f, "{}", serde_json::to_string(&line).unwrap())
                .map_err(|source| CliError::Io { path: out.join("hartree.jsonl"), source })?;
            if *dump_u {
                let lat = p.domain.lattice();
                write_field_dump(&out.join("u.kleig"), lat, &p.domain.to_grid(&hs.u), &hs)?;
            }
            print_line(&hs);
        }
        Command::Certify { oracle: with_oracle } => {
            let p = prepare(cfg, None, n)?;
            let hs = hartree(cfg, &p)?;
            let obs = if *with_oracle { Some(oracle(cfg, &p, &hs)?.1) } else { None };
            let cert = certify(&CertificateInputs {
                volume: p.volume.as_ref(),
                spectrum: &p.spectrum,
                hartree: Some(&hs),
                potential: &p.potential,
                n_particles: n,
                oracle: obs.as_ref(),
                eta: cfg.ensemble.eta,
                sigma_ref: cfg.ensemble.sigma_ref,
                eigen_tol: cfg.solver.eigen_tol,
            });
            write_json(&out.join("certificate.json"), &cert)?;
            print_line(&cert);
            if !cert.asserted_ok {
                return Err(CliError::Certificate(cert.violations.join("; ")));
            }
        }
        Command::Oracle { dump, particles, dump_state } => {
            let domain = dump.as_deref().map(read_vacancy_dump).transpose()?;
            let np = particles.unwrap_or(n);
            let p = prepare(cfg, domain, np)?;
            let hs = hartree(cfg, &p)?;
            let (report, _) = oracle(cfg, &p, &hs)?;
            if *dump_state {
                let state = serde_json::json!({ "basis_dim": report.ground.basis_dim, "psi": report.ground.psi });
                write_json(&out.join("psi.json"), &state)?;
            }
            write_json(&out.join("oracle.json"), &report)?;
            print_line(&report);
        }
        Command::Ensemble => {
            let spec = cfg.ensemble_spec();
            let records = run_ensemble(&spec);
            let path = out.join("records.jsonl");
            let mut f = std::io::BufWriter::new(create(&path)?);
            write_jsonl(&mut f, &records).and_then(|_| f.flush()).map_err(|source| CliError::Io { path, source })?;
            let summary = estimate_event_probabilities(&records, cfg.ensemble.sigma_ref);
            write_json(&out.join("summary.json"), &summary)?;
            let csv_path = out.join("summary.csv");
            write_csv(create(&csv_path)?, &summary.rows())
                .map_err(|e| CliError::Io { path: csv_path, source: e.into() })?;
            print_line(&summary);
        }
        Command::Sweep => {
            let nv = &cfg.ensemble.n_values;
            if nv.len() < 3 || (nv[nv.len() - 1] as f64) < 10.0 * nv[0] as f64 {
                return Err(CliError::Usage(
                    "sweep needs at least 3 ensemble.N_values spanning at least one decade".to_string(),
                ));
            }
            let report = scaling_sweep(&cfg.ensemble_spec());
            write_json(&out.join("sweep.json"), &report)?;
            let csv_path = out.join("sweep.csv");
            write_csv::<SweepRow>(create(&csv_path)?, &report.rows)
                .map_err(|e| CliError::Io { path: csv_path, source: e.into() })?;
            print_line(&report);
        }
    }
    Ok(())
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut overrides = cli.overrides.clone();
    if let Some(dir) = &cli.output_dir {
        overrides.push(format!("output_dir={}", toml::Value::String(dir.display().to_string())));
    }
    if let Some(seed) = cli.seed {
        overrides.push(format!("disorder.seed={seed}"));
    }
    Ok(load_config(cli.config.as_deref(), &overrides)?)
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cfg.log_level).parse_default_env().try_init();
    let pool = match worker_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli.command, &cfg)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
