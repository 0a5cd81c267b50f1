//! Run configuration: TOML file plus `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{DisorderConfig, DisorderError};
use crate::ensemble::{derive_seeds, EnsembleSpec, PipelineOptions, RECORD_SCHEMA};
use crate::interaction::{InteractionError, PotentialSpec};
use crate::manybody::DEFAULT_BASIS_CAP;

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
pub const VERSION_FILE: &str = "version.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("override `{arg}`: {reason}")]
    Override { arg: String, reason: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Potential(#[from] InteractionError),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "d_eigen_tol")]
    pub eigen_tol: f64,
    #[serde(default = "d_hartree_tol")]
    pub hartree_tol: f64,
    #[serde(default = "d_hartree_max")]
    pub hartree_max_iterations: usize,
    /// Largest many-body basis the oracle will build.
    #[serde(default = "d_basis_cap")]
    pub basis_cap: usize,
    /// Damping of the SCF cross-check.
    #[serde(default = "d_scf_alpha")]
    pub scf_alpha: f64,
}

fn d_eigen_tol() -> f64 {
    1e-9
}
fn d_hartree_tol() -> f64 {
    1e-8
}
fn d_hartree_max() -> usize {
    5000
}
fn d_basis_cap() -> usize {
    DEFAULT_BASIS_CAP
}
fn d_scf_alpha() -> f64 {
    0.5
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eigen_tol: d_eigen_tol(),
            hartree_tol: d_hartree_tol(),
            hartree_max_iterations: d_hartree_max(),
            basis_cap: d_basis_cap(),
            scf_alpha: d_scf_alpha(),
        }
    }
}

/// A seed count (expanded from the master seed) or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(usize),
    List(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "d_seeds")]
    pub seeds: SeedSpec,
    /// Defaults to `disorder.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, rename = "N_values")]
    pub n_values: Vec<usize>,
    /// Tolerance of the volume-fraction event.
    #[serde(default = "d_eta")]
    pub eta: f64,
    /// Reference constant of the gap scale `sigma_ref (ln N)^{-(1+2/d)}`.
    #[serde(default = "d_sigma_ref")]
    pub sigma_ref: f64,
}

fn d_seeds() -> SeedSpec {
    SeedSpec::Count(100)
}
fn d_eta() -> f64 {
    0.1
}
fn d_sigma_ref() -> f64 {
    1.0
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { seeds: d_seeds(), master_seed: None, n_values: Vec::new(), eta: d_eta(), sigma_ref: d_sigma_ref() }
    }
}

fn d_output_dir() -> PathBuf {
    PathBuf::from("kl-lab-out")
}
fn d_log_level() -> String {
    "info".to_string()
}
fn d_potential() -> PotentialSpec {
    PotentialSpec::gaussian(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "d_log_level")]
    pub log_level: String,
    pub disorder: DisorderConfig,
    #[serde(default = "d_potential")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
}

impl RunConfig {
    /// Minimal configuration with all defaults.
    pub fn new(disorder: DisorderConfig) -> Self {
        Self {
            output_dir: d_output_dir(),
            log_level: d_log_level(),
            disorder,
            potential: d_potential(),
            solver: SolverConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.disorder.validate()?;
        self.potential.validate()?;
        let s = &self.solver;
        for (field, value) in [("solver.eigen_tol", s.eigen_tol), ("solver.hartree_tol", s.hartree_tol)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(invalid(field, format!("{value} is not in (0, 1)")));
            }
        }
        if s.hartree_max_iterations == 0 {
            return Err(invalid("solver.hartree_max_iterations", "must be at least 1"));
        }
        if s.basis_cap == 0 {
            return Err(invalid("solver.basis_cap", "must be at least 1"));
        }
        if !(s.scf_alpha > 0.0 && s.scf_alpha <= 1.0) {
            return Err(invalid("solver.scf_alpha", format!("{} is not in (0, 1]", s.scf_alpha)));
        }
        if !["error", "warn", "info", "debug", "trace", "off"].contains(&self.log_level.as_str()) {
            return Err(invalid("log_level", format!("unknown level `{}`", self.log_level)));
        }
        let e = &self.ensemble;
        match &e.seeds {
            SeedSpec::Count(0) => return Err(invalid("ensemble.seeds", "need at least one seed")),
            SeedSpec::List(l) if l.is_empty() => return Err(invalid("ensemble.seeds", "need at least one seed")),
            _ => {}
        }
        if e.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("ensemble.N_values", "must be strictly increasing"));
        }
        if e.n_values.first() == Some(&0) {
            return Err(invalid("ensemble.N_values", "values must be at least 1"));
        }
        if !(e.eta > 0.0 && e.eta < 1.0) {
            return Err(invalid("ensemble.eta", format!("{} is not in (0, 1)", e.eta)));
        }
        if !(e.sigma_ref > 0.0 && e.sigma_ref.is_finite()) {
            return Err(invalid("ensemble.sigma_ref", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            eta: self.ensemble.eta,
            sigma_ref: self.ensemble.sigma_ref,
            eigen_tol: self.solver.eigen_tol,
            hartree_tol: self.solver.hartree_tol,
            hartree_max_iterations: self.solver.hartree_max_iterations,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.ensemble.seeds {
            SeedSpec::Count(n) => derive_seeds(self.ensemble.master_seed.unwrap_or(self.disorder.seed), *n),
            SeedSpec::List(l) => l.clone(),
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            base: self.disorder.clone(),
            seeds: self.seeds(),
            n_values: self.ensemble.n_values.clone(),
            potential: self.potential.clone(),
            options: self.pipeline_options(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Write the resolved config echo and the version stamp into `output_dir`.
    pub fn write_run_stamp(&self, command: &str) -> Result<(), ConfigError> {
        let dir = &self.output_dir;
        fs::create_dir_all(dir).map_err(|source| ConfigError::Io { path: dir.clone(), source })?;
        let cfg = dir.join(RESOLVED_CONFIG_FILE);
        fs::write(&cfg, self.to_toml()).map_err(|source| ConfigError::Io { path: cfg, source })?;
        let stamp = serde_json::json!({
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "record_schema": RECORD_SCHEMA,
            "command": command,
            "unix_time": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        });
        let ver = dir.join(VERSION_FILE);
        fs::write(&ver, serde_json::to_string_pretty(&stamp).unwrap() + "\n")
            .map_err(|source| ConfigError::Io { path: ver, source })?;
        Ok(())
    }
}

/// Parse `key.path=value`; the value is read as a TOML literal, else as a string.
pub fn parse_override(arg: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let err = |reason: &str| ConfigError::Override { arg: arg.to_string(), reason: reason.to_string() };
    let (key, raw) = arg.split_once('=').ok_or_else(|| err("expected KEY=VALUE"))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(String::is_empty) {
        return Err(err("empty key segment"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, arg: &str) -> Result<(), ConfigError> {
    let (path, value) = parse_override(arg)?;
    let (last, parents) = path.split_last().unwrap();
    let mut cur = table;
    for seg in parents {
        let entry = cur.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Override {
            arg: arg.to_string(),
            reason: format!("`{seg}` is not a table"),
        })?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn resolve_table_path(cfg: &mut RunConfig, base: &Path) {
    if let Some(p) = cfg.potential.table_path.as_mut() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

/// Parse a config from TOML text (no overrides).
pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    parse_with_overrides(Some((text, origin)), &[], None)
}

fn parse_with_overrides(
    source: Option<(&str, &str)>,
    overrides: &[String],
    base: Option<&Path>,
) -> Result<RunConfig, ConfigError> {
    let (mut table, origin) = match source {
        Some((text, origin)) => (
            toml::from_str::<toml::Table>(text)
                .map_err(|e| ConfigError::Parse { origin: origin.to_string(), message: e.to_string() })?,
            origin.to_string(),
        ),
        None => (toml::Table::new(), "flags".to_string()),
    };
    if !table.contains_key("potential") {
        // lets `potential.kappa=...` override a file without a potential section
        let default = toml::Value::try_from(d_potential()).expect("potential serializes");
        table.insert("potential".to_string(), default);
    }
    for arg in overrides {
        apply_override(&mut table, arg)?;
    }
    let mut cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse { origin, message: e.to_string() })?;
    if let Some(base) = base {
        resolve_table_path(&mut cfg, base);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Load a config file (optional) and apply `key=value` overrides, then validate.
/// Relative table paths are resolved against the config file's directory.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            parse_with_overrides(Some((&text, &p.display().to_string())), overrides, Some(&base))
        }
        None => parse_with_overrides(None, overrides, None),
    }
}
