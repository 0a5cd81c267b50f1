mod common;

use std::path::Path;

use kl_lab::disorder::DisorderConfig;
use kl_lab::ensemble::{
    derive_seeds, estimate_event_probabilities, run_ensemble, run_realization, scaling_sweep, EnsembleSpec,
    PipelineOptions, RunRecord,
};
use kl_lab::interaction::PotentialSpec;
use serde_json::Value;

fn base(nu: f64) -> DisorderConfig {
    DisorderConfig { d: 2, rho: 1.0, n_particles: 16, nu, r: 0.5, h: 0.25, seed: 0 }
}

fn spec(nu: f64, kappa: f64, seeds: Vec<u64>) -> EnsembleSpec {
    EnsembleSpec {
        base: base(nu),
        seeds,
        n_values: Vec::new(),
        potential: PotentialSpec::gaussian(kappa, 0.5),
        options: PipelineOptions::default(),
    }
}

/// Key structure with JSON type names in place of values.
fn shape(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), shape(v))).collect()),
        Value::Array(a) => Value::Array(a.first().map(shape).into_iter().collect()),
        Value::Number(_) => Value::String("number".into()),
        Value::Bool(_) => Value::String("bool".into()),
        Value::String(_) => Value::String("string".into()),
        Value::Null => Value::String("null".into()),
    }
}

#[test]
fn record_schema_matches_golden_file() {
    let rec = run_realization(&base(0.5).with_seed(3), &PotentialSpec::gaussian(0.4, 0.5), &PipelineOptions::default());
    assert!(rec.error.is_none(), "{:?}", rec.error);
    let got = shape(&serde_json::to_value(&rec).unwrap());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/run_record_shape.json");
    if std::env::var_os("KL_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(got, want, "run record schema changed; rerun with KL_UPDATE_GOLDEN=1 if intended");
}

#[test]
fn trivial_realization_certifies() {
    let rec = run_realization(&base(0.0).with_seed(1), &PotentialSpec::gaussian(0.0, 1.0), &PipelineOptions::default());
    assert_eq!(rec.components, 1);
    let cert = rec.certificate.unwrap();
    assert!(cert.in_omega2);
    assert_eq!(cert.thm41_depletion_bound, Some(0.0));
}

#[test]
fn fixed_seed_gives_byte_identical_record() {
    let cfg = base(0.6).with_seed(77);
    let p = PotentialSpec::gaussian(0.5, 0.5);
    let a = run_realization(&cfg, &p, &PipelineOptions::default()).to_json_line();
    let b = run_realization(&cfg, &p, &PipelineOptions::default()).to_json_line();
    assert_eq!(a, b);
}

#[test]
fn hundred_seed_batch_is_schema_valid() {
    let records = run_ensemble(&spec(0.6, 0.5, derive_seeds(5, 100)));
    assert_eq!(records.len(), 100);
    for r in &records {
        let line = r.to_json_line();
        let back: RunRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.schema, kl_lab::ensemble::RECORD_SCHEMA);
        let v: Value = serde_json::from_str(&line).unwrap();
        for key in ["seed", "d", "rho", "N", "nu", "r", "h", "K", "volume", "spectrum", "potential", "hartree", "certificate", "error"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn aggregation_is_order_free() {
    let seeds = derive_seeds(11, 40);
    let mut rev = seeds.clone();
    rev.reverse();
    let a = estimate_event_probabilities(&run_ensemble(&spec(0.6, 0.5, seeds)), 1.0);
    let b = estimate_event_probabilities(&run_ensemble(&spec(0.6, 0.5, rev)), 1.0);
    assert_eq!(a, b);
}

#[test]
fn no_obstacles_means_omega1_always() {
    let s = estimate_event_probabilities(&run_ensemble(&spec(0.0, 0.3, derive_seeds(1, 30))), 1.0);
    assert_eq!(s.omega1.estimate, 1.0);
}

#[test]
fn zero_coupling_omega2_is_nondegeneracy() {
    let records = run_ensemble(&spec(0.9, 0.0, derive_seeds(2, 40)));
    let s = estimate_event_probabilities(&records, 1.0);
    let nondeg = records.iter().filter(|r| !r.spectrum.as_ref().unwrap().degenerate).count();
    assert_eq!(s.omega2.successes, nondeg);
    for f in [s.omega1, s.omega2, s.gap_event] {
        assert!((0.0..=1.0).contains(&f.estimate) && f.lower <= f.estimate && f.estimate <= f.upper);
    }
}

#[test]
fn zero_coupling_sweep_has_zero_depletion_bound() {
    let mut sp = spec(0.3, 0.0, derive_seeds(4, 3));
    sp.n_values = vec![16, 64, 256];
    let rep = scaling_sweep(&sp);
    for row in &rep.rows {
        assert_eq!(row.median_depletion_bound, Some(0.0));
    }
}
