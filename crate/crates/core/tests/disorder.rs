mod common;

use kl_lab::disorder::{sample_centers, sample_realization, unit_ball_volume, volume_fraction, DisorderConfig};

fn config(nu: f64, seed: u64) -> DisorderConfig {
    DisorderConfig { d: 2, rho: 1.0, n_particles: 36, nu, r: 0.5, h: 0.2, seed }
}

#[test]
fn center_count_is_poisson_with_dilated_mean() {
    let cfg = config(0.8, 0);
    let side = cfg.box_side() + 2.0 * cfg.r;
    let mean = cfg.nu * side * side;
    let counts: Vec<f64> = (0..10_000).map(|s| sample_centers(&cfg.with_seed(s)).len() as f64).collect();
    let m = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    let se = (mean / counts.len() as f64).sqrt();
    assert!((m - mean).abs() < 4.0 * se, "mean {m} vs {mean}");
    assert!((var / mean - 1.0).abs() < 0.1, "dispersion {}", var / mean);
}

#[test]
fn mask_matches_brute_force_distance() {
    for seed in 0..20 {
        let real = sample_realization(&config(1.0, seed)).unwrap();
        let lat = real.domain.lattice();
        for i in 0..lat.node_count() {
            let x = lat.coord(i);
            let blocked = real.centers.iter().any(|c| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) <= 0.25);
            assert_eq!(real.mask()[i], !blocked, "seed {seed} node {i}");
        }
    }
}

#[test]
fn labels_are_face_connected_components() {
    let real = sample_realization(&config(1.2, 3)).unwrap();
    let dom = &real.domain;
    for s in 0..dom.site_count() {
        for &t in dom.neighbors(s) {
            if t != u32::MAX {
                assert_eq!(dom.site_label(s), dom.site_label(t as usize));
            }
        }
    }
    let sizes = dom.component_sizes();
    assert_eq!(sizes.iter().sum::<usize>(), dom.site_count());
    assert!(sizes.iter().all(|&s| s > 0));
}

#[test]
fn fixed_seed_is_reproducible() {
    let a = sample_realization(&config(0.7, 42)).unwrap();
    let b = sample_realization(&config(0.7, 42)).unwrap();
    assert_eq!(a.centers, b.centers);
    assert_eq!(a.labels(), b.labels());
}

#[test]
fn no_obstacles_gives_full_box() {
    let real = sample_realization(&config(0.0, 1)).unwrap();
    let vf = volume_fraction(&real, 0.1);
    assert_eq!(vf.fraction, 1.0);
    assert_eq!(real.component_count(), 1);
}

#[test]
fn unit_ball_volumes() {
    assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
    assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
}

#[test]
fn volume_fraction_refines_at_first_order() {
    use kl_lab::disorder::build_realization;
    use kl_lab::ensemble::linear_fit;
    let hs = [0.2f64, 0.1, 0.05];
    let mut mean_err = [0.0; 3];
    let seeds = 16;
    for seed in 0..seeds {
        let coarse = config(0.8, seed);
        let centers = sample_centers(&coarse);
        let frac = |h: f64| {
            let cfg = DisorderConfig { h, ..coarse.clone() };
            volume_fraction(&build_realization(&cfg, centers.clone()).unwrap(), 0.1).fraction
        };
        let reference = frac(0.2 / 32.0);
        // misclassified nodes lie within sqrt(2) h / 2 of an obstacle boundary
        let side = coarse.box_side();
        let perimeter = centers.len() as f64 * 2.0 * std::f64::consts::PI * coarse.r;
        for (k, &h) in hs.iter().enumerate() {
            let err = (frac(h) - reference).abs();
            assert!(err <= 2.0 * perimeter * h / (side * side), "seed {seed} h {h}: {err}");
            mean_err[k] += err / seeds as f64;
        }
    }
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = mean_err.iter().map(|e| e.ln()).collect();
    let slope = linear_fit(&x, &y).unwrap().slope;
    assert!(slope > 0.8, "mean-error slope {slope} ({mean_err:?})");
}
