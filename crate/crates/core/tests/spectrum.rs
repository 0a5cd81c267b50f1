mod common;

use common::{dense_eigen, lcg, masked, open_box, rel};
use kl_lab::domain::VacancyDomain;
use kl_lab::eigen::SymmetricOperator;
use kl_lab::laplace::{
    assemble_laplacian, component_ground_state, ground_state_component, lowest_eigenpairs, ComponentOf,
};
use std::f64::consts::PI;

#[test]
fn matches_dense_oracle_on_random_masks() {
    for (seed, n) in [(1u64, 12usize), (2, 25), (3, 40)] {
        let r = lcg(seed, n * n);
        let dom = masked(&[n, n], 1.0 / (n + 1) as f64, |i| r[i] > 0.15);
        let op = assemble_laplacian(&dom).unwrap();
        let sp = lowest_eigenpairs(&op, 1e-11).unwrap();
        let (vals, _) = dense_eigen(dom.site_count(), &op.to_dense());
        assert!(rel(sp.lambda1, vals[0]) < 1e-8, "{} vs {}", sp.lambda1, vals[0]);
        assert!(rel(sp.lambda2, vals[1]) < 1e-8, "{} vs {}", sp.lambda2, vals[1]);
    }
}

#[test]
fn eigenvectors_are_orthonormal_in_discrete_l2() {
    let r = lcg(9, 400);
    let dom = masked(&[20, 20], 0.05, |i| r[i] > 0.2);
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-10).unwrap();
    assert!((dom.dot(&sp.phi1, &sp.phi1) - 1.0).abs() < 1e-10);
    assert!((dom.dot(&sp.phi2, &sp.phi2) - 1.0).abs() < 1e-10);
    assert!(dom.dot(&sp.phi1, &sp.phi2).abs() < 1e-8);
}

#[test]
fn free_square_converges_at_second_order() {
    let exact = 2.0 * PI * PI;
    let errs: Vec<f64> = [16usize, 32, 64]
        .iter()
        .map(|&cells| {
            let dom = open_box(&[cells - 1, cells - 1], 1.0 / cells as f64);
            let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-12).unwrap();
            (sp.lambda1 - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.9, "order {order}");
    }
}

#[test]
fn discrete_closed_form_on_rectangle() {
    let (nx, ny, h) = (9usize, 14usize, 0.1);
    let dom = open_box(&[nx, ny], h);
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-12).unwrap();
    let mode = |k: usize, n: usize| 4.0 / (h * h) * (PI * k as f64 / (2.0 * (n + 1) as f64)).sin().powi(2);
    let mut all: Vec<f64> =
        (1..4).flat_map(|a| (1..4).map(move |b| (a, b))).map(|(a, b)| mode(a, nx) + mode(b, ny)).collect();
    all.sort_by(f64::total_cmp);
    assert!(rel(sp.lambda1, all[0]) < 1e-10);
    assert!(rel(sp.lambda2, all[1]) < 1e-10);
}

#[test]
fn operator_is_symmetric() {
    let r = lcg(4, 900);
    let dom = masked(&[30, 30], 0.1, |i| r[i] > 0.3);
    let op = assemble_laplacian(&dom).unwrap();
    let m = dom.site_count();
    let pool = lcg(5, 200 * m);
    for k in 0..100 {
        let x = &pool[2 * k * m..(2 * k + 1) * m];
        let y = &pool[(2 * k + 1) * m..(2 * k + 2) * m];
        let (mut ax, mut ay) = (vec![0.0; m], vec![0.0; m]);
        op.apply(x, &mut ax);
        op.apply(y, &mut ay);
        let a: f64 = ax.iter().zip(y).map(|(p, q)| p * q).sum();
        let b: f64 = ay.iter().zip(x).map(|(p, q)| p * q).sum();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

fn two_squares(a: usize, b: usize) -> VacancyDomain {
    // squares of side a and b nodes, separated by a blocked column
    let (w, hgt) = (a + b + 1, a.max(b));
    masked(&[hgt, w], 0.1, move |i| {
        let (row, col) = (i / w, i % w);
        (col < a && row < a) || (col > a && row < b)
    })
}

#[test]
fn identical_squares_are_degenerate() {
    let dom = two_squares(6, 6);
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-12).unwrap();
    assert!(sp.is_degenerate());
    assert!(sp.gap() < 1e-9);
}

#[test]
fn larger_square_hosts_ground_state() {
    let dom = two_squares(5, 8);
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-12).unwrap();
    let big = dom.site_label(dom.site_of(dom.lattice().ravel(&[0, 6])).unwrap());
    assert_eq!(sp.component_of_phi1, ComponentOf::Single(big));
    assert_eq!(ground_state_component(&dom, &sp).component, big);
    assert!(!sp.is_degenerate());
}

#[test]
fn global_lambda1_is_min_over_components() {
    let r = lcg(21, 900);
    let dom = masked(&[30, 30], 0.1, |i| r[i] > 0.42);
    assert!(dom.component_count() > 2);
    let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-11).unwrap();
    let mut per: Vec<f64> = (1..=dom.component_count() as u32)
        .map(|k| component_ground_state(&dom, k, 1e-11).unwrap().value)
        .collect();
    per.sort_by(f64::total_cmp);
    assert!(rel(sp.lambda1, per[0]) < 1e-9);
    assert!(sp.lambda2 <= per[1] * (1.0 + 1e-9));
}

#[test]
fn removing_sites_raises_lambda1() {
    let r = lcg(8, 400);
    let mut prev = 0.0;
    for cut in [0.0, 0.05, 0.1, 0.15] {
        let dom = masked(&[20, 20], 0.05, |i| r[i] >= cut);
        let sp = lowest_eigenpairs(&assemble_laplacian(&dom).unwrap(), 1e-11).unwrap();
        assert!(sp.lambda1 >= prev - 1e-9);
        prev = sp.lambda1;
    }
}
