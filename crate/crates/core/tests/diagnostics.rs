use coarsequant::coarse::{ladder_partition, quantize, NuCutoff, QuantizeOptions};
use coarsequant::diagnostics::{
    commutator_kernel, commutator_report, disjoint_support_defect, essential_norm_estimate, fourier_multiplier, kernel_norm, ladder_verdict,
    localized_convolution_report, nonsingular_check, nonsingular_check_abelian, schur_bound, CompactnessReport,
};
use coarsequant::geometry::ManifoldGrid;
use coarsequant::liegroup::{homogeneous_norm, GradedAlgebra, GroupGrid};
use coarsequant::operator::{c64, DiscreteOperator};
use coarsequant::profile::bump;
use coarsequant::rng::{complex_normal, gaussian_operator, stream};
use coarsequant::symbol::{dirac1d, Cosymbol};
use faer::Mat;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn circle(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

fn dirac(xi: f64) -> c64 {
    c64::new(xi / (1.0 + xi * xi).sqrt(), 0.0)
}

fn hat(t: f64) -> f64 {
    (1.0 - t.abs() / 3.0).max(0.0)
}

#[test]
fn multiplication_commutator_vanishes() {
    let mut rng = stream(3, 0);
    let d: Vec<c64> = (0..64).map(|_| complex_normal(&mut rng)).collect();
    let a: Vec<f64> = circle(64).iter().map(|t| t.sin()).collect();
    let r = commutator_report(&DiscreteOperator::diagonal(&d), &a);
    assert_eq!(r.s1(), 0.0);
    assert!(r.standard_ratios().iter().all(|&(_, t)| t == 0.0));
}

#[test]
fn pseudolocal_multiplier_commutator_tail_decays() {
    let reports: Vec<CompactnessReport> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let a: Vec<f64> = circle(n).iter().map(|t| t.sin()).collect();
            commutator_report(&fourier_multiplier(n, dirac), &a)
        })
        .collect();
    let ratios: Vec<f64> = reports.iter().map(|r| r.proxy_ratio()).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    assert!(ladder_verdict(&reports, 1.0, 0.05, 1.5).pass, "{ratios:?}");
}

#[test]
fn oscillating_multiplier_commutator_stagnates() {
    let reports: Vec<CompactnessReport> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let a: Vec<f64> = circle(n).iter().map(|t| t.sin()).collect();
            commutator_report(&fourier_multiplier(n, |xi| c64::new(xi.sin(), 0.0)), &a)
        })
        .collect();
    let ratios: Vec<f64> = reports.iter().map(|r| r.proxy_ratio()).collect();
    assert!(ratios.iter().all(|&r| r > 0.3), "{ratios:?}");
    assert!(!ladder_verdict(&reports, 1.0, 0.05, 1.5).pass);
}

#[test]
fn schur_examples() {
    assert_eq!(schur_bound(&Mat::zeros(5, 5)).bound, 0.0);
    let d = [0.25, -4.0, 1.5, 3.0];
    let k = Mat::from_fn(4, 4, |i, j| if i == j { c64::new(d[i], 0.0) } else { c64::new(0.0, 0.0) });
    assert_eq!(schur_bound(&k).bound, 4.0);
}

#[test]
fn schur_bound_of_the_commutator_kernel_is_sharp_within_three() {
    let m = 96;
    let k = commutator_kernel(m, hat, |xi| xi / (1.0 + xi * xi).sqrt());
    let report = schur_bound(&k);
    let norm = kernel_norm(&k);
    assert!(norm > 0.0);
    assert!(report.bound >= norm);
    assert!(report.bound <= 3.0 * norm, "{} vs {norm}", report.bound);
    let size = report.col_sums.len();
    let centre = report.col_sums[size / 2 + 1];
    let edge = report.col_sums[size - 1 - 4];
    assert!(edge < 0.05 * centre, "{edge} vs {centre}");
}

#[test]
fn compactly_supported_multiplier_has_vanishing_essential_norm() {
    let f = |xi: f64| c64::new(bump(xi / 5.0), 0.0);
    let norms: Vec<f64> = [32, 64, 128, 256].iter().map(|&n| essential_norm_estimate(n, f, 1e-9).truncated_norm).collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-14), "{norms:?}");
    assert!(norms[3] < 1e-12, "{norms:?}");
    assert!(essential_norm_estimate(256, f, 1e-9).pass);
}

#[test]
fn spike_does_not_count_toward_the_essential_norm() {
    let f = |xi: f64| c64::new(1.0 + 9.0 * bump(xi / 3.0), 0.0);
    let r = essential_norm_estimate(128, f, 1e-9);
    assert!((r.truncated_norm - 1.0).abs() < 1e-9, "{}", r.truncated_norm);
    assert!(r.pass);
    assert!(fourier_multiplier(128, f).norm() > 9.9);
}

#[test]
fn constant_multiplier_essential_norm() {
    let c = c64::new(2.0, 1.0);
    let r = essential_norm_estimate(64, move |_| c, 1e-9);
    assert!((r.truncated_norm - c.norm()).abs() < 1e-12);
    assert!((r.outer_shell_max - c.norm()).abs() < 1e-15);
    assert!(r.pass);
}

#[test]
fn step_multiplier_is_measured_on_its_tail() {
    let r = essential_norm_estimate(128, |xi| c64::new(if xi.abs() < 8.0 { 1.0 } else { 0.1 }, 0.0), 1e-9);
    assert!((r.outer_shell_max - 0.1).abs() < 1e-15);
    assert!(r.pass);
}

fn off_identity(r: f64) -> f64 {
    1.0 - bump(r / 0.3)
}

#[test]
fn delta_kernel_is_nonsingular() {
    let h: f64 = 0.2;
    let cell = h.powi(4);
    let k = move |g: &[f64]| if g.iter().all(|&v| v == 0.0) { c64::new(1.0 / cell, 0.0) } else { c64::new(0.0, 0.0) };
    let r = nonsingular_check(h, GradedAlgebra::heisenberg(), k, off_identity, &[0.5, 1.0, 2.0]).unwrap();
    assert!(r.masses.iter().all(|m| m.1 == 0.0));
    assert!(r.integrable);
}

#[test]
fn integrable_heisenberg_profile_has_finite_mass() {
    let alg = GradedAlgebra::heisenberg();
    let a2 = alg.clone();
    let profile = move |g: &[f64]| {
        let r = homogeneous_norm(&a2, g);
        if r == 0.0 {
            c64::new(0.0, 0.0)
        } else {
            c64::new((-r * r).exp() / r.powi(3), 0.0)
        }
    };
    let r = nonsingular_check(0.2, alg, profile, off_identity, &[1.0, 2.0, 3.0]).unwrap();
    assert!(r.integrable, "{:?}", r.masses);
    assert!(r.masses.iter().all(|m| m.1.is_finite() && m.1 > 0.0));
}

#[test]
fn constant_kernel_mass_diverges() {
    let r = nonsingular_check(0.2, GradedAlgebra::heisenberg(), |_| c64::new(1.0, 0.0), off_identity, &[1.0, 2.0, 3.0]).unwrap();
    assert!(!r.integrable, "{:?}", r.masses);
    assert!(r.masses.windows(2).all(|w| w[1].1 > 2.0 * w[0].1));
}

#[test]
fn abelian_path_accepts_pseudolocal_symbols() {
    let r = nonsingular_check_abelian(512, dirac, off_identity, &[1.0, 2.0, PI]);
    assert!(r.integrable, "{:?}", r.masses);
}

#[test]
fn localized_convolution_report_is_well_formed() {
    let alg = GradedAlgebra::heisenberg();
    let grid = GroupGrid::new(alg.clone(), 0.5, vec![3, 3, 6]).unwrap();
    let a2 = alg.clone();
    let kernel = move |g: &[f64]| {
        let r = homogeneous_norm(&a2, g);
        c64::new(if r == 0.0 { 0.0 } else { 1.0 / r.powi(3) }, 0.0)
    };
    let (conv, report) = localized_convolution_report(&grid, kernel, off_identity, vec![1, 1, 2], |g| bump(g[0] / 2.0)).unwrap();
    assert_eq!(report.n, conv.interior_indices().len());
    let s = &report.singular_values;
    assert!(s.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn disjoint_supports_decouple() {
    let legs = NuCutoff::new(0.5);
    let mut defects = Vec::new();
    for n in [64, 128, 256] {
        let pts = circle(n);
        let a: Vec<f64> = pts.iter().map(|t| bump((t - 1.0) / 0.5)).collect();
        let b: Vec<f64> = pts.iter().map(|t| bump((t - 4.0) / 0.5)).collect();
        let g = ManifoldGrid::circle(n, false);
        let cos = Cosymbol::new(dirac1d(), n, 1, Some(0.5));
        let pou = ladder_partition(&g, 0.3).unwrap();
        let q = quantize(&cos, &g, &pou, &legs, QuantizeOptions::default()).unwrap().op;
        assert_eq!(disjoint_support_defect(&q, &a, &b), 0.0);
        defects.push(disjoint_support_defect(&fourier_multiplier(n, dirac), &a, &b));
    }
    assert!(defects.windows(2).all(|w| w[1] < w[0]), "{defects:?}");
    assert!(defects[2] < 1e-6, "{defects:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn schur_dominates_the_norm(seed in 0u64..10_000, n in 1usize..24) {
        let mut rng = stream(seed, 1);
        let m = gaussian_operator(&mut rng, n);
        let bound = schur_bound(&m.mat).bound;
        prop_assert!(bound >= m.norm() * (1.0 - 1e-12));
    }

    #[test]
    fn tail_ratios_are_monotone(seed in 0u64..10_000, n in 2usize..40) {
        let mut rng = stream(seed, 2);
        let f = gaussian_operator(&mut rng, n);
        let a: Vec<f64> = (0..n).map(|k| (k as f64).cos()).collect();
        let r = commutator_report(&f, &a);
        let ratios: Vec<f64> = (0..=n).map(|k| r.tail_ratio(k)).collect();
        prop_assert!(ratios.iter().all(|t| (0.0..=1.0).contains(t)));
        prop_assert!(ratios.windows(2).all(|w| w[1] <= w[0]));
    }
}
