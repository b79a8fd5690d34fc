use coarsequant::liegroup::{GradedAlgebra, GroupGrid};
use coarsequant::operator::c64;
use coarsequant::profile::bump;
use coarsequant::symbol::*;
use proptest::prelude::*;
use std::f64::consts::TAU;

fn circle_points(k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|j| vec![TAU * j as f64 / k as f64]).collect()
}

#[test]
fn hormander_catalog() {
    let pts = circle_points(8);
    let c = check_hormander(&constant(c64::new(1.0, 0.5)), &pts, 1, 512.0);
    assert!(c.pass);
    assert_eq!(c.c, 0.0);
    let d = check_hormander(&dirac1d(), &pts, 1, 512.0);
    assert!(d.pass);
    assert!(d.c.is_finite() && d.c > 0.0 && d.c < 2.0);
    assert!(check_hormander(&winding(1), &pts, 1, 512.0).pass);
    let s = check_hormander(&sin_xi(), &pts, 1, 512.0);
    assert!(!s.pass);
}

#[test]
fn dirac_derivative_matches_closed_form() {
    // d/dξ ξ(1+ξ²)^{-1/2} = (1+ξ²)^{-3/2}
    let d = check_hormander(&dirac1d(), &[vec![0.0]], 1, 64.0);
    let xi = d.worst_xi[0];
    let exact = (1.0 + xi.abs()) * (1.0 + xi * xi).powf(-1.5);
    assert!((d.c - exact).abs() < 1e-6);
}

#[test]
fn classify_examples() {
    let pts = circle_points(4);
    let neg = parse_symbol("1/sqrt(1+xi^2)").unwrap();
    assert_eq!(classify_order(&neg, &pts, 1, 256.0, None), Ok(OrderClass::Negative));
    assert_eq!(classify_order(&constant(c64::new(1.0, 0.0)), &pts, 1, 256.0, None), Ok(OrderClass::Order0));
    let strong = parse_symbol("exp(-x^2)/sqrt(1+xi^2)").unwrap();
    let far: Vec<Vec<f64>> = [1.0, 2.0, 4.0, 8.0].iter().map(|&r| vec![r]).collect();
    assert_eq!(
        classify_order(&strong, &[vec![0.0]], 1, 256.0, Some(&far)),
        Ok(OrderClass::StronglyNegative)
    );
    assert_eq!(classify_order(&neg, &[vec![0.0]], 1, 256.0, Some(&far)), Ok(OrderClass::Negative));
}

#[test]
fn classify_flags_nonmonotone_tail() {
    let bumpy = Symbol::scalar("bumpy", OrderClass::Negative, |_, xi| {
        let a = xi[0].abs();
        c64::new(if (128.0..256.0).contains(&a) { 0.2 } else { 1.0 / (1.0 + a) }, 0.0)
    });
    assert_eq!(classify_order(&bumpy, &[vec![0.0]], 1, 256.0, None), Err(SymbolError::Inconclusive));
}

proptest! {
    #[test]
    fn scaling_never_upgrades_to_order0(t in 1e-6f64..1.0) {
        let s = parse_symbol("1/sqrt(1+xi^2)").unwrap().product(&constant(c64::new(t, 0.0)));
        prop_assert_eq!(classify_order(&s, &[vec![0.3]], 1, 256.0, None), Ok(OrderClass::Negative));
    }

    #[test]
    fn parseval(seed in 0u64..1000, shift in -5i32..5) {
        let a = (seed as f64) * 0.01;
        let s = Symbol::scalar("p", OrderClass::Order0, move |_, xi| {
            c64::new(1.0 / (1.0 + (xi[0] - shift as f64).powi(2)), a * xi[0] / (1.0 + xi[0] * xi[0]))
        });
        let n = 64;
        let k = fourier_cosymbol(&s, &[0.0], n, 1, None).unwrap();
        let sigma = symbol_samples(&s, &[0.0], n, 1);
        let lhs: f64 = sigma.iter().map(|v| v.norm_sqr()).sum::<f64>() / TAU;
        prop_assert!((lhs - k.l2_norm_sq()).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn stability_under_bounded_reparametrization(a in 0.5f64..2.0, b in -0.3f64..0.3) {
        let pts = circle_points(6);
        let base = check_hormander(&dirac1d(), &pts, 1, 256.0);
        let psi = move |x: &[f64]| vec![a * (1.0 + b * x[0].sin()).max(0.5)];
        let moved = check_hormander(&dirac1d().reparametrize(psi), &pts, 1, 256.0);
        prop_assert!(moved.pass);
        // ‖ψ‖, ‖ψ⁻¹‖ ≤ 2 gives κ ≤ 4 for (1+‖ξ‖)‖d_ξ‖
        prop_assert!(moved.c <= 4.0 * base.c + 1e-9, "{} vs {}", moved.c, base.c);
    }
}

#[test]
fn shift_symbol_gives_shifted_delta() {
    let n = 32;
    let a = 3;
    let h = TAU / n as f64;
    let s = Symbol::scalar("shift", OrderClass::Order0, move |_, xi| c64::cis(-xi[0] * a as f64 * h));
    let k = fourier_cosymbol(&s, &[0.0], n, 1, None).unwrap();
    for m in 0..n as i64 {
        let expect = if m == a as i64 { 1.0 / h } else { 0.0 };
        assert!((k.get(&[m]) - expect).norm() < 1e-12, "m={m}");
    }
}

#[test]
fn roundtrip_dft() {
    let n = 48;
    let s = winding(2);
    let k = fourier_cosymbol(&s, &[0.7], n, 1, None).unwrap();
    let back = k.multiplier();
    let orig = symbol_samples(&s, &[0.7], n, 1);
    for (a, b) in back.iter().zip(&orig) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn torus_cosymbol_roundtrip() {
    let n = 16;
    let s = parse_symbol("(xi + i*eta)/sqrt(1+xi^2+eta^2)").unwrap();
    let k = fourier_cosymbol(&s, &[0.1, 0.2], n, 2, None).unwrap();
    let back = k.multiplier();
    let orig = symbol_samples(&s, &[0.1, 0.2], n, 2);
    for (a, b) in back.iter().zip(&orig) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn alias_warning_on_sin_xi() {
    assert!(matches!(
        fourier_cosymbol(&sin_xi(), &[0.0], 64, 1, Some(0.1)),
        Err(SymbolError::AliasWarning { .. })
    ));
    assert!(fourier_cosymbol(&dirac1d(), &[0.0], 64, 1, Some(0.1)).is_ok());
    assert!(fourier_cosymbol(&constant(c64::new(1.0, 0.0)), &[0.0], 64, 1, Some(0.0)).is_ok());
}

fn heis_grid() -> GroupGrid {
    GroupGrid::new(GradedAlgebra::heisenberg(), 0.25, vec![6, 6, 24]).unwrap()
}

#[test]
fn zoom_invariance_examples() {
    let g = heis_grid();
    let lambdas = [0.5, 2.0, 3.0];
    assert_eq!(check_zoom_invariance(&g, &ZoomKernel::delta(), &lambdas, (0.2, 1.2)).max_defect(), 0.0);
    let homog = check_zoom_invariance(&g, &ZoomKernel::heis_homog(), &lambdas, (0.2, 1.2));
    assert!(homog.max_defect() < 1e-12, "{:?}", homog);
    let alg = GradedAlgebra::heisenberg();
    let b = ZoomKernel::from_fn(move |p| {
        c64::new(bump(coarsequant::liegroup::homogeneous_norm(&alg, p)), 0.0)
    });
    assert!(check_zoom_invariance(&g, &b, &lambdas, (0.2, 1.2)).max_defect() > 0.3);
}

#[test]
fn fft_matches_the_naive_transform() {
    use coarsequant::rng::{complex_normal, stream};
    use coarsequant::verify::oracle::naive_dft;
    let mut rng = stream(11, 0);
    for n in [1, 7, 16, 45] {
        let f: Vec<c64> = (0..n).map(|_| complex_normal(&mut rng)).collect();
        for inverse in [false, true] {
            let mut fast = f.clone();
            fft_nd(&mut fast, n, 1, inverse);
            let slow = naive_dft(&f, inverse);
            assert!(fast.iter().zip(&slow).all(|(a, b)| (a - b).norm() < 1e-11));
        }
    }
    let n = 6;
    let f: Vec<c64> = (0..n * n).map(|_| complex_normal(&mut rng)).collect();
    let mut fast = f.clone();
    fft_nd(&mut fast, n, 2, false);
    for k1 in 0..n {
        for k2 in 0..n {
            let mut acc = c64::new(0.0, 0.0);
            for j1 in 0..n {
                for j2 in 0..n {
                    acc += f[j1 * n + j2] * c64::cis(-TAU * ((j1 * k1 + j2 * k2) % n) as f64 / n as f64);
                }
            }
            assert!((fast[k1 * n + k2] - acc).norm() < 1e-11);
        }
    }
}
