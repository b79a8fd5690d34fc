use coarsequant::geometry::ManifoldGrid;
use coarsequant::operator::{c64, rank_budget, DiscreteOperator};
use coarsequant::opint::*;
use coarsequant::rng::{gaussian_operator, stream, uniform};
use coarsequant::verify::oracle;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn even_centers(k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|i| vec![TAU * i as f64 / k as f64]).collect()
}

fn rotating_field(n: usize, seed: u64) -> FnField<impl Fn(&[f64]) -> DiscreteOperator + Sync> {
    let g1 = gaussian_operator(&mut stream(seed, 0), n);
    let g2 = gaussian_operator(&mut stream(seed, 1), n);
    FnField { n, f: move |x: &[f64]| &g1.scale(c64::new(x[0].cos(), 0.0)) + &g2.scale(c64::new(x[0].sin(), 0.0)) }
}

fn sup_field_norm<F: OperatorField>(f: &F, pou: &PartitionOfUnity) -> f64 {
    pou.points.iter().map(|x| f.at(x).norm()).fold(0.0, f64::max)
}

#[test]
fn partition_examples() {
    let g = ManifoldGrid::circle(64, false);
    let one = build_partition(&g, &[vec![1.0]], 10.0).unwrap();
    assert!(one.alphas[0].val.iter().all(|&v| v == 1.0));
    assert_eq!(one.alphas[0].idx.len(), 64);
    let two = build_partition(&g, &[vec![0.0], vec![PI]], 2.5).unwrap();
    assert!(two.sum_of_squares().iter().all(|s| (s - 1.0).abs() <= 1e-12));
    assert!(two.alphas.iter().all(|a| a.val.iter().all(|&v| v >= 0.0)));

    let mut rng = stream(11, 0);
    let spacing = TAU / 12.0;
    let centers: Vec<Vec<f64>> = (0..12).map(|i| vec![spacing * (i as f64 + uniform(&mut rng, -0.1, 0.1))]).collect();
    let p = build_partition(&g, &centers, 0.75 * spacing).unwrap();
    assert!(p.sum_of_squares().iter().all(|s| (s - 1.0).abs() <= 1e-10));
    assert!(p.overlap_count() <= 4, "{}", p.overlap_count());
    // supp α_i ⊂ U_i
    for (a, b) in p.alphas.iter().zip(&p.cover) {
        assert!(a.idx.iter().all(|&k| g.chart_distance(&b.center, &g.points[k]) < b.radius));
    }
}

#[test]
fn epsilon_cover_examples() {
    let g = ManifoldGrid::circle(256, false);
    let constant = ScalarField { n: 256, f: |_: &[f64]| c64::new(2.0, 1.0) };
    let c = epsilon_cover(&constant, &g, 0.01, 0.0).unwrap();
    assert_eq!(c.centers.len(), 1);
    assert!(build_partition(&g, &c.centers, c.radius).is_ok());

    let lip = ScalarField { n: 256, f: |x: &[f64]| c64::cis(x[0]) };
    for eps in [0.4, 0.2, 0.1] {
        let c = epsilon_cover(&lip, &g, eps, 0.0).unwrap();
        assert!((c.lipschitz - 1.0).abs() < 1e-3);
        assert!((c.radius - eps / (2.0 * c.lipschitz)).abs() < 1e-12);
        assert!(c.omega <= eps);
        assert!(build_partition(&g, &c.centers, c.radius).is_ok());
    }
    assert!(matches!(epsilon_cover(&lip, &g, 0.0, 0.0), Err(OpintError::EpsilonTooSmall { .. })));
    assert!(matches!(epsilon_cover(&lip, &g, 0.01, 0.0), Err(OpintError::EpsilonTooSmall { .. })));
}

#[test]
fn scalar_field_gives_multiplication() {
    let g = ManifoldGrid::circle(96, false);
    let pou = build_partition(&g, &even_centers(10), 1.0).unwrap();
    let f = |x: &[f64]| c64::new(x[0].sin(), (2.0 * x[0]).cos());
    let op = operator_integral(&ScalarField { n: 96, f: &f }, &pou);
    let d = oracle::scalar_integral(&pou, f);
    for i in 0..96 {
        for j in 0..96 {
            let expect = if i == j { d[i] } else { c64::new(0.0, 0.0) };
            assert_eq!(op.get(i, j), expect);
        }
    }
}

#[test]
fn constant_field_integrates_to_itself() {
    let g = ManifoldGrid::circle(48, false);
    let t = gaussian_operator(&mut stream(3, 0), 48);
    let pou = build_partition(&g, &even_centers(8), 1.2).unwrap();
    let op = operator_integral(&FnField { n: 48, f: |_: &[f64]| t.clone() }, &pou);
    // Σ α_i T α_i agrees with T on the diagonal blocks where Σα² = 1
    for i in 0..48 {
        assert!((op.get(i, i) - t.get(i, i)).norm() < 1e-12);
    }
}

#[test]
fn adjoint_is_exact() {
    let g = ManifoldGrid::circle(40, false);
    let f = rotating_field(40, 5);
    let pou = build_partition(&g, &even_centers(7), 1.3).unwrap();
    let a = operator_integral(&AdjointField(&f), &pou);
    let b = operator_integral(&f, &pou).adjoint();
    assert_eq!(a.max_abs_diff(&b), 0.0);
}

#[test]
fn multiplicativity_defect() {
    let n = 128;
    let g = ManifoldGrid::circle(n, false);
    let f1 = ScalarField { n, f: |x: &[f64]| c64::cis(x[0]) };
    let f2 = rotating_field(n, 8);
    let loc: Vec<f64> = g.points.iter().map(|p| (1.0 - ((p[0] - PI) / 1.5).powi(2)).max(0.0)).collect();
    let rank = rank_budget(n);
    for eps in [0.4, 0.2] {
        let c = epsilon_cover(&f1, &g, eps, 0.0).unwrap();
        let pou = build_partition(&g, &c.centers, c.radius).unwrap();
        let prod = operator_integral(&ProductField(&f1, &f2), &pou);
        let split = &operator_integral(&f1, &pou) * &operator_integral(&f2, &pou);
        let defect = (&prod - &split).left_mul_diag(&loc).truncated_norm(rank);
        let budget = 2.0 * eps * sup_field_norm(&f1, &pou) * sup_field_norm(&f2, &pou);
        assert!(defect <= budget, "{eps}: {defect} > {budget}");
    }
}

#[test]
fn stability_examples() {
    let n = 128;
    let g = ManifoldGrid::circle(n, false);
    let f = ScalarField { n, f: |x: &[f64]| c64::cis(x[0]) };
    let a = vec![1.0; n];
    let c = epsilon_cover(&f, &g, 0.2, 0.0).unwrap();
    let p1 = build_partition(&g, &c.centers, c.radius).unwrap();
    assert_eq!(integral_stability(&f, &p1, &p1, &a).defect, 0.0);
    let c2 = epsilon_cover(&f, &g, 0.2, 0.5).unwrap();
    let p2 = build_partition(&g, &c2.centers, c2.radius).unwrap();
    let fine = p1.refine(&p2);
    assert!(fine.sum_of_squares().iter().all(|s| (s - 1.0).abs() < 1e-12));
    let r = integral_stability(&f, &p1, &fine, &a);
    assert!(r.defect <= 0.2 + r.eta, "{} {}", r.defect, r.eta);
    let r = integral_stability(&f, &p1, &p2, &a);
    assert!(r.defect <= 0.4 + r.eta);

    let mut prev = f64::INFINITY;
    for eps in [0.4, 0.2, 0.1] {
        let ca = epsilon_cover(&f, &g, eps, 0.0).unwrap();
        let cb = epsilon_cover(&f, &g, eps, 0.5).unwrap();
        let pa = build_partition(&g, &ca.centers, ca.radius).unwrap();
        let pb = build_partition(&g, &cb.centers, cb.radius).unwrap();
        let d = (&operator_integral(&f, &pa) - &operator_integral(&f, &pb)).norm();
        assert!(d < prev, "{eps}: {d} {prev}");
        prev = d;
    }
}

#[test]
fn vanishing_field_integrates_to_zero() {
    let n = 64;
    let g = ManifoldGrid::circle(n, false);
    let t = gaussian_operator(&mut stream(4, 0), n);
    let grid = g.clone();
    let field = FnField {
        n,
        f: move |x: &[f64]| {
            let off: Vec<f64> = grid.points.iter().map(|p| if grid.chart_distance(x, p) < 1.0 { 0.0 } else { 1.0 }).collect();
            t.left_mul_diag(&off).right_mul_diag(&off)
        },
    };
    let pou = build_partition(&g, &even_centers(12), 0.9).unwrap();
    assert_eq!(operator_integral(&field, &pou).max_abs(), 0.0);
}

#[test]
fn integral_is_properly_supported() {
    let n = 64;
    let g = ManifoldGrid::circle(n, false);
    let f = rotating_field(n, 9);
    let pou = build_partition(&g, &even_centers(8), 0.9).unwrap();
    let cells = grid_cells(&g, 16);
    let s = support_of(&operator_integral(&f, &pou), &cells, 1e-14);
    assert!(s.is_subset(&partition_squares(&pou, &cells)));
    assert!(s.is_proper());
    assert!(s.within_band(5, true));
}

#[test]
fn decaying_field_tail_sums_converge() {
    let g = ManifoldGrid::heis3(8, 4.0);
    let f = ScalarField { n: g.len(), f: |x: &[f64]| c64::new((-x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0) };
    let centers: Vec<Vec<f64>> = g.points.iter().step_by(3).cloned().collect();
    let pou = build_partition(&g, &centers, 2.0).unwrap();
    let mut tails = Vec::new();
    for r in [1.0, 2.0, 3.0, 4.0, 8.0] {
        let keep: Vec<usize> = (0..pou.len()).filter(|&i| pou.points[i].iter().map(|v| v * v).sum::<f64>().sqrt() > r).collect();
        let tail = PartitionOfUnity {
            n: pou.n,
            cover: keep.iter().map(|&i| pou.cover[i].clone()).collect(),
            points: keep.iter().map(|&i| pou.points[i].clone()).collect(),
            alphas: keep.iter().map(|&i| pou.alphas[i].clone()).collect(),
        };
        tails.push(if tail.is_empty() { 0.0 } else { operator_integral(&f, &tail).max_abs() });
    }
    assert!(tails.windows(2).all(|w| w[1] <= w[0]), "{tails:?}");
    assert!(tails[3] < 1e-5 && tails[4] == 0.0, "{tails:?}");
}

#[test]
fn pullback_along_double_cover() {
    let n = 32;
    let base = ManifoldGrid::circle(n, false);
    let cover = ManifoldGrid::circle(2 * n, false);
    let pou = build_partition(&base, &even_centers(6), 1.4).unwrap();
    // θ ↦ 2θ sends cover point k to base point k mod n
    let pulled = PartitionOfUnity {
        n: 2 * n,
        cover: pou.cover.clone(),
        points: pou.points.clone(),
        alphas: pou
            .alphas
            .iter()
            .map(|a| {
                let d = a.dense(n);
                let idx: Vec<usize> = (0..2 * n).filter(|&k| d[k % n] > 0.0).collect();
                SparseFn { val: idx.iter().map(|&k| d[k % n]).collect(), idx }
            })
            .collect(),
    };
    assert!(pulled.sum_of_squares().iter().all(|s| (s - 1.0).abs() < 1e-12));
    let f = |x: &[f64]| c64::new(x[0].cos(), x[0].sin() * 0.5);
    let down = operator_integral(&ScalarField { n, f: &f }, &pou);
    let up = operator_integral(&ScalarField { n: 2 * n, f: &f }, &pulled);
    for k in 0..2 * n {
        assert_eq!(up.get(k, k), down.get(k % n, k % n));
    }
    assert_eq!(cover.len(), 2 * n);
}

#[test]
fn support_examples() {
    let n = 16;
    let g = ManifoldGrid::circle(n, false);
    let cells = grid_cells(&g, n);
    let diag = DiscreteOperator::real_diagonal(&(0..n).map(|i| i as f64 + 1.0).collect::<Vec<_>>());
    assert!(support_of(&diag, &cells, 1e-12).is_diagonal());
    let shift = DiscreteOperator::from_fn(n, |i, j| if j == (i + 1) % n { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
    let s = support_of(&shift, &cells, 1e-12);
    assert_eq!(s.pairs.len(), n);
    assert!(s.pairs.iter().all(|&(a, b)| b == (a + 1) % n));
    assert!(s.within_band(1, true) && !s.is_diagonal());
    assert!(support_of(&DiscreteOperator::zeros(n), &cells, 1e-12).pairs.is_empty());
}

fn circulant(n: usize, w: usize) -> DiscreteOperator {
    DiscreteOperator::from_fn(n, |i, j| {
        let d = (i + n - j) % n;
        let d = d.min(n - d);
        if d <= w {
            c64::new(1.0 / (2 * w + 1) as f64, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    })
}

#[test]
fn commutation_examples() {
    let n = 128;
    let g = ManifoldGrid::circle(n, false);
    let cells = grid_cells(&g, 32);
    let fs: Vec<Vec<f64>> = vec![g.points.iter().map(|p| p[0].sin()).collect(), g.points.iter().map(|p| p[0].cos()).collect()];
    let mult = DiscreteOperator::real_diagonal(&g.points.iter().map(|p| 1.0 + p[0].cos()).collect::<Vec<_>>());
    let r = diagonal_commutation_check(&mult, &fs, &cells, 1e-12);
    assert_eq!(r.max_commutator_norm, 0.0);
    assert!(r.diagonal_support);

    let h = TAU / n as f64;
    let norms: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&w| {
            let r = diagonal_commutation_check(&circulant(n, w), &fs, &cells, 1e-12);
            assert!(r.max_commutator_norm <= w as f64 * h, "{w}");
            r.max_commutator_norm
        })
        .collect();
    assert!(norms.windows(2).all(|p| (1.5..2.5).contains(&(p[1] / p[0]))), "{norms:?}");

    let far = DiscreteOperator::from_fn(n, |i, j| if i == 10 && j == 74 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
    let r = diagonal_commutation_check(&far, &fs, &cells, 1e-12);
    assert!(r.max_commutator_norm > 0.5);
    assert!(!r.diagonal_support);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn norm_bound(seed in 0u64..10_000, k in 3usize..14, jitter in 0.0f64..0.3) {
        let n = 32;
        let g = ManifoldGrid::circle(n, false);
        let mut rng = stream(seed, 2);
        let spacing = TAU / k as f64;
        let centers: Vec<Vec<f64>> = (0..k).map(|i| vec![spacing * (i as f64 + uniform(&mut rng, -jitter, jitter))]).collect();
        let pou = build_partition(&g, &centers, 0.8 * spacing + 0.3).unwrap();
        let f = rotating_field(n, seed);
        let norm = operator_integral(&f, &pou).norm();
        prop_assert!(norm <= sup_field_norm(&f, &pou) * (1.0 + 1e-12));
        let adj = operator_integral(&AdjointField(&f), &pou);
        prop_assert_eq!(adj.max_abs_diff(&operator_integral(&f, &pou).adjoint()), 0.0);
    }

    #[test]
    fn partitions_normalize(k in 1usize..20, r in 0.6f64..3.0) {
        let g = ManifoldGrid::circle(64, false);
        let spacing = TAU / k as f64;
        match build_partition(&g, &even_centers(k), r * spacing) {
            Ok(p) => prop_assert!(p.sum_of_squares().iter().all(|s| (s - 1.0).abs() <= 1e-12)),
            Err(OpintError::UncoveredPoint(_)) => prop_assert!(r * spacing <= 0.5 * spacing + TAU / 64.0),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
