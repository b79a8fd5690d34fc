//! Fredholm index on grids: h-ellipticity, the bounded transform, the
//! Calderón trace formula on Hardy compressions and the winding oracle.

use crate::operator::{c64, rank_budget, DiscreteOperator};
use crate::rng::{complex_normal, ChaCha8Rng};
use crate::symbol::{classify_order, shell_samples, fft_nd, OrderClass, Symbol, SymbolError};
use faer::Mat;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("symbol is not self-adjoint (defect {0:e})")]
    NotSelfAdjoint(f64),
    #[error("operator is not symmetric (defect {0:e})")]
    NotSymmetric(f64),
    #[error("quadrature did not converge after {0} subdivisions")]
    QuadratureFail(usize),
    #[error("remainders are not smoothing: tail ratio {0:e}")]
    NotAlmostInvertible(f64),
    #[error("symbol vanishes on the contour (min |σ| = {0:e})")]
    SymbolVanishes(f64),
    #[error("path leaves the Fredholm operators at t = {0}")]
    PathLeavesFredholm(f64),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Residual above which no verdict is issued.
pub const VERDICT_RESIDUAL: f64 = 0.05;

/// Tail ratio s_{r+1}/max(1, s_1) of the remainders below which they count as smoothing.
pub const SMOOTHING_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexReport {
    pub analytic: f64,
    pub rounded: i64,
    pub residual: f64,
    pub topological: Option<i64>,
    /// (grid n, analytic index) per ladder level, coarse to fine.
    pub ladder: Vec<(usize, f64)>,
}

impl IndexReport {
    fn from_analytic(analytic: f64) -> Self {
        let rounded = analytic.round() as i64;
        Self { analytic, rounded, residual: (analytic - rounded as f64).abs(), topological: None, ladder: Vec::new() }
    }

    /// `None` when the residual is too large to round.
    pub fn verdict(&self) -> Option<bool> {
        if self.residual > VERDICT_RESIDUAL {
            return None;
        }
        self.topological.map(|t| t == self.rounded)
    }
}

#[derive(Clone, Debug)]
pub struct HEllipticityReport {
    /// (shell radius, max ‖σ² − 1‖ over the shell and base points).
    pub shell_defects: Vec<(f64, f64)>,
    pub class: OrderClass,
    pub pass: bool,
}

/// σ² − 1 must be of negative order.
pub fn h_elliptic_check(sym: &Symbol, points: &[Vec<f64>], xi_dim: usize, horizon: f64) -> Result<HEllipticityReport, IndexError> {
    let shells = shell_samples(xi_dim, horizon, 4);
    let adj = sym.adjoint();
    let mut sa = 0.0f64;
    for x in points {
        for xi in shells.iter().flatten() {
            let d = &sym.eval(x, xi) - &adj.eval(x, xi);
            sa = sa.max(d.norm_l2());
        }
    }
    if sa > 1e-10 {
        return Err(IndexError::NotSelfAdjoint(sa));
    }
    let sq = sym.product(sym).minus_identity();
    let shell_defects = shells
        .iter()
        .map(|s| {
            let r = s.first().map(|xi| xi.iter().map(|v| v * v).sum::<f64>().sqrt()).unwrap_or(0.0);
            let m = points.iter().flat_map(|x| s.iter().map(|xi| sq.norm_at(x, xi))).fold(0.0, f64::max);
            (r, m)
        })
        .collect();
    let class = classify_order(&sq, points, xi_dim, horizon, None)?;
    let pass = matches!(class, OrderClass::Negative | OrderClass::StronglyNegative);
    Ok(HEllipticityReport { shell_defects, class, pass })
}

fn check_symmetric(d: &DiscreteOperator) -> Result<(), IndexError> {
    let defect = d.hermitian_defect();
    if defect > 1e-10 {
        return Err(IndexError::NotSymmetric(defect));
    }
    Ok(())
}

/// D(D² + 1)^{-1/2} by spectral calculus.
pub fn bounded_transform(d: &DiscreteOperator) -> Result<DiscreteOperator, IndexError> {
    check_symmetric(d)?;
    let (vals, u) = d.hermitian_eigen();
    let f: Vec<f64> = vals.iter().map(|l| l / (l * l + 1.0).sqrt()).collect();
    let n = d.dim();
    let uf = Mat::from_fn(n, n, |i, j| u[(i, j)] * f[j]);
    Ok(DiscreteOperator::from_mat(&uf * u.adjoint()))
}

#[derive(Clone, Debug)]
pub struct ResolventReport {
    pub defect: f64,
    pub intervals: usize,
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn scaled(m: &Mat<c64>, s: f64) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

/// Kronrod and Gauss estimates of ∫_a^b g on one interval.
fn gauss_kronrod(g: &impl Fn(f64) -> Mat<c64>, a: f64, b: f64) -> (Mat<c64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let f0 = g(c);
    let mut k = scaled(&f0, K15_WEIGHTS[7]);
    let mut gs = scaled(&f0, G7_WEIGHTS[3]);
    for i in 0..7 {
        let fp = g(c + h * GK_NODES[i]);
        let fm = g(c - h * GK_NODES[i]);
        let s = &fp + &fm;
        k += scaled(&s, K15_WEIGHTS[i]);
        if i % 2 == 1 {
            gs += scaled(&s, G7_WEIGHTS[i / 2]);
        }
    }
    let k = scaled(&k, h);
    let gs = scaled(&gs, h);
    let err = (&k - &gs).norm_l2();
    (k, err)
}

fn adaptive(g: &impl Fn(f64) -> Mat<c64>, tol: f64, max_intervals: usize) -> Result<(Mat<c64>, usize), IndexError> {
    let mut pending = vec![(0.0, 1.0)];
    let mut total: Option<Mat<c64>> = None;
    let mut intervals = 0;
    while let Some((a, b)) = pending.pop() {
        intervals += 1;
        if intervals > max_intervals {
            return Err(IndexError::QuadratureFail(max_intervals));
        }
        let (val, err) = gauss_kronrod(g, a, b);
        if err <= tol * (b - a) || b - a < 1e-12 {
            total = Some(match total {
                Some(t) => &t + &val,
                None => val,
            });
        } else {
            let m = 0.5 * (a + b);
            pending.push((m, b));
            pending.push((a, m));
        }
    }
    Ok((total.expect("at least one interval"), intervals))
}

/// ‖2/π ∫₀^∞ D(D² + λ² + 1)^{-1} dλ − D(D² + 1)^{-1/2}‖, integrating in
/// t = λ/(1 + λ) with adaptive Gauss–Kronrod.
pub fn resolvent_integral_check(d: &DiscreteOperator) -> Result<ResolventReport, IndexError> {
    check_symmetric(d)?;
    let n = d.dim();
    let d2 = &d.mat * &d.mat;
    // dλ/dt (D² + λ² + 1)^{-1} = ((1 − t)²(D² + 1) + t²)^{-1}
    let g = |t: f64| {
        let s = (1.0 - t) * (1.0 - t);
        let m = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { s + t * t } else { 0.0 };
            d2[(i, j)] * s + id
        });
        DiscreteOperator::from_mat(m).solve(&d.mat)
    };
    let (integral, intervals) = adaptive(&g, 1e-12, 20_000)?;
    let integral = scaled(&integral, 2.0 / PI);
    let bt = bounded_transform(d)?;
    let defect = DiscreteOperator::from_mat(&integral - &bt.mat).norm();
    Ok(ResolventReport { defect, intervals })
}

/// Fourier coefficients ĉ_k = (1/n) Σ_j c(θ_j) e^{−ikθ_j}, in FFT order.
pub fn fourier_coefficients(samples: &[c64]) -> Vec<c64> {
    let n = samples.len();
    let mut c = samples.to_vec();
    fft_nd(&mut c, n, 1, false);
    c.iter().map(|v| v / n as f64).collect()
}

/// Compression of multiplication by c onto the Fourier modes 0..n/2:
/// A_{jk} = ĉ_{j−k}.
pub fn hardy_compression(samples: &[c64]) -> DiscreteOperator {
    let n = samples.len();
    let c = fourier_coefficients(samples);
    DiscreteOperator::from_fn(n / 2, |j, k| c[(j + n - k) % n])
}

/// Weight 1 on the lower half of the m Hardy modes, away from the
/// truncation edge.
pub fn hardy_localizer(m: usize) -> Vec<f64> {
    (0..m).map(|j| if j < m / 2 { 1.0 } else { 0.0 }).collect()
}

/// Σ_j loc_j X_jj.
pub fn localized_trace(x: &DiscreteOperator, loc: &[f64]) -> c64 {
    loc.iter().enumerate().map(|(j, &w)| x.get(j, j) * w).sum()
}

fn remainder_tail(r: &DiscreteOperator) -> f64 {
    let sv = r.singular_values();
    let top = sv.first().copied().unwrap_or(0.0).max(1.0);
    sv.get(rank_budget(r.dim())).copied().unwrap_or(0.0) / top
}

/// Tr_loc(1 − PA) − Tr_loc(1 − AP). The localizer keeps the trace away from
/// the artificial edge of the truncation, on which the full traces cancel.
pub fn fredholm_index_calderon(a: &DiscreteOperator, p: &DiscreteOperator, loc: &[f64]) -> Result<IndexReport, IndexError> {
    let id = DiscreteOperator::identity(a.dim());
    let r = &id - &(p * a);
    let s = &id - &(a * p);
    let tail = remainder_tail(&r).max(remainder_tail(&s));
    if tail > SMOOTHING_TOL {
        return Err(IndexError::NotAlmostInvertible(tail));
    }
    let analytic = (localized_trace(&r, loc) - localized_trace(&s, loc)).re;
    Ok(IndexReport::from_analytic(analytic))
}

/// Localized kernel and cokernel dimensions of the Hardy shift.
#[derive(Clone, Debug, PartialEq)]
pub struct SignPin {
    pub kernel: f64,
    pub cokernel: f64,
    pub calderon: f64,
    /// Factor taking the Calderón value to dim ker − dim coker.
    pub sign: f64,
}

/// Pins the sign convention on the m-mode Hardy compression of e^{iθ}.
pub fn shift_sign_pin(m: usize) -> SignPin {
    let n = 2 * m;
    let samples: Vec<c64> = (0..n).map(|j| c64::cis(TAU * j as f64 / n as f64)).collect();
    let a = hardy_compression(&samples);
    let loc = hardy_localizer(m);
    let svd = a.mat.svd().expect("singular value decomposition");
    let (u, v) = (svd.U(), svd.V());
    let localized = |q: faer::MatRef<'_, c64>, col: usize| -> f64 { (0..m).map(|i| loc[i] * q[(i, col)].norm_sqr()).sum() };
    let (mut kernel, mut cokernel) = (0.0, 0.0);
    for k in 0..m {
        if svd.S()[k].re < 1e-8 {
            kernel += localized(v, k);
            cokernel += localized(u, k);
        }
    }
    let calderon = fredholm_index_calderon(&a, &a.adjoint(), &loc).expect("shift is Fredholm").analytic;
    let sign = ((kernel - cokernel).round() / calderon.round()).signum();
    SignPin { kernel, cokernel, calderon, sign }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindingReport {
    pub winding: i64,
    pub raw: f64,
    pub residual: f64,
}

/// (1/2π) × total argument increment around the closed sampled contour.
pub fn winding_number(samples: &[c64]) -> Result<WindingReport, IndexError> {
    let top = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let min = samples.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * top.max(1.0)) {
        return Err(IndexError::SymbolVanishes(min));
    }
    let n = samples.len();
    let raw = (0..n).map(|j| (samples[(j + 1) % n] / samples[j]).arg()).sum::<f64>() / TAU;
    let winding = raw.round() as i64;
    Ok(WindingReport { winding, raw, residual: (raw - winding as f64).abs() })
}

/// Contour samples c(θ_j) = σ(θ_j, ξ₊) at the positive frequency ξ₊ = n/4.
pub fn angular_samples(sym: &Symbol, n: usize) -> Vec<c64> {
    let xi = [(n / 4) as f64];
    (0..n).map(|j| sym.value(&[TAU * j as f64 / n as f64], &xi)).collect()
}

/// Calderón index of the Hardy compression of c with parametrix the
/// compression of 1/c, pinned by the shift, against −winding(c).
pub fn toeplitz_index(samples: &[c64]) -> Result<IndexReport, IndexError> {
    let w = winding_number(samples)?;
    let inv: Vec<c64> = samples.iter().map(|v| v.inv()).collect();
    let a = hardy_compression(samples);
    let p = hardy_compression(&inv);
    let m = a.dim();
    let pin = shift_sign_pin(m);
    let mut report = fredholm_index_calderon(&a, &p, &hardy_localizer(m))?;
    report = IndexReport::from_analytic(pin.sign * report.analytic);
    report.topological = Some(-w.winding);
    Ok(report)
}

/// `toeplitz_index` on each grid of the ladder; the report is the finest level.
pub fn toeplitz_index_ladder(sym: &Symbol, grids: &[usize]) -> Result<IndexReport, IndexError> {
    let mut ladder = Vec::with_capacity(grids.len());
    let mut last = None;
    for &n in grids {
        let r = toeplitz_index(&angular_samples(sym, n))?;
        ladder.push((n, r.analytic));
        last = Some(r);
    }
    let mut report = last.expect("nonempty ladder");
    report.ladder = ladder;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct HomotopyReport {
    /// (t, analytic index) along the path.
    pub path: Vec<(f64, f64)>,
    pub constant: bool,
}

/// Random rank-`rank` operator of norm ≈ `scale` supported on the localized
/// block.
pub fn localized_finite_rank(rng: &mut ChaCha8Rng, loc: &[f64], rank: usize, scale: f64) -> DiscreteOperator {
    let m = loc.len();
    let mut draw = || Mat::from_fn(m, rank, |i, _| if loc[i] > 0.5 { complex_normal(rng) } else { c64::new(0.0, 0.0) });
    let u = draw();
    let v = draw();
    let r = DiscreteOperator::from_mat(&u * v.adjoint());
    let norm = r.norm();
    if norm == 0.0 {
        return r;
    }
    r.scale(c64::new(scale / norm, 0.0))
}

/// Index along A + tR for `steps + 1` equally spaced t ∈ [0, 1], with the
/// parametrix held fixed.
pub fn homotopy_invariance_probe(
    a: &DiscreteOperator,
    p: &DiscreteOperator,
    loc: &[f64],
    r: &DiscreteOperator,
    steps: usize,
) -> Result<HomotopyReport, IndexError> {
    let mut path = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let t = s as f64 / steps.max(1) as f64;
        let at = a + &r.scale(c64::new(t, 0.0));
        let rep = fredholm_index_calderon(&at, p, loc).map_err(|e| match e {
            IndexError::NotAlmostInvertible(_) => IndexError::PathLeavesFredholm(t),
            e => e,
        })?;
        path.push((t, rep.analytic));
    }
    let base = path[0].1.round();
    let constant = path.iter().all(|&(_, v)| (v - base).abs() <= VERDICT_RESIDUAL);
    Ok(HomotopyReport { path, constant })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_pin_is_minus_one() {
        let pin = shift_sign_pin(64);
        assert!((pin.kernel - 0.0).abs() < 1e-9);
        assert!((pin.cokernel - 1.0).abs() < 1e-9);
        assert_eq!(pin.sign, 1.0);
    }

    #[test]
    fn winding_of_constant() {
        let s = vec![c64::new(2.0, 0.0); 16];
        assert_eq!(winding_number(&s).unwrap().winding, 0);
        assert!(matches!(winding_number(&[c64::new(0.0, 0.0); 4]), Err(IndexError::SymbolVanishes(_))));
    }
}
