//! Compactness proxies: commutator spectra, Schur bounds, essential norms and
//! the off-identity integrability check for convolution kernels.

use crate::liegroup::{convolution_operator, homogeneous_norm, ConvolutionOperator, GroupGrid, GroupKernel, LieError};
use crate::operator::{c64, rank_budget, singular_values, DiscreteOperator};
use crate::symbol::{fft_nd, freq};
use faer::Mat;
use rayon::prelude::*;

/// Singular values of an operator with tail ratios s_{r+1}/s_1.
#[derive(Clone, Debug)]
pub struct CompactnessReport {
    pub n: usize,
    pub singular_values: Vec<f64>,
}

impl CompactnessReport {
    pub fn new(op: &DiscreteOperator) -> Self {
        Self { n: op.dim(), singular_values: op.singular_values() }
    }

    pub fn s1(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn tail_ratio(&self, r: usize) -> f64 {
        let s1 = self.s1();
        if s1 == 0.0 {
            return 0.0;
        }
        (self.singular_values.get(r).copied().unwrap_or(0.0) / s1).clamp(0.0, 1.0)
    }

    /// Tail ratios at r = N/16, N/8, N/4.
    pub fn standard_ratios(&self) -> [(usize, f64); 3] {
        let n = self.n;
        [n.div_ceil(16), rank_budget(n), n.div_ceil(4)].map(|r| (r, self.tail_ratio(r)))
    }

    pub fn proxy_ratio(&self) -> f64 {
        self.tail_ratio(rank_budget(self.n))
    }
}

/// SVD of [F, diag(a)].
pub fn commutator_report(f: &DiscreteOperator, a: &[f64]) -> CompactnessReport {
    CompactnessReport::new(&f.commutator_with_diag(a))
}

/// Below this tail ratio an operator counts as numerically finite rank.
pub const FINITE_RANK_FLOOR: f64 = 1e-12;

/// Verdict over a refinement ladder of reports.
#[derive(Clone, Debug)]
pub struct LadderVerdict {
    pub trace: Vec<(usize, f64)>,
    pub pass: bool,
}

/// Passes when the finest tail_ratio(N/8) ≤ `threshold` and each doubling
/// improves it by ≥ `improvement`, unless the ratio already sits at the
/// finite-rank floor. `scale` bounds ‖F‖‖a‖ so vanishing commutators pass.
pub fn ladder_verdict(reports: &[CompactnessReport], scale: f64, threshold: f64, improvement: f64) -> LadderVerdict {
    let trace: Vec<(usize, f64)> = reports.iter().map(|r| (r.n, r.proxy_ratio())).collect();
    let negligible = |r: &CompactnessReport| r.s1() <= 1e-10 * scale.max(f64::MIN_POSITIVE);
    let settled = |i: usize| negligible(&reports[i]) || trace[i].1 <= FINITE_RANK_FLOOR;
    let last = trace.len() - 1;
    let mut pass = settled(last) || trace[last].1 <= threshold;
    for i in 1..trace.len() {
        if settled(i) {
            continue;
        }
        if trace[i - 1].1 < improvement * trace[i].1 {
            pass = false;
        }
    }
    LadderVerdict { trace, pass }
}

/// Schur test bound with the row and column sums it is built from.
#[derive(Clone, Debug)]
pub struct SchurReport {
    pub bound: f64,
    pub row_sums: Vec<f64>,
    pub col_sums: Vec<f64>,
}

/// max(sup row sum, sup column sum) of |k|, which dominates the spectral norm.
pub fn schur_bound(k: &Mat<c64>) -> SchurReport {
    let (m, n) = (k.nrows(), k.ncols());
    let row_sums: Vec<f64> = (0..m).map(|i| (0..n).map(|j| k[(i, j)].norm()).sum()).collect();
    let col_sums: Vec<f64> = (0..n).map(|j| (0..m).map(|i| k[(i, j)].norm()).sum()).collect();
    let r = row_sums.iter().cloned().fold(0.0, f64::max);
    let c = col_sums.iter().cloned().fold(0.0, f64::max);
    SchurReport { bound: r.max(c), row_sums, col_sums }
}

/// k(ξ, η) = b(ξ − η)(f(ξ) − f(η)) on the frequency window |ξ|, |η| ≤ m.
pub fn commutator_kernel(m: i64, b: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64) -> Mat<c64> {
    let size = (2 * m + 1) as usize;
    Mat::from_fn(size, size, |i, j| {
        let xi = i as f64 - m as f64;
        let eta = j as f64 - m as f64;
        c64::new(b(xi - eta) * (f(xi) - f(eta)), 0.0)
    })
}

/// Circulant matrix of the Fourier multiplier f on the n-point circle grid.
pub fn fourier_multiplier(n: usize, f: impl Fn(f64) -> c64) -> DiscreteOperator {
    let mut col: Vec<c64> = (0..n).map(|k| f(freq(k, n))).collect();
    fft_nd(&mut col, n, 1, true);
    let col: Vec<c64> = col.iter().map(|v| v / n as f64).collect();
    DiscreteOperator::from_fn(n, |i, j| col[(i + n - j) % n])
}

#[derive(Clone, Debug)]
pub struct EssentialNormReport {
    pub truncated_norm: f64,
    pub outer_shell_max: f64,
    pub pass: bool,
}

/// Rank-truncated norm of the multiplier against max |f| on the outer shell
/// n/4 ≤ |k| < n/2.
pub fn essential_norm_estimate(n: usize, f: impl Fn(f64) -> c64 + Copy, tol: f64) -> EssentialNormReport {
    let op = fourier_multiplier(n, f);
    let truncated_norm = op.proxy_norm();
    let outer_shell_max = (0..n)
        .map(|k| freq(k, n))
        .filter(|k| k.abs() >= (n / 4) as f64)
        .map(|k| f(k).norm())
        .fold(0.0, f64::max);
    EssentialNormReport { truncated_norm, outer_shell_max, pass: truncated_norm <= outer_shell_max + tol }
}

/// ‖a F b‖ after rank truncation.
pub fn disjoint_support_defect(f: &DiscreteOperator, a: &[f64], b: &[f64]) -> f64 {
    f.left_mul_diag(a).right_mul_diag(b).proxy_norm()
}

/// L¹ masses of αk over nested windows, with the verdict.
#[derive(Clone, Debug)]
pub struct NonsingularReport {
    /// (window radius, Σ |α k| · cell).
    pub masses: Vec<(f64, f64)>,
    pub integrable: bool,
    /// Commutator report of the α-cut convolution against a localizer.
    pub localized: Option<CompactnessReport>,
}

fn integrable(masses: &[(f64, f64)]) -> bool {
    let m: Vec<f64> = masses.iter().map(|p| p.1).collect();
    let k = m.len();
    if m[k - 1] == 0.0 {
        return true;
    }
    let d_last = m[k - 1] - m[k - 2];
    let d_prev = if k >= 3 { m[k - 2] - m[k - 3] } else { f64::INFINITY };
    m.iter().all(|v| v.is_finite()) && d_last <= 0.25 * m[k - 1] && d_last <= d_prev
}

/// Group path: masses of α(‖g‖)k(g) over homogeneous balls of the given
/// radii on a lattice of spacing h.
pub fn nonsingular_check(
    grid_h: f64,
    algebra: crate::liegroup::GradedAlgebra,
    kernel: impl Fn(&[f64]) -> c64 + Sync,
    alpha: impl Fn(f64) -> f64 + Sync,
    radii: &[f64],
) -> Result<NonsingularReport, LieError> {
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let half: Vec<i64> = algebra
        .weights
        .iter()
        .map(|&w| match w {
            1 => (r_max / grid_h).ceil() as i64,
            _ => (0.25 * r_max * r_max / (0.5 * grid_h * grid_h)).ceil() as i64,
        })
        .collect();
    let grid = GroupGrid::new(algebra, grid_h, half)?;
    let cell = grid.haar_weight;
    let alg = &grid.algebra;
    let contributions: Vec<(f64, f64)> = grid
        .points
        .par_iter()
        .map(|g| {
            let r = homogeneous_norm(alg, g);
            (r, (kernel(g) * alpha(r)).norm() * cell)
        })
        .collect();
    let masses = radii
        .iter()
        .map(|&rad| (rad, contributions.iter().filter(|c| c.0 <= rad).map(|c| c.1).sum()))
        .collect::<Vec<_>>();
    Ok(NonsingularReport { integrable: integrable(&masses), masses, localized: None })
}

/// Commutator report of the α-cut convolution on a small window against a
/// localizer.
pub fn localized_convolution_report(
    grid: &GroupGrid,
    kernel: impl Fn(&[f64]) -> c64,
    alpha: impl Fn(f64) -> f64,
    reach: Vec<i64>,
    localizer: impl Fn(&[f64]) -> f64,
) -> Result<(ConvolutionOperator, CompactnessReport), LieError> {
    let alg = grid.algebra.clone();
    let k = GroupKernel::from_fn(grid, reach, |g| kernel(g) * alpha(homogeneous_norm(&alg, g)));
    let conv = convolution_operator(grid, &k)?;
    let core_idx = conv.interior_indices();
    let core = conv.core();
    let a: Vec<f64> = core_idx.iter().map(|&i| localizer(&grid.points[i])).collect();
    let report = commutator_report(&core, &a);
    Ok((conv, report))
}

/// Abelian path on the n-point circle: the kernel of the multiplier f
/// via inverse FFT, masses of α(|u|)k(u) over windows |u| ≤ radius.
pub fn nonsingular_check_abelian(n: usize, f: impl Fn(f64) -> c64, alpha: impl Fn(f64) -> f64, radii: &[f64]) -> NonsingularReport {
    let h = std::f64::consts::TAU / n as f64;
    let mut k: Vec<c64> = (0..n).map(|j| f(freq(j, n))).collect();
    fft_nd(&mut k, n, 1, true);
    let k: Vec<c64> = k.iter().map(|v| v / std::f64::consts::TAU).collect();
    let contributions: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let u = (freq(j, n) * h).abs();
            (u, (k[j] * alpha(u)).norm() * h)
        })
        .collect();
    let masses = radii
        .iter()
        .map(|&rad| (rad, contributions.iter().filter(|c| c.0 <= rad).map(|c| c.1).sum()))
        .collect::<Vec<_>>();
    NonsingularReport { integrable: integrable(&masses), masses, localized: None }
}

/// Spectral norm of a kernel matrix, for comparison with the Schur bound.
pub fn kernel_norm(k: &Mat<c64>) -> f64 {
    singular_values(k).first().copied().unwrap_or(0.0)
}
