//! Riemann operator integration over partitions of unity.

use crate::geometry::ManifoldGrid;
use crate::operator::{c64, rank_budget, DiscreteOperator};
use crate::profile::bump;
use faer::Mat;
use rayon::prelude::*;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpintError {
    #[error("grid point {0} is not covered by any ball")]
    UncoveredPoint(usize),
    #[error("ε = {eps} needs radius {radius:.4} below the grid resolution {resolution:.4}")]
    EpsilonTooSmall { eps: f64, radius: f64, resolution: f64 },
}

/// Nonnegative grid function stored on its support.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFn {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseFn {
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            d[i] = v;
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Partition of unity Σ α_i² = 1 subordinate to a cover, with sample points.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub n: usize,
    pub cover: Vec<Ball>,
    /// Sample point x_i for each piece.
    pub points: Vec<Vec<f64>>,
    pub alphas: Vec<SparseFn>,
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Σ α_i² at every grid point.
    pub fn sum_of_squares(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for a in &self.alphas {
            for (&i, &v) in a.idx.iter().zip(&a.val) {
                s[i] += v * v;
            }
        }
        s
    }

    /// Largest number of pieces that are nonzero at a single point.
    pub fn overlap_count(&self) -> usize {
        let mut c = vec![0usize; self.n];
        for a in &self.alphas {
            for (&i, &v) in a.idx.iter().zip(&a.val) {
                if v > 0.0 {
                    c[i] += 1;
                }
            }
        }
        c.into_iter().max().unwrap_or(0)
    }

    /// The refinement γ_ij = α_i β_j with sample points x_i.
    pub fn refine(&self, other: &PartitionOfUnity) -> PartitionOfUnity {
        let mut cover = Vec::new();
        let mut points = Vec::new();
        let mut alphas = Vec::new();
        let dense: Vec<Vec<f64>> = other.alphas.iter().map(|b| b.dense(self.n)).collect();
        for (i, a) in self.alphas.iter().enumerate() {
            for (j, b) in dense.iter().enumerate() {
                let mut idx = Vec::new();
                let mut val = Vec::new();
                for (&k, &v) in a.idx.iter().zip(&a.val) {
                    let g = v * b[k];
                    if g > 0.0 {
                        idx.push(k);
                        val.push(g);
                    }
                }
                if !idx.is_empty() {
                    cover.push(Ball {
                        center: self.cover[i].center.clone(),
                        radius: self.cover[i].radius.min(other.cover[j].radius),
                    });
                    points.push(self.points[i].clone());
                    alphas.push(SparseFn { idx, val });
                }
            }
        }
        PartitionOfUnity { n: self.n, cover, points, alphas }
    }
}

/// α_i = bump_i / √(Σ_j bump_j²) with bump_i = bump(d(·, x_i)/r).
pub fn build_partition(grid: &ManifoldGrid, centers: &[Vec<f64>], radius: f64) -> Result<PartitionOfUnity, OpintError> {
    let n = grid.len();
    let bumps: Vec<SparseFn> = centers
        .iter()
        .map(|c| {
            let mut idx = Vec::new();
            let mut val = Vec::new();
            for (k, p) in grid.points.iter().enumerate() {
                let b = bump(grid.chart_distance(c, p) / radius);
                if b > 0.0 {
                    idx.push(k);
                    val.push(b);
                }
            }
            SparseFn { idx, val }
        })
        .collect();
    let mut s = vec![0.0; n];
    for b in &bumps {
        for (&i, &v) in b.idx.iter().zip(&b.val) {
            s[i] += v * v;
        }
    }
    if let Some(k) = s.iter().position(|&v| v == 0.0) {
        return Err(OpintError::UncoveredPoint(k));
    }
    let norm: Vec<f64> = s.iter().map(|v| v.sqrt()).collect();
    let alphas = bumps
        .into_iter()
        .map(|b| SparseFn { val: b.idx.iter().zip(&b.val).map(|(&i, &v)| v / norm[i]).collect(), idx: b.idx })
        .collect();
    Ok(PartitionOfUnity {
        n,
        cover: centers.iter().map(|c| Ball { center: c.clone(), radius }).collect(),
        points: centers.to_vec(),
        alphas,
    })
}

/// A bounded field x ↦ F(x) of operators on the ambient grid space.
pub trait OperatorField: Sync {
    fn dim(&self) -> usize;

    /// F(x) restricted to `idx` × `idx`.
    fn block(&self, x: &[f64], idx: &[usize]) -> Mat<c64>;

    fn at(&self, x: &[f64]) -> DiscreteOperator {
        let idx: Vec<usize> = (0..self.dim()).collect();
        DiscreteOperator::from_mat(self.block(x, &idx))
    }

    /// The quantity whose smallness defines an ε-covering, ‖F(x) − F(y)‖ by default.
    fn variation(&self, x: &[f64], y: &[f64]) -> f64 {
        (&self.at(x) - &self.at(y)).norm()
    }
}

/// Field given by a closure returning full operators.
pub struct FnField<F> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> DiscreteOperator + Sync> OperatorField for FnField<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn block(&self, x: &[f64], idx: &[usize]) -> Mat<c64> {
        (self.f)(x).block(idx)
    }

    fn at(&self, x: &[f64]) -> DiscreteOperator {
        (self.f)(x)
    }
}

/// Scalar field F(x) = f(x)·1.
pub struct ScalarField<F> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> c64 + Sync> OperatorField for ScalarField<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn block(&self, x: &[f64], idx: &[usize]) -> Mat<c64> {
        let v = (self.f)(x);
        Mat::from_fn(idx.len(), idx.len(), |a, b| if a == b { v } else { c64::new(0.0, 0.0) })
    }

    fn variation(&self, x: &[f64], y: &[f64]) -> f64 {
        ((self.f)(x) - (self.f)(y)).norm()
    }
}

/// Pointwise adjoint field.
pub struct AdjointField<'a, F: ?Sized>(pub &'a F);

impl<F: OperatorField + ?Sized> OperatorField for AdjointField<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn block(&self, x: &[f64], idx: &[usize]) -> Mat<c64> {
        self.0.block(x, idx).adjoint().to_owned()
    }

    fn variation(&self, x: &[f64], y: &[f64]) -> f64 {
        self.0.variation(x, y)
    }
}

/// Pointwise product field F₁(x)F₂(x).
pub struct ProductField<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: OperatorField + ?Sized, B: OperatorField + ?Sized> OperatorField for ProductField<'_, A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn block(&self, x: &[f64], idx: &[usize]) -> Mat<c64> {
        let p = &self.0.at(x) * &self.1.at(x);
        p.block(idx)
    }
}

/// Σ_i α_i F(x_i) α_i as a dense matrix.
///
/// Blocks are computed in parallel and summed in piece order, so the result
/// is bit-identical for any thread count.
pub fn operator_integral<F: OperatorField + ?Sized>(field: &F, pou: &PartitionOfUnity) -> DiscreteOperator {
    let n = field.dim();
    let mut out = Mat::<c64>::zeros(n, n);
    let chunk = rayon::current_num_threads().max(1) * 4;
    for start in (0..pou.len()).step_by(chunk) {
        let end = (start + chunk).min(pou.len());
        let blocks: Vec<Mat<c64>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let a = &pou.alphas[i];
                let b = field.block(&pou.points[i], &a.idx);
                Mat::from_fn(a.idx.len(), a.idx.len(), |r, c| b[(r, c)] * (a.val[r] * a.val[c]))
            })
            .collect();
        for (i, b) in (start..end).zip(blocks) {
            let idx = &pou.alphas[i].idx;
            for (c, &gc) in idx.iter().enumerate() {
                for (r, &gr) in idx.iter().enumerate() {
                    out[(gr, gc)] += b[(r, c)];
                }
            }
        }
    }
    DiscreteOperator::from_mat(out)
}

/// ε-cover: ball centers on a lattice with spacing at most `radius`.
#[derive(Clone, Debug)]
pub struct EpsilonCover {
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
    /// Measured Lipschitz constant of the field's variation at grid scale.
    pub lipschitz: f64,
    /// Largest measured variation across a ball diameter.
    pub omega: f64,
}

/// Measured modulus of continuity: largest variation over probe pairs at
/// chart distance `delta` along each axis.
pub fn measure_modulus<F: OperatorField + ?Sized>(field: &F, grid: &ManifoldGrid, delta: f64, probes: usize) -> f64 {
    let step = (grid.len() / probes.max(1)).max(1);
    let starts: Vec<&Vec<f64>> = grid.points.iter().step_by(step).collect();
    starts
        .par_iter()
        .map(|x| {
            (0..grid.dim)
                .map(|axis| {
                    let mut y = (*x).clone();
                    y[axis] += delta;
                    let y = grid.wrap_point(&y);
                    field.variation(x, &y)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Chooses a cover on which the field varies by at most ε per ball.
///
/// `phase` ∈ [0, 1) shifts the center lattice by a fraction of its spacing.
pub fn epsilon_cover<F: OperatorField + ?Sized>(
    field: &F,
    grid: &ManifoldGrid,
    eps: f64,
    phase: f64,
) -> Result<EpsilonCover, OpintError> {
    let h = grid.spacing;
    if eps <= 0.0 || eps.is_nan() {
        return Err(OpintError::EpsilonTooSmall { eps, radius: 0.0, resolution: h });
    }
    let probes = 16;
    let lipschitz = measure_modulus(field, grid, h, probes) / h;
    let extent = match grid.period() {
        Some(p) => p,
        None => grid.n as f64 * h,
    };
    if lipschitz == 0.0 {
        let center = grid.points[0].clone();
        return Ok(EpsilonCover { centers: vec![center], radius: 2.0 * extent * (grid.dim as f64).sqrt(), lipschitz, omega: 0.0 });
    }
    let mut radius = eps / (2.0 * lipschitz);
    let mut omega = f64::INFINITY;
    for _ in 0..40 {
        if radius < h {
            break;
        }
        omega = measure_modulus(field, grid, 2.0 * radius, probes);
        if omega <= eps {
            break;
        }
        radius *= 0.5;
    }
    if radius < h || omega > eps {
        return Err(OpintError::EpsilonTooSmall { eps, radius, resolution: h });
    }
    Ok(EpsilonCover { centers: lattice_centers(grid, radius, phase), radius, lipschitz, omega })
}

/// Lattice of centers with spacing ≤ `spacing` covering the chart domain.
pub fn lattice_centers(grid: &ManifoldGrid, spacing: f64, phase: f64) -> Vec<Vec<f64>> {
    let (lo, extent) = match grid.period() {
        Some(p) => (0.0, p),
        None => {
            let lo = grid.points[0][0] - 0.5 * grid.spacing;
            (lo, grid.n as f64 * grid.spacing)
        }
    };
    let k = (extent / spacing).ceil().max(1.0) as usize;
    let s = extent / k as f64;
    let axis: Vec<f64> = (0..k).map(|i| lo + (i as f64 + phase) * s).collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..grid.dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

/// Result of comparing integral sums over two partitions.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    /// Localized rank-truncated ‖Σ₁ − Σ₂‖.
    pub defect: f64,
    /// Measured compact-correction term: localized rank-truncated
    /// ‖Σ₁ − R₁‖ + ‖Σ₂ − R₂‖ where R are the sums over the common refinement.
    pub eta: f64,
    pub rank: usize,
}

/// Compares the integral sums of two partitions after localization by `a`.
pub fn integral_stability<F: OperatorField + ?Sized>(
    field: &F,
    pou1: &PartitionOfUnity,
    pou2: &PartitionOfUnity,
    a: &[f64],
) -> StabilityReport {
    let rank = rank_budget(field.dim());
    let s1 = operator_integral(field, pou1);
    let s2 = operator_integral(field, pou2);
    let r1 = operator_integral(field, &pou1.refine(pou2));
    let r2 = operator_integral(field, &pou2.refine(pou1));
    let defect = (&s1 - &s2).left_mul_diag(a).truncated_norm(rank);
    let eta = (&s1 - &r1).left_mul_diag(a).truncated_norm(rank) + (&s2 - &r2).left_mul_diag(a).truncated_norm(rank);
    StabilityReport { defect, eta, rank }
}

/// Cell-level support of an operator: pairs of cells whose block is not negligible.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportSet {
    pub cells: usize,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl SupportSet {
    pub fn is_diagonal(&self) -> bool {
        self.pairs.iter().all(|(a, b)| a == b)
    }

    /// Whether every pair is within `band` cells of the diagonal (cyclically when `cyclic`).
    pub fn within_band(&self, band: usize, cyclic: bool) -> bool {
        self.pairs.iter().all(|&(a, b)| cell_gap(a, b, self.cells, cyclic) <= band)
    }

    /// Largest fiber of either projection.
    pub fn max_fiber(&self) -> usize {
        let mut rows = vec![0usize; self.cells];
        let mut cols = vec![0usize; self.cells];
        for &(a, b) in &self.pairs {
            rows[a] += 1;
            cols[b] += 1;
        }
        rows.into_iter().chain(cols).max().unwrap_or(0)
    }

    /// Properly supported: both projections have fibers smaller than the whole space.
    pub fn is_proper(&self) -> bool {
        self.max_fiber() < self.cells
    }

    pub fn is_subset(&self, other: &SupportSet) -> bool {
        self.pairs.is_subset(&other.pairs)
    }
}

fn cell_gap(a: usize, b: usize, cells: usize, cyclic: bool) -> usize {
    let d = a.abs_diff(b);
    if cyclic {
        d.min(cells - d)
    } else {
        d
    }
}

/// Assigns grid points to `per_axis`^dim cells of the chart box.
pub fn grid_cells(grid: &ManifoldGrid, per_axis: usize) -> Vec<usize> {
    // periodic samples sit on cell edges, so bin them from half a step back
    let (lo, extent) = match grid.period() {
        Some(p) => (-0.5 * grid.spacing, p),
        None => (grid.points[0][0] - 0.5 * grid.spacing, grid.n as f64 * grid.spacing),
    };
    grid.points
        .iter()
        .map(|p| {
            p.iter().fold(0usize, |acc, &c| {
                let k = (((c - lo) / extent * per_axis as f64).floor() as isize).clamp(0, per_axis as isize - 1) as usize;
                acc * per_axis + k
            })
        })
        .collect()
}

/// Support of `t` at the cell level: block norm > tol·‖T‖.
pub fn support_of(t: &DiscreteOperator, cell_of: &[usize], tol: f64) -> SupportSet {
    let cells = cell_of.iter().copied().max().map_or(0, |m| m + 1);
    let scale = t.max_abs();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for (i, &c) in cell_of.iter().enumerate() {
        members[c].push(i);
    }
    let mut pairs = BTreeSet::new();
    if scale == 0.0 {
        return SupportSet { cells, pairs };
    }
    for (a, ra) in members.iter().enumerate() {
        for (b, rb) in members.iter().enumerate() {
            let mut fro = 0.0;
            for &i in ra {
                for &j in rb {
                    fro += t.get(i, j).norm_sqr();
                }
            }
            // The Frobenius norm of a block bounds its spectral norm from above.
            if fro.sqrt() > tol * scale {
                pairs.insert((a, b));
            }
        }
    }
    SupportSet { cells, pairs }
}

/// Cell pairs covered by ∪ supp(α_i) × supp(α_i).
pub fn partition_squares(pou: &PartitionOfUnity, cell_of: &[usize]) -> SupportSet {
    let cells = cell_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut pairs = BTreeSet::new();
    for a in &pou.alphas {
        let cs: BTreeSet<usize> = a.idx.iter().map(|&i| cell_of[i]).collect();
        for &x in &cs {
            for &y in &cs {
                pairs.insert((x, y));
            }
        }
    }
    SupportSet { cells, pairs }
}

/// Report of [T, a_j] for a family of functions against the support verdict.
#[derive(Clone, Debug)]
pub struct CommutationReport {
    pub max_commutator_norm: f64,
    pub max_commutator_tail: f64,
    pub diagonal_support: bool,
}

pub fn diagonal_commutation_check(t: &DiscreteOperator, functions: &[Vec<f64>], cell_of: &[usize], tol: f64) -> CommutationReport {
    let rank = rank_budget(t.dim());
    let mut max_norm = 0.0f64;
    let mut max_tail = 0.0f64;
    for a in functions {
        let sv = t.commutator_with_diag(a).singular_values();
        max_norm = max_norm.max(sv[0]);
        max_tail = max_tail.max(sv.get(rank).copied().unwrap_or(0.0));
    }
    let support = support_of(t, cell_of, tol);
    CommutationReport { max_commutator_norm: max_norm, max_commutator_tail: max_tail, diagonal_support: support.is_diagonal() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ball_is_one() {
        let g = ManifoldGrid::circle(32, false);
        let p = build_partition(&g, &[vec![0.0]], 100.0).unwrap();
        assert!(p.alphas[0].val.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn uncovered_point_detected() {
        let g = ManifoldGrid::circle(32, false);
        assert!(matches!(build_partition(&g, &[vec![0.0]], 0.5), Err(OpintError::UncoveredPoint(_))));
    }

    #[test]
    fn lattice_spacing_bounded() {
        let g = ManifoldGrid::circle(64, false);
        let c = lattice_centers(&g, 0.3, 0.0);
        assert_eq!(c.len(), (std::f64::consts::TAU / 0.3).ceil() as usize);
    }
}
