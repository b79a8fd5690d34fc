//! The coarse construction: ν-cut cosymbol fibers transplanted through the
//! exponential charts and assembled with the operator integral.

use crate::geometry::{density_factor, log_map, GeometryError, ManifoldGrid};
use crate::operator::{c64, rank_budget, DiscreteOperator};
use crate::opint::{build_partition, lattice_centers, measure_modulus, operator_integral, OperatorField, OpintError, PartitionOfUnity};
use crate::profile::{bump, nu};
use crate::symbol::{fft_nd, freq, symbol_samples, Cosymbol, FiberKernel, Symbol};
use faer::Mat;
use rayon::prelude::*;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoarseError {
    #[error("ν radius {radius} exceeds the admissible ball radius {limit}")]
    WindowOverflow { radius: f64, limit: f64 },
    #[error("measured modulus {omega:.3e} at the partition scale exceeds {threshold:.3e}")]
    NormContinuityFail { omega: f64, threshold: f64 },
    #[error("cutoff half-width {width} exceeds the ν core {core}")]
    CutoffTooWide { width: f64, core: f64 },
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Opint(#[from] OpintError),
}

/// ν(t/r): 1 on [0, r/2], 0 beyond 2r/3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuCutoff {
    pub radius: f64,
}

impl NuCutoff {
    pub fn new(radius: f64) -> Self {
        Self { radius }
    }

    pub fn eval(&self, dist: f64) -> f64 {
        nu(dist / self.radius)
    }

    /// Radius of the support.
    pub fn support(&self) -> f64 {
        self.radius * 2.0 / 3.0
    }

    /// Radius of the plateau where ν = 1.
    pub fn core(&self) -> f64 {
        0.5 * self.radius
    }
}

/// Chart data of U_x: tangent coordinates, density factors and the measure
/// du = w·χ² that makes f ↦ f/χ unitary from L²(U_x) to L²(V_x).
#[derive(Clone, Debug)]
pub struct TransplantData {
    pub center: Vec<f64>,
    pub idx: Vec<usize>,
    /// Frame coordinates log_x(y).
    pub u: Vec<Vec<f64>>,
    pub chi: Vec<f64>,
    pub weight: Vec<f64>,
    pub du: Vec<f64>,
}

impl TransplantData {
    /// Points of `candidates` whose tangent coordinate lies within `radius`.
    pub fn new(grid: &ManifoldGrid, x: &[f64], radius: f64, candidates: Option<&[usize]>) -> Result<Self, CoarseError> {
        let limit = grid.ball_radius();
        if radius > limit * (1.0 + 1e-12) {
            return Err(CoarseError::WindowOverflow { radius, limit });
        }
        let all: Vec<usize>;
        let cand = match candidates {
            Some(c) => c,
            None => {
                all = (0..grid.len()).collect();
                &all
            }
        };
        // conformal factors are ≤ e^{a}, so a chart prefilter at 3r is safe
        let pre: Vec<usize> = cand
            .iter()
            .copied()
            .filter(|&k| grid.chart_distance(x, &grid.points[k]) < 3.0 * radius)
            .collect();
        let flat = grid.is_flat();
        let rows: Vec<Option<(usize, Vec<f64>, f64)>> = pre
            .par_iter()
            .map(|&k| {
                let y = &grid.points[k];
                let u = if flat { grid.chart_offset(x, y) } else { log_map(grid, x, y) };
                let r = u.iter().map(|a| a * a).sum::<f64>().sqrt();
                (r < radius).then(|| (k, u.clone(), if flat { 1.0 } else { density_factor(grid, x, &u) }))
            })
            .collect();
        let mut data = Self { center: x.to_vec(), idx: Vec::new(), u: Vec::new(), chi: Vec::new(), weight: Vec::new(), du: Vec::new() };
        for (k, u, chi) in rows.into_iter().flatten() {
            let w = grid.weights[k];
            data.idx.push(k);
            data.u.push(u);
            data.chi.push(chi);
            data.weight.push(w);
            data.du.push(w * chi * chi);
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// |‖f‖_{L²(U_x)} − ‖f/χ‖_{L²(V_x)}| / ‖f‖ for the grid function `f` on U_x.
    pub fn unitarity_defect(&self, f: &[c64]) -> f64 {
        let a: f64 = f.iter().zip(&self.weight).map(|(v, w)| v.norm_sqr() * w).sum();
        let b: f64 = f.iter().zip(&self.chi).zip(&self.du).map(|((v, c), d)| (v / c).norm_sqr() * d).sum();
        if a == 0.0 {
            return 0.0;
        }
        (a.sqrt() - b.sqrt()).abs() / a.sqrt()
    }
}

/// Fiber kernel of `cos` at `x` between the points of `data`, in the
/// weight-normalized basis: k(u_a − u_b)·√(du_a du_b).
fn kernel_block(cos: &Cosymbol, grid: &ManifoldGrid, data: &TransplantData) -> Mat<c64> {
    let m = data.len();
    let x = &data.center;
    if grid.is_flat() {
        let k = cos.fiber(x);
        let h = k.spacing();
        let off: Vec<Vec<i64>> = data.u.iter().map(|u| u.iter().map(|v| (v / h).round() as i64).collect()).collect();
        return Mat::from_fn(m, m, |a, b| {
            let d: Vec<i64> = off[a].iter().zip(&off[b]).map(|(p, q)| p - q).collect();
            k.get(&d) * (data.du[a] * data.du[b]).sqrt()
        });
    }
    let n = cos.n;
    let dim = cos.dim;
    let sigma = symbol_samples(&cos.symbol, x, n, dim);
    let freqs: Vec<Vec<f64>> = match dim {
        1 => (0..n).map(|k| vec![freq(k, n)]).collect(),
        _ => (0..n * n).map(|k| vec![freq(k / n, n), freq(k % n, n)]).collect(),
    };
    let e = Mat::<c64>::from_fn(m, freqs.len(), |a, k| {
        let ph: f64 = data.u[a].iter().zip(&freqs[k]).map(|(u, f)| u * f).sum();
        c64::cis(ph)
    });
    let s = TAU.powi(dim as i32).recip();
    // off-lattice samples: orthonormalize the frame so a delta fiber stays the identity
    let b = Mat::<c64>::from_fn(m, freqs.len(), |a, k| e[(a, k)] * (s * data.du[a]).sqrt());
    let g = inverse_sqrt(&(&b * b.adjoint()));
    let bt = &g * &b;
    let bs = Mat::<c64>::from_fn(m, freqs.len(), |a, k| bt[(a, k)] * sigma[k]);
    let raw = &bs * bt.adjoint();
    Mat::from_fn(m, m, |a, b| {
        let cut = match cos.cut {
            Some(r) => {
                let d = data.u[a].iter().zip(&data.u[b]).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                nu(d / r)
            }
            None => 1.0,
        };
        raw[(a, b)] * cut
    })
}

fn inverse_sqrt(gram: &Mat<c64>) -> Mat<c64> {
    let (vals, vecs) = DiscreteOperator::from_mat(gram.clone()).hermitian_eigen();
    let top = vals.iter().copied().fold(0.0, f64::max);
    let inv: Vec<f64> = vals.iter().map(|&v| if v > 1e-12 * top { v.sqrt().recip() } else { 0.0 }).collect();
    let m = vals.len();
    Mat::from_fn(m, m, |i, j| (0..m).map(|k| vecs[(i, k)] * inv[k] * vecs[(j, k)].conj()).sum())
}

/// Chart window: the ν support on flat models, the whole admissible ball otherwise.
fn window(grid: &ManifoldGrid, legs: &NuCutoff) -> f64 {
    if grid.is_flat() {
        legs.support()
    } else {
        grid.ball_radius()
    }
}

/// F(x) = ν_x σ̃_x ν_x transplanted into U_x, on the full grid.
pub fn transplant(cos: &Cosymbol, grid: &ManifoldGrid, x: &[f64], legs: &NuCutoff) -> Result<DiscreteOperator, CoarseError> {
    let limit = grid.ball_radius();
    if legs.radius > limit * (1.0 + 1e-12) {
        return Err(CoarseError::WindowOverflow { radius: legs.radius, limit });
    }
    let data = TransplantData::new(grid, x, window(grid, legs), None)?;
    let mut out = DiscreteOperator::zeros(grid.len());
    scatter_block(cos, grid, &data, legs, |a, b, v| out.mat[(a, b)] = v);
    Ok(out)
}

fn scatter_block(cos: &Cosymbol, grid: &ManifoldGrid, data: &TransplantData, legs: &NuCutoff, mut put: impl FnMut(usize, usize, c64)) {
    if data.is_empty() {
        return;
    }
    let kb = kernel_block(cos, grid, data);
    let nv: Vec<f64> = data.u.iter().map(|u| legs.eval(u.iter().map(|a| a * a).sum::<f64>().sqrt())).collect();
    for b in 0..data.len() {
        for a in 0..data.len() {
            put(data.idx[a], data.idx[b], kb[(a, b)] * (nv[a] * nv[b]));
        }
    }
}

/// x ↦ F(x) as an operator field for the integral.
pub struct TransplantedField<'a> {
    pub cos: &'a Cosymbol,
    pub grid: &'a ManifoldGrid,
    pub legs: NuCutoff,
}

impl OperatorField for TransplantedField<'_> {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn block(&self, x: &[f64], idx: &[usize]) -> Mat<c64> {
        let cand = if self.grid.is_flat() { Some(idx) } else { None };
        let data = TransplantData::new(self.grid, x, window(self.grid, &self.legs), cand).expect("ν radius checked at construction");
        let pos: std::collections::HashMap<usize, usize> = idx.iter().enumerate().map(|(p, &k)| (k, p)).collect();
        let mut out = Mat::zeros(idx.len(), idx.len());
        scatter_block(self.cos, self.grid, &data, &self.legs, |a, b, v| {
            if let (Some(&p), Some(&q)) = (pos.get(&a), pos.get(&b)) {
                out[(p, q)] = v;
            }
        });
        out
    }

    fn at(&self, x: &[f64]) -> DiscreteOperator {
        transplant(self.cos, self.grid, x, &self.legs).expect("ν radius checked at construction")
    }

    fn variation(&self, x: &[f64], y: &[f64]) -> f64 {
        self.cos.fiber_distance(x, y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub cosymbol: String,
    pub partition: String,
    pub grid: String,
}

#[derive(Clone, Debug)]
pub struct CoarseOperator {
    pub op: DiscreteOperator,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct QuantizeOptions {
    /// Largest admissible fiber modulus across a partition ball.
    pub continuity_threshold: Option<f64>,
}

/// ℱ = Σ_i α_i F(x_i) α_i.
pub fn quantize(
    cos: &Cosymbol,
    grid: &ManifoldGrid,
    pou: &PartitionOfUnity,
    legs: &NuCutoff,
    opts: QuantizeOptions,
) -> Result<CoarseOperator, CoarseError> {
    let limit = grid.ball_radius();
    if legs.radius > limit * (1.0 + 1e-12) {
        return Err(CoarseError::WindowOverflow { radius: legs.radius, limit });
    }
    let field = TransplantedField { cos, grid, legs: *legs };
    if let Some(threshold) = opts.continuity_threshold {
        let scale = pou.cover.iter().map(|b| b.radius).fold(0.0, f64::max);
        let omega = measure_modulus(&field, grid, 2.0 * scale, 16);
        if omega > threshold {
            return Err(CoarseError::NormContinuityFail { omega, threshold });
        }
    }
    let op = operator_integral(&field, pou);
    Ok(CoarseOperator {
        op,
        provenance: Provenance {
            cosymbol: cos.symbol.name.clone(),
            partition: format!("{} balls, radius {:.6}", pou.len(), pou.cover.first().map_or(0.0, |b| b.radius)),
            grid: format!("{:?}, n = {}", grid.model, grid.n),
        },
    })
}

/// Partition with round(2·period/radius) centers per axis and ball radius twice the spacing.
pub fn ladder_partition(grid: &ManifoldGrid, radius: f64) -> Result<PartitionOfUnity, CoarseError> {
    let period = grid.period().ok_or_else(|| CoarseError::UnsupportedModel("ladder partitions need a compact model".into()))?;
    let k = (2.0 * period / radius).round().max(1.0);
    let spacing = period / k;
    let centers = lattice_centers(grid, spacing, 0.0);
    Ok(build_partition(grid, &centers, 2.0 * spacing)?)
}

/// Kohn–Nirenberg quantization (Op σ)u(x) = Σ_k σ(x,k) û(k) e^{ikx} on a flat S¹ or T².
pub fn kohn_nirenberg(sym: &Symbol, grid: &ManifoldGrid) -> Result<DiscreteOperator, CoarseError> {
    if !grid.is_flat() || grid.period().is_none() {
        return Err(CoarseError::UnsupportedModel("direct quantization needs a flat circle or torus".into()));
    }
    let n = grid.n;
    let dim = grid.dim;
    let size = grid.len();
    let rows: Vec<Vec<c64>> = grid
        .points
        .par_iter()
        .map(|x| {
            let mut s = symbol_samples(sym, x, n, dim);
            for (k, v) in s.iter_mut().enumerate() {
                let ph = match dim {
                    1 => freq(k, n) * x[0],
                    _ => freq(k / n, n) * x[0] + freq(k % n, n) * x[1],
                };
                *v *= c64::cis(ph);
            }
            fft_nd(&mut s, n, dim, false);
            s.iter().map(|v| v / size as f64).collect()
        })
        .collect();
    Ok(DiscreteOperator::from_fn(size, |i, j| rows[i][j]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderLevel {
    pub n: usize,
    /// Partition radius request; the realized radius is twice the center spacing.
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectRow {
    pub n: usize,
    pub radius: f64,
    pub defect: f64,
    pub rank: usize,
}

/// ‖a·(Op σ − ℱ)‖ after rank truncation along a refinement ladder on a flat model.
pub fn compare_with_direct(
    sym: &Symbol,
    model: impl Fn(usize) -> ManifoldGrid,
    ladder: &[LadderLevel],
    legs: &NuCutoff,
    localizer: impl Fn(&[f64]) -> f64,
) -> Result<Vec<DefectRow>, CoarseError> {
    let mut out = Vec::new();
    for level in ladder {
        let grid = model(level.n);
        let direct = kohn_nirenberg(sym, &grid)?;
        let pou = ladder_partition(&grid, level.radius)?;
        let cos = Cosymbol::new(sym.clone(), grid.n, grid.dim, Some(legs.radius));
        let coarse = quantize(&cos, &grid, &pou, legs, QuantizeOptions::default())?;
        let a: Vec<f64> = grid.points.iter().map(|p| localizer(p)).collect();
        let rank = rank_budget(grid.len());
        let defect = (&direct - &coarse.op).left_mul_diag(&a).truncated_norm(rank);
        out.push(DefectRow { n: level.n, radius: pou.cover[0].radius, defect, rank });
    }
    Ok(out)
}

/// Recovered fiber kernel on lattice offsets (FFT order); `window` marks the
/// offsets where an estimate was formed.
#[derive(Clone, Debug)]
pub struct RecoveredKernel {
    pub kernel: FiberKernel,
    pub window: Vec<bool>,
}

impl RecoveredKernel {
    /// Relative ℓ² distance to `target` over the window.
    pub fn relative_error(&self, target: &FiberKernel) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((e, t), &w) in self.kernel.values.iter().zip(&target.values).zip(&self.window) {
            if w {
                num += (e - t).norm_sqr();
                den += t.norm_sqr();
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Averages 𝔠-weighted rows of ℱ over lattice translates g of x:
/// K(u) = Σ_g 𝔠(g) ℱ[x+g, x+g−u] / cell, with Σ_g 𝔠(g) = 1.
pub fn recover_cosymbol(
    op: &DiscreteOperator,
    grid: &ManifoldGrid,
    x_index: usize,
    width: f64,
    legs: &NuCutoff,
) -> Result<RecoveredKernel, CoarseError> {
    if !grid.is_flat() || grid.period().is_none() {
        return Err(CoarseError::UnsupportedModel("recovery is implemented on flat circles and tori".into()));
    }
    if width > legs.core() {
        return Err(CoarseError::CutoffTooWide { width, core: legs.core() });
    }
    let n = grid.n;
    let dim = grid.dim;
    let h = grid.spacing;
    let cell = h.powi(dim as i32);
    let reach = (width / h).floor() as i64;
    let to_multi = |k: usize| -> Vec<i64> {
        match dim {
            1 => vec![k as i64],
            _ => vec![(k / n) as i64, (k % n) as i64],
        }
    };
    let to_linear = |m: &[i64]| -> usize { m.iter().fold(0usize, |acc, &v| acc * n + v.rem_euclid(n as i64) as usize) };
    let mut shifts: Vec<(Vec<i64>, f64)> = Vec::new();
    let axis: Vec<i64> = (-reach..=reach).collect();
    let mut combos: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..dim {
        combos = combos
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
    for g in combos {
        let c: f64 = g.iter().map(|&a| bump(a as f64 * h / width.max(h))).product();
        if c > 0.0 {
            shifts.push((g, c));
        }
    }
    let total: f64 = shifts.iter().map(|s| s.1).sum();
    let base = to_multi(x_index);
    let template = FiberKernel { dim, n, values: vec![c64::new(0.0, 0.0); n.pow(dim as u32)], alias_tail: 0.0 };
    let offsets = template.offsets();
    let support = legs.support();
    let window: Vec<bool> = offsets
        .iter()
        .map(|m| m.iter().map(|&a| (a as f64 * h).powi(2)).sum::<f64>().sqrt() < support)
        .collect();
    let mut values = template.values.clone();
    for (slot, m) in offsets.iter().enumerate() {
        if !window[slot] {
            continue;
        }
        let mut acc = c64::new(0.0, 0.0);
        for (g, c) in &shifts {
            let row: Vec<i64> = base.iter().zip(g).map(|(b, a)| b + a).collect();
            let col: Vec<i64> = row.iter().zip(m).map(|(r, a)| r - a).collect();
            acc += op.get(to_linear(&row), to_linear(&col)) * (c / total);
        }
        values[slot] = acc / cell;
    }
    Ok(RecoveredKernel { kernel: FiberKernel { values, ..template }, window })
}
