//! Graded nilpotent Lie groups in exponential coordinates, lattice
//! convolution operators and averaging over a proper ℤ-action.

use crate::operator::{c64, DiscreteOperator};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("nilpotency step {0} exceeds the supported truncation (3)")]
    UnsupportedStep(usize),
    #[error("zoom parameter must be positive, got {0}")]
    NonpositiveLambda(f64),
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("kernel reach {reach:?} exceeds the lattice window {window:?}")]
    SupportOverflow { reach: Vec<i64>, window: Vec<i64> },
    #[error("action is not proper: {0}")]
    ImproperAction(String),
}

/// Algebra stanza as it appears in experiment configs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AlgebraStanza {
    #[serde(rename = "type")]
    pub kind: String,
    pub dim: usize,
    #[serde(default)]
    pub weights: Vec<u32>,
}

/// Graded nilpotent Lie algebra with structure constants `c[i][j][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedAlgebra {
    pub dim: usize,
    pub weights: Vec<u32>,
    brackets: Vec<f64>,
    pub step: usize,
}

impl GradedAlgebra {
    pub fn abelian(dim: usize) -> Self {
        Self { dim, weights: vec![1; dim], brackets: vec![0.0; dim * dim * dim], step: 1 }
    }

    /// h₃ with [e₁, e₂] = e₃ and weights (1, 1, 2).
    pub fn heisenberg() -> Self {
        let mut c = vec![0.0; 27];
        c[idx3(3, 0, 1, 2)] = 1.0;
        c[idx3(3, 1, 0, 2)] = -1.0;
        Self::new(vec![1, 1, 2], c).expect("heisenberg algebra")
    }

    /// Validates antisymmetry, the Jacobi identity and the grading.
    pub fn new(weights: Vec<u32>, brackets: Vec<f64>) -> Result<Self, LieError> {
        let dim = weights.len();
        if brackets.len() != dim * dim * dim {
            return Err(LieError::InvalidAlgebra(format!("expected {} structure constants", dim * dim * dim)));
        }
        if weights.contains(&0) {
            return Err(LieError::InvalidAlgebra("weights must be positive".into()));
        }
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let c = brackets[idx3(dim, i, j, k)];
                    if (c + brackets[idx3(dim, j, i, k)]).abs() > 1e-12 {
                        return Err(LieError::InvalidAlgebra(format!("c[{i}][{j}][{k}] not antisymmetric")));
                    }
                    if c != 0.0 && weights[i] + weights[j] != weights[k] {
                        return Err(LieError::InvalidAlgebra(format!("c[{i}][{j}][{k}] breaks the grading")));
                    }
                }
            }
        }
        let mut alg = Self { dim, weights, brackets, step: 0 };
        let basis: Vec<Vec<f64>> = (0..dim).map(|i| unit(dim, i)).collect();
        for a in &basis {
            for b in &basis {
                for c in &basis {
                    let j = add(
                        &add(&alg.bracket(a, &alg.bracket(b, c)), &alg.bracket(b, &alg.bracket(c, a))),
                        &alg.bracket(c, &alg.bracket(a, b)),
                    );
                    if max_abs(&j) > 1e-12 {
                        return Err(LieError::InvalidAlgebra("Jacobi identity fails".into()));
                    }
                }
            }
        }
        alg.step = alg.nilpotency_step()?;
        Ok(alg)
    }

    pub fn from_stanza(s: &AlgebraStanza) -> Result<Self, LieError> {
        match s.kind.as_str() {
            "abelian" => {
                if !s.weights.is_empty() && s.weights.iter().any(|&w| w != 1) {
                    return Err(LieError::InvalidAlgebra("abelian weights must all be 1".into()));
                }
                Ok(Self::abelian(s.dim))
            }
            "heisenberg" => {
                if s.dim != 3 || (!s.weights.is_empty() && s.weights != [1, 1, 2]) {
                    return Err(LieError::InvalidAlgebra("heisenberg requires dim 3, weights [1,1,2]".into()));
                }
                Ok(Self::heisenberg())
            }
            other => Err(LieError::InvalidAlgebra(format!("unknown algebra type {other:?}"))),
        }
    }

    pub fn is_abelian(&self) -> bool {
        self.brackets.iter().all(|&c| c == 0.0)
    }

    /// Homogeneous dimension Σ w_i.
    pub fn homogeneous_dim(&self) -> u32 {
        self.weights.iter().sum()
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.brackets[idx3(self.dim, i, j, k)]
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if y[j] == 0.0 {
                    continue;
                }
                let s = x[i] * y[j];
                for (k, o) in out.iter_mut().enumerate() {
                    *o += s * self.brackets[idx3(n, i, j, k)];
                }
            }
        }
        out
    }

    fn nilpotency_step(&self) -> Result<usize, LieError> {
        let basis: Vec<Vec<f64>> = (0..self.dim).map(|i| unit(self.dim, i)).collect();
        let mut layer = basis.clone();
        for s in 1..=self.dim + 1 {
            let next: Vec<Vec<f64>> = layer
                .iter()
                .flat_map(|a| basis.iter().map(move |b| (a, b)))
                .map(|(a, b)| self.bracket(a, b))
                .filter(|v| max_abs(v) > 0.0)
                .collect();
            if next.is_empty() {
                return Ok(s);
            }
            layer = next;
        }
        Err(LieError::InvalidAlgebra("algebra is not nilpotent".into()))
    }
}

fn idx3(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i * n + j) * n + k
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Group law in exponential coordinates via the BCH series, exact for step ≤ 3.
pub fn bch_multiply(alg: &GradedAlgebra, x: &[f64], y: &[f64]) -> Result<Vec<f64>, LieError> {
    if alg.step > 3 {
        return Err(LieError::UnsupportedStep(alg.step));
    }
    let mut out = add(x, y);
    if alg.step == 1 {
        return Ok(out);
    }
    let xy = alg.bracket(x, y);
    for (o, v) in out.iter_mut().zip(&xy) {
        *o += 0.5 * v;
    }
    if alg.step == 3 {
        let a = alg.bracket(x, &xy);
        let b = alg.bracket(y, &xy);
        for ((o, p), q) in out.iter_mut().zip(&a).zip(&b) {
            *o += (p - q) / 12.0;
        }
    }
    Ok(out)
}

pub fn inverse(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| -v).collect()
}

/// Dilation δ_λ: component i scaled by λ^{w_i}.
pub fn zoom(alg: &GradedAlgebra, lambda: f64, v: &[f64]) -> Result<Vec<f64>, LieError> {
    if lambda <= 0.0 || lambda.is_nan() {
        return Err(LieError::NonpositiveLambda(lambda));
    }
    Ok(v.iter().zip(&alg.weights).map(|(x, &w)| x * lambda.powi(w as i32)).collect())
}

/// Korányi-type homogeneous norm ((Σ_{w=1} v²)² + 16 Σ_{w=2} v²)^{1/4};
/// Euclidean on abelian algebras.
pub fn homogeneous_norm(alg: &GradedAlgebra, v: &[f64]) -> f64 {
    let mut r2 = 0.0;
    let mut z2 = 0.0;
    for (x, &w) in v.iter().zip(&alg.weights) {
        match w {
            1 => r2 += x * x,
            2 => z2 += x * x,
            _ => panic!("homogeneous norm supports weights 1 and 2"),
        }
    }
    (r2 * r2 + 16.0 * z2).powf(0.25)
}

/// Finite window of the dilated lattice δ_h Γ in exponential coordinates.
#[derive(Clone, Debug)]
pub struct GroupGrid {
    pub algebra: GradedAlgebra,
    pub h: f64,
    pub spacing: Vec<f64>,
    /// Index range `-half[i] ..= half[i]` per axis.
    pub half: Vec<i64>,
    /// Cyclic indexing (abelian only).
    pub periodic: bool,
    pub indices: Vec<Vec<i64>>,
    pub points: Vec<Vec<f64>>,
    pub haar_weight: f64,
}

impl GroupGrid {
    /// Lattice spacings h for weight-1 and h²/2 for weight-2 coordinates.
    pub fn new(algebra: GradedAlgebra, h: f64, half: Vec<i64>) -> Result<Self, LieError> {
        Self::build(algebra, h, half, false)
    }

    /// Cyclic grid ℤ_{2m+1}ⁿ for an abelian algebra.
    pub fn periodic(algebra: GradedAlgebra, h: f64, half: Vec<i64>) -> Result<Self, LieError> {
        if !algebra.is_abelian() {
            return Err(LieError::InvalidAlgebra("periodic grids need an abelian algebra".into()));
        }
        Self::build(algebra, h, half, true)
    }

    fn build(algebra: GradedAlgebra, h: f64, half: Vec<i64>, periodic: bool) -> Result<Self, LieError> {
        if half.len() != algebra.dim {
            return Err(LieError::InvalidAlgebra("window rank does not match the algebra".into()));
        }
        if algebra.step > 2 {
            return Err(LieError::UnsupportedStep(algebra.step));
        }
        let spacing: Vec<f64> = algebra
            .weights
            .iter()
            .map(|&w| match w {
                1 => h,
                2 => 0.5 * h * h,
                _ => unreachable!("step ≤ 2 has weights 1 and 2"),
            })
            .collect();
        let integral = algebra.brackets.iter().all(|c| c.fract() == 0.0);
        if !integral {
            return Err(LieError::InvalidAlgebra("lattice needs integer structure constants".into()));
        }
        let mut indices: Vec<Vec<i64>> = vec![Vec::new()];
        for &m in &half {
            indices = indices
                .into_iter()
                .flat_map(|p| {
                    (-m..=m).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        let points = indices
            .iter()
            .map(|ix| ix.iter().zip(&spacing).map(|(&i, s)| i as f64 * s).collect())
            .collect();
        let haar_weight = spacing.iter().product();
        Ok(Self { algebra, h, spacing, half, periodic, indices, points, haar_weight })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn coords(&self, ix: &[i64]) -> Vec<f64> {
        ix.iter().zip(&self.spacing).map(|(&i, s)| i as f64 * s).collect()
    }

    /// Product of lattice points in index form.
    pub fn mul_index(&self, a: &[i64], b: &[i64]) -> Vec<i64> {
        let p = bch_multiply(&self.algebra, &self.coords(a), &self.coords(b)).expect("step ≤ 2");
        p.iter().zip(&self.spacing).map(|(c, s)| (c / s).round() as i64).collect()
    }

    fn wrap(&self, ix: &mut [i64]) {
        if self.periodic {
            for (v, &m) in ix.iter_mut().zip(&self.half) {
                *v = (*v + m).rem_euclid(2 * m + 1) - m;
            }
        }
    }

    /// Linear position of a multi-index, `None` outside the window.
    pub fn position(&self, ix: &[i64]) -> Option<usize> {
        let mut ix = ix.to_vec();
        self.wrap(&mut ix);
        let mut pos = 0usize;
        for (&v, &m) in ix.iter().zip(&self.half) {
            if v < -m || v > m {
                return None;
            }
            pos = pos * (2 * m as usize + 1) + (v + m) as usize;
        }
        Some(pos)
    }
}

/// Compactly supported kernel sampled on a box of lattice indices.
#[derive(Clone)]
pub struct GroupKernel {
    pub reach: Vec<i64>,
    values: Vec<c64>,
}

impl GroupKernel {
    pub fn from_fn(grid: &GroupGrid, reach: Vec<i64>, f: impl Fn(&[f64]) -> c64) -> Self {
        let mut values = Vec::new();
        for_each_index(&reach, |ix| values.push(f(&grid.coords(ix))));
        Self { reach, values }
    }

    /// Discrete Dirac mass 1/cell volume at the identity.
    pub fn delta(grid: &GroupGrid) -> Self {
        let zero = vec![0; grid.algebra.dim];
        let w = grid.haar_weight;
        Self::from_fn(grid, zero, |_| c64::new(1.0 / w, 0.0))
    }

    pub fn get(&self, ix: &[i64]) -> c64 {
        let mut pos = 0usize;
        for (&v, &m) in ix.iter().zip(&self.reach) {
            if v < -m || v > m {
                return c64::new(0.0, 0.0);
            }
            pos = pos * (2 * m as usize + 1) + (v + m) as usize;
        }
        self.values[pos]
    }

    /// Nonzero entries with their multi-indices.
    pub fn entries(&self) -> Vec<(Vec<i64>, c64)> {
        let mut out = Vec::new();
        let mut k = 0;
        for_each_index(&self.reach, |ix| {
            if self.values[k] != c64::new(0.0, 0.0) {
                out.push((ix.to_vec(), self.values[k]));
            }
            k += 1;
        });
        out
    }

    /// Σ |k| · cell volume.
    pub fn l1_mass(&self, cell: f64) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() * cell
    }
}

fn for_each_index(half: &[i64], mut f: impl FnMut(&[i64])) {
    let mut ix: Vec<i64> = half.iter().map(|m| -m).collect();
    if half.is_empty() {
        f(&ix);
        return;
    }
    loop {
        f(&ix);
        let mut a = half.len();
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            if ix[a] < half[a] {
                ix[a] += 1;
                break;
            }
            ix[a] = -half[a];
        }
    }
}

/// Left convolution (Fφ)(g) = Σ_h k(h) φ(h⁻¹g) vol with interior-row flags.
#[derive(Clone, Debug)]
pub struct ConvolutionOperator {
    pub op: DiscreteOperator,
    /// Rows whose full stencil stays inside the window.
    pub interior: Vec<bool>,
}

impl ConvolutionOperator {
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.interior.len()).filter(|&i| self.interior[i]).collect()
    }

    /// Restriction to interior rows and columns.
    pub fn core(&self) -> DiscreteOperator {
        DiscreteOperator::from_mat(self.op.block(&self.interior_indices()))
    }
}

pub fn convolution_operator(grid: &GroupGrid, kernel: &GroupKernel) -> Result<ConvolutionOperator, LieError> {
    if kernel.reach.iter().zip(&grid.half).any(|(r, m)| r > m) {
        return Err(LieError::SupportOverflow { reach: kernel.reach.clone(), window: grid.half.clone() });
    }
    let n = grid.len();
    let entries = kernel.entries();
    let vol = grid.haar_weight;
    let mut op = DiscreteOperator::zeros(n);
    let mut interior = vec![true; n];
    for (row, g) in grid.indices.iter().enumerate() {
        for (h, k) in &entries {
            let col = grid.mul_index(&inverse_index(h), g);
            match grid.position(&col) {
                Some(c) => op.mat[(row, c)] += *k * vol,
                None => interior[row] = false,
            }
        }
    }
    Ok(ConvolutionOperator { op, interior })
}

fn inverse_index(h: &[i64]) -> Vec<i64> {
    h.iter().map(|v| -v).collect()
}

/// (k₁ * k₂)(g) = Σ_h k₁(h) k₂(h⁻¹g) vol on the combined reach.
pub fn convolve_kernels(grid: &GroupGrid, k1: &GroupKernel, k2: &GroupKernel) -> GroupKernel {
    let reach: Vec<i64> = k1
        .reach
        .iter()
        .zip(&k2.reach)
        .zip(&grid.algebra.weights)
        .map(|((a, b), &w)| if w == 1 { a + b } else { a + b + 2 * k1.reach[0].max(k2.reach[0]).pow(2) })
        .collect();
    let mut values = Vec::new();
    let e1 = k1.entries();
    for_each_index(&reach, |g| {
        let mut s = c64::new(0.0, 0.0);
        for (h, v) in &e1 {
            s += *v * k2.get(&grid.mul_index(&inverse_index(h), g));
        }
        values.push(s * grid.haar_weight);
    });
    GroupKernel { reach, values }
}

/// ℤ acting on a line grid of `n` cells by shifts of `period` cells.
#[derive(Clone)]
pub struct ProperActionScene {
    pub n: usize,
    pub period: usize,
    /// Group elements g_min ..= g_max in the effective window.
    pub g_min: i64,
    pub g_max: i64,
    /// Hat cutoff with Σ_g 𝔠(x − g·period) = 1.
    pub cutoff: Vec<f64>,
}

impl ProperActionScene {
    /// Window of group elements covering the line; the cutoff is a hat of
    /// half-width `period` centred at cell `n/2`.
    pub fn new(n: usize, period: usize) -> Result<Self, LieError> {
        if period == 0 {
            return Err(LieError::ImproperAction("zero shift fixes every point".into()));
        }
        let c0 = (n / 2) as f64;
        let p = period as f64;
        let cutoff = (0..n).map(|i| (1.0 - (i as f64 - c0).abs() / p).max(0.0)).collect();
        let reach = (n / period) as i64 + 1;
        Ok(Self { n, period, g_min: -reach, g_max: reach, cutoff })
    }

    /// U_g: index shift by g·period, dropping cells that leave the line.
    pub fn translate_index(&self, i: usize, g: i64) -> Option<usize> {
        let j = i as i64 + g * self.period as i64;
        (0..self.n as i64).contains(&j).then_some(j as usize)
    }

    /// g(f)(x) = f(g⁻¹x).
    pub fn translate_function(&self, f: &[f64], g: i64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &v) in f.iter().enumerate() {
            if let Some(j) = self.translate_index(i, g) {
                out[j] = v;
            }
        }
        out
    }

    /// Σ_g g(𝔠) over the window.
    pub fn cutoff_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for g in self.g_min..=self.g_max {
            for (a, b) in s.iter_mut().zip(self.translate_function(&self.cutoff, g)) {
                *a += b;
            }
        }
        s
    }

    /// Cells reached by every translate needed at that cell.
    pub fn interior(&self) -> Vec<usize> {
        let p = self.period;
        (p..self.n.saturating_sub(p)).collect()
    }

    pub fn translate_operator(&self, t: &DiscreteOperator, g: i64) -> DiscreteOperator {
        let mut out = DiscreteOperator::zeros(self.n);
        for j in 0..self.n {
            let Some(jj) = self.translate_index(j, g) else { continue };
            for i in 0..self.n {
                if let Some(ii) = self.translate_index(i, g) {
                    out.mat[(ii, jj)] = t.mat[(i, j)];
                }
            }
        }
        out
    }
}

/// Smallest index interval containing the support of `t`.
pub fn support_interval(t: &DiscreteOperator) -> Option<(usize, usize)> {
    let n = t.dim();
    let mut lo = usize::MAX;
    let mut hi = 0;
    for j in 0..n {
        for i in 0..n {
            if t.mat[(i, j)] != c64::new(0.0, 0.0) {
                lo = lo.min(i.min(j));
                hi = hi.max(i.max(j));
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Result of Σ_g g(T) over the window.
#[derive(Clone, Debug)]
pub struct Average {
    pub op: DiscreteOperator,
    /// Haar measure of K = {g : g(L) ∩ L ≠ ∅}.
    pub k_measure: usize,
    pub translates: usize,
}

pub fn group_average(scene: &ProperActionScene, t: &DiscreteOperator) -> Result<Average, LieError> {
    if t.dim() != scene.n {
        return Err(LieError::ImproperAction("operator does not act on the scene".into()));
    }
    let Some((lo, hi)) = support_interval(t) else {
        return Ok(Average { op: DiscreteOperator::zeros(scene.n), k_measure: 0, translates: 0 });
    };
    let width = (hi - lo) as i64;
    let p = scene.period as i64;
    let k_measure = (-width / p..=width / p).filter(|g| (g * p).abs() <= width).count();
    let mut op = DiscreteOperator::zeros(scene.n);
    let mut translates = 0;
    for g in scene.g_min..=scene.g_max {
        let shifted_lo = lo as i64 + g * p;
        let shifted_hi = hi as i64 + g * p;
        if shifted_hi < 0 || shifted_lo >= scene.n as i64 {
            continue;
        }
        op = &op + &scene.translate_operator(t, g);
        translates += 1;
    }
    Ok(Average { op, k_measure, translates })
}
