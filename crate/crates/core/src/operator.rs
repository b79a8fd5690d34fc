//! Dense operators on weighted L² grid spaces.
//!
//! Matrices are stored in the weight-normalized basis `√w_i δ_i`, so the
//! operator norm is the spectral norm and the adjoint is the conjugate
//! transpose.

use faer::{Mat, Side};
use std::ops::{Add, Mul, Sub};

pub use faer::c64;

/// A dense complex operator with optional support metadata.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub mat: Mat<c64>,
    pub support: Option<crate::opint::SupportSet>,
}

/// Rank budget used by the compactness proxy: ⌈N/8⌉.
pub fn rank_budget(n: usize) -> usize {
    n.div_ceil(8)
}

impl DiscreteOperator {
    pub fn from_mat(mat: Mat<c64>) -> Self {
        Self { mat, support: None }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_mat(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_mat(Mat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> c64) -> Self {
        Self::from_mat(Mat::from_fn(n, n, f))
    }

    /// Multiplication by a complex grid function.
    pub fn diagonal(d: &[c64]) -> Self {
        let n = d.len();
        Self::from_fn(n, |i, j| if i == j { d[i] } else { c64::new(0.0, 0.0) })
    }

    /// Multiplication by a real grid function.
    pub fn real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_fn(n, |i, j| if i == j { c64::new(d[i], 0.0) } else { c64::new(0.0, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.mat[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_mat(self.mat.adjoint().to_owned())
    }

    pub fn scale(&self, s: c64) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.mat[(i, j)] * s)
    }

    /// `diag(a) · T`
    pub fn left_mul_diag(&self, a: &[f64]) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.mat[(i, j)] * a[i])
    }

    /// `T · diag(a)`
    pub fn right_mul_diag(&self, a: &[f64]) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.mat[(i, j)] * a[j])
    }

    /// `[T, diag(a)] = T·a − a·T`
    pub fn commutator_with_diag(&self, a: &[f64]) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.mat[(i, j)] * (a[j] - a[i]))
    }

    /// Singular values, nonincreasing.
    pub fn singular_values(&self) -> Vec<f64> {
        singular_values(&self.mat)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.singular_values()[0]
    }

    /// Norm after subtracting the best rank-`r` approximation: s_{r+1}.
    pub fn truncated_norm(&self, r: usize) -> f64 {
        self.singular_values().get(r).copied().unwrap_or(0.0)
    }

    /// Compactness-proxy norm with the default rank budget.
    pub fn proxy_norm(&self) -> f64 {
        self.truncated_norm(rank_budget(self.dim()))
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.mat[(i, j)].norm());
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).max_abs()
    }

    /// Largest deviation from self-adjointness, entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                m = m.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        m
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// Eigen-decomposition of a self-adjoint operator: (eigenvalues, eigenvectors as columns).
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Mat<c64>) {
        let sym = self.symmetrized();
        let evd = sym
            .mat
            .self_adjoint_eigen(Side::Lower)
            .expect("self-adjoint eigendecomposition");
        let vals = (0..self.dim()).map(|i| evd.S()[i].re).collect();
        (vals, evd.U().to_owned())
    }

    /// `(T + T*)/2`
    pub fn symmetrized(&self) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| (self.mat[(i, j)] + self.mat[(j, i)].conj()) * 0.5)
    }

    /// Restriction to the index set `idx` × `idx`.
    pub fn block(&self, idx: &[usize]) -> Mat<c64> {
        Mat::from_fn(idx.len(), idx.len(), |a, b| self.mat[(idx[a], idx[b])])
    }

    /// Direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (n, m) = (self.dim(), other.dim());
        Self::from_fn(n + m, |i, j| {
            if i < n && j < n {
                self.mat[(i, j)]
            } else if i >= n && j >= n {
                other.mat[(i - n, j - n)]
            } else {
                c64::new(0.0, 0.0)
            }
        })
    }

    /// Solves `self · X = rhs` by partial-pivot LU.
    pub fn solve(&self, rhs: &Mat<c64>) -> Mat<c64> {
        use faer::linalg::solvers::Solve;
        self.mat.partial_piv_lu().solve(rhs)
    }
}

pub fn singular_values(m: &Mat<c64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.singular_values().expect("singular value decomposition")
}

/// Spectral norm of a real matrix.
pub fn real_norm(m: &Mat<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().expect("singular value decomposition")[0]
}

impl Add for &DiscreteOperator {
    type Output = DiscreteOperator;
    fn add(self, rhs: &DiscreteOperator) -> DiscreteOperator {
        DiscreteOperator::from_mat(&self.mat + &rhs.mat)
    }
}

impl Sub for &DiscreteOperator {
    type Output = DiscreteOperator;
    fn sub(self, rhs: &DiscreteOperator) -> DiscreteOperator {
        DiscreteOperator::from_mat(&self.mat - &rhs.mat)
    }
}

impl Mul for &DiscreteOperator {
    type Output = DiscreteOperator;
    fn mul(self, rhs: &DiscreteOperator) -> DiscreteOperator {
        DiscreteOperator::from_mat(&self.mat * &rhs.mat)
    }
}
