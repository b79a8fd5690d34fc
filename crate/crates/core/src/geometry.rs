//! Model Riemannian manifolds, Jacobi fields by Volterra iteration, and the
//! exponential-map machinery used to transplant cosymbols.
//!
//! Every model metric is conformally flat, `g = e^{2ψ} δ`, so the orthonormal
//! frame at `x` is `e^{-ψ(x)}` times the coordinate frame. Tangent vectors
//! passed as "chart components" are measured with `g`; "frame coordinates"
//! are components in the orthonormal frame.

use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, FRAC_1_SQRT_2, TAU};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("hypothesis violated: c·|p| = {0} > 1")]
    HypothesisViolated(f64),
    #[error("Volterra series did not reach tolerance in {0} terms")]
    NonConvergence(usize),
    #[error("tangent vector of length {norm} outside the admissible ball of radius {radius}")]
    OutOfBall { norm: f64, radius: f64 },
    #[error("neighborhoods of the two points do not intersect")]
    DisjointNeighborhoods,
    #[error("invalid manifold description: {0}")]
    InvalidStanza(String),
}

/// Metric family for a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    /// Flat metric (uniform circle, flat torus, Euclidean ℝ³).
    Flat,
    /// Circle with metric (1 + ½ sin θ)².
    Conformal,
    /// Torus with metric e^{2a sin x sin y} δ.
    Perturbed {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn default_amplitude() -> f64 {
    0.1
}

/// JSON manifold stanza.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldStanza {
    pub model: String,
    pub n: usize,
    #[serde(default = "default_metric")]
    pub metric: MetricSpec,
    #[serde(default)]
    pub torsion: Option<f64>,
    /// Half-width of the ℝ³ box; ignored by compact models.
    #[serde(default)]
    pub half_width: Option<f64>,
}

fn default_metric() -> MetricSpec {
    MetricSpec::Flat
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Circle { conformal: bool },
    Torus { amplitude: f64, torsion: f64 },
    Heis3 { half_width: f64 },
}

/// A sampled model manifold.
#[derive(Clone, Debug)]
pub struct ManifoldGrid {
    pub model: Model,
    /// Samples per axis.
    pub n: usize,
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Coordinate spacing per axis.
    pub spacing: f64,
    pub curvature_bound: f64,
    pub torsion_bound: f64,
}

impl ManifoldGrid {
    pub fn circle(n: usize, conformal: bool) -> Self {
        let h = TAU / n as f64;
        let model = Model::Circle { conformal };
        let points: Vec<Vec<f64>> = (0..n).map(|j| vec![j as f64 * h]).collect();
        let mut g = Self {
            model,
            n,
            dim: 1,
            points,
            weights: Vec::new(),
            spacing: h,
            curvature_bound: 0.0,
            torsion_bound: 0.0,
        };
        g.fold_weights(h);
        g
    }

    pub fn torus(n: usize, amplitude: f64, torsion: f64) -> Self {
        let h = TAU / n as f64;
        let mut points = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                points.push(vec![i as f64 * h, j as f64 * h]);
            }
        }
        let mut g = Self {
            model: Model::Torus { amplitude, torsion },
            n,
            dim: 2,
            points,
            weights: Vec::new(),
            spacing: h,
            curvature_bound: 2.0 * amplitude.abs() * (2.0 * amplitude.abs()).exp(),
            torsion_bound: torsion.abs(),
        };
        g.fold_weights(h * h);
        g
    }

    /// ℝ³ box `[-L, L)³` with `n` midpoint samples per axis.
    pub fn heis3(n: usize, half_width: f64) -> Self {
        let h = 2.0 * half_width / n as f64;
        let c = |i: usize| -half_width + (i as f64 + 0.5) * h;
        let mut points = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    points.push(vec![c(i), c(j), c(k)]);
                }
            }
        }
        Self {
            model: Model::Heis3 { half_width },
            n,
            dim: 3,
            weights: vec![h * h * h; points.len()],
            points,
            spacing: h,
            curvature_bound: 0.0,
            torsion_bound: 0.0,
        }
    }

    pub fn from_stanza(s: &ManifoldStanza) -> Result<Self, GeometryError> {
        if s.n < 4 {
            return Err(GeometryError::InvalidStanza(format!("grid size {} too small", s.n)));
        }
        match (s.model.as_str(), &s.metric) {
            ("circle", MetricSpec::Flat) => Ok(Self::circle(s.n, false)),
            ("circle", MetricSpec::Conformal) => Ok(Self::circle(s.n, true)),
            ("torus", MetricSpec::Flat) => Ok(Self::torus(s.n, 0.0, s.torsion.unwrap_or(0.0))),
            ("torus", MetricSpec::Perturbed { amplitude }) => {
                if s.torsion.is_some_and(|t| t != 0.0) {
                    return Err(GeometryError::InvalidStanza(
                        "torsion is only modelled on the flat torus".into(),
                    ));
                }
                Ok(Self::torus(s.n, *amplitude, 0.0))
            }
            ("heis3", MetricSpec::Flat) => Ok(Self::heis3(s.n, s.half_width.unwrap_or(2.0))),
            (m, metric) => Err(GeometryError::InvalidStanza(format!(
                "model {m:?} does not support metric {metric:?}"
            ))),
        }
    }

    fn fold_weights(&mut self, cell: f64) {
        let w: Vec<f64> = self
            .points
            .iter()
            .map(|p| cell * (self.dim as f64 * self.log_factor(p)).exp())
            .collect();
        self.weights = w;
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_flat(&self) -> bool {
        match self.model {
            Model::Circle { conformal } => !conformal,
            Model::Torus { amplitude, .. } => amplitude == 0.0,
            Model::Heis3 { .. } => true,
        }
    }

    /// Period of each chart axis, `None` for noncompact axes.
    pub fn period(&self) -> Option<f64> {
        match self.model {
            Model::Heis3 { .. } => None,
            _ => Some(TAU),
        }
    }

    /// ψ with g = e^{2ψ} δ.
    pub fn log_factor(&self, x: &[f64]) -> f64 {
        match self.model {
            Model::Circle { conformal: true } => (1.0 + 0.5 * x[0].sin()).ln(),
            Model::Torus { amplitude, .. } => amplitude * x[0].sin() * x[1].sin(),
            _ => 0.0,
        }
    }

    /// ∇ψ in chart coordinates.
    pub fn log_factor_gradient(&self, x: &[f64]) -> Vec<f64> {
        match self.model {
            Model::Circle { conformal: true } => {
                vec![0.5 * x[0].cos() / (1.0 + 0.5 * x[0].sin())]
            }
            Model::Torus { amplitude, .. } => vec![
                amplitude * x[0].cos() * x[1].sin(),
                amplitude * x[0].sin() * x[1].cos(),
            ],
            _ => vec![0.0; self.dim],
        }
    }

    /// Metric tensor at `x`.
    pub fn metric(&self, x: &[f64]) -> Mat<f64> {
        let s = (2.0 * self.log_factor(x)).exp();
        Mat::from_fn(self.dim, self.dim, |i, j| if i == j { s } else { 0.0 })
    }

    /// Gaussian curvature (zero in dimensions 1 and 3 for these models).
    pub fn gaussian_curvature(&self, x: &[f64]) -> f64 {
        match self.model {
            Model::Torus { amplitude, .. } => {
                let psi = self.log_factor(x);
                2.0 * amplitude * x[0].sin() * x[1].sin() * (-2.0 * psi).exp()
            }
            _ => 0.0,
        }
    }

    /// Effective bound c = max(1, c_R, c_T).
    pub fn bound(&self) -> f64 {
        1f64.max(self.curvature_bound).max(self.torsion_bound)
    }

    /// Admissible ball radius r with c·r = ½.
    pub fn ball_radius(&self) -> f64 {
        0.5 / self.bound()
    }

    /// Periodic chart difference y − x.
    pub fn chart_offset(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let per = self.period();
        x.iter()
            .zip(y)
            .map(|(a, b)| match per {
                Some(p) => wrap(b - a, p),
                None => b - a,
            })
            .collect()
    }

    pub fn chart_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        norm(&self.chart_offset(x, y))
    }

    /// Wraps chart coordinates into the fundamental domain.
    pub fn wrap_point(&self, y: &[f64]) -> Vec<f64> {
        match self.period() {
            Some(p) => y.iter().map(|v| v.rem_euclid(p)).collect(),
            None => y.to_vec(),
        }
    }

    /// Metric norm of a chart-component vector at `x`.
    pub fn metric_norm(&self, x: &[f64], v: &[f64]) -> f64 {
        self.log_factor(x).exp() * norm(v)
    }

    fn christoffel(&self, x: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        // Γ(v, w) for g = e^{2ψ}δ
        let gp = self.log_factor_gradient(x);
        let vg = dot(v, &gp);
        let wg = dot(w, &gp);
        let vw = dot(v, w);
        (0..self.dim).map(|k| vg * w[k] + wg * v[k] - vw * gp[k]).collect()
    }

    fn torsion_vector(&self) -> Option<(f64, [f64; 2])> {
        match self.model {
            Model::Torus { torsion, .. } if torsion != 0.0 => {
                Some((torsion, [FRAC_1_SQRT_2, FRAC_1_SQRT_2]))
            }
            _ => None,
        }
    }

    /// Integrates the geodesic with initial chart velocity `p`, carrying a
    /// parallel orthonormal frame, and samples it at the requested times.
    pub fn geodesic(&self, x: &[f64], p: &[f64], times: &[f64], max_step: f64) -> Vec<GeodesicSample> {
        let d = self.dim;
        let e0 = (-self.log_factor(x)).exp();
        let mut state = GeodesicState {
            y: x.to_vec(),
            v: p.to_vec(),
            frame: Mat::from_fn(d, d, |i, j| if i == j { e0 } else { 0.0 }),
        };
        let mut out = Vec::with_capacity(times.len());
        let mut t = 0.0;
        for &target in times {
            let span = target - t;
            if span > 0.0 {
                let steps = (span / max_step).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for _ in 0..steps {
                    state = self.rk4_step(&state, h);
                }
            }
            t = target;
            out.push(GeodesicSample {
                t,
                point: state.y.clone(),
                velocity: state.v.clone(),
                frame: state.frame.clone(),
            });
        }
        out
    }

    fn geodesic_rhs(&self, s: &GeodesicState) -> GeodesicState {
        let d = self.dim;
        let acc: Vec<f64> = self.christoffel(&s.y, &s.v, &s.v).iter().map(|a| -a).collect();
        let mut frame = Mat::zeros(d, d);
        for c in 0..d {
            let col: Vec<f64> = (0..d).map(|r| s.frame[(r, c)]).collect();
            let g = self.christoffel(&s.y, &s.v, &col);
            for r in 0..d {
                frame[(r, c)] = -g[r];
            }
        }
        GeodesicState { y: s.v.clone(), v: acc, frame }
    }

    fn rk4_step(&self, s: &GeodesicState, h: f64) -> GeodesicState {
        let k1 = self.geodesic_rhs(s);
        let k2 = self.geodesic_rhs(&s.axpy(0.5 * h, &k1));
        let k3 = self.geodesic_rhs(&s.axpy(0.5 * h, &k2));
        let k4 = self.geodesic_rhs(&s.axpy(h, &k3));
        let mut out = s.axpy(h / 6.0, &k1);
        out = out.axpy(h / 3.0, &k2);
        out = out.axpy(h / 3.0, &k3);
        out.axpy(h / 6.0, &k4)
    }

    /// Jacobi coefficients along the geodesic from `x` with chart velocity `p`,
    /// expressed in the parallel orthonormal frame.
    pub fn jacobi_coefficients(&self, x: &[f64], p: &[f64], times: &[f64]) -> JacobiCoefficients {
        let d = self.dim;
        let samples = self.geodesic(x, p, times, 1.0 / 256.0);
        let torsion = self.torsion_vector();
        let mut a = Vec::with_capacity(samples.len());
        let mut b = Vec::with_capacity(samples.len());
        for s in &samples {
            let ph = frame_coords(&s.frame, &s.velocity);
            let pn2 = dot(&ph, &ph);
            let k = self.gaussian_curvature(&s.point);
            b.push(Mat::from_fn(d, d, |i, j| {
                k * ((if i == j { pn2 } else { 0.0 }) - ph[i] * ph[j])
            }));
            a.push(match torsion {
                // A_ij = (T(e_j, γ'), e_i) with T(X, Y) = τ (X₁Y₂ − X₂Y₁) w
                Some((tau, w)) => Mat::from_fn(d, d, |i, j| {
                    let cross = if j == 0 { ph[1] } else { -ph[0] };
                    tau * cross * w[i]
                }),
                None => Mat::zeros(d, d),
            });
        }
        JacobiCoefficients {
            dim: d,
            times: times.to_vec(),
            a,
            b,
            frames: samples.into_iter().map(|s| s.frame).collect(),
            bound: self.bound(),
        }
    }
}

#[derive(Clone, Debug)]
struct GeodesicState {
    y: Vec<f64>,
    v: Vec<f64>,
    frame: Mat<f64>,
}

impl GeodesicState {
    fn axpy(&self, h: f64, k: &GeodesicState) -> GeodesicState {
        let d = self.y.len();
        GeodesicState {
            y: self.y.iter().zip(&k.y).map(|(a, b)| a + h * b).collect(),
            v: self.v.iter().zip(&k.v).map(|(a, b)| a + h * b).collect(),
            frame: Mat::from_fn(d, d, |i, j| self.frame[(i, j)] + h * k.frame[(i, j)]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeodesicSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Parallel orthonormal frame, columns in chart components.
    pub frame: Mat<f64>,
}

/// Geodesic variation problem.
#[derive(Clone, Debug)]
pub struct GeodesicProblem {
    pub base: Vec<f64>,
    /// Direction, frame coordinates at the base point.
    pub p: Vec<f64>,
    /// Variation, frame coordinates at the base point.
    pub q: Vec<f64>,
    /// Number of Gauss–Legendre panels on [0, 1].
    pub steps: usize,
    pub tolerance: f64,
}

impl GeodesicProblem {
    pub fn new(base: Vec<f64>, p: Vec<f64>, q: Vec<f64>) -> Self {
        Self { base, p, q, steps: 8, tolerance: 1e-12 }
    }
}

/// Coefficients of W'' + A W' + B W = 0 sampled on the Volterra nodes.
#[derive(Clone, Debug)]
pub struct JacobiCoefficients {
    pub dim: usize,
    pub times: Vec<f64>,
    pub a: Vec<Mat<f64>>,
    pub b: Vec<Mat<f64>>,
    /// Parallel orthonormal frame at each node, columns in chart components.
    pub frames: Vec<Mat<f64>>,
    /// The constant c bounding torsion and curvature.
    pub bound: f64,
}

impl JacobiCoefficients {
    /// Coefficients from closures of t, with a constant identity frame.
    pub fn from_fn(
        dim: usize,
        times: &[f64],
        bound: f64,
        a: impl Fn(f64) -> Mat<f64>,
        b: impl Fn(f64) -> Mat<f64>,
    ) -> Self {
        Self {
            dim,
            times: times.to_vec(),
            a: times.iter().map(|&t| a(t)).collect(),
            b: times.iter().map(|&t| b(t)).collect(),
            frames: times.iter().map(|_| identity(dim)).collect(),
            bound,
        }
    }

    /// Largest sampled ‖A(t)‖ and ‖B(t)‖.
    pub fn sup_norms(&self) -> (f64, f64) {
        let a = self.a.iter().map(crate::operator::real_norm).fold(0.0, f64::max);
        let b = self.b.iter().map(crate::operator::real_norm).fold(0.0, f64::max);
        (a, b)
    }
}

/// Piecewise Gauss–Legendre nodes on [0, 1] with exact cumulative integration
/// of the interpolating polynomial on each panel.
#[derive(Clone, Debug)]
pub struct VolterraNodes {
    pub panels: usize,
    pub times: Vec<f64>,
    integ: [[f64; GL_ORDER]; GL_ORDER],
}

const GL_ORDER: usize = 8;
const GL_NODES: [f64; GL_ORDER] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; GL_ORDER] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

impl VolterraNodes {
    pub fn new(panels: usize) -> Self {
        let panels = panels.max(1);
        let h = 1.0 / panels as f64;
        let mut times = Vec::with_capacity(panels * GL_ORDER);
        for p in 0..panels {
            for s in GL_NODES {
                times.push(h * (p as f64 + 0.5 * (1.0 + s)));
            }
        }
        Self { panels, times, integ: integration_matrix() }
    }

    /// Cumulative integrals ∫₀^{t_i} f at every node, plus ∫₀¹ f.
    fn cumulative(&self, f: &[Mat<f64>]) -> (Vec<Mat<f64>>, Mat<f64>) {
        let h = 1.0 / self.panels as f64;
        let (r, c) = (f[0].nrows(), f[0].ncols());
        let mut offset = Mat::<f64>::zeros(r, c);
        let mut out = Vec::with_capacity(f.len());
        for p in 0..self.panels {
            let base = p * GL_ORDER;
            for i in 0..GL_ORDER {
                let mut acc = offset.clone();
                for j in 0..GL_ORDER {
                    acc += &f[base + j] * (0.5 * h * self.integ[i][j]);
                }
                out.push(acc);
            }
            for j in 0..GL_ORDER {
                offset += &f[base + j] * (0.5 * h * GL_WEIGHTS[j]);
            }
        }
        (out, offset)
    }
}

/// S[i][j] = ∫_{-1}^{s_i} ℓ_j(s) ds for the Lagrange basis on the GL nodes.
fn integration_matrix() -> [[f64; GL_ORDER]; GL_ORDER] {
    let n = GL_ORDER;
    let v = Mat::<f64>::from_fn(n, n, |i, m| GL_NODES[i].powi(m as i32));
    let anti = Mat::<f64>::from_fn(n, n, |i, m| {
        let k = m as i32 + 1;
        (GL_NODES[i].powi(k) - (-1f64).powi(k)) / k as f64
    });
    // ℓ_j(s) = Σ_m C[m][j] s^m with C = V^{-1}
    use faer::linalg::solvers::Solve;
    let c = v.partial_piv_lu().solve(identity(n));
    let s = &anti * &c;
    let mut out = [[0.0; GL_ORDER]; GL_ORDER];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = s[(i, j)];
        }
    }
    out
}

/// Result of a Volterra solve.
#[derive(Clone, Debug)]
pub struct JacobiSolution {
    /// W(1) in the parallel frame at the endpoint.
    pub w1: Mat<f64>,
    pub terms: usize,
    /// Sup-norm of each retained term 𝒟^k(C(0)), k ≥ 0.
    pub term_norms: Vec<f64>,
    /// The majorant ‖C(0)‖·d^k/k! for each retained term.
    pub majorants: Vec<f64>,
    /// The constant d used in the majorant: max(c‖p‖, sup_t ‖D(t)‖).
    pub d: f64,
}

impl JacobiSolution {
    /// Whether every retained term respected its majorant.
    pub fn majorant_holds(&self) -> bool {
        self.term_norms
            .iter()
            .zip(&self.majorants)
            .all(|(t, m)| *t <= m * (1.0 + 1e-9) + 1e-300)
    }
}

/// Solves the Jacobi equation with W(0) = 0, W'(0) = q by summing the
/// Volterra series Σ 𝒟^k(C(0)) with C = (W, W'/‖p‖).
///
/// `q` may carry several columns; each is transported independently.
pub fn solve_jacobi_columns(
    p_norm: f64,
    q: &Mat<f64>,
    coeffs: &JacobiCoefficients,
    nodes: &VolterraNodes,
    tolerance: f64,
) -> Result<JacobiSolution, GeometryError> {
    let cp = coeffs.bound * p_norm;
    if cp > 1.0 + 1e-12 {
        return Err(GeometryError::HypothesisViolated(cp));
    }
    volterra_series(p_norm, q, coeffs, nodes, tolerance)
}

fn volterra_series(
    p_norm: f64,
    q: &Mat<f64>,
    coeffs: &JacobiCoefficients,
    nodes: &VolterraNodes,
    tolerance: f64,
) -> Result<JacobiSolution, GeometryError> {
    let n = coeffs.dim;
    let cp = coeffs.bound * p_norm;
    if p_norm == 0.0 {
        let qn = q.norm_l2();
        return Ok(JacobiSolution { w1: q.clone(), terms: 1, term_norms: vec![qn], majorants: vec![qn], d: 0.0 });
    }
    let m = q.ncols();
    let dmat: Vec<Mat<f64>> = coeffs
        .a
        .iter()
        .zip(&coeffs.b)
        .map(|(a, b)| {
            Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
                (true, true) => 0.0,
                (true, false) => {
                    if i == j - n {
                        p_norm
                    } else {
                        0.0
                    }
                }
                (false, true) => -b[(i - n, j)] / p_norm,
                (false, false) => -a[(i - n, j - n)],
            })
        })
        .collect();
    let sup_d = dmat.iter().map(crate::operator::real_norm).fold(0.0, f64::max);
    let d = cp.max(sup_d);
    let c0 = Mat::<f64>::from_fn(2 * n, m, |i, j| if i < n { 0.0 } else { q[(i - n, j)] / p_norm });
    let c0n = c0.norm_l2();

    let mut term: Vec<Mat<f64>> = vec![c0.clone(); nodes.times.len()];
    let mut sum_end = c0.clone();
    let mut term_norms = vec![c0n];
    let mut majorants = vec![c0n];
    let mut fact = 1.0;
    let max_terms = 60;
    for k in 1..=max_terms {
        fact *= k as f64;
        let integrand: Vec<Mat<f64>> = dmat.iter().zip(&term).map(|(dm, f)| dm * f).collect();
        let (next, end) = nodes.cumulative(&integrand);
        let sup = next.iter().map(|f| f.norm_l2()).fold(end.norm_l2(), f64::max);
        term_norms.push(sup);
        majorants.push(c0n * d.powi(k as i32) / fact);
        sum_end += &end;
        term = next;
        let next_bound = d.powi(k as i32 + 1) / (fact * (k as f64 + 1.0));
        if next_bound < tolerance || sup == 0.0 {
            let w1 = Mat::from_fn(n, m, |i, j| sum_end[(i, j)]);
            return Ok(JacobiSolution { w1, terms: k + 1, term_norms, majorants, d });
        }
    }
    Err(GeometryError::NonConvergence(max_terms))
}

/// W(1) = (exp_x)_* q for a single variation vector.
pub fn solve_jacobi(problem: &GeodesicProblem, coeffs: &JacobiCoefficients) -> Result<(Vec<f64>, JacobiSolution), GeometryError> {
    let nodes = VolterraNodes::new(problem.steps);
    let q = Mat::from_fn(problem.q.len(), 1, |i, _| problem.q[i]);
    let sol = solve_jacobi_columns(norm(&problem.p), &q, coeffs, &nodes, problem.tolerance)?;
    let w = (0..problem.q.len()).map(|i| sol.w1[(i, 0)]).collect();
    Ok((w, sol))
}

/// Coefficients for the grid model along the geodesic with frame direction `p`.
pub fn model_coefficients(grid: &ManifoldGrid, x: &[f64], p: &[f64], nodes: &VolterraNodes) -> JacobiCoefficients {
    let v = frame_to_chart(grid, x, p);
    grid.jacobi_coefficients(x, &v, &nodes.times)
}

/// Chart components of a frame-coordinate vector at `x`.
pub fn frame_to_chart(grid: &ManifoldGrid, x: &[f64], u: &[f64]) -> Vec<f64> {
    let s = (-grid.log_factor(x)).exp();
    u.iter().map(|v| v * s).collect()
}

/// exp_x(v) for a chart-component tangent vector `v`.
pub fn exp_map(grid: &ManifoldGrid, x: &[f64], v: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let len = grid.metric_norm(x, v);
    let r = grid.ball_radius();
    if len > r * (1.0 + 1e-12) {
        return Err(GeometryError::OutOfBall { norm: len, radius: r });
    }
    Ok(exp_unchecked(grid, x, v))
}

fn exp_unchecked(grid: &ManifoldGrid, x: &[f64], v: &[f64]) -> Vec<f64> {
    match grid.model {
        Model::Circle { conformal: true } => {
            let phi = 1.0 + 0.5 * x[0].sin();
            let target = arclength(x[0]) + phi * v[0];
            vec![inverse_arclength(target, x[0] + v[0]).rem_euclid(TAU)]
        }
        Model::Torus { amplitude, .. } if amplitude != 0.0 => {
            let s = grid.geodesic(x, v, &[1.0], 1.0 / 256.0);
            grid.wrap_point(&s[0].point)
        }
        _ => grid.wrap_point(&x.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<_>>()),
    }
}

/// Arclength primitive s(θ) = θ − ½ cos θ of the conformal circle.
pub fn arclength(theta: f64) -> f64 {
    theta - 0.5 * theta.cos()
}

fn inverse_arclength(target: f64, guess: f64) -> f64 {
    let mut t = guess;
    for _ in 0..50 {
        let f = arclength(t) - target;
        let step = f / (1.0 + 0.5 * t.sin());
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    t
}

/// Differential of exp_x at frame-coordinate `p`, as a map from frame
/// coordinates at `x` to the parallel frame at the endpoint.
pub fn tangent_map(grid: &ManifoldGrid, x: &[f64], p: &[f64]) -> Result<Mat<f64>, GeometryError> {
    Ok(tangent_map_full(grid, x, p)?.0)
}

/// Tangent map together with the endpoint and its parallel frame.
pub fn tangent_map_full(grid: &ManifoldGrid, x: &[f64], p: &[f64]) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>), GeometryError> {
    let d = grid.dim;
    if grid.dim != 2 || grid.is_flat() && grid.torsion_bound == 0.0 {
        // 1D exp charts are arclength charts and flat charts are translations.
        let v = frame_to_chart(grid, x, p);
        let end = exp_unchecked(grid, x, &v);
        let s = (-grid.log_factor(&end)).exp();
        let frame = Mat::from_fn(d, d, |i, j| if i == j { s } else { 0.0 });
        if norm(p) * grid.bound() > 1.0 + 1e-12 {
            return Err(GeometryError::HypothesisViolated(norm(p) * grid.bound()));
        }
        return Ok((identity(d), end, frame));
    }
    let nodes = VolterraNodes::new(8);
    let coeffs = model_coefficients(grid, x, p, &nodes);
    let sol = solve_jacobi_columns(norm(p), &identity(d), &coeffs, &nodes, 1e-13)?;
    let v = frame_to_chart(grid, x, p);
    let end = grid.geodesic(x, &v, &[1.0], 1.0 / 256.0).pop().expect("endpoint");
    Ok((sol.w1, grid.wrap_point(&end.point), end.frame))
}

/// Inverse of exp_x: frame coordinates `u` at `x` with exp_x(u) = y.
pub fn log_map(grid: &ManifoldGrid, x: &[f64], y: &[f64]) -> Vec<f64> {
    let off = grid.chart_offset(x, y);
    match grid.model {
        Model::Circle { conformal: true } => {
            vec![wrap(arclength(x[0] + off[0]) - arclength(x[0]), TAU)]
        }
        Model::Torus { amplitude, .. } if amplitude != 0.0 => {
            let s = grid.log_factor(x).exp();
            let mut u: Vec<f64> = off.iter().map(|o| o * s).collect();
            for _ in 0..30 {
                let (m, end, frame) = match tangent_map_full_unchecked(grid, x, &u) {
                    Some(v) => v,
                    None => break,
                };
                let r = grid.chart_offset(&end, y);
                if norm(&r) < 1e-14 {
                    break;
                }
                let jac = &frame * &m;
                use faer::linalg::solvers::Solve;
                let rhs = Mat::from_fn(2, 1, |i, _| r[i]);
                let du = jac.partial_piv_lu().solve(rhs);
                u[0] += du[(0, 0)];
                u[1] += du[(1, 0)];
            }
            u
        }
        _ => {
            let s = grid.log_factor(x).exp();
            off.iter().map(|o| o * s).collect()
        }
    }
}

fn tangent_map_full_unchecked(grid: &ManifoldGrid, x: &[f64], p: &[f64]) -> Option<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let nodes = VolterraNodes::new(8);
    let coeffs = model_coefficients(grid, x, p, &nodes);
    let sol = volterra_series(norm(p), &identity(2), &coeffs, &nodes, 1e-14).ok()?;
    let v = frame_to_chart(grid, x, p);
    let end = grid.geodesic(x, &v, &[1.0], 1.0 / 256.0).pop()?;
    Some((sol.w1, end.point, end.frame))
}

/// The transition (exp_y)_*^{-1}(exp_x)_* at the geodesic midpoint z of x and
/// y, mapping frame coordinates at x to frame coordinates at y.
pub fn transition_map(grid: &ManifoldGrid, x: &[f64], y: &[f64]) -> Result<Mat<f64>, GeometryError> {
    let r = grid.ball_radius();
    let uxy = log_map(grid, x, y);
    if norm(&uxy) >= 2.0 * r {
        return Err(GeometryError::DisjointNeighborhoods);
    }
    let half: Vec<f64> = uxy.iter().map(|v| 0.5 * v).collect();
    let z = exp_unchecked(grid, x, &frame_to_chart(grid, x, &half));
    let px = log_map(grid, x, &z);
    let py = log_map(grid, y, &z);
    let (mx, _, fx) = tangent_map_full(grid, x, &px)?;
    let (my, _, fy) = tangent_map_full(grid, y, &py)?;
    let ax = &fx * &mx;
    let ay = &fy * &my;
    use faer::linalg::solvers::Solve;
    Ok(ay.partial_piv_lu().solve(ax))
}

/// χ(u) = |det g_ij(u)|^{-1/4} for the pullback metric in frame coordinates.
pub fn density_factor(grid: &ManifoldGrid, x: &[f64], u: &[f64]) -> f64 {
    if grid.dim != 2 || grid.is_flat() {
        return 1.0;
    }
    match tangent_map_full_unchecked(grid, x, u) {
        Some((m, _, _)) => m.determinant().abs().powf(-0.5),
        None => f64::NAN,
    }
}

/// |det g|^{-1/4} for an explicit metric tensor.
pub fn density_from_metric(g: &Mat<f64>) -> f64 {
    g.determinant().abs().powf(-0.25)
}

/// Distortion bound ‖p‖²c²e for the tangent map.
pub fn distortion_bound(p_norm: f64, c: f64) -> f64 {
    p_norm * p_norm * c * c * E
}

pub(crate) fn wrap(d: f64, period: f64) -> f64 {
    let h = 0.5 * period;
    let mut v = (d + h).rem_euclid(period) - h;
    if v <= -h {
        v += period;
    }
    v
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn identity(n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Coordinates of chart vector `v` in the orthonormal frame `f` (columns).
fn frame_coords(f: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    use faer::linalg::solvers::Solve;
    let rhs = Mat::from_fn(v.len(), 1, |i, _| v[i]);
    let c = f.partial_piv_lu().solve(rhs);
    (0..v.len()).map(|i| c[(i, 0)]).collect()
}
