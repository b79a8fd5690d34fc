//! Order-0 symbols, their sampled Hörmander estimates, Fourier cosymbols and
//! zoom-homogeneous kernels.

use crate::liegroup::{homogeneous_norm, zoom, GradedAlgebra, GroupGrid};
use crate::operator::{c64, DiscreteOperator};
use crate::profile::{nu, smoothstep};
use faer::Mat;
use rustfft::FftPlanner;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("expression error: {0}")]
    Parse(String),
    #[error("tail beyond the sampling horizon carries {tail:.3e} of the variation")]
    AliasWarning { tail: f64 },
    #[error("decay is nonmonotone near the sampling horizon")]
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum OrderClass {
    Order0,
    Negative,
    StronglyNegative,
}

type ScalarFn = Arc<dyn Fn(&[f64], &[f64]) -> c64 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64], &[f64]) -> Mat<c64> + Send + Sync>;

#[derive(Clone)]
enum Evaluator {
    Scalar(ScalarFn),
    Matrix(MatrixFn),
}

/// A pure evaluator (x, ξ) ↦ σ(x, ξ) ∈ ℂ^{m×m}.
#[derive(Clone)]
pub struct Symbol {
    pub name: String,
    pub fiber_dim: usize,
    pub claimed: OrderClass,
    eval: Evaluator,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("name", &self.name)
            .field("fiber_dim", &self.fiber_dim)
            .field("claimed", &self.claimed)
            .finish()
    }
}

impl Symbol {
    pub fn scalar(name: impl Into<String>, claimed: OrderClass, f: impl Fn(&[f64], &[f64]) -> c64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), fiber_dim: 1, claimed, eval: Evaluator::Scalar(Arc::new(f)) }
    }

    pub fn matrix(
        name: impl Into<String>,
        fiber_dim: usize,
        claimed: OrderClass,
        f: impl Fn(&[f64], &[f64]) -> Mat<c64> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), fiber_dim, claimed, eval: Evaluator::Matrix(Arc::new(f)) }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self.eval, Evaluator::Scalar(_))
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Mat<c64> {
        match &self.eval {
            Evaluator::Scalar(f) => Mat::from_fn(1, 1, |_, _| f(x, xi)),
            Evaluator::Matrix(f) => f(x, xi),
        }
    }

    /// Scalar value; the (0, 0) entry for matrix symbols.
    pub fn value(&self, x: &[f64], xi: &[f64]) -> c64 {
        match &self.eval {
            Evaluator::Scalar(f) => f(x, xi),
            Evaluator::Matrix(f) => f(x, xi)[(0, 0)],
        }
    }

    pub fn norm_at(&self, x: &[f64], xi: &[f64]) -> f64 {
        match &self.eval {
            Evaluator::Scalar(f) => f(x, xi).norm(),
            Evaluator::Matrix(f) => crate::operator::singular_values(&f(x, xi))[0],
        }
    }

    /// Pointwise adjoint σ*.
    pub fn adjoint(&self) -> Self {
        let name = format!("{}*", self.name);
        match &self.eval {
            Evaluator::Scalar(f) => {
                let f = f.clone();
                Self::scalar(name, self.claimed, move |x, xi| f(x, xi).conj())
            }
            Evaluator::Matrix(f) => {
                let f = f.clone();
                Self::matrix(name, self.fiber_dim, self.claimed, move |x, xi| f(x, xi).adjoint().to_owned())
            }
        }
    }

    /// Pointwise product σ₁σ₂.
    pub fn product(&self, other: &Symbol) -> Self {
        let name = format!("{}·{}", self.name, other.name);
        let claimed = self.claimed.max(other.claimed);
        match (&self.eval, &other.eval) {
            (Evaluator::Scalar(f), Evaluator::Scalar(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Self::scalar(name, claimed, move |x, xi| f(x, xi) * g(x, xi))
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                Self::matrix(name, self.fiber_dim, claimed, move |x, xi| &a.eval(x, xi) * &b.eval(x, xi))
            }
        }
    }

    /// Pointwise σ − 1.
    pub fn minus_identity(&self) -> Self {
        let s = self.clone();
        let m = self.fiber_dim;
        Self::matrix(format!("{}-1", self.name), m, OrderClass::Order0, move |x, xi| {
            let v = s.eval(x, xi);
            Mat::from_fn(m, m, |i, j| if i == j { v[(i, j)] - 1.0 } else { v[(i, j)] })
        })
    }

    /// σ(x, ψ_x(ξ)) for a family of linear maps ψ_x given as row-major matrices.
    pub fn reparametrize(&self, psi: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        let s = self.clone();
        let psi = Arc::new(psi);
        let f = move |x: &[f64], xi: &[f64]| {
            let m = psi(x);
            let d = xi.len();
            let eta: Vec<f64> = (0..d).map(|i| (0..d).map(|j| m[i * d + j] * xi[j]).sum()).collect();
            s.eval(x, &eta)
        };
        Self::matrix(format!("{}∘ψ", self.name), self.fiber_dim, self.claimed, f)
    }
}

/// Smoothed sign projection: 0 for ξ ≤ −1, 1 for ξ ≥ 0.
pub fn hardy_step(xi: f64) -> f64 {
    smoothstep(xi + 1.0)
}

/// e^{iwθ} on nonnegative frequencies, 1 on negative ones.
pub fn winding(w: i32) -> Symbol {
    Symbol::scalar(format!("winding_{w}"), OrderClass::Order0, move |x, xi| {
        let h = hardy_step(xi[0]);
        c64::cis(w as f64 * x[0]) * h + (1.0 - h)
    })
}

pub fn dirac1d() -> Symbol {
    Symbol::scalar("dirac1d", OrderClass::Order0, |_, xi| c64::new(xi[0] / (1.0 + xi[0] * xi[0]).sqrt(), 0.0))
}

pub fn constant(c: c64) -> Symbol {
    Symbol::scalar("constant", OrderClass::Order0, move |_, _| c)
}

/// sin ξ, which violates the derivative decay.
pub fn sin_xi() -> Symbol {
    Symbol::scalar("sin_xi", OrderClass::Order0, |_, xi| c64::new(xi[0].sin(), 0.0))
}

/// x-only symbol e^{iwθ}(1 + 0.1 sin θ).
pub fn toeplitz(w: i32) -> Symbol {
    Symbol::scalar(format!("toeplitz_{w}"), OrderClass::Order0, move |x, _| {
        c64::cis(w as f64 * x[0]) * (1.0 + 0.1 * x[0].sin())
    })
}

/// 2×2 graded symbol with off-diagonal blocks ξ/√(1+ξ²).
pub fn dirac_graded() -> Symbol {
    Symbol::matrix("dirac_graded", 2, OrderClass::Order0, |_, xi| {
        let s = xi[0] / (1.0 + xi[0] * xi[0]).sqrt();
        Mat::from_fn(2, 2, |i, j| if i != j { c64::new(s, 0.0) } else { c64::new(0.0, 0.0) })
    })
}

/// Homogeneous kernel x/‖g‖⁵ on h₃, of degree −Q.
pub fn heis_homog_kernel(g: &[f64]) -> f64 {
    let r = homogeneous_norm(&GradedAlgebra::heisenberg(), g);
    if r == 0.0 {
        0.0
    } else {
        g[0] / r.powi(5)
    }
}

/// Catalog lookup: `winding_<w>`, `toeplitz_<w>`, `dirac1d`, `dirac_graded`,
/// `constant`, `constant:<c>`, `sin_xi`, or `expr:<expression>`.
pub fn catalog(name: &str) -> Result<Symbol, SymbolError> {
    if let Some(w) = name.strip_prefix("winding_") {
        return w.parse().map(winding).map_err(|_| SymbolError::UnknownSymbol(name.into()));
    }
    if let Some(w) = name.strip_prefix("toeplitz_") {
        return w.parse().map(toeplitz).map_err(|_| SymbolError::UnknownSymbol(name.into()));
    }
    if let Some(e) = name.strip_prefix("expr:") {
        return parse_symbol(e);
    }
    if let Some(c) = name.strip_prefix("constant:") {
        let v = Expr::parse(c)?.eval(&[], &[]);
        return Ok(constant(v));
    }
    match name {
        "dirac1d" => Ok(dirac1d()),
        "dirac_graded" => Ok(dirac_graded()),
        "constant" => Ok(constant(c64::new(1.0, 0.0))),
        "sin_xi" => Ok(sin_xi()),
        _ => Err(SymbolError::UnknownSymbol(name.into())),
    }
}

/// Scalar symbol from an expression in x, y, z, theta, xi, eta.
pub fn parse_symbol(src: &str) -> Result<Symbol, SymbolError> {
    let e = Arc::new(Expr::parse(src)?);
    Ok(Symbol::scalar(format!("expr:{src}"), OrderClass::Order0, move |x, xi| e.eval(x, xi)))
}

/// Parsed arithmetic over ℂ.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(c64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Var {
    X(usize),
    Xi(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Sinh,
    Cosh,
    Conj,
    Re,
    Im,
    Arg,
    Step,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Id(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<Tok>, SymbolError> {
    let cs: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                i += 1;
            }
            if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                let mut j = i + 1;
                if j < cs.len() && (cs[j] == '+' || cs[j] == '-') {
                    j += 1;
                }
                if j < cs.len() && cs[j].is_ascii_digit() {
                    i = j;
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = cs[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| SymbolError::Parse(format!("bad number {s:?}")))?;
            if i < cs.len() && cs[i] == 'i' && !(i + 1 < cs.len() && cs[i + 1].is_alphanumeric()) {
                out.push(Tok::Imag(v));
                i += 1;
            } else {
                out.push(Tok::Num(v));
            }
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Id(cs[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(SymbolError::Parse(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, SymbolError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SymbolError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Bin('/', Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, SymbolError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, SymbolError> {
        let tok = self.peek().cloned().ok_or_else(|| SymbolError::Parse("unexpected end of input".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(c64::new(v, 0.0))),
            Tok::Imag(v) => Ok(Expr::Num(c64::new(0.0, v))),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(SymbolError::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Op(c) => Err(SymbolError::Parse(format!("unexpected {c:?}"))),
            Tok::Id(id) => {
                let var = match id.as_str() {
                    "x" | "theta" => Some(Expr::Var(Var::X(0))),
                    "y" => Some(Expr::Var(Var::X(1))),
                    "z" => Some(Expr::Var(Var::X(2))),
                    "xi" => Some(Expr::Var(Var::Xi(0))),
                    "eta" => Some(Expr::Var(Var::Xi(1))),
                    "zeta" => Some(Expr::Var(Var::Xi(2))),
                    "i" => Some(Expr::Num(c64::new(0.0, 1.0))),
                    "pi" => Some(Expr::Num(c64::new(PI, 0.0))),
                    _ => None,
                };
                if let Some(v) = var {
                    return Ok(v);
                }
                let f = match id.as_str() {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "tan" => Func::Tan,
                    "exp" => Func::Exp,
                    "log" | "ln" => Func::Log,
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    "tanh" => Func::Tanh,
                    "sinh" => Func::Sinh,
                    "cosh" => Func::Cosh,
                    "conj" => Func::Conj,
                    "re" => Func::Re,
                    "im" => Func::Im,
                    "arg" => Func::Arg,
                    "step" => Func::Step,
                    other => return Err(SymbolError::Parse(format!("unknown identifier {other:?}"))),
                };
                if !self.eat('(') {
                    return Err(SymbolError::Parse(format!("{id} needs an argument")));
                }
                let a = self.expr()?;
                if !self.eat(')') {
                    return Err(SymbolError::Parse("missing ')'".into()));
                }
                Ok(Expr::Call(f, Box::new(a)))
            }
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, SymbolError> {
        let mut p = Parser { toks: lex(src)?, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(SymbolError::Parse(format!("trailing input at token {}", p.pos)));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> c64 {
        let zero = c64::new(0.0, 0.0);
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X(k)) => x.get(*k).map_or(zero, |&v| c64::new(v, 0.0)),
            Expr::Var(Var::Xi(k)) => xi.get(*k).map_or(zero, |&v| c64::new(v, 0.0)),
            Expr::Neg(a) => -a.eval(x, xi),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, xi), b.eval(x, xi));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => {
                        if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() <= 64.0 {
                            a.powi(b.re as i32)
                        } else if a.im == 0.0 && a.re >= 0.0 && b.im == 0.0 {
                            c64::new(a.re.powf(b.re), 0.0)
                        } else {
                            a.powc(b)
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(x, xi);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => c64::new(a.norm(), 0.0),
                    Func::Tanh => a.tanh(),
                    Func::Sinh => a.sinh(),
                    Func::Cosh => a.cosh(),
                    Func::Conj => a.conj(),
                    Func::Re => c64::new(a.re, 0.0),
                    Func::Im => c64::new(a.im, 0.0),
                    Func::Arg => c64::new(a.arg(), 0.0),
                    Func::Step => c64::new(hardy_step(a.re), 0.0),
                }
            }
        }
    }
}

/// Covectors on dyadic shells ‖ξ‖ ∈ [2^j, 2^{j+1}), `radial` samples per
/// shell, both signs in 1D and 8 directions in 2D.
pub fn shell_samples(dim: usize, horizon: f64, radial: usize) -> Vec<Vec<Vec<f64>>> {
    let mut shells = Vec::new();
    let mut rho = 1.0;
    while rho <= horizon {
        let mut s = Vec::new();
        for k in 0..radial {
            let r = rho * (1.0 + k as f64 / radial as f64);
            match dim {
                1 => {
                    s.push(vec![r]);
                    s.push(vec![-r]);
                }
                _ => {
                    for d in 0..8 {
                        let a = d as f64 * PI / 4.0 + 0.1;
                        let mut v = vec![0.0; dim];
                        v[0] = r * a.cos();
                        v[1] = r * a.sin();
                        s.push(v);
                    }
                }
            }
        }
        shells.push(s);
        rho *= 2.0;
    }
    shells
}

fn frob_diff(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    (a - b).norm_l2()
}

/// Sampled constants of the derivative estimate.
#[derive(Clone, Debug)]
pub struct HormanderReport {
    /// Smallest C with ‖d_ξσ‖ ≤ C(1+‖ξ‖)^{-1} on the samples.
    pub c: f64,
    pub worst_x: Vec<f64>,
    pub worst_xi: Vec<f64>,
    /// Per-shell maxima of (1+‖ξ‖)‖d_ξσ‖.
    pub shell_constants: Vec<f64>,
    pub sup_norm: f64,
    /// Largest |σ(x+h, ξ) − σ(x, ξ)| over shells with h the probe step.
    pub x_modulus: f64,
    pub pass: bool,
}

/// Samples both conditions of an order-0 symbol. Passes when the outer-shell
/// constants do not exceed twice the inner-shell ones.
pub fn check_hormander(sym: &Symbol, points: &[Vec<f64>], xi_dim: usize, horizon: f64) -> HormanderReport {
    let shells = shell_samples(xi_dim, horizon, 8);
    let mut c = 0.0;
    let mut worst_x = points[0].clone();
    let mut worst_xi = vec![0.0; xi_dim];
    let mut shell_constants = Vec::with_capacity(shells.len());
    let mut sup_norm = 0.0f64;
    let mut x_modulus = 0.0f64;
    let hx = 1e-3;
    for shell in &shells {
        let mut sc = 0.0f64;
        for x in points {
            let mut xs = x.clone();
            xs[0] += hx;
            for xi in shell {
                let r = norm(xi);
                let h = 1e-4 * r.max(1.0);
                let mut d2 = 0.0;
                for a in 0..xi_dim {
                    let mut p = xi.clone();
                    let mut m = xi.clone();
                    p[a] += h;
                    m[a] -= h;
                    let d = frob_diff(&sym.eval(x, &p), &sym.eval(x, &m)) / (2.0 * h);
                    d2 += d * d;
                }
                let v = (1.0 + r) * d2.sqrt();
                if v > c {
                    c = v;
                    worst_x = x.clone();
                    worst_xi = xi.clone();
                }
                sc = sc.max(v);
                let s = sym.eval(x, xi);
                sup_norm = sup_norm.max(s.norm_l2());
                x_modulus = x_modulus.max(frob_diff(&s, &sym.eval(&xs, xi)));
            }
        }
        shell_constants.push(sc);
    }
    let k = shell_constants.len();
    let inner = shell_constants[..k.div_ceil(2)].iter().cloned().fold(0.0, f64::max);
    let outer = shell_constants[k.saturating_sub(2)..].iter().cloned().fold(0.0, f64::max);
    let pass = outer <= 1e-12 || outer <= 2.0 * inner;
    HormanderReport { c, worst_x, worst_xi, shell_constants, sup_norm, x_modulus, pass }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn decays(m: &[f64]) -> Result<bool, SymbolError> {
    let k = m.len();
    let top = m.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(true);
    }
    let tail = m[k - 1];
    let mid = m[k / 2];
    if tail > 0.5 * mid {
        return Ok(false);
    }
    let slack = 1e-12 * top;
    if k >= 3 && (m[k - 2] > m[k - 3] + slack || m[k - 1] > m[k - 2] + slack) {
        return Err(SymbolError::Inconclusive);
    }
    Ok(true)
}

/// Order class from sup-norm decay on growing shells, and on `far` points
/// running off to infinity when the base is noncompact.
pub fn classify_order(
    sym: &Symbol,
    points: &[Vec<f64>],
    xi_dim: usize,
    horizon: f64,
    far: Option<&[Vec<f64>]>,
) -> Result<OrderClass, SymbolError> {
    let shells = shell_samples(xi_dim, horizon, 4);
    let m: Vec<f64> = shells
        .iter()
        .map(|s| {
            points
                .iter()
                .flat_map(|x| s.iter().map(move |xi| sym.norm_at(x, xi)))
                .fold(0.0, f64::max)
        })
        .collect();
    if !decays(&m)? {
        return Ok(OrderClass::Order0);
    }
    let Some(far) = far else { return Ok(OrderClass::Negative) };
    let all: Vec<&Vec<f64>> = shells.iter().flatten().collect();
    let n: Vec<f64> = far
        .iter()
        .map(|x| all.iter().map(|xi| sym.norm_at(x, xi)).fold(0.0, f64::max))
        .collect();
    if decays(&n)? {
        Ok(OrderClass::StronglyNegative)
    } else {
        Ok(OrderClass::Negative)
    }
}

/// Lattice convolution kernel on the periodic fiber ℤ_n^d with spacing 2π/n,
/// stored in FFT order.
#[derive(Clone, Debug)]
pub struct FiberKernel {
    pub dim: usize,
    pub n: usize,
    pub values: Vec<c64>,
    /// Relative ξ-variation beyond the horizon.
    pub alias_tail: f64,
}

impl FiberKernel {
    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Kernel at lattice offset `m` (wrapped).
    pub fn get(&self, m: &[i64]) -> c64 {
        let n = self.n as i64;
        let pos = m.iter().fold(0usize, |acc, &v| acc * self.n + v.rem_euclid(n) as usize);
        self.values[pos]
    }

    /// Signed offsets in FFT order.
    pub fn offsets(&self) -> Vec<Vec<i64>> {
        let n = self.n as i64;
        let axis: Vec<i64> = (0..n).map(|k| if k < (n + 1) / 2 { k } else { k - n }).collect();
        let mut out: Vec<Vec<i64>> = vec![Vec::new()];
        for _ in 0..self.dim {
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

    /// Σ |k|² · cell.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell()
    }

    /// Multiplies by ν(|u|/r), u the wrapped offset.
    pub fn cut(&self, r: f64) -> FiberKernel {
        let h = self.spacing();
        let values = self
            .offsets()
            .iter()
            .zip(&self.values)
            .map(|(m, v)| {
                let u = m.iter().map(|&a| (a as f64 * h).powi(2)).sum::<f64>().sqrt();
                v * nu(u / r)
            })
            .collect();
        FiberKernel { values, ..self.clone() }
    }

    /// Fourier multiplier ĉ(k) = cell · Σ_m k(m) e^{−ik·mh}, in FFT order.
    pub fn multiplier(&self) -> Vec<c64> {
        let mut v = self.values.clone();
        fft_nd(&mut v, self.n, self.dim, false);
        let c = self.cell();
        v.iter().map(|a| a * c).collect()
    }

    /// Norm of convolution by the kernel on L²(ℤ_n^d).
    pub fn operator_norm(&self) -> f64 {
        self.multiplier().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// In-place d-dimensional FFT (unnormalized) on an n^d row-major array.
pub fn fft_nd(data: &mut [c64], n: usize, dim: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    match dim {
        1 => fft.process(data),
        2 => {
            for row in data.chunks_mut(n) {
                fft.process(row);
            }
            let mut col = vec![c64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                fft.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        }
        _ => panic!("fft_nd supports dimensions 1 and 2"),
    }
}

/// Integer frequency of FFT slot `k`.
pub fn freq(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Symbol samples σ(x, k) on the frequency lattice in FFT order (scalar part).
pub fn symbol_samples(sym: &Symbol, x: &[f64], n: usize, dim: usize) -> Vec<c64> {
    match dim {
        1 => (0..n).map(|k| sym.value(x, &[freq(k, n)])).collect(),
        2 => (0..n * n).map(|k| sym.value(x, &[freq(k / n, n), freq(k % n, n)])).collect(),
        _ => panic!("Fourier cosymbols are defined on 1- and 2-dimensional fibers"),
    }
}

/// Cosymbol fiber at x: k(mh) = (2π)^{-d} Σ_k σ(x,k) e^{ik·mh}.
pub fn fourier_cosymbol(sym: &Symbol, x: &[f64], n: usize, dim: usize, alias_tol: Option<f64>) -> Result<FiberKernel, SymbolError> {
    let mut v = symbol_samples(sym, x, n, dim);
    let alias_tail = alias_tail(sym, x, n, dim);
    if let Some(tol) = alias_tol {
        if alias_tail > tol {
            return Err(SymbolError::AliasWarning { tail: alias_tail });
        }
    }
    fft_nd(&mut v, n, dim, true);
    let s = TAU.powi(dim as i32).recip();
    Ok(FiberKernel { dim, n, values: v.iter().map(|a| a * s).collect(), alias_tail })
}

/// Share of the ξ-variation ‖σ(k+1) − σ(k)‖² lying in n/2 ≤ |k| < n.
pub fn alias_tail(sym: &Symbol, x: &[f64], n: usize, dim: usize) -> f64 {
    let var = |k: f64| -> f64 {
        let step = |a: f64| -> Vec<f64> {
            let mut v = vec![0.0; dim];
            v[0] = a;
            v
        };
        (sym.value(x, &step(k + 1.0)) - sym.value(x, &step(k))).norm_sqr()
    };
    let half = (n / 2) as i64;
    let inner: f64 = (-half..half).map(|k| var(k as f64)).sum();
    let outer: f64 = (half..2 * half).chain(-2 * half..-half).map(|k| var(k as f64)).sum();
    if inner + outer == 0.0 {
        0.0
    } else {
        outer / (inner + outer)
    }
}

/// x ↦ cut fiber kernel of a Fourier symbol.
#[derive(Clone, Debug)]
pub struct Cosymbol {
    pub symbol: Symbol,
    pub n: usize,
    pub dim: usize,
    /// ν-cut radius; `None` keeps the full periodic kernel.
    pub cut: Option<f64>,
}

impl Cosymbol {
    pub fn new(symbol: Symbol, n: usize, dim: usize, cut: Option<f64>) -> Self {
        Self { symbol, n, dim, cut }
    }

    pub fn fiber(&self, x: &[f64]) -> FiberKernel {
        let k = fourier_cosymbol(&self.symbol, x, self.n, self.dim, None).expect("no alias tolerance");
        match self.cut {
            Some(r) => k.cut(r),
            None => k,
        }
    }

    /// ‖σ̃_x − σ̃_y‖ as convolution operators.
    pub fn fiber_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let a = self.fiber(x).multiplier();
        let b = self.fiber(y).multiplier();
        a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
    }

    /// Convolution by the fiber kernel as a dense matrix on ℤ_n^d.
    pub fn fiber_operator(&self, x: &[f64]) -> DiscreteOperator {
        let k = self.fiber(x);
        let cell = k.cell();
        let offs = k.offsets();
        let count = offs.len();
        DiscreteOperator::from_fn(count, |i, j| {
            let m: Vec<i64> = offs[i].iter().zip(&offs[j]).map(|(a, b)| a - b).collect();
            k.get(&m) * cell
        })
    }
}

/// A distribution on h₃: point mass at the identity plus a density.
#[derive(Clone)]
pub struct ZoomKernel {
    pub delta_mass: c64,
    pub density: Arc<dyn Fn(&[f64]) -> c64 + Send + Sync>,
}

impl ZoomKernel {
    pub fn delta() -> Self {
        Self { delta_mass: c64::new(1.0, 0.0), density: Arc::new(|_| c64::new(0.0, 0.0)) }
    }

    pub fn from_fn(f: impl Fn(&[f64]) -> c64 + Send + Sync + 'static) -> Self {
        Self { delta_mass: c64::new(0.0, 0.0), density: Arc::new(f) }
    }

    pub fn heis_homog() -> Self {
        Self::from_fn(|g| c64::new(heis_homog_kernel(g), 0.0))
    }
}

#[derive(Clone, Debug)]
pub struct ZoomReport {
    /// (λ, relative ℓ² defect of λ^{-Q}k∘δ_{1/λ} against k).
    pub defects: Vec<(f64, f64)>,
}

impl ZoomReport {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().map(|d| d.1).fold(0.0, f64::max)
    }
}

/// Compares the order-0 pushforward λ^{-Q} k(δ_{1/λ} g) with k at lattice
/// points whose homogeneous norm lies in [ρ_min, ρ_max].
pub fn check_zoom_invariance(grid: &GroupGrid, kernel: &ZoomKernel, lambdas: &[f64], rho: (f64, f64)) -> ZoomReport {
    let alg = &grid.algebra;
    let q = alg.homogeneous_dim() as i32;
    let window: Vec<&Vec<f64>> = grid
        .points
        .iter()
        .filter(|g| {
            let r = homogeneous_norm(alg, g);
            r >= rho.0 && r <= rho.1
        })
        .collect();
    let defects = lambdas
        .iter()
        .map(|&l| {
            let mut num = 0.0;
            let mut den = kernel.delta_mass.norm_sqr();
            for g in &window {
                let k = (kernel.density)(g);
                let back = zoom(alg, 1.0 / l, g).expect("positive λ");
                let push = (kernel.density)(&back) * l.powi(-q);
                num += (push - k).norm_sqr();
                den += k.norm_sqr();
            }
            let rel = if den == 0.0 { 0.0 } else { (num / den).sqrt() };
            (l, rel)
        })
        .collect();
    ZoomReport { defects }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parser_precedence() {
        let e = Expr::parse("1 + 2*3^2 - -4/2").unwrap();
        assert_eq!(e.eval(&[], &[]), c64::new(1.0 + 18.0 + 2.0, 0.0));
        let e = Expr::parse("exp(i*x) * 2i").unwrap();
        let v = e.eval(&[PI / 2.0], &[]);
        assert!((v - c64::new(-2.0, 0.0)).norm() < 1e-15);
        assert!(Expr::parse("sin(").is_err());
        assert!(Expr::parse("foo(1)").is_err());
    }

    #[test]
    fn catalog_names() {
        for name in ["winding_1", "winding_-3", "dirac1d", "constant", "sin_xi", "toeplitz_2", "expr:xi/sqrt(1+xi^2)"] {
            assert!(catalog(name).is_ok(), "{name}");
        }
        assert!(catalog("winding_x").is_err());
    }

    #[test]
    fn constant_symbol_is_delta() {
        let k = fourier_cosymbol(&constant(c64::new(2.0, 0.0)), &[0.0], 16, 1, None).unwrap();
        let h = k.spacing();
        assert!((k.values[0] * h - 2.0).norm() < 1e-13);
        assert!(k.values[1..].iter().all(|v| v.norm() < 1e-13));
    }
}
