//! Intervals, coefficients, spectral parameters and the `Problem` record.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat, C64};
use crate::quad::{self, QuadOptions};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// One end of the interval. `value` may be `±∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub value: f64,
    /// Finite endpoint where the coefficients stay integrable, so solutions extend to it.
    pub regular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    Finite,
    Infinite,
}

impl Endpoint {
    pub fn finite(value: f64) -> Self {
        Endpoint { value, regular: false }
    }

    pub fn regular(value: f64) -> Self {
        Endpoint { value, regular: true }
    }

    pub fn minus_infinity() -> Self {
        Endpoint { value: f64::NEG_INFINITY, regular: false }
    }

    pub fn plus_infinity() -> Self {
        Endpoint { value: f64::INFINITY, regular: false }
    }

    pub fn kind(&self) -> EndpointKind {
        if self.value.is_finite() {
            EndpointKind::Finite
        } else {
            EndpointKind::Infinite
        }
    }

    pub fn is_regular(&self) -> bool {
        self.regular && self.value.is_finite()
    }
}

/// Endpoint selector: `Minus` is the left end `a`, `Plus` the right end `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    /// +1 for `Plus`, −1 for `Minus`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Minus => "a",
            Side::Plus => "b",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter(pub C64);

impl SpectralParameter {
    pub fn real(l: f64) -> Self {
        SpectralParameter(C64::new(l, 0.0))
    }

    pub fn new(re: f64, im: f64) -> Self {
        SpectralParameter(C64::new(re, im))
    }

    pub fn is_real(&self) -> bool {
        self.0.im == 0.0
    }

    pub fn conj(&self) -> Self {
        SpectralParameter(self.0.conj())
    }
}

impl From<C64> for SpectralParameter {
    fn from(z: C64) -> Self {
        SpectralParameter(z)
    }
}

impl From<f64> for SpectralParameter {
    fn from(l: f64) -> Self {
        SpectralParameter::real(l)
    }
}

#[derive(Clone)]
pub struct ScalarCoefficients {
    pub p: ScalarFn,
    pub q: ScalarFn,
    pub r: ScalarFn,
    /// Discontinuity points of the coefficients; mandatory step boundaries.
    pub breakpoints: Vec<f64>,
}

#[derive(Clone)]
pub struct MatrixCoefficients {
    pub dim: usize,
    pub p: MatrixFn,
    pub q: MatrixFn,
    pub r: MatrixFn,
    pub breakpoints: Vec<f64>,
}

#[derive(Clone)]
pub enum Coefficients {
    Scalar(ScalarCoefficients),
    Matrix(MatrixCoefficients),
}

impl Coefficients {
    pub fn dim(&self) -> usize {
        match self {
            Coefficients::Scalar(_) => 1,
            Coefficients::Matrix(m) => m.dim,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Coefficients::Scalar(s) => &s.breakpoints,
            Coefficients::Matrix(m) => &m.breakpoints,
        }
    }

    pub fn p(&self, x: f64) -> CMat {
        match self {
            Coefficients::Scalar(s) => linalg::scalar(C64::new((s.p)(x), 0.0)),
            Coefficients::Matrix(m) => (m.p)(x),
        }
    }

    pub fn q(&self, x: f64) -> CMat {
        match self {
            Coefficients::Scalar(s) => linalg::scalar(C64::new((s.q)(x), 0.0)),
            Coefficients::Matrix(m) => (m.q)(x),
        }
    }

    pub fn r(&self, x: f64) -> CMat {
        match self {
            Coefficients::Scalar(s) => linalg::scalar(C64::new((s.r)(x), 0.0)),
            Coefficients::Matrix(m) => (m.r)(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance for Hermitian symmetry checks.
    pub hermitian: f64,
    /// Default ODE tolerance.
    pub ode: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { hermitian: 1e-10, ode: 1e-12 }
    }
}

/// Disconjugacy thresholds and limit-point declarations supplied by the user or by `classify`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// λ_a: for λ below it the equation is disconjugate near `a`.
    pub lambda_a: Option<f64>,
    /// λ_b: for λ below it the equation is disconjugate near `b`.
    pub lambda_b: Option<f64>,
    /// Declared lower bound λ₀ of the minimal operator.
    pub lower_bound: Option<f64>,
    pub limit_point_a: Option<bool>,
    pub limit_point_b: Option<bool>,
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub a: Endpoint,
    pub b: Endpoint,
    pub coefficients: Coefficients,
    pub x0: f64,
    pub tolerances: Tolerances,
    pub thresholds: Thresholds,
    pub seed: u64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("dim", &self.dim())
            .field("x0", &self.x0)
            .finish()
    }
}

impl Problem {
    pub fn new(name: impl Into<String>, a: Endpoint, b: Endpoint, coefficients: Coefficients, x0: f64) -> Self {
        Problem {
            name: name.into(),
            a,
            b,
            coefficients,
            x0,
            tolerances: Tolerances::default(),
            thresholds: Thresholds::default(),
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self.coefficients, Coefficients::Scalar(_))
    }

    pub fn endpoint(&self, side: Side) -> Endpoint {
        match side {
            Side::Minus => self.a,
            Side::Plus => self.b,
        }
    }

    /// Whether `x` may carry a solution value: open interval, closed at regular ends.
    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = x > self.a.value || (self.a.is_regular() && x == self.a.value);
        let hi_ok = x < self.b.value || (self.b.is_regular() && x == self.b.value);
        x.is_finite() && lo_ok && hi_ok
    }

    /// Disconjugacy threshold for one side; falls back to the declared lower bound.
    pub fn threshold(&self, side: Side) -> Option<f64> {
        let own = match side {
            Side::Minus => self.thresholds.lambda_a,
            Side::Plus => self.thresholds.lambda_b,
        };
        own.or(self.thresholds.lower_bound)
    }

    pub fn declared_limit_point(&self, side: Side) -> Option<bool> {
        match side {
            Side::Minus => self.thresholds.limit_point_a,
            Side::Plus => self.thresholds.limit_point_b,
        }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_thresholds(mut self, t: Thresholds) -> Self {
        self.thresholds = t;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The same problem viewed as an m = 1 matrix problem (no scalar fast path).
    pub fn as_matrix(&self) -> Problem {
        let coefficients = match &self.coefficients {
            Coefficients::Scalar(s) => {
                let (p, q, r) = (s.p.clone(), s.q.clone(), s.r.clone());
                Coefficients::Matrix(MatrixCoefficients {
                    dim: 1,
                    p: Arc::new(move |x| linalg::scalar(C64::new(p(x), 0.0))),
                    q: Arc::new(move |x| linalg::scalar(C64::new(q(x), 0.0))),
                    r: Arc::new(move |x| linalg::scalar(C64::new(r(x), 0.0))),
                    breakpoints: s.breakpoints.clone(),
                })
            }
            m => m.clone(),
        };
        Problem { coefficients, ..self.clone() }
    }

    /// A compact window inside the interval used for sampling.
    pub fn sample_window(&self) -> (f64, f64) {
        let lo = if self.a.value.is_finite() {
            if self.a.is_regular() {
                self.a.value
            } else {
                self.a.value + 1e-3 * (self.x0 - self.a.value)
            }
        } else {
            self.x0 - 50.0
        };
        let hi = if self.b.value.is_finite() {
            if self.b.is_regular() {
                self.b.value
            } else {
                self.b.value - 1e-3 * (self.b.value - self.x0)
            }
        } else {
            self.x0 + 50.0
        };
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub invariant: String,
    pub x: Option<f64>,
    pub detail: String,
}

impl Violation {
    fn at(invariant: &str, x: f64, detail: String) -> Self {
        Violation { invariant: invariant.into(), x: Some(x), detail }
    }

    fn global(invariant: &str, detail: String) -> Self {
        Violation { invariant: invariant.into(), x: None, detail }
    }
}

const GRID_POINTS: usize = 101;
const RANDOM_POINTS: usize = 32;

/// Check the hypotheses on a deterministic grid plus seeded random points.
pub fn validate(problem: &Problem) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(problem.a.value < problem.b.value) {
        out.push(Violation::global("a < b", format!("a = {}, b = {}", problem.a.value, problem.b.value)));
        return out;
    }
    if !(problem.x0 > problem.a.value && problem.x0 < problem.b.value) {
        out.push(Violation::at("x0 in (a,b)", problem.x0, "reference point outside the open interval".into()));
    }
    let (lo, hi) = problem.sample_window();
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut xs: Vec<f64> = (0..GRID_POINTS)
        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / GRID_POINTS as f64)
        .collect();
    xs.extend((0..RANDOM_POINTS).map(|_| rng.gen_range(lo..hi)));
    xs.push(problem.x0);

    let tol = problem.tolerances.hermitian;
    let m = problem.dim();
    for &x in &xs {
        match &problem.coefficients {
            Coefficients::Scalar(s) => {
                let (p, q, r) = ((s.p)(x), (s.q)(x), (s.r)(x));
                if !(p > 0.0) {
                    out.push(Violation::at("p not positive", x, format!("p = {p}")));
                }
                if !(r > 0.0) {
                    out.push(Violation::at("r not positive", x, format!("r = {r}")));
                }
                if !q.is_finite() {
                    out.push(Violation::at("q not finite", x, format!("q = {q}")));
                }
            }
            Coefficients::Matrix(c) => {
                for (name, mat) in [("P", (c.p)(x)), ("Q", (c.q)(x)), ("R", (c.r)(x))] {
                    if mat.nrows() != m || mat.ncols() != m {
                        out.push(Violation::at(
                            &format!("{name} dimension"),
                            x,
                            format!("{}x{} instead of {m}x{m}", mat.nrows(), mat.ncols()),
                        ));
                        continue;
                    }
                    if !linalg::is_finite(&mat) {
                        out.push(Violation::at(&format!("{name} not finite"), x, String::new()));
                        continue;
                    }
                    let defect = linalg::norm(&(&mat - mat.adjoint()));
                    if defect > tol * linalg::norm(&mat).max(f64::MIN_POSITIVE) {
                        out.push(Violation::at(&format!("{name} not Hermitian"), x, format!("‖A − A*‖ = {defect:.3e}")));
                    } else if name != "Q" {
                        let e = linalg::min_eigenvalue(&mat);
                        if !(e > 0.0) {
                            out.push(Violation::at(
                                &format!("{name} not positive definite"),
                                x,
                                format!("minimum eigenvalue {e:.3e}"),
                            ));
                        }
                    }
                }
            }
        }
    }

    // Local integrability spot-check on random compact subintervals.
    if out.is_empty() {
        for _ in 0..3 {
            let u: f64 = rng.gen_range(lo..hi);
            let v: f64 = rng.gen_range(lo..hi);
            let (s, t) = if u < v { (u, v) } else { (v, u) };
            if t - s < 1e-9 {
                continue;
            }
            let opts = QuadOptions { abs_tol: 1e-8, rel_tol: 1e-6, max_intervals: 200 };
            let integrand = |x: f64| {
                let c = &problem.coefficients;
                let pinv = linalg::inverse(&c.p(x), x)?;
                Ok(linalg::scalar(C64::new(
                    linalg::norm(&pinv) + linalg::norm(&c.q(x)) + linalg::norm(&c.r(x)),
                    0.0,
                )))
            };
            match quad::integrate(integrand, s, t, opts) {
                Ok(r) if r.value[(0, 0)].re.is_finite() => {}
                Ok(_) => out.push(Violation::at("coefficients not locally integrable", s, format!("on [{s}, {t}]"))),
                Err(e) => out.push(Violation::at("coefficients not locally integrable", s, format!("on [{s}, {t}]: {e}"))),
            }
        }
    }
    out
}

/// Built-in coefficient families.
pub mod builtins {
    use super::*;

    pub fn scalar(
        name: &str,
        a: Endpoint,
        b: Endpoint,
        x0: f64,
        p: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q: impl Fn(f64) -> f64 + Send + Sync + 'static,
        r: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Problem {
        Problem::new(
            name,
            a,
            b,
            Coefficients::Scalar(ScalarCoefficients {
                p: Arc::new(p),
                q: Arc::new(q),
                r: Arc::new(r),
                breakpoints: Vec::new(),
            }),
            x0,
        )
    }

    /// `-u'' = z u` with the given interval.
    pub fn free_scalar(a: Endpoint, b: Endpoint, x0: f64) -> Problem {
        scalar("free-scalar", a, b, x0, |_| 1.0, |_| 0.0, |_| 1.0)
    }

    /// Free problem on the whole line with `x0 = 0`.
    pub fn free_line() -> Problem {
        let mut p = free_scalar(Endpoint::minus_infinity(), Endpoint::plus_infinity(), 0.0);
        p.thresholds.lower_bound = Some(0.0);
        p.thresholds.limit_point_a = Some(true);
        p.thresholds.limit_point_b = Some(true);
        p
    }

    /// Free problem on the half-line (0, ∞) with `x0` given.
    pub fn free_half_line(x0: f64) -> Problem {
        let mut p = free_scalar(Endpoint::finite(0.0), Endpoint::plus_infinity(), x0);
        p.thresholds.lambda_b = Some(0.0);
        p.thresholds.limit_point_b = Some(true);
        p
    }

    /// `p = pc·x^pk`, `q = qc·x^qk`, `r = rc·x^rk` (intended for x > 0).
    pub fn scalar_power(a: Endpoint, b: Endpoint, x0: f64, p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> Problem {
        scalar(
            "scalar-power",
            a,
            b,
            x0,
            move |x| p.0 * x.powf(p.1),
            move |x| q.0 * x.powf(q.1),
            move |x| r.0 * x.powf(r.1),
        )
    }

    /// `p = r = 1`, `q = c·e^{kx}`.
    pub fn scalar_exponential(a: Endpoint, b: Endpoint, x0: f64, c: f64, k: f64) -> Problem {
        scalar("scalar-exponential", a, b, x0, |_| 1.0, move |x| c * (k * x).exp(), |_| 1.0)
    }

    pub fn constant_matrix(name: &str, a: Endpoint, b: Endpoint, x0: f64, p: CMat, q: CMat, r: CMat) -> Problem {
        let dim = q.nrows();
        Problem::new(
            name,
            a,
            b,
            Coefficients::Matrix(MatrixCoefficients {
                dim,
                p: Arc::new(move |_| p.clone()),
                q: Arc::new(move |_| q.clone()),
                r: Arc::new(move |_| r.clone()),
                breakpoints: Vec::new(),
            }),
            x0,
        )
    }

    /// `P = R = I`, constant `Q`, whole line.
    pub fn schrodinger_constant(name: &str, q: CMat, x0: f64) -> Problem {
        let m = q.nrows();
        constant_matrix(
            name,
            Endpoint::minus_infinity(),
            Endpoint::plus_infinity(),
            x0,
            linalg::identity(m),
            q,
            linalg::identity(m),
        )
    }

    /// `Q = [[0, q0], [q0, 0]]`; T_min ≥ −|q0|.
    pub fn example312(q0: f64) -> Problem {
        let mut p = schrodinger_constant("example-312", linalg::from_real(2, 2, &[0.0, q0, q0, 0.0]), 0.0);
        p.thresholds.lower_bound = Some(-q0.abs());
        p.thresholds.limit_point_a = Some(true);
        p.thresholds.limit_point_b = Some(true);
        p
    }

    /// `Q = [[0, 1], [1, 2]]`; T_min ≥ −2.
    pub fn example313() -> Problem {
        let mut p = schrodinger_constant("example-313", linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 2.0]), 0.0);
        p.thresholds.lower_bound = Some(-2.0);
        p.thresholds.limit_point_a = Some(true);
        p.thresholds.limit_point_b = Some(true);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_half_line_is_valid() {
        let p = builtins::free_scalar(Endpoint::finite(0.0), Endpoint::plus_infinity(), 1.0);
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn example313_is_valid() {
        assert!(validate(&builtins::example313()).is_empty());
    }

    #[test]
    fn negative_p_is_reported() {
        let p = builtins::scalar("neg", Endpoint::finite(0.0), Endpoint::finite(1.0), 0.5, |_| -1.0, |_| 0.0, |_| 1.0);
        let v = validate(&p);
        assert!(!v.is_empty());
        assert!(v.iter().all(|v| v.invariant == "p not positive" && v.x.is_some()));
    }

    #[test]
    fn non_hermitian_q_is_reported() {
        let q = linalg::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let p = builtins::schrodinger_constant("bad", q, 0.0);
        assert!(validate(&p).iter().any(|v| v.invariant == "Q not Hermitian"));
    }

    #[test]
    fn indefinite_r_is_reported() {
        let r = linalg::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = builtins::constant_matrix(
            "bad-r",
            Endpoint::finite(0.0),
            Endpoint::finite(1.0),
            0.5,
            linalg::identity(2),
            linalg::identity(2),
            r,
        );
        assert!(validate(&p).iter().any(|v| v.invariant == "R not positive definite"));
    }

    #[test]
    fn x0_outside_interval() {
        let p = builtins::free_scalar(Endpoint::finite(0.0), Endpoint::finite(1.0), 2.0);
        assert!(validate(&p).iter().any(|v| v.invariant == "x0 in (a,b)"));
    }

    #[test]
    fn validation_is_deterministic_for_seed() {
        let p = builtins::scalar("neg", Endpoint::finite(0.0), Endpoint::finite(1.0), 0.5, |x| x - 0.7, |_| 0.0, |_| 1.0)
            .with_seed(7);
        assert_eq!(validate(&p), validate(&p));
    }

    #[test]
    fn contains_respects_regular_endpoints() {
        let mut p = builtins::free_scalar(Endpoint::regular(0.0), Endpoint::finite(1.0), 0.5);
        assert!(p.contains(0.0));
        assert!(!p.contains(1.0));
        p.b = Endpoint::regular(1.0);
        assert!(p.contains(1.0));
    }
}
