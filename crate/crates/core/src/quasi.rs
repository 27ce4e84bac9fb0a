//! First-order quasi-derivative system `u' = P⁻¹v`, `v' = (Q − zR)u`, solution traces
//! and Wronskians.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::ode::{Dopri5, StepControl};
use crate::problem::{Coefficients, Problem, SpectralParameter};
use crate::quad::{self, QuadOptions};

/// States whose largest entry exceeds this are rescaled.
pub const RESCALE_THRESHOLD: f64 = 1e100;

/// The pair `(u, pu')` or `(U, PU')` at a point. The true state is `exp(log_scale)·(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiState {
    pub x: f64,
    pub u: CMat,
    pub v: CMat,
    pub log_scale: f64,
}

impl QuasiState {
    pub fn new(x: f64, u: CMat, v: CMat) -> Self {
        QuasiState { x, u, v, log_scale: 0.0 }
    }

    pub fn scalar(x: f64, u: C64, v: C64) -> Self {
        QuasiState::new(x, linalg::scalar(u), linalg::scalar(v))
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn columns(&self) -> usize {
        self.u.ncols()
    }

    fn factor(&self) -> f64 {
        self.log_scale.exp()
    }

    /// `u` with the accumulated scale applied.
    pub fn u_true(&self) -> CMat {
        &self.u * C64::new(self.factor(), 0.0)
    }

    pub fn v_true(&self) -> CMat {
        &self.v * C64::new(self.factor(), 0.0)
    }

    /// Scale removed (log_scale folded into the entries).
    pub fn unscaled(&self) -> QuasiState {
        QuasiState::new(self.x, self.u_true(), self.v_true())
    }

    /// Right-multiply both components by a constant matrix.
    pub fn right_mul(&self, k: &CMat) -> QuasiState {
        QuasiState { x: self.x, u: &self.u * k, v: &self.v * k, log_scale: self.log_scale }
    }

    fn to_vec(&self) -> Vec<C64> {
        self.u.iter().chain(self.v.iter()).copied().collect()
    }

    fn from_vec(x: f64, m: usize, k: usize, y: &[C64], log_scale: f64) -> Self {
        let n = m * k;
        QuasiState {
            x,
            u: CMat::from_column_slice(m, k, &y[..n]),
            v: CMat::from_column_slice(m, k, &y[n..]),
            log_scale,
        }
    }
}

/// Samples of one solution at strictly increasing `x`. Between samples the solution is
/// recovered by integrating from the nearest sample.
#[derive(Debug, Clone)]
pub struct SolutionTrace {
    pub z: SpectralParameter,
    pub tol: f64,
    pub samples: Vec<QuasiState>,
}

impl SolutionTrace {
    /// Wrap externally supplied samples (e.g. closed-form solutions). Sorted by `x`.
    pub fn from_samples(z: SpectralParameter, tol: f64, mut samples: Vec<QuasiState>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Precondition("empty trace".into()));
        }
        samples.sort_by(|a, b| a.x.total_cmp(&b.x));
        samples.dedup_by(|a, b| a.x == b.x);
        let (m, k) = (samples[0].dim(), samples[0].columns());
        if samples.iter().any(|s| s.dim() != m || s.columns() != k) {
            return Err(Error::DimensionMismatch("samples disagree in shape".into()));
        }
        Ok(SolutionTrace { z, tol, samples })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn columns(&self) -> usize {
        self.samples[0].columns()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.samples[0].x, self.samples[self.samples.len() - 1].x)
    }

    fn nearest(&self, x: f64) -> usize {
        let i = self.samples.partition_point(|s| s.x < x);
        if i == 0 {
            0
        } else if i == self.samples.len() {
            i - 1
        } else if (self.samples[i].x - x).abs() < (x - self.samples[i - 1].x).abs() {
            i
        } else {
            i - 1
        }
    }

    /// The stored sample at exactly `x`, if present.
    pub fn sample_at(&self, x: f64) -> Option<&QuasiState> {
        let i = self.samples.partition_point(|s| s.x < x);
        self.samples.get(i).filter(|s| s.x == x)
    }

    /// State at an arbitrary `x` inside the problem interval.
    pub fn state_at(&self, problem: &Problem, x: f64) -> Result<QuasiState> {
        let start = &self.samples[self.nearest(x)];
        if start.x == x {
            return Ok(start.clone());
        }
        propagate(problem, self.z, start, x, self.tol)
    }

    /// Linear combination `self·A + other·B` sample by sample; both traces must share knots.
    pub fn combine(&self, a: &CMat, other: &SolutionTrace, b: &CMat) -> Result<SolutionTrace> {
        if self.samples.len() != other.samples.len() {
            return Err(Error::DimensionMismatch("traces have different knots".into()));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(s, t)| {
                if s.x != t.x {
                    return Err(Error::PositionMismatch(s.x, t.x));
                }
                let s = s.unscaled();
                let t = t.unscaled();
                Ok(QuasiState::new(s.x, &s.u * a + &t.u * b, &s.v * a + &t.v * b))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SolutionTrace { z: self.z, tol: self.tol, samples })
    }

    /// Right-multiply every sample by a constant matrix.
    pub fn right_mul(&self, k: &CMat) -> SolutionTrace {
        SolutionTrace {
            z: self.z,
            tol: self.tol,
            samples: self.samples.iter().map(|s| s.right_mul(k)).collect(),
        }
    }

    /// Keep samples inside `[lo, hi]`.
    pub fn clip(&self, lo: f64, hi: f64) -> SolutionTrace {
        SolutionTrace {
            z: self.z,
            tol: self.tol,
            samples: self.samples.iter().filter(|s| s.x >= lo && s.x <= hi).cloned().collect(),
        }
    }

    /// CSV: `x`, Re/Im of each entry of `u` (row-major), same for `v`, then `scale_log`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (m, k) = (self.dim(), self.columns());
        let mut header = vec!["x".to_string()];
        for name in ["u", "v"] {
            for i in 0..m {
                for j in 0..k {
                    header.push(format!("re_{name}{}{}", i + 1, j + 1));
                    header.push(format!("im_{name}{}{}", i + 1, j + 1));
                }
            }
        }
        header.push("scale_log".into());
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![fmt_f64(s.x)];
            for mat in [&s.u, &s.v] {
                for i in 0..m {
                    for j in 0..k {
                        row.push(fmt_f64(mat[(i, j)].re));
                        row.push(fmt_f64(mat[(i, j)].im));
                    }
                }
            }
            row.push(fmt_f64(s.log_scale));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits, locale independent.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct QuasiRhs<'a> {
    coefficients: &'a Coefficients,
    z: C64,
    m: usize,
    k: usize,
}

impl QuasiRhs<'_> {
    fn eval(&self, x: f64, y: &[C64], dy: &mut [C64]) -> Result<()> {
        let n = self.m * self.k;
        match self.coefficients {
            Coefficients::Scalar(c) => {
                let p = (c.p)(x);
                let qz = C64::new((c.q)(x), 0.0) - self.z * (c.r)(x);
                if p == 0.0 || !p.is_finite() {
                    return Err(Error::Singular { x });
                }
                for j in 0..n {
                    dy[j] = y[n + j] / p;
                    dy[n + j] = qz * y[j];
                }
            }
            Coefficients::Matrix(c) => {
                let pinv = linalg::inverse(&(c.p)(x), x)?;
                let qz = (c.q)(x) - (c.r)(x) * self.z;
                let u = nalgebra::DMatrixView::from_slice(&y[..n], self.m, self.k);
                let v = nalgebra::DMatrixView::from_slice(&y[n..], self.m, self.k);
                let du = &pinv * v;
                let dv = &qz * u;
                dy[..n].copy_from_slice(du.as_slice());
                dy[n..].copy_from_slice(dv.as_slice());
            }
        }
        Ok(())
    }
}

fn check_shape(problem: &Problem, s: &QuasiState) -> Result<()> {
    let m = problem.dim();
    if s.u.nrows() != m || s.v.nrows() != m || s.u.ncols() != s.v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{} / {}x{}, problem dimension {m}",
            s.u.nrows(),
            s.u.ncols(),
            s.v.nrows(),
            s.v.ncols()
        )));
    }
    Ok(())
}

fn out_of_interval(problem: &Problem, x: f64) -> Error {
    Error::OutOfInterval { x, a: problem.a.value, b: problem.b.value }
}

/// Integrate from `init` through `stops` (monotone away from `init.x`), calling `record` at
/// every accepted step.
fn run<F>(problem: &Problem, z: C64, init: &QuasiState, stops: &[f64], tol: f64, mut record: F) -> Result<QuasiState>
where
    F: FnMut(QuasiState),
{
    let (m, k) = (init.dim(), init.columns());
    let rhs = QuasiRhs { coefficients: &problem.coefficients, z, m, k };
    let mut f = |x: f64, y: &[C64], dy: &mut [C64]| rhs.eval(x, y, dy);
    let mut solver = Dopri5::new(2 * m * k, StepControl::new(tol));
    let mut y = init.to_vec();
    let mut x = init.x;
    let mut log_scale = init.log_scale;
    let breaks = problem.coefficients.breakpoints();
    for &stop in stops {
        let mut legs: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&b| (b - x) * (stop - x) > 0.0 && (b - x).abs() < (stop - x).abs())
            .collect();
        legs.sort_by(|p, q| (p - x).abs().total_cmp(&(q - x).abs()));
        legs.push(stop);
        for leg in legs {
            solver.integrate(&mut f, x, leg, &mut y, |xs, ys| {
                let big = ys.iter().map(|v| v.norm()).fold(0.0, f64::max);
                if !big.is_finite() {
                    return Err(Error::Overflow { x: xs });
                }
                if big > RESCALE_THRESHOLD {
                    for v in ys.iter_mut() {
                        *v /= big;
                    }
                    log_scale += big.ln();
                }
                record(QuasiState::from_vec(xs, m, k, ys, log_scale));
                Ok(())
            })?;
            x = leg;
        }
    }
    Ok(QuasiState::from_vec(x, m, k, &y, log_scale))
}

/// Advance one state to `x` without recording.
pub fn propagate(problem: &Problem, z: SpectralParameter, init: &QuasiState, x: f64, tol: f64) -> Result<QuasiState> {
    if !problem.contains(x) {
        return Err(out_of_interval(problem, x));
    }
    run(problem, z.0, init, &[x], tol, |_| {})
}

/// Solve the quasi-derivative system at `z` from `init`, sampling every accepted step and
/// every target. Targets may lie on both sides of `init.x`.
pub fn integrate(
    problem: &Problem,
    z: SpectralParameter,
    init: &QuasiState,
    targets: &[f64],
    tol: f64,
) -> Result<SolutionTrace> {
    check_shape(problem, init)?;
    if !problem.contains(init.x) {
        return Err(out_of_interval(problem, init.x));
    }
    if let Some(&bad) = targets.iter().find(|&&t| !problem.contains(t)) {
        return Err(out_of_interval(problem, bad));
    }
    let mut right: Vec<f64> = targets.iter().copied().filter(|&t| t > init.x).collect();
    let mut left: Vec<f64> = targets.iter().copied().filter(|&t| t < init.x).collect();
    right.sort_by(f64::total_cmp);
    right.dedup();
    left.sort_by(|a, b| b.total_cmp(a));
    left.dedup();

    let mut samples = Vec::new();
    if !left.is_empty() {
        run(problem, z.0, init, &left, tol, |s| samples.push(s))?;
        samples.reverse();
    }
    samples.push(init.clone());
    if !right.is_empty() {
        run(problem, z.0, init, &right, tol, |s| samples.push(s))?;
    }
    Ok(SolutionTrace { z, tol, samples })
}

/// Zeros of the real part of a scalar trace: sign changes between samples, refined by bisection.
pub fn real_zeros(problem: &Problem, u: &SolutionTrace) -> Result<Vec<f64>> {
    let mut zeros = Vec::new();
    for w in u.samples.windows(2) {
        let (fa, fb) = (w[0].u[(0, 0)].re, w[1].u[(0, 0)].re);
        if fa == 0.0 {
            zeros.push(w[0].x);
            continue;
        }
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (w[0].x, w[1].x, fa);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = u.state_at(problem, mid)?.u[(0, 0)].re;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm * flo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
    }
    Ok(zeros)
}

/// Which Wronskian: `U₁(PU₂') − (PU₁')U₂` or the adjoint-first `U₁*(PU₂') − (PU₁')*U₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WronskianForm {
    Plain,
    AdjointFirst,
}

pub fn wronskian(s1: &QuasiState, s2: &QuasiState, form: WronskianForm) -> Result<CMat> {
    if (s1.x - s2.x).abs() > 1e-14 * s1.x.abs().max(1.0) {
        return Err(Error::PositionMismatch(s1.x, s2.x));
    }
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", s1.dim(), s2.dim())));
    }
    let w = match form {
        WronskianForm::Plain => {
            if s1.columns() != s1.dim() || s2.columns() != s2.dim() {
                return Err(Error::DimensionMismatch("plain Wronskian needs square solutions".into()));
            }
            &s1.u * &s2.v - &s1.v * &s2.u
        }
        WronskianForm::AdjointFirst => s1.u.adjoint() * &s2.v - s1.v.adjoint() * &s2.u,
    };
    Ok(w * C64::new((s1.log_scale + s2.log_scale).exp(), 0.0))
}

#[derive(Debug, Clone)]
pub struct DriftReport {
    /// `W(x'') − W(x')`.
    pub drift: CMat,
    /// Quadrature of the right-hand side of the derivative identity over `[x', x'']`.
    pub quadrature: CMat,
    pub discrepancy: f64,
}

/// Compare the change of the Wronskian of two traces with the integral of its derivative.
///
/// Plain form (scalar): `d/dx W(u₁,u₂) = (z₁ − z₂) r u₁ u₂`. Adjoint-first form:
/// `d/dx W(U₁*, U₂) = (conj z₁ − z₂) U₁* R U₂`, where `z₁`, `z₂` are the traces' own parameters.
pub fn wronskian_drift(
    problem: &Problem,
    t1: &SolutionTrace,
    t2: &SolutionTrace,
    x1: f64,
    x2: f64,
    form: WronskianForm,
) -> Result<DriftReport> {
    let w_at = |x: f64| -> Result<CMat> { wronskian(&t1.state_at(problem, x)?, &t2.state_at(problem, x)?, form) };
    let drift = w_at(x2)? - w_at(x1)?;
    let factor = match form {
        WronskianForm::Plain => t1.z.0 - t2.z.0,
        WronskianForm::AdjointFirst => t1.z.0.conj() - t2.z.0,
    };
    let coeffs = &problem.coefficients;
    let integrand = |x: f64| -> Result<CMat> {
        let s1 = t1.state_at(problem, x)?;
        let s2 = t2.state_at(problem, x)?;
        let scale = C64::new((s1.log_scale + s2.log_scale).exp(), 0.0) * factor;
        let r = coeffs.r(x);
        Ok(match form {
            WronskianForm::Plain => &s1.u * r * &s2.u * scale,
            WronskianForm::AdjointFirst => s1.u.adjoint() * r * &s2.u * scale,
        })
    };
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 4000 };
    let quadrature = if factor == C64::new(0.0, 0.0) {
        CMat::zeros(drift.nrows(), drift.ncols())
    } else {
        let mut nodes: Vec<f64> = t1.xs().into_iter().filter(|&x| x > x1.min(x2) && x < x1.max(x2)).collect();
        nodes.insert(0, x1.min(x2));
        nodes.push(x1.max(x2));
        let mut thin = Vec::with_capacity(nodes.len());
        let stride = (nodes.len() / 64).max(1);
        for (i, &x) in nodes.iter().enumerate() {
            if i % stride == 0 || i == nodes.len() - 1 {
                thin.push(x);
            }
        }
        let pieces = quad::integrate_segments(integrand, &thin, opts)?;
        let mut total = CMat::zeros(drift.nrows(), drift.ncols());
        for p in pieces {
            total += p.value;
        }
        if x2 < x1 {
            -total
        } else {
            total
        }
    };
    let discrepancy = linalg::norm(&(&drift - &quadrature));
    Ok(DriftReport { drift, quadrature, discrepancy })
}
