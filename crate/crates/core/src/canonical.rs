//! Normalized solution pairs, principal and nonprincipal transforms, principality tests and
//! the truncated-Dirichlet construction of matrix principal solutions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ladder::{self, fit_growth, Growth, GrowthFit, LadderGeometry, LadderParams, TruncationLadder};
use crate::linalg::{self, CMat, C64};
use crate::problem::{EndpointKind, Problem, Side, SpectralParameter};
use crate::quad::{self, QuadOptions};
use crate::quasi::{self, QuasiState, SolutionTrace};

/// θ/Θ and φ/Φ sharing knots. For scalar problems `alpha` selects the rotated pair
/// `θ_α = cos α θ + sin α φ`, `φ_α = −sin α θ + cos α φ`.
#[derive(Debug, Clone)]
pub struct NormalizedPair {
    pub theta: SolutionTrace,
    pub phi: SolutionTrace,
    pub x0: f64,
    pub alpha: f64,
}

/// Columns `start..start + count` of a multi-column trace.
pub fn column_block(trace: &SolutionTrace, start: usize, count: usize) -> SolutionTrace {
    let samples = trace
        .samples
        .iter()
        .map(|s| QuasiState {
            x: s.x,
            u: s.u.columns(start, count).into_owned(),
            v: s.v.columns(start, count).into_owned(),
            log_scale: s.log_scale,
        })
        .collect();
    SolutionTrace { z: trace.z, tol: trace.tol, samples }
}

/// Initial data of the normalized pair at `x`, stacked as `[θ | φ]`.
pub fn pair_initial_state(m: usize, x: f64, alpha: f64) -> QuasiState {
    let (ca, sa) = if alpha == 0.0 { (1.0, 0.0) } else { (alpha.cos(), alpha.sin()) };
    let mut u = CMat::zeros(m, 2 * m);
    let mut v = CMat::zeros(m, 2 * m);
    for i in 0..m {
        u[(i, i)] = C64::new(ca, 0.0);
        v[(i, i)] = C64::new(sa, 0.0);
        u[(i, m + i)] = C64::new(-sa, 0.0);
        v[(i, m + i)] = C64::new(ca, 0.0);
    }
    QuasiState::new(x, u, v)
}

pub fn normalized_pair(
    problem: &Problem,
    z: SpectralParameter,
    alpha: f64,
    targets: &[f64],
    tol: f64,
) -> Result<NormalizedPair> {
    if !(0.0..PI).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside [0, π)")));
    }
    if alpha != 0.0 && !problem.is_scalar() {
        return Err(Error::Precondition("matrix problems only support alpha = 0".into()));
    }
    let m = problem.dim();
    let joint = quasi::integrate(problem, z, &pair_initial_state(m, problem.x0, alpha), targets, tol)?;
    Ok(NormalizedPair { theta: column_block(&joint, 0, m), phi: column_block(&joint, m, m), x0: problem.x0, alpha })
}

/// The integrand of the inverse-square integrals with true scale applied.
///
/// Scalar problems: `p⁻¹u⁻²` (no conjugation, `bar` is ignored). Matrix problems:
/// `U⁻¹P⁻¹(Ū⁻¹)*` where `bar` is the solution at the conjugate spectral parameter (the same
/// state for real λ).
pub fn inverse_gram(problem: &Problem, s: &QuasiState, bar: &QuasiState) -> Result<CMat> {
    let x = s.x;
    if problem.is_scalar() {
        let u = s.u[(0, 0)];
        let p = problem.coefficients.p(x)[(0, 0)].re;
        if u.norm() == 0.0 || !u.is_finite() {
            return Err(Error::Vanishing { x });
        }
        let val = (-2.0 * s.log_scale).exp() / (u * u * p);
        if !val.is_finite() {
            return Err(Error::Vanishing { x });
        }
        return Ok(linalg::scalar(val));
    }
    let ui = linalg::inverse(&s.u, x)?;
    let bi = linalg::inverse(&bar.u, x)?;
    let pinv = linalg::inverse(&problem.coefficients.p(x), x)?;
    Ok(ui * pinv * bi.adjoint() * C64::new((-s.log_scale - bar.log_scale).exp(), 0.0))
}

pub(crate) fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_intervals: 4000 }
}

/// `∫_start^{x}` of the inverse-square integrand of `trace` (and `bar`) at each target.
pub(crate) fn gram_integrals(
    problem: &Problem,
    trace: &SolutionTrace,
    bar: &SolutionTrace,
    start: f64,
    targets: &[f64],
) -> Result<quad::Cumulative> {
    let same = std::ptr::eq(trace, bar);
    quad::cumulative(
        |x| {
            let s = trace.state_at(problem, x)?;
            if same || problem.is_scalar() {
                inverse_gram(problem, &s, &s)
            } else {
                inverse_gram(problem, &s, &bar.state_at(problem, x)?)
            }
        },
        start,
        targets,
        quad_opts(),
    )
}

fn running_integral_at_samples(problem: &Problem, trace: &SolutionTrace, c: f64) -> Result<Vec<C64>> {
    // Integrate outward from c in both directions over the sample positions.
    let xs = trace.xs();
    let right: Vec<f64> = xs.iter().copied().filter(|&x| x > c).collect();
    let left: Vec<f64> = xs.iter().copied().filter(|&x| x < c).rev().collect();
    let collect = |targets: &[f64]| -> Result<Vec<C64>> {
        let cum = gram_integrals(problem, trace, trace, c, targets)?;
        if let Some(e) = cum.failure {
            return Err(e);
        }
        Ok(cum.values.iter().map(|v| v[(0, 0)]).collect())
    };
    let r = collect(&right)?;
    let l = collect(&left)?;
    let mut out = Vec::with_capacity(xs.len());
    out.extend(l.into_iter().rev());
    if xs.contains(&c) {
        out.push(C64::new(0.0, 0.0));
    }
    out.extend(r);
    Ok(out)
}

/// Nonprincipal solution built from a positive solution near an endpoint:
/// `û = u ∫_c^x p⁻¹u⁻²` toward `b`, `û = u ∫_x^c p⁻¹u⁻²` toward `a`.
///
/// The quasi-derivative is `±(v ∫ + 1/u)`, so `W(u, û) = ±1`.
pub fn nonprincipal_from(problem: &Problem, u: &SolutionTrace, side: Side, c: f64) -> Result<SolutionTrace> {
    if !problem.is_scalar() || u.columns() != 1 {
        return Err(Error::Precondition("nonprincipal_from needs a scalar solution".into()));
    }
    let ints = running_integral_at_samples(problem, u, c)?;
    let sgn = C64::new(side.sign(), 0.0);
    let samples = u
        .samples
        .iter()
        .zip(ints)
        .map(|(s, i)| {
            let (uu, vv) = (s.u[(0, 0)], s.v[(0, 0)]);
            let inv = (-2.0 * s.log_scale).exp() / uu;
            QuasiState {
                x: s.x,
                u: linalg::scalar(sgn * uu * i),
                v: linalg::scalar(sgn * (vv * i + inv)),
                log_scale: s.log_scale,
            }
        })
        .collect();
    Ok(SolutionTrace { z: u.z, tol: u.tol, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Principal,
    Nonprincipal,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrincipalCertificate {
    pub endpoint: Side,
    pub start: f64,
    pub cutoffs: Vec<f64>,
    /// Scalar: the partial integrals `∫ p⁻¹u⁻²`. Matrix: their inverses.
    #[serde(serialize_with = "linalg::ser_mats")]
    pub values: Vec<CMat>,
    /// Scalar: the partial integral. Matrix: smallest eigenvalue of the partial integral.
    pub growth_values: Vec<f64>,
    pub inverse_norms: Vec<f64>,
    pub skipped: Vec<f64>,
    pub ladder: Option<TruncationLadder>,
    pub growth: GrowthFit,
    pub verdict: Verdict,
    pub self_conjugacy: Option<f64>,
    pub failure: Option<String>,
}

/// Test whether `trace` is principal at the endpoint on `side` by following the partial
/// integrals `∫_start^{y} U⁻¹P⁻¹U⁻*` along `cutoffs`.
pub fn principal_test(
    problem: &Problem,
    trace: &SolutionTrace,
    side: Side,
    start: f64,
    cutoffs: &[f64],
    tol: f64,
) -> Result<PrincipalCertificate> {
    if trace.columns() != trace.dim() {
        return Err(Error::DimensionMismatch("principal test needs a square solution".into()));
    }
    let cum = gram_integrals(problem, trace, trace, start, cutoffs)?;
    let n = cum.values.len();
    if n == 0 {
        return Err(cum.failure.unwrap_or(Error::NonConvergence("empty ladder".into())));
    }
    let used = cutoffs[..n].to_vec();
    let skipped = cutoffs[n..].to_vec();
    let s: Vec<f64> = used.iter().map(|&x| ladder::distance_parameter(problem, side, start, x)).collect();
    let scalar = problem.is_scalar();
    let mut growth_values = Vec::with_capacity(n);
    let mut inverse_norms = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for v in &cum.values {
        let herm = linalg::re_part(v);
        if scalar {
            growth_values.push(v[(0, 0)].re);
            inverse_norms.push(1.0 / v[(0, 0)].norm());
            values.push(v.clone());
        } else {
            growth_values.push(linalg::min_eigenvalue(&herm));
            let lmin = linalg::min_eigenvalue(&herm);
            let inv = if lmin > 0.0 {
                linalg::hermitian_function(&herm, |l| C64::new(1.0 / l, 0.0))
            } else {
                CMat::from_element(v.nrows(), v.ncols(), C64::new(f64::INFINITY, 0.0))
            };
            inverse_norms.push(linalg::norm(&inv));
            values.push(inv);
        }
    }
    let growth = fit_growth(&s, &growth_values, tol);
    let increasing = growth_values.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let inverse_decreasing = inverse_norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let big = growth_values.last().copied().unwrap_or(0.0) > 1.0 / tol;
    let verdict = match growth.verdict {
        Growth::Diverging if big && increasing && (scalar || inverse_decreasing) => Verdict::Principal,
        Growth::Converging => Verdict::Nonprincipal,
        _ => Verdict::Inconclusive,
    };
    let ladder = TruncationLadder::new(side, used.clone(), values.clone(), skipped.clone(), tol, tol).ok();
    let self_conjugacy = if scalar { None } else { Some(self_conjugacy(trace)) };
    Ok(PrincipalCertificate {
        endpoint: side,
        start,
        cutoffs: used,
        values,
        growth_values,
        inverse_norms,
        skipped,
        ladder,
        growth,
        verdict,
        self_conjugacy,
        failure: cum.failure.map(|e| e.to_string()),
    })
}

/// Cutoffs for a principality test that stay inside the sampled range of `trace` when the
/// endpoint is infinite (extending a decaying solution by forward integration is unstable).
pub fn certificate_cutoffs(problem: &Problem, trace: &SolutionTrace, side: Side, rungs: usize) -> Result<(f64, Vec<f64>)> {
    let (lo, hi) = trace.range();
    let (start, edge) = match side {
        Side::Plus => (lo, hi),
        Side::Minus => (hi, lo),
    };
    let span = (edge - start).abs();
    if span <= 0.0 {
        return Err(Error::Precondition("trace has a single sample".into()));
    }
    let params = match problem.endpoint(side).kind() {
        EndpointKind::Infinite => LadderParams {
            rungs,
            first: 0.02 * span,
            reach: span,
            geometry: Some(LadderGeometry::Geometric),
            ..LadderParams::default()
        },
        EndpointKind::Finite => LadderParams { rungs, ..LadderParams::default() },
    };
    Ok((start, ladder::cutoffs_from(problem, start, side, &params)?))
}

/// `max_x ‖U*(PU′) − (PU′)*U‖ / (1 + ‖U*(PU′)‖)` over the samples (stored scale).
pub fn self_conjugacy(trace: &SolutionTrace) -> f64 {
    trace
        .samples
        .iter()
        .map(|s| {
            let w = s.u.adjoint() * &s.v;
            linalg::norm(&(&w - w.adjoint())) / (1.0 + linalg::norm(&w))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct PrincipalTransform {
    pub trace: SolutionTrace,
    /// Ladder of `∫_{edge}^{y} p⁻¹û⁻²` beyond the sampled range.
    pub tail: TruncationLadder,
    pub certificate: PrincipalCertificate,
}

/// Principal solution from a nonprincipal one:
/// `u_b = û ∫_x^b p⁻¹û⁻²`, `u_a = û ∫_a^x p⁻¹û⁻²`, normalized to 1 at `x0` when `x0` is sampled.
pub fn principal_from(problem: &Problem, uhat: &SolutionTrace, side: Side, params: &LadderParams) -> Result<PrincipalTransform> {
    if !problem.is_scalar() || uhat.columns() != 1 {
        return Err(Error::Precondition("principal_from needs a scalar solution".into()));
    }
    let (lo, hi) = uhat.range();
    let edge = match side {
        Side::Plus => hi,
        Side::Minus => lo,
    };
    let end = problem.endpoint(side);
    let tail = if end.is_regular() && edge == end.value {
        TruncationLadder::new(
            side,
            vec![edge, edge],
            vec![CMat::zeros(1, 1), CMat::zeros(1, 1)],
            Vec::new(),
            params.abs_tol,
            params.rel_tol,
        )?
    } else {
        let cut = ladder::cutoffs_from(problem, edge, side, params)?;
        let cum = gram_integrals(problem, uhat, uhat, edge, &cut)?;
        let n = cum.values.len();
        let lad = TruncationLadder::new(
            side,
            cut[..n].to_vec(),
            cum.values.iter().map(|v| v * C64::new(side.sign(), 0.0)).collect(),
            cut[n..].to_vec(),
            params.abs_tol,
            params.rel_tol,
        )?;
        if !lad.converged {
            return Err(Error::NonConvergence(format!(
                "tail integral toward {side} does not converge (last rung {:.6e}, error {:.3e}); the input is not nonprincipal",
                lad.last_value()[(0, 0)].re,
                lad.error
            )));
        }
        lad
    };
    let tail_value = tail.extrapolated[(0, 0)];

    // T(x) = tail + |∫_x^{edge}|, accumulated inward from the edge.
    let mut xs = uhat.xs();
    let x0 = problem.x0;
    let add_x0 = x0 >= lo && x0 <= hi && uhat.sample_at(x0).is_none();
    if add_x0 {
        xs.push(x0);
        xs.sort_by(f64::total_cmp);
    }
    let inward: Vec<f64> = match side {
        Side::Plus => xs.iter().rev().copied().filter(|&x| x < edge).collect(),
        Side::Minus => xs.iter().copied().filter(|&x| x > edge).collect(),
    };
    let cum = gram_integrals(problem, uhat, uhat, edge, &inward)?;
    if let Some(e) = cum.failure {
        return Err(e);
    }
    let mut t_at: Vec<(f64, C64)> = vec![(edge, tail_value)];
    for (x, v) in inward.iter().zip(&cum.values) {
        // ∫_edge^x has sign −side; T grows inward.
        t_at.push((*x, tail_value - v[(0, 0)] * side.sign()));
    }
    t_at.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sgn = side.sign();
    let mut samples = Vec::with_capacity(t_at.len());
    for (x, t) in t_at {
        let s = if let Some(s) = uhat.sample_at(x) { s.clone() } else { uhat.state_at(problem, x)? };
        let (uu, vv) = (s.u[(0, 0)], s.v[(0, 0)]);
        let inv = (-2.0 * s.log_scale).exp() / uu;
        samples.push(QuasiState {
            x,
            u: linalg::scalar(uu * t),
            v: linalg::scalar(vv * t - inv * sgn),
            log_scale: s.log_scale,
        });
    }
    let mut trace = SolutionTrace::from_samples(uhat.z, uhat.tol, samples)?;
    if let Some(s0) = trace.sample_at(x0).cloned() {
        let u0 = s0.u_true()[(0, 0)];
        if u0.norm() > 0.0 {
            trace = trace.right_mul(&linalg::scalar(C64::new(1.0, 0.0) / u0));
        }
    }
    let (start, cut) = certificate_cutoffs(problem, &trace, side, params.rungs)?;
    let certificate = principal_test(problem, &trace, side, start, &cut, params.rel_tol)?;
    Ok(PrincipalTransform { trace, tail, certificate })
}

/// Parameters of the segmented truncated-Dirichlet construction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PrincipalParams {
    /// Cutoffs `y` measured from each segment start.
    pub ladder: LadderParams,
    /// Length of the range `[x0, x0 ± span]` on which the solution is produced.
    pub span: f64,
    /// Segment length: each segment uses its own reference point.
    pub segment: f64,
    pub samples_per_segment: usize,
    /// Rung-to-rung Cauchy tolerance on the segment's comparison points.
    pub tol: f64,
    pub ode_tol: f64,
}

impl Default for PrincipalParams {
    fn default() -> Self {
        PrincipalParams {
            ladder: LadderParams::default(),
            span: 10.0,
            segment: 1.0,
            samples_per_segment: 8,
            tol: 1e-10,
            ode_tol: 1e-12,
        }
    }
}

/// Segment boundaries `x0, x0 ± h, …` covering `span` toward `side`, inside the interval.
pub fn segment_points(problem: &Problem, side: Side, span: f64, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && span > 0.0) {
        return Err(Error::Config("segment length and span must be positive".into()));
    }
    let end = problem.endpoint(side);
    let room = (end.value - problem.x0).abs();
    let span = if room.is_finite() {
        if end.is_regular() {
            span.min(room)
        } else {
            span.min(room * (1.0 - 1e-3))
        }
    } else {
        span
    };
    let n = (span / h).ceil().max(1.0) as usize;
    Ok((0..=n).map(|j| problem.x0 + side.sign() * span * j as f64 / n as f64).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentReport {
    pub start: f64,
    pub end: f64,
    /// Cutoff `y` whose truncated solution was accepted.
    pub rung: f64,
    pub cauchy: f64,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct MatrixPrincipal {
    pub lambda: f64,
    pub side: Side,
    /// `U_b` (or `U_a`) with `U(x0) = I`.
    pub trace: SolutionTrace,
    /// `M_{±,y}(λ, x0) = −Φ(y)⁻¹Θ(y)` along the first segment's ladder, up to the accepted rung.
    pub rungs: TruncationLadder,
    /// Rung-to-rung differences of `U_y` on the first segment.
    pub cauchy: Vec<f64>,
    pub segments: Vec<SegmentReport>,
    pub certificate: PrincipalCertificate,
}

impl MatrixPrincipal {
    /// `PU′(x0)U(x0)⁻¹` of the constructed solution.
    pub fn m_at_x0(&self) -> CMat {
        let s = self.trace.sample_at(self.trace_x0()).expect("x0 is sampled");
        s.v.clone() * linalg::inverse(&s.u, s.x).expect("U(x0) = I")
    }

    fn trace_x0(&self) -> f64 {
        match self.side {
            Side::Plus => self.trace.range().0,
            Side::Minus => self.trace.range().1,
        }
    }
}

struct SegmentFactor {
    states: Vec<QuasiState>,
    report: SegmentReport,
    rung_values: Vec<CMat>,
    rung_cutoffs: Vec<f64>,
    skipped: Vec<f64>,
    cauchy: Vec<f64>,
}

/// On `[xj, xnext]`, the truncated solutions `Θ_j + Φ_j M_y` normalized at `xj`, with `y`
/// running along a ladder until successive truncations agree.
fn truncated_segment(problem: &Problem, lambda: f64, xj: f64, xnext: f64, side: Side, params: &PrincipalParams) -> Result<SegmentFactor> {
    let local = problem.clone().with_x0(xj);
    let n = params.samples_per_segment.max(1);
    let pts: Vec<f64> = (1..=n).map(|i| xj + (xnext - xj) * i as f64 / n as f64).collect();
    let rungs = ladder::cutoffs_from(problem, xj, side, &params.ladder)?;
    let mut targets = pts.clone();
    targets.extend(rungs.iter().copied());
    let pair = normalized_pair(&local, SpectralParameter::real(lambda), 0.0, &targets, params.ode_tol)?;
    let at = |t: &SolutionTrace, x: f64| t.sample_at(x).cloned().ok_or(Error::PositionMismatch(x, x));
    let th: Vec<QuasiState> = pts.iter().map(|&x| at(&pair.theta, x)).collect::<Result<_>>()?;
    let ph: Vec<QuasiState> = pts.iter().map(|&x| at(&pair.phi, x)).collect::<Result<_>>()?;
    let combine = |m: &CMat| -> Vec<QuasiState> {
        th.iter()
            .zip(&ph)
            .map(|(t, p)| {
                let (t, p) = (t.unscaled(), p.unscaled());
                QuasiState::new(t.x, &t.u + &p.u * m, &t.v + &p.v * m)
            })
            .collect()
    };

    let mut rung_values = Vec::new();
    let mut rung_cutoffs = Vec::new();
    let mut skipped = Vec::new();
    let mut cauchy = Vec::new();
    let mut prev: Option<(CMat, Vec<QuasiState>)> = None;
    let mut small_in_row = 0;
    for &y in &rungs {
        let (ty, py) = (at(&pair.theta, y)?, at(&pair.phi, y)?);
        let m = match linalg::inverse(&py.u, y) {
            Ok(pinv) => -(pinv * &ty.u) * C64::new((ty.log_scale - py.log_scale).exp(), 0.0),
            Err(_) => {
                skipped.push(y);
                continue;
            }
        };
        if !linalg::is_finite(&m) {
            skipped.push(y);
            continue;
        }
        let states = combine(&m);
        if let Some((_, prev_states)) = &prev {
            let mut d = 0.0f64;
            let mut scale = 0.0f64;
            for (a, b) in states.iter().zip(prev_states) {
                d = d.max(linalg::norm(&(&a.u - &b.u)));
                scale = scale.max(linalg::norm(&a.u));
            }
            cauchy.push(d);
            if d <= params.tol * (1.0 + scale) {
                small_in_row += 1;
            } else {
                small_in_row = 0;
            }
        }
        rung_values.push(m.clone());
        rung_cutoffs.push(y);
        prev = Some((m, states));
        if small_in_row >= 2 {
            break;
        }
    }
    let Some((_, states)) = prev else {
        return Err(Error::Singular { x: xj });
    };
    if small_in_row < 2 {
        return Err(Error::NonConvergence(format!(
            "truncated solutions on [{xj}, {xnext}] did not settle along the ladder (last difference {:.3e})",
            cauchy.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let report = SegmentReport {
        start: xj,
        end: xnext,
        rung: *rung_cutoffs.last().expect("non-empty"),
        cauchy: *cauchy.last().expect("non-empty"),
        skipped: skipped.len(),
    };
    Ok(SegmentFactor { states, report, rung_values, rung_cutoffs, skipped, cauchy })
}

/// Principal solution at the endpoint on `side` as the limit of the solutions with
/// `U_y(x0) = I`, `U_y(y) = 0`, realized as `Θ + Φ M_{±,y}` with `M_{±,y} = −Φ(y)⁻¹Θ(y)`.
///
/// To keep `Θ + ΦM` free of cancellation, the range `[x0, x0 ± span]` is split into
/// segments; each uses its own reference point and the segment factors are chained.
pub fn matrix_principal(problem: &Problem, lambda: f64, side: Side, params: &PrincipalParams) -> Result<MatrixPrincipal> {
    match problem.threshold(side) {
        None => {
            return Err(Error::Precondition(format!(
                "no disconjugacy threshold at {side}; run classify or declare one"
            )))
        }
        Some(t) if !(lambda < t) => {
            return Err(Error::Precondition(format!("λ = {lambda} is not below the threshold {t} at {side}")))
        }
        _ => {}
    }
    let m = problem.dim();
    let bounds = segment_points(problem, side, params.span, params.segment)?;
    let mut samples = vec![QuasiState::new(problem.x0, linalg::identity(m), CMat::zeros(m, m))];
    let mut current = linalg::identity(m);
    let mut segments = Vec::new();
    let mut first: Option<SegmentFactor> = None;
    for w in bounds.windows(2) {
        let f = truncated_segment(problem, lambda, w[0], w[1], side, params)?;
        if first.is_none() {
            // v at x0 is M_{±,y}(λ, x0).
            samples[0].v = f.rung_values.last().expect("accepted rung").clone();
        }
        for s in &f.states {
            samples.push(QuasiState::new(s.x, &s.u * &current, &s.v * &current));
        }
        current = &f.states.last().expect("segment samples").u * &current;
        segments.push(f.report.clone());
        if first.is_none() {
            first = Some(f);
        }
    }
    let first = first.expect("at least one segment");
    let trace = SolutionTrace::from_samples(SpectralParameter::real(lambda), params.ode_tol, samples)?;
    let rungs = TruncationLadder::new(
        side,
        first.rung_cutoffs.clone(),
        first.rung_values.clone(),
        first.skipped.clone(),
        params.tol,
        params.tol,
    )?;
    let (start, cut) = certificate_cutoffs(problem, &trace, side, params.ladder.rungs)?;
    let certificate = principal_test(problem, &trace, side, start, &cut, params.ladder.rel_tol)?;
    Ok(MatrixPrincipal { lambda, side, trace, rungs, cauchy: first.cauchy, segments, certificate })
}
