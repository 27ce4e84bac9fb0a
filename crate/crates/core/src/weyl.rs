//! Weyl–Titchmarsh m-functions and M-matrices: limit formulas, Riccati quotients, Weyl
//! solutions, Herglotz structure, and the identification with principal solutions.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::Serialize;

use crate::canonical::{self, gram_integrals, matrix_principal, normalized_pair, PrincipalParams, Verdict};
use crate::error::{Error, Result};
use crate::ladder::{self, LadderParams, TruncationLadder};
use crate::linalg::{self, CMat, C64};
use crate::problem::{Problem, Side, SpectralParameter};
use crate::quad::{self, QuadOptions};
use crate::quasi::{self, fmt_f64, wronskian, QuasiState, SolutionTrace, WronskianForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LimitFormula,
    Riccati,
    RealLebesgue,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylEvaluation {
    pub z: SpectralParameter,
    pub x0: f64,
    pub side: Side,
    #[serde(serialize_with = "linalg::ser_mat")]
    pub value: CMat,
    pub ladder: Option<TruncationLadder>,
    pub method: Method,
    pub converged: bool,
    pub error: f64,
    /// Sign condition `±Im M_± > 0` for non-real `z` (None for real `z`).
    pub herglotz: Option<bool>,
    /// Real `z`: strict monotonicity of the partial integrals (Loewner order for matrices).
    pub monotone: Option<bool>,
    pub limit_point_certified: bool,
    pub failure: Option<String>,
}

impl WeylEvaluation {
    pub fn scalar_value(&self) -> C64 {
        self.value[(0, 0)]
    }
}

/// Refuse real spectral parameters at or above the side's disconjugacy threshold.
pub fn check_real_parameter(problem: &Problem, z: SpectralParameter, side: Side) -> Result<()> {
    if !z.is_real() {
        return Ok(());
    }
    match problem.threshold(side) {
        None => Err(Error::Precondition(format!(
            "real λ = {} needs a disconjugacy threshold at {side}; run classify or declare one",
            z.0.re
        ))),
        Some(t) if !(z.0.re < t) => Err(Error::Precondition(format!(
            "λ = {} is not below the disconjugacy threshold {t} at {side}",
            z.0.re
        ))),
        _ => Ok(()),
    }
}

fn herglotz_sign(z: SpectralParameter, side: Side, value: &CMat) -> Option<bool> {
    if z.is_real() {
        return None;
    }
    let s = side.sign() * z.0.im.signum();
    let im = linalg::im_part(value) * C64::new(s, 0.0);
    Some(linalg::min_eigenvalue(&im) > 0.0)
}

/// Partial integrals `∫_{x0}^{x} Θ(z)⁻¹P⁻¹[Θ(z̄)⁻¹]*` along the ladder (oriented, so negative
/// toward `a`).
struct LimitIntegrals {
    cutoffs: Vec<f64>,
    values: Vec<CMat>,
    skipped: Vec<f64>,
    failure: Option<Error>,
}

fn theta_init(problem: &Problem) -> QuasiState {
    let m = problem.dim();
    QuasiState::new(problem.x0, linalg::identity(m), CMat::zeros(m, m))
}

fn limit_integrals(problem: &Problem, z: SpectralParameter, side: Side, params: &LadderParams) -> Result<LimitIntegrals> {
    let cut = ladder::cutoffs(problem, side, params)?;
    let tol = problem.tolerances.ode;
    let init = theta_init(problem);
    let theta = quasi::integrate(problem, z, &init, &cut, tol)?;
    let cum = if problem.is_scalar() || z.is_real() {
        gram_integrals(problem, &theta, &theta, problem.x0, &cut)?
    } else {
        let bar = quasi::integrate(problem, z.conj(), &init, &cut, tol)?;
        gram_integrals(problem, &theta, &bar, problem.x0, &cut)?
    };
    let n = cum.values.len();
    Ok(LimitIntegrals { cutoffs: cut[..n].to_vec(), values: cum.values, skipped: cut[n..].to_vec(), failure: cum.failure })
}

fn monotone_integrals(values: &[CMat], side: Side) -> bool {
    let s = C64::new(side.sign(), 0.0);
    values.windows(2).all(|w| {
        let d = linalg::re_part(&((&w[1] - &w[0]) * s));
        // Increments below rounding of the running total count as nondecreasing.
        let slack = 1e-12 * linalg::norm(&w[1]);
        if d.nrows() == 1 {
            d[(0, 0)].re >= -slack
        } else {
            linalg::min_eigenvalue(&d) >= -slack
        }
    })
}

fn evaluation_from_integrals(
    problem: &Problem,
    z: SpectralParameter,
    side: Side,
    li: &LimitIntegrals,
    params: &LadderParams,
) -> Result<WeylEvaluation> {
    let mut used = Vec::new();
    let mut values = Vec::new();
    let mut skipped = li.skipped.clone();
    for (&x, c) in li.cutoffs.iter().zip(&li.values) {
        match linalg::inverse(c, x) {
            Ok(inv) => {
                used.push(x);
                values.push(-inv);
            }
            Err(_) => skipped.push(x),
        }
    }
    let ladder = TruncationLadder::new(side, used, values, skipped, params.abs_tol, params.rel_tol)?;
    let value = ladder.extrapolated.clone();
    let herglotz = herglotz_sign(z, side, &value);
    let monotone = z.is_real().then(|| monotone_integrals(&li.values, side));
    Ok(WeylEvaluation {
        z,
        x0: problem.x0,
        side,
        value,
        method: if z.is_real() { Method::RealLebesgue } else { Method::LimitFormula },
        converged: ladder.converged && herglotz != Some(false),
        error: ladder.error,
        herglotz,
        monotone,
        limit_point_certified: problem.declared_limit_point(side) == Some(true),
        failure: li.failure.as_ref().map(|e| e.to_string()),
        ladder: Some(ladder),
    })
}

/// `m_±(z, x0)` / `M_±(z, x0)` as `∓[∫ Θ(z)⁻¹P⁻¹[Θ(z̄)⁻¹]*]⁻¹` in the limit toward the endpoint.
///
/// For real `z` the problem must declare a disconjugacy threshold above `z` on that side.
/// A violated Herglotz sign demotes `converged`.
///
/// When the ladder has not settled at its reach and nothing failed, the reach is doubled (at
/// most [`MAX_EXTENSIONS`] times) before giving up.
pub fn m_limit(problem: &Problem, z: SpectralParameter, side: Side, params: &LadderParams) -> Result<WeylEvaluation> {
    check_real_parameter(problem, z, side)?;
    let mut params = *params;
    let mut extensions = 0;
    loop {
        let li = limit_integrals(problem, z, side, &params)?;
        let ev = evaluation_from_integrals(problem, z, side, &li, &params)?;
        let infinite = problem.endpoint(side).value.is_infinite();
        if ev.converged || li.failure.is_some() || !infinite || extensions == MAX_EXTENSIONS {
            return Ok(ev);
        }
        params = params.with_reach(2.0 * params.reach).with_rungs(params.rungs + 10);
        extensions += 1;
    }
}

pub const MAX_EXTENSIONS: usize = 2;

/// `PU′(x0)U(x0)⁻¹` of a Weyl solution.
pub fn m_riccati(problem: &Problem, trace: &SolutionTrace, side: Side) -> Result<WeylEvaluation> {
    let s = trace.state_at(problem, problem.x0)?;
    let value = &s.v * linalg::inverse(&s.u, s.x)?;
    Ok(WeylEvaluation {
        z: trace.z,
        x0: problem.x0,
        side,
        herglotz: herglotz_sign(trace.z, side, &value),
        value,
        ladder: None,
        method: Method::Riccati,
        converged: true,
        error: 0.0,
        monotone: None,
        limit_point_certified: problem.declared_limit_point(side) == Some(true),
        failure: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaEvaluation {
    pub alpha: f64,
    pub evaluation: WeylEvaluation,
    pub theta_branch: Option<TruncationLadder>,
    pub phi_branch: Option<TruncationLadder>,
    /// `|m_θ − m_φ|` when both branches apply.
    pub discrepancy: Option<f64>,
    /// Zeros of `θ_α` or `φ_α` removed from the quadrature (real `z` only).
    pub excised_zeros: Vec<f64>,
}

/// `∫_{x0}^{x} p⁻¹u⁻²` at each cutoff for a scalar solution `u` with partner `w` and
/// `W(u, w) = wr`. Windows around zeros of `u` use the antiderivative `w/(u·W(u, w))`, which
/// gives the finite part of the integral across the pole.
fn finite_part_integrals(
    problem: &Problem,
    u: &SolutionTrace,
    w: &SolutionTrace,
    wr: C64,
    cutoffs: &[f64],
) -> Result<(Vec<C64>, Vec<f64>)> {
    let x0 = problem.x0;
    let zeros = if u.z.is_real() { quasi::real_zeros(problem, u)? } else { Vec::new() };
    let mut windows = Vec::new();
    for (k, &z0) in zeros.iter().enumerate() {
        let mut gap = 0.1f64;
        if k > 0 {
            gap = gap.min(0.4 * (z0 - zeros[k - 1]));
        }
        if k + 1 < zeros.len() {
            gap = gap.min(0.4 * (zeros[k + 1] - z0));
        }
        gap = gap.min(0.5 * (z0 - x0).abs().max(1e-3));
        windows.push((z0 - gap, z0 + gap));
    }
    let antider = |x: f64| -> Result<C64> {
        let su = u.state_at(problem, x)?.unscaled();
        let sw = w.state_at(problem, x)?.unscaled();
        Ok(sw.u[(0, 0)] / (su.u[(0, 0)] * wr))
    };
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_intervals: 4000 };
    let f = |x: f64| -> Result<CMat> {
        let s = u.state_at(problem, x)?;
        canonical::inverse_gram(problem, &s, &s)
    };
    // ∫ over [lo, hi] with lo < hi.
    let piece = |lo: f64, hi: f64| -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        let mut cursor = lo;
        for &(wl, wh) in &windows {
            if wh <= lo || wl >= hi {
                continue;
            }
            let (a, b) = (wl.max(lo), wh.min(hi));
            if a > cursor {
                total += quad::integrate(f, cursor, a, opts)?.value[(0, 0)];
            }
            total += antider(b)? - antider(a)?;
            cursor = b;
        }
        if hi > cursor {
            total += quad::integrate(f, cursor, hi, opts)?.value[(0, 0)];
        }
        Ok(total)
    };
    let mut out = Vec::with_capacity(cutoffs.len());
    let mut acc = C64::new(0.0, 0.0);
    let mut prev = x0;
    for &x in cutoffs {
        let d = if x > prev { piece(prev, x)? } else { -piece(x, prev)? };
        acc += d;
        out.push(acc);
        prev = x;
    }
    Ok((out, zeros))
}

/// `m_{±,α}` from the rotated pair `θ_α`, `φ_α`, via `[tan α − ∫ p⁻¹θ_α⁻²]⁻¹` (α ≠ π/2) and
/// `cot α + ∫ p⁻¹φ_α⁻²` (α ≠ 0). Interior α computes both and cross-checks them.
pub fn m_alpha(problem: &Problem, z: SpectralParameter, side: Side, alpha: f64, params: &LadderParams) -> Result<AlphaEvaluation> {
    if !problem.is_scalar() {
        return Err(Error::Precondition("m_alpha is defined for scalar problems".into()));
    }
    check_real_parameter(problem, z, side)?;
    let cut = ladder::cutoffs(problem, side, params)?;
    let pair = normalized_pair(problem, z, alpha, &cut, problem.tolerances.ode)?;
    let use_theta = (alpha - FRAC_PI_2).abs() > 1e-12;
    let use_phi = alpha != 0.0;
    let mut excised = Vec::new();
    let mut branch = |u: &SolutionTrace, w: &SolutionTrace, wr: f64, map: &dyn Fn(C64) -> C64| -> Result<TruncationLadder> {
        let (ints, zeros) = finite_part_integrals(problem, u, w, C64::new(wr, 0.0), &cut)?;
        excised.extend(zeros);
        let values = ints.into_iter().map(|i| linalg::scalar(map(i))).collect();
        TruncationLadder::new(side, cut.clone(), values, Vec::new(), params.abs_tol, params.rel_tol)
    };
    let theta_branch = if use_theta {
        let t = alpha.tan();
        Some(branch(&pair.theta, &pair.phi, 1.0, &|i| C64::new(1.0, 0.0) / (C64::new(t, 0.0) - i))?)
    } else {
        None
    };
    let phi_branch = if use_phi {
        let c = 1.0 / alpha.tan();
        Some(branch(&pair.phi, &pair.theta, -1.0, &|i| C64::new(c, 0.0) + i)?)
    } else {
        None
    };
    excised.sort_by(f64::total_cmp);
    excised.dedup();
    let primary = theta_branch.as_ref().or(phi_branch.as_ref()).expect("one branch applies");
    let value = primary.extrapolated.clone();
    let mut converged = primary.converged;
    let mut error = primary.error;
    let discrepancy = match (&theta_branch, &phi_branch) {
        (Some(a), Some(b)) => {
            let d = (a.extrapolated[(0, 0)] - b.extrapolated[(0, 0)]).norm();
            let allowed = (a.error + b.error).max(1e-6 * (1.0 + value[(0, 0)].norm()));
            if d > allowed {
                return Err(Error::NonConvergence(format!(
                    "the θ_α and φ_α branches disagree by {d:.3e} (allowed {allowed:.3e})"
                )));
            }
            converged &= b.converged;
            error = error.max(b.error).max(d);
            Some(d)
        }
        _ => None,
    };
    let herglotz = herglotz_sign(z, side, &value);
    let evaluation = WeylEvaluation {
        z,
        x0: problem.x0,
        side,
        value,
        ladder: Some(primary.clone()),
        method: if z.is_real() { Method::RealLebesgue } else { Method::LimitFormula },
        converged: converged && herglotz != Some(false),
        error,
        herglotz,
        monotone: None,
        limit_point_certified: problem.declared_limit_point(side) == Some(true),
        failure: None,
    };
    Ok(AlphaEvaluation { alpha, evaluation, theta_branch, phi_branch, discrepancy, excised_zeros: excised })
}

/// `m_{±,α}` from `m_±` by the change of basis `(cos α·m − sin α)/(sin α·m + cos α)`.
pub fn alpha_mobius(m: C64, alpha: f64) -> C64 {
    let (s, c) = alpha.sin_cos();
    (m * c - s) / (m * s + c)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeylParams {
    pub ladder: LadderParams,
    /// Distance between reference points of the segmented construction.
    pub segment: f64,
}

impl Default for WeylParams {
    fn default() -> Self {
        WeylParams { ladder: LadderParams::default(), segment: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct WeylSolution {
    /// The evaluation at `x0`.
    pub evaluation: WeylEvaluation,
    /// `Ψ_±(z, ·)` with `Ψ(x0) = I`.
    pub trace: SolutionTrace,
    /// `(x_j, M_±(z, x_j))` at each reference point.
    pub references: Vec<(f64, CMat)>,
    /// `(x, ‖∫_{x0}^{x} Ψ*RΨ‖)` at the reference points.
    pub square_integrability: Vec<(f64, f64)>,
}

/// Weyl solution `Θ + ΦM_±` on `[x0, x0 ± span]`, normalized to `I` at `x0`.
///
/// The range is split into segments; each segment uses its own reference point `x_j` and
/// `M_±(z, x_j)`, and the pieces are chained by continuity. This avoids the cancellation of
/// `Θ + ΦM` over long distances.
pub fn weyl_solution(problem: &Problem, z: SpectralParameter, side: Side, span: f64, params: &WeylParams) -> Result<WeylSolution> {
    check_real_parameter(problem, z, side)?;
    let bounds = canonical::segment_points(problem, side, span, params.segment)?;
    let m = problem.dim();
    let tol = problem.tolerances.ode;
    let mut samples: Vec<QuasiState> = Vec::new();
    let mut references = Vec::new();
    let mut current = linalg::identity(m);
    let mut evaluation = None;
    for w in bounds.windows(2) {
        let local = problem.clone().with_x0(w[0]);
        let ev = m_limit(&local, z, side, &params.ladder)?;
        if !ev.converged {
            return Err(Error::NonConvergence(format!(
                "M at reference point {} did not converge (error {:.3e})",
                w[0], ev.error
            )));
        }
        let pair = normalized_pair(&local, z, 0.0, &[w[1]], tol)?;
        let piece = pair.theta.combine(&linalg::identity(m), &pair.phi, &ev.value)?.right_mul(&current);
        let skip = usize::from(!samples.is_empty());
        samples.extend(piece.samples.iter().skip(skip).cloned());
        current = piece.sample_at(w[1]).ok_or(Error::PositionMismatch(w[1], w[1]))?.u_true();
        references.push((w[0], ev.value.clone()));
        if evaluation.is_none() {
            evaluation = Some(ev);
        }
    }
    let trace = SolutionTrace::from_samples(z, tol, samples)?;
    let r = &problem.coefficients;
    let cum = quad::cumulative(
        |x| {
            let s = trace.state_at(problem, x)?.unscaled();
            Ok(s.u.adjoint() * r.r(x) * &s.u)
        },
        problem.x0,
        &bounds[1..],
        QuadOptions::default(),
    )?;
    let square_integrability = bounds[1..].iter().zip(&cum.values).map(|(&x, v)| (x, linalg::norm(v))).collect();
    Ok(WeylSolution {
        evaluation: evaluation.expect("at least one segment"),
        trace,
        references,
        square_integrability,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HerglotzEntry {
    pub z: SpectralParameter,
    #[serde(serialize_with = "linalg::ser_mat")]
    pub value: CMat,
    /// Smallest eigenvalue of `±Im M_±(z)`.
    pub min_eig: f64,
    /// `‖M(z) − M(z̄)*‖` with `M(z̄)` computed independently.
    pub symmetry: f64,
    pub converged: bool,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HerglotzReport {
    pub side: Side,
    pub x0: f64,
    pub tol: f64,
    pub entries: Vec<HerglotzEntry>,
    pub ok: bool,
}

pub fn herglotz_check(problem: &Problem, side: Side, zs: &[C64], params: &LadderParams, tol: f64) -> Result<HerglotzReport> {
    let mut entries = Vec::with_capacity(zs.len());
    for &z in zs {
        if !(z.im > 0.0) {
            return Err(Error::Precondition(format!("Herglotz grid point {z} is not in the upper half-plane")));
        }
        let m = m_limit(problem, SpectralParameter(z), side, params)?;
        let mbar = m_limit(problem, SpectralParameter(z.conj()), side, params)?;
        let im = linalg::im_part(&m.value) * C64::new(side.sign(), 0.0);
        let min_eig = linalg::min_eigenvalue(&im);
        let symmetry = linalg::norm(&(&m.value - mbar.value.adjoint()));
        let converged = m.converged && mbar.converged;
        entries.push(HerglotzEntry {
            z: SpectralParameter(z),
            value: m.value,
            min_eig,
            symmetry,
            converged,
            ok: converged && min_eig > 0.0 && symmetry <= tol,
        });
    }
    Ok(HerglotzReport { side, x0: problem.x0, tol, ok: entries.iter().all(|e| e.ok), entries })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectionReport {
    pub z: SpectralParameter,
    pub x0: f64,
    /// Point where the Wronskian is evaluated directly.
    pub x1: f64,
    #[serde(serialize_with = "linalg::ser_mat")]
    pub direct: CMat,
    /// `M_−(z) − M_+(z)`.
    #[serde(serialize_with = "linalg::ser_mat")]
    pub predicted: CMat,
    pub residual: f64,
}

/// `W(Ψ_+(z̄)*, Ψ_−(z))` evaluated at `x1 ≠ x0`, against `M_−(z, x0) − M_+(z, x0)`
/// (both Weyl solutions are normalized to `I` at `x0`).
pub fn wronskian_connection(problem: &Problem, z: SpectralParameter, params: &WeylParams) -> Result<ConnectionReport> {
    let x0 = problem.x0;
    let room = problem.b.value - x0;
    let x1 = x0 + if room.is_finite() { room.min(2.0) * 0.5 } else { 1.0 };
    let mp = m_limit(problem, z, Side::Plus, &params.ladder)?;
    let mm = m_limit(problem, z, Side::Minus, &params.ladder)?;
    let plus_bar = weyl_solution(problem, z.conj(), Side::Plus, x1 - x0, params)?;
    let sp = plus_bar.trace.state_at(problem, x1)?;
    let minus0 = QuasiState::new(x0, linalg::identity(problem.dim()), mm.value.clone());
    let sm = quasi::propagate(problem, z, &minus0, x1, problem.tolerances.ode)?;
    let direct = wronskian(&sp, &sm, WronskianForm::AdjointFirst)?;
    let predicted = &mm.value - &mp.value;
    let residual = linalg::norm(&(&direct - &predicted)) / (1.0 + linalg::norm(&predicted));
    Ok(ConnectionReport { z, x0, x1, direct, predicted, residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentificationReport {
    pub lambda: f64,
    pub side: Side,
    pub x0: f64,
    pub span: f64,
    pub grid_points: usize,
    /// `max_x ‖Ψ(x)Ψ(x0)⁻¹ − U(x)U(x0)⁻¹‖₂`.
    pub deviation: f64,
    /// Scalar problems: `max_x |ψ(x)/u(x) − ψ(x0)/u(x0)|`.
    pub ratio_deviation: Option<f64>,
    #[serde(serialize_with = "linalg::ser_mat")]
    pub weyl_m: CMat,
    #[serde(serialize_with = "linalg::ser_mat")]
    pub principal_m: CMat,
    pub principal_verdict: Verdict,
    pub limit_point_certified: bool,
}

/// Compare the normalized Weyl solution with the normalized principal solution at real `λ`.
pub fn identification_check(problem: &Problem, lambda: f64, side: Side, params: &PrincipalParams) -> Result<IdentificationReport> {
    let z = SpectralParameter::real(lambda);
    let weyl = weyl_solution(problem, z, side, params.span, &WeylParams { ladder: params.ladder, segment: params.segment })?;
    let principal = matrix_principal(problem, lambda, side, params)?;
    let mut deviation = 0.0f64;
    let mut ratio: Option<f64> = problem.is_scalar().then_some(0.0);
    for s in &principal.trace.samples {
        let u = s.u_true();
        let psi = weyl.trace.state_at(problem, s.x)?.u_true();
        deviation = deviation.max(linalg::spectral_norm(&(&psi - &u)));
        if let Some(r) = ratio.as_mut() {
            *r = r.max((psi[(0, 0)] / u[(0, 0)] - 1.0).norm());
        }
    }
    Ok(IdentificationReport {
        lambda,
        side,
        x0: problem.x0,
        span: params.span,
        grid_points: principal.trace.samples.len(),
        deviation,
        ratio_deviation: ratio,
        weyl_m: weyl.evaluation.value.clone(),
        principal_m: principal.m_at_x0(),
        principal_verdict: principal.certificate.verdict,
        limit_point_certified: problem.declared_limit_point(side) == Some(true),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BilinearReport {
    pub lambda: f64,
    pub side: Side,
    /// `∓∫ (ξ, Θ⁻¹P⁻¹[Θ⁻¹]* η)` extrapolated along the ladder.
    pub value: C64,
    pub ladder: TruncationLadder,
    /// `(ξ, M_±(λ, x0)⁻¹ η)` from the limit formula.
    pub direct: C64,
    pub difference: f64,
    pub converged: bool,
}

pub fn m_inverse_bilinear(
    problem: &Problem,
    lambda: f64,
    side: Side,
    xi: &[C64],
    eta: &[C64],
    params: &LadderParams,
) -> Result<BilinearReport> {
    let z = SpectralParameter::real(lambda);
    check_real_parameter(problem, z, side)?;
    let m = problem.dim();
    if xi.len() != m || eta.len() != m {
        return Err(Error::DimensionMismatch(format!("vectors must have length {m}")));
    }
    let li = limit_integrals(problem, z, side, params)?;
    let values = li.values.iter().map(|c| linalg::scalar(-linalg::bilinear(xi, c, eta))).collect();
    let ladder = TruncationLadder::new(side, li.cutoffs.clone(), values, li.skipped.clone(), params.abs_tol, params.rel_tol)?;
    let ev = evaluation_from_integrals(problem, z, side, &li, params)?;
    let direct = linalg::bilinear(xi, &linalg::inverse(&ev.value, problem.x0)?, eta);
    let value = ladder.extrapolated[(0, 0)];
    Ok(BilinearReport {
        lambda,
        side,
        value,
        direct,
        difference: (value - direct).norm(),
        converged: ladder.converged && ev.converged,
        ladder,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedEntry {
    pub y: f64,
    #[serde(serialize_with = "linalg::ser_mat")]
    pub m_y: CMat,
    #[serde(serialize_with = "linalg::ser_mat")]
    pub im_m_y: CMat,
    /// `Im z ∫_{x0}^{y} U_y*RU_y`.
    #[serde(serialize_with = "linalg::ser_mat")]
    pub energy: CMat,
    pub relative_residual: f64,
}

/// The truncated imaginary-part identity for `M_y = −Φ(y)⁻¹Θ(y)` and `U_y = Θ + ΦM_y`.
pub fn truncated_identity(problem: &Problem, z: SpectralParameter, ys: &[f64]) -> Result<Vec<TruncatedEntry>> {
    let pair = normalized_pair(problem, z, 0.0, ys, problem.tolerances.ode)?;
    let m = problem.dim();
    let mut out = Vec::with_capacity(ys.len());
    for &y in ys {
        let th = pair.theta.sample_at(y).ok_or(Error::PositionMismatch(y, y))?.unscaled();
        let ph = pair.phi.sample_at(y).ok_or(Error::PositionMismatch(y, y))?.unscaled();
        let m_y = -(linalg::inverse(&ph.u, y)? * &th.u);
        let u_y = pair.theta.combine(&linalg::identity(m), &pair.phi, &m_y)?;
        let coeffs = &problem.coefficients;
        let integral = quad::integrate(
            |x| {
                let s = u_y.state_at(problem, x)?;
                Ok(s.u.adjoint() * coeffs.r(x) * &s.u)
            },
            problem.x0,
            y,
            QuadOptions::default(),
        )?
        .value;
        let energy = integral * C64::new(z.0.im, 0.0);
        let im_m_y = linalg::im_part(&m_y);
        let relative_residual = linalg::norm(&(&im_m_y - &energy)) / linalg::norm(&im_m_y).max(f64::MIN_POSITIVE);
        out.push(TruncatedEntry { y, m_y, im_m_y, energy, relative_residual });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResidual {
    pub name: String,
    pub x: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub z: SpectralParameter,
    pub entries: Vec<IdentityResidual>,
    pub max_residual: f64,
}

/// Residuals of the normalized-pair identities, `W(θ, φ) = 1` (scalar) and the Wronskian
/// drift identity, relative to the size of the terms involved.
pub fn identity_suite(problem: &Problem, z: SpectralParameter, xs: &[f64]) -> Result<IdentityReport> {
    let tol = problem.tolerances.ode;
    let m = problem.dim();
    let id = linalg::identity(m);
    let zero = CMat::zeros(m, m);
    let p = normalized_pair(problem, z, 0.0, xs, tol)?;
    let pb = normalized_pair(problem, z.conj(), 0.0, xs, tol)?;
    let mut entries = Vec::new();
    let mut push = |name: &str, x: f64, lhs: CMat, rhs: &CMat, scale: f64| {
        let residual = linalg::norm(&(&lhs - rhs)) / (1.0 + scale);
        entries.push(IdentityResidual { name: name.into(), x, residual });
    };
    let adj = WronskianForm::AdjointFirst;
    for &x in xs {
        let get = |t: &SolutionTrace| t.sample_at(x).cloned().ok_or(Error::PositionMismatch(x, x)).map(|s| s.unscaled());
        let (th, ph, thb, phb) = (get(&p.theta)?, get(&p.phi)?, get(&pb.theta)?, get(&pb.phi)?);
        let nrm = |a: &CMat, b: &CMat| linalg::norm(a) * linalg::norm(b);
        let scale = nrm(&th.u, &ph.v).max(nrm(&th.v, &ph.u)).max(nrm(&thb.u, &phb.v)).max(nrm(&thb.v, &phb.u));
        push("W(Θ(z̄)*, Φ(z)) = I", x, wronskian(&thb, &ph, adj)?, &id, scale);
        push("W(Φ(z̄)*, Θ(z)) = -I", x, wronskian(&phb, &th, adj)?, &(-&id), scale);
        push("W(Φ(z̄)*, Φ(z)) = 0", x, wronskian(&phb, &ph, adj)?, &zero, nrm(&phb.u, &ph.v));
        push("W(Θ(z̄)*, Θ(z)) = 0", x, wronskian(&thb, &th, adj)?, &zero, nrm(&thb.u, &th.v));
        push("ΦΘ(z̄)* - ΘΦ(z̄)* = 0", x, &ph.u * thb.u.adjoint() - &th.u * phb.u.adjoint(), &zero, nrm(&ph.u, &thb.u));
        push(
            "PΦ'(PΘ(z̄)')* - PΘ'(PΦ(z̄)')* = 0",
            x,
            &ph.v * thb.v.adjoint() - &th.v * phb.v.adjoint(),
            &zero,
            nrm(&ph.v, &thb.v),
        );
        push("PΦ'Θ(z̄)* - PΘ'Φ(z̄)* = I", x, &ph.v * thb.u.adjoint() - &th.v * phb.u.adjoint(), &id, scale);
        push("Θ(PΦ(z̄)')* - Φ(PΘ(z̄)')* = I", x, &th.u * phb.v.adjoint() - &ph.u * thb.v.adjoint(), &id, scale);
        if problem.is_scalar() {
            push("W(θ, φ) = 1", x, wronskian(&th, &ph, WronskianForm::Plain)?, &id, scale);
        }
    }
    // Drift identity between Θ(z) and Φ(z + 1) from x0 to each x.
    let shifted = normalized_pair(problem, SpectralParameter(z.0 + 1.0), 0.0, xs, tol)?;
    let form = if problem.is_scalar() { WronskianForm::Plain } else { WronskianForm::AdjointFirst };
    for &x in xs {
        if x == problem.x0 {
            continue;
        }
        let d = quasi::wronskian_drift(problem, &p.theta, &shifted.phi, problem.x0, x, form)?;
        let scale = linalg::norm(&d.quadrature);
        entries.push(IdentityResidual { name: "Wronskian drift".into(), x, residual: d.discrepancy / (1.0 + scale) });
    }
    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    Ok(IdentityReport { z, entries, max_residual })
}

/// M-function sweep: one evaluation per grid point; failures become unconverged rows.
pub fn m_sweep(problem: &Problem, side: Side, zs: &[C64], params: &LadderParams) -> Vec<Result<WeylEvaluation>> {
    zs.iter().map(|&z| m_limit(problem, SpectralParameter(z), side, params)).collect()
}

/// CSV rows `re_z, im_z, re_m_ij, im_m_ij…, converged, error`.
pub fn write_sweep_csv<W: Write>(mut w: W, dim: usize, zs: &[C64], rows: &[Result<WeylEvaluation>]) -> Result<()> {
    let mut header = vec!["re_z".to_string(), "im_z".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            header.push(format!("re_m{}{}", i + 1, j + 1));
            header.push(format!("im_m{}{}", i + 1, j + 1));
        }
    }
    header.push("converged".into());
    header.push("error".into());
    writeln!(w, "{}", header.join(","))?;
    for (z, row) in zs.iter().zip(rows) {
        let mut cells = vec![fmt_f64(z.re), fmt_f64(z.im)];
        match row {
            Ok(ev) => {
                for i in 0..dim {
                    for j in 0..dim {
                        cells.push(fmt_f64(ev.value[(i, j)].re));
                        cells.push(fmt_f64(ev.value[(i, j)].im));
                    }
                }
                cells.push(ev.converged.to_string());
                cells.push(fmt_f64(ev.error));
            }
            Err(_) => {
                cells.extend(std::iter::repeat_n("nan".to_string(), 2 * dim * dim));
                cells.push("false".into());
                cells.push("nan".into());
            }
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use crate::problem::builtins;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_m_plus_values() {
        let p = builtins::free_line();
        let params = LadderParams::default();
        let e = m_limit(&p, SpectralParameter::real(-1.0), Side::Plus, &params).unwrap();
        assert!(e.converged);
        assert!((e.scalar_value() - c(-1.0, 0.0)).norm() < 1e-6);
        assert_eq!(e.method, Method::RealLebesgue);
        assert_eq!(e.monotone, Some(true));
        let e = m_limit(&p, SpectralParameter::new(0.0, 1.0), Side::Plus, &params).unwrap();
        let want = oracles::free_m_plus(c(0.0, 1.0)).unwrap();
        assert!((e.scalar_value() - want).norm() < 1e-6, "{} vs {want}", e.scalar_value());
        assert_eq!(e.herglotz, Some(true));
        let e = m_limit(&p, SpectralParameter::new(0.0, 1.0), Side::Minus, &params).unwrap();
        assert!((e.scalar_value() + want).norm() < 1e-6);
    }

    #[test]
    fn real_parameter_needs_threshold() {
        let mut p = builtins::free_line();
        assert!(m_limit(&p, SpectralParameter::real(0.5), Side::Plus, &LadderParams::default()).is_err());
        p.thresholds = Default::default();
        assert!(matches!(
            m_limit(&p, SpectralParameter::real(-1.0), Side::Plus, &LadderParams::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn example312_matrix_m() {
        let p = builtins::example312(1.0);
        let e = m_limit(&p, SpectralParameter::real(-2.0), Side::Plus, &LadderParams::default()).unwrap();
        let q = linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let want = oracles::const_matrix_m(&q, c(-2.0, 0.0)).unwrap();
        assert!(linalg::max_abs(&(&e.value - &want)) < 1e-6);
        let jet = oracles::example312_principal_jet(1.0, -2.0, 0.0).unwrap();
        let riccati = &jet.du * linalg::inverse(&jet.u, 0.0).unwrap();
        assert!(linalg::max_abs(&(&e.value - &riccati)) < 1e-6);
        assert_eq!(e.monotone, Some(true));
    }

    #[test]
    fn riccati_matches_limit() {
        let p = builtins::example313();
        let z = SpectralParameter::new(1.0, 1.0);
        let w = weyl_solution(&p, z, Side::Plus, 3.0, &WeylParams::default()).unwrap();
        let r = m_riccati(&p, &w.trace, Side::Plus).unwrap();
        assert!(linalg::norm(&(&r.value - &w.evaluation.value)) < 1e-10);
        let o = oracles::ConstMatrixOracle::new(linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 2.0]), z.0, 0.0).unwrap();
        assert!(linalg::max_abs(&(&w.evaluation.value - &o.m_plus().unwrap())) < 1e-6);
        let decay = o.weyl(true, 3.0).unwrap().u;
        assert!(linalg::max_abs(&(w.trace.state_at(&p, 3.0).unwrap().u_true() - decay)) < 1e-7);
    }

    #[test]
    fn free_weyl_solution_decays() {
        let p = builtins::free_line();
        let w = weyl_solution(&p, SpectralParameter::real(-1.0), Side::Plus, 10.0, &WeylParams::default()).unwrap();
        for s in &w.trace.samples {
            assert!((s.u_true()[(0, 0)].re - (-s.x).exp()).abs() < 1e-7);
        }
        let last = w.square_integrability.last().unwrap().1;
        assert!((last - 0.5 * (1.0 - (-20.0f64).exp())).abs() < 1e-8);
    }

    #[test]
    fn alpha_branches() {
        let p = builtins::free_line();
        let params = LadderParams::default();
        let z = SpectralParameter::real(-1.0);
        let a0 = m_alpha(&p, z, Side::Plus, 0.0, &params).unwrap();
        let plain = m_limit(&p, z, Side::Plus, &params).unwrap();
        assert_eq!(a0.evaluation.value, plain.value);
        let a = m_alpha(&p, z, Side::Plus, FRAC_PI_2, &params).unwrap();
        assert!((a.evaluation.scalar_value() - c(1.0, 0.0)).norm() < 1e-6);
        for alpha in [PI / 6.0, PI / 3.0] {
            for zz in [z, SpectralParameter::new(0.0, 1.0)] {
                let a = m_alpha(&p, zz, Side::Plus, alpha, &params).unwrap();
                assert!(a.discrepancy.unwrap() <= 1e-6);
                let m = m_limit(&p, zz, Side::Plus, &params).unwrap().scalar_value();
                assert!((a.evaluation.scalar_value() - alpha_mobius(m, alpha)).norm() < 1e-6);
            }
        }
        // φ_{π/6} vanishes at atanh(tan(π/6)) for λ = −1.
        let a = m_alpha(&p, z, Side::Plus, PI / 6.0, &params).unwrap();
        assert_eq!(a.excised_zeros.len(), 1);
        assert!((a.excised_zeros[0] - (PI / 6.0).tan().atanh()).abs() < 1e-9);
    }

    #[test]
    fn herglotz_on_matrix_examples() {
        let zs = [c(0.0, 1.0), c(1.0, 1.0), c(-3.0, 0.5)];
        for p in [builtins::example312(1.0), builtins::example313()] {
            let r = herglotz_check(&p, Side::Plus, &zs, &LadderParams::default(), 1e-8).unwrap();
            assert!(r.ok, "{r:?}");
            let r = herglotz_check(&p, Side::Minus, &zs, &LadderParams::default(), 1e-8).unwrap();
            assert!(r.ok, "{r:?}");
        }
        let p = builtins::free_line();
        assert!(herglotz_check(&p, Side::Plus, &[c(1.0, -1.0)], &LadderParams::default(), 1e-8).is_err());
    }

    #[test]
    fn connection_identity() {
        let p = builtins::free_line();
        let r = wronskian_connection(&p, SpectralParameter::real(-1.0), &WeylParams::default()).unwrap();
        assert!((r.predicted[(0, 0)] - c(2.0, 0.0)).norm() < 1e-6);
        assert!(r.residual < 1e-8, "{}", r.residual);
        let p = builtins::example312(1.0);
        let r = wronskian_connection(&p, SpectralParameter::real(-2.0), &WeylParams::default()).unwrap();
        assert!(r.residual < 1e-7, "{}", r.residual);
        let r = wronskian_connection(&p, SpectralParameter::new(1.0, 1.0), &WeylParams::default()).unwrap();
        assert!(r.residual < 1e-7, "{}", r.residual);
    }

    #[test]
    fn identification_free_and_examples() {
        let p = builtins::free_line();
        let r = identification_check(&p, -1.0, Side::Plus, &PrincipalParams::default()).unwrap();
        assert!(r.deviation < 1e-7, "{}", r.deviation);
        assert!(r.ratio_deviation.unwrap() < 1e-7);
        for (p, l) in [(builtins::example312(1.0), -2.0), (builtins::example313(), -3.0)] {
            let r = identification_check(&p, l, Side::Plus, &PrincipalParams::default()).unwrap();
            assert!(r.deviation < 1e-6, "{}: {}", p.name, r.deviation);
        }
    }

    #[test]
    fn bilinear_forms() {
        let params = LadderParams::default();
        let p = builtins::free_line();
        let one = [c(1.0, 0.0)];
        let r = m_inverse_bilinear(&p, -1.0, Side::Plus, &one, &one, &params).unwrap();
        assert!((r.value - c(-1.0, 0.0)).norm() < 1e-6);
        let p = builtins::example312(1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (e1, e2) = ([c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]);
        let r = m_inverse_bilinear(&p, -2.0, Side::Plus, &e1, &e2, &params).unwrap();
        assert!(r.value.norm() < 1e-8);
        let xi = [c(0.3, -0.2), c(1.1, 0.4)];
        let eta = [c(-0.7, 0.5), c(0.2, 0.9)];
        let r = m_inverse_bilinear(&p, -2.0, Side::Plus, &xi, &eta, &params).unwrap();
        assert!(r.difference < 1e-6);
        let mut polar = c(0.0, 0.0);
        for k in 0..4 {
            let t = c(0.0, 1.0).powu(k);
            let v: Vec<C64> = xi.iter().zip(&eta).map(|(a, b)| a + t * b).collect();
            polar += t.conj() * m_inverse_bilinear(&p, -2.0, Side::Plus, &v, &v, &params).unwrap().value;
        }
        assert!((polar / 4.0 - r.value).norm() < 1e-8);
    }

    #[test]
    fn truncated_identity_example312() {
        let p = builtins::example312(1.0);
        let rows = truncated_identity(&p, SpectralParameter::new(1.0, 1.0), &[1.0, 3.0, 5.0]).unwrap();
        for r in rows {
            assert!(r.relative_residual < 1e-7, "y = {}: {}", r.y, r.relative_residual);
        }
    }

    #[test]
    fn identities_hold() {
        let xs = [-1.5, -0.5, 0.0, 0.7, 2.0];
        for p in [builtins::free_line(), builtins::example312(1.0), builtins::example313()] {
            for z in [c(-3.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)] {
                let r = identity_suite(&p, SpectralParameter(z), &xs).unwrap();
                assert!(r.max_residual < 1e-8, "{} {z}: {:?}", p.name, r.entries.iter().find(|e| e.residual >= 1e-8));
            }
        }
    }

    #[test]
    fn sweep_csv() {
        let p = builtins::example312(1.0);
        let zs = [c(0.0, 1.0), c(1.0, 1.0)];
        let rows = m_sweep(&p, Side::Plus, &zs, &LadderParams::default());
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, 2, &zs, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().ends_with(&format!("true,{}", fmt_f64(rows[0].as_ref().unwrap().error))));
    }
}
