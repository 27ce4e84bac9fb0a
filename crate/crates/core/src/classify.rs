//! Numerical diagnostics: zero counts, disconjugacy, the limit-point criterion, threshold
//! estimation and positivity classes of matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::canonical::{normalized_pair, self_conjugacy};
use crate::error::{Error, Result};
use crate::ladder::{self, fit_growth, Growth, GrowthFit, LadderParams, TruncationLadder};
use crate::linalg::{self, CMat, C64};
use crate::problem::{EndpointKind, Problem, Side, SpectralParameter};
use crate::quad::{self, QuadOptions};
use crate::quasi::{self, QuasiState, SolutionTrace};

#[derive(Debug, Clone, Serialize)]
pub struct ZeroCount {
    pub count: usize,
    pub zeros: Vec<f64>,
    /// Points where `|u|` (or the normalized determinant) nearly vanishes without a sign change.
    pub tangential: Vec<f64>,
    /// Matrix traces count sign changes of `Re det U`; this is a diagnostic only.
    pub determinant_based: bool,
}

/// `|det Q_U|` where `(U; V) = QR` and `Q_U` is the top block of `Q`.
///
/// This depends only on the column span of `(U; V)`, so it is unaffected by a right factor
/// and by columns growing at different rates. For a self-conjugate span it is the product of
/// the cosines of the angles to the vertical subspace `U = 0`.
pub fn normalized_det(s: &QuasiState) -> f64 {
    let m = s.u.nrows();
    let k = s.u.ncols();
    let mut stacked = CMat::zeros(2 * m, k);
    stacked.view_mut((0, 0), (m, k)).copy_from(&s.u);
    stacked.view_mut((m, 0), (m, k)).copy_from(&s.v);
    if !linalg::is_finite(&stacked) {
        return 0.0;
    }
    let q = stacked.qr().q();
    let top = q.view((0, 0), (m, k)).into_owned();
    linalg::det(&top).norm()
}

/// Zeros of a solution inside `[lo, hi]`.
pub fn count_zeros(problem: &Problem, trace: &SolutionTrace, lo: f64, hi: f64) -> Result<ZeroCount> {
    let (tlo, thi) = trace.range();
    if lo < tlo || hi > thi {
        return Err(Error::Precondition(format!("trace covers [{tlo}, {thi}], not [{lo}, {hi}]")));
    }
    let clipped = trace.clip(lo, hi);
    if clipped.samples.len() < 2 {
        return Ok(ZeroCount { count: 0, zeros: Vec::new(), tangential: Vec::new(), determinant_based: !problem.is_scalar() });
    }
    let tiny = 1e-10;
    if problem.is_scalar() {
        let zeros: Vec<f64> = quasi::real_zeros(problem, &clipped)?.into_iter().filter(|&x| x > lo && x < hi).collect();
        let tangential = tangential_points(&clipped, |s| s.u[(0, 0)].re.abs() / (s.u[(0, 0)].norm() + s.v[(0, 0)].norm()), tiny, &zeros);
        return Ok(ZeroCount { count: zeros.len(), zeros, tangential, determinant_based: false });
    }
    let mut zeros = Vec::new();
    for w in clipped.samples.windows(2) {
        let (a, b) = (linalg::det(&w[0].u).re, linalg::det(&w[1].u).re);
        if a * b < 0.0 {
            zeros.push(0.5 * (w[0].x + w[1].x));
        }
    }
    let tangential = tangential_points(&clipped, normalized_det, tiny, &zeros);
    Ok(ZeroCount { count: zeros.len(), zeros, tangential, determinant_based: true })
}

fn tangential_points(trace: &SolutionTrace, measure: impl Fn(&QuasiState) -> f64, tiny: f64, zeros: &[f64]) -> Vec<f64> {
    let vals: Vec<f64> = trace.samples.iter().map(&measure).collect();
    let mut out = Vec::new();
    for k in 1..vals.len().saturating_sub(1) {
        let x = trace.samples[k].x;
        let local_min = vals[k] <= vals[k - 1] && vals[k] <= vals[k + 1];
        let near_zero = zeros.iter().any(|z| (z - x).abs() < 1e-6);
        if local_min && vals[k] < tiny && !near_zero {
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Disconjugacy {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassifyParams {
    /// Length of the examined range toward an infinite or singular endpoint.
    pub span: f64,
    /// Multiples `k` giving the candidates `Θ ± kΦ`.
    pub k_grid: [f64; 3],
    /// Random Hermitian candidates `Θ + ΦK`.
    pub random_candidates: usize,
    /// Starting points of the refutation shots (evenly spread over the range).
    pub shots: usize,
    /// Invertibility floor for the normalized determinant.
    pub det_floor: f64,
    pub seed: u64,
    pub ladder: LadderParams,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            span: 30.0,
            k_grid: [0.5, 1.0, 2.0],
            random_candidates: 4,
            shots: 4,
            det_floor: 1e-8,
            seed: 0,
            ladder: LadderParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    /// `phi` for `Φ_c`, otherwise `theta+phi*K`.
    pub kind: String,
    #[serde(serialize_with = "linalg::ser_opt_mat")]
    pub k: Option<CMat>,
    pub min_normalized_det: f64,
    pub self_conjugacy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DisconjugacyReport {
    pub lambda: f64,
    pub side: Side,
    /// The examined range `[start, end]` (oriented toward `side`).
    pub start: f64,
    pub end: f64,
    pub verdict: Disconjugacy,
    pub witness: Option<Witness>,
    /// A shot solution vanishing at `from` and becoming singular again at `at`.
    pub conjugate_pair: Option<(f64, f64)>,
    pub candidates_tested: usize,
}

fn range_end(problem: &Problem, start: f64, side: Side, span: f64) -> f64 {
    let end = problem.endpoint(side);
    let s = side.sign();
    match end.kind() {
        EndpointKind::Infinite => start + s * span,
        EndpointKind::Finite => {
            let room = (end.value - start).abs();
            if end.is_regular() {
                if room <= span {
                    end.value
                } else {
                    start + s * span
                }
            } else {
                start + s * span.min(room * (1.0 - 1e-6))
            }
        }
    }
}

/// Integrate the column span of `init` toward `end` in pieces of length at most `h`,
/// replacing `(U; V)` by an orthonormal basis of its span at each junction.
///
/// Columns growing at different rates make the raw `U` numerically rank deficient long
/// before it is singular; the span itself is well conditioned.
fn span_segments(problem: &Problem, z: SpectralParameter, init: QuasiState, end: f64, h: f64, tol: f64) -> Result<Vec<SolutionTrace>> {
    let dir = (end - init.x).signum();
    let mut state = orthonormalize(&init);
    let mut out = Vec::new();
    loop {
        let next = if (end - state.x).abs() <= h * (1.0 + 1e-12) { end } else { state.x + dir * h };
        let trace = quasi::integrate(problem, z, &state, &[next], tol)?;
        let last = if dir > 0.0 { trace.samples.last() } else { trace.samples.first() }.expect("nonempty trace").clone();
        out.push(trace);
        if next == end {
            return Ok(out);
        }
        state = orthonormalize(&last);
    }
}

fn orthonormalize(s: &QuasiState) -> QuasiState {
    let (m, k) = (s.u.nrows(), s.u.ncols());
    let mut stacked = CMat::zeros(2 * m, k);
    stacked.view_mut((0, 0), (m, k)).copy_from(&s.u);
    stacked.view_mut((m, 0), (m, k)).copy_from(&s.v);
    let q = stacked.qr().q();
    QuasiState::new(s.x, q.view((0, 0), (m, k)).into_owned(), q.view((m, 0), (m, k)).into_owned())
}

/// First point after `start` (in the direction of `side`) where the segmented trace becomes
/// singular: a sign change of `Re det U` inside a segment, or a normalized determinant
/// below `floor`.
fn first_singular(segments: &[SolutionTrace], start: f64, side: Side, floor: f64) -> Option<f64> {
    for seg in segments {
        let ordered: Vec<&QuasiState> = match side {
            Side::Plus => seg.samples.iter().collect(),
            Side::Minus => seg.samples.iter().rev().collect(),
        };
        let mut prev: Option<(f64, f64)> = None;
        for s in ordered {
            if s.x == start {
                continue;
            }
            let d = linalg::det(&s.u).re;
            if let Some((px, pd)) = prev {
                if pd * d < 0.0 {
                    return Some(0.5 * (px + s.x));
                }
            }
            if normalized_det(s) < floor {
                return Some(s.x);
            }
            prev = Some((s.x, d));
        }
    }
    None
}

/// Sign changes of `Re det U` inside each segment (the basis changes between segments).
fn determinant_crossings(segments: &[SolutionTrace], skip: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for seg in segments {
        let pts: Vec<(f64, f64)> = seg.samples.iter().filter(|s| s.x != skip).map(|s| (s.x, linalg::det(&s.u).re)).collect();
        for w in pts.windows(2) {
            if w[0].1 * w[1].1 < 0.0 {
                out.push(0.5 * (w[0].0 + w[1].0));
            }
        }
    }
    out
}

fn min_normalized_det(segments: &[SolutionTrace], skip: f64) -> f64 {
    segments
        .iter()
        .flat_map(|t| t.samples.iter())
        .filter(|s| s.x != skip)
        .map(normalized_det)
        .fold(f64::INFINITY, f64::min)
}

fn random_hermitian(m: usize, rng: &mut ChaCha8Rng, real: bool) -> CMat {
    let mut k = CMat::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = C64::new(rng.gen_range(-2.0..2.0), 0.0);
        for j in (i + 1)..m {
            let im = if real { 0.0 } else { rng.gen_range(-1.0..1.0) };
            let v = C64::new(rng.gen_range(-1.0..1.0), im);
            k[(i, j)] = v;
            k[(j, i)] = v.conj();
        }
    }
    k
}

/// Disconjugacy of `LU = λU` on the range from `start` toward `side`.
///
/// Refuted when a shot `Φ_c` (vanishing at `c`) becomes singular again inside the range;
/// certified when a self-conjugate candidate (`Φ_start`, `Θ ± kΦ`, or `Θ + ΦK` with random
/// Hermitian `K`) stays invertible on the interior.
pub fn disconjugacy_check(problem: &Problem, lambda: f64, start: f64, side: Side, params: &ClassifyParams) -> Result<DisconjugacyReport> {
    let end = range_end(problem, start, side, params.span);
    let z = SpectralParameter::real(lambda);
    let m = problem.dim();
    let tol = problem.tolerances.ode;
    let id = linalg::identity(m);
    let zero = CMat::zeros(m, m);
    let mut report = DisconjugacyReport {
        lambda,
        side,
        start,
        end,
        verdict: Disconjugacy::Inconclusive,
        witness: None,
        conjugate_pair: None,
        candidates_tested: 0,
    };

    let shots = params.shots.max(1);
    for k in 0..shots {
        let c = start + (end - start) * k as f64 / shots as f64;
        let segs = span_segments(problem, z, QuasiState::new(c, zero.clone(), id.clone()), end, SEGMENT, tol)?;
        if let Some(at) = first_singular(&segs, c, side, 1e-12) {
            report.verdict = Disconjugacy::Refuted;
            report.conjugate_pair = Some((c, at));
            return Ok(report);
        }
    }

    // Candidates are given by their initial data (U, PU′)(start): Φ is (0, I), Θ + ΦK is (I, K).
    let mut candidates: Vec<(String, Option<CMat>)> = vec![("phi".into(), None), ("theta+phi*K".into(), Some(zero.clone()))];
    for &k in &params.k_grid {
        for sgn in [1.0, -1.0] {
            candidates.push(("theta+phi*K".into(), Some(&id * C64::new(sgn * k, 0.0))));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let real = problem.is_scalar() || is_real_problem(problem, start);
    for _ in 0..params.random_candidates {
        candidates.push(("theta+phi*K".into(), Some(random_hermitian(m, &mut rng, real))));
    }
    for (kind, k) in candidates {
        report.candidates_tested += 1;
        let init = match &k {
            None => QuasiState::new(start, zero.clone(), id.clone()),
            Some(k) => QuasiState::new(start, id.clone(), k.clone()),
        };
        let segs = span_segments(problem, z, init, end, SEGMENT, tol)?;
        if first_singular(&segs, start, side, params.det_floor).is_none() {
            let min_det = min_normalized_det(&segs, start);
            let conj = segs.iter().map(self_conjugacy).fold(0.0, f64::max);
            report.verdict = Disconjugacy::Certified;
            report.witness = Some(Witness { kind, k, min_normalized_det: min_det, self_conjugacy: conj });
            return Ok(report);
        }
    }
    Ok(report)
}

/// Length of the pieces between re-orthonormalizations.
const SEGMENT: f64 = 1.0;

fn is_real_problem(problem: &Problem, x: f64) -> bool {
    let c = &problem.coefficients;
    [c.p(x), c.q(x), c.r(x)].iter().all(|m| m.iter().all(|v| v.im == 0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdEstimate {
    pub side: Side,
    /// Largest tested λ with certified disconjugacy.
    pub lambda: Option<f64>,
    /// Bisection bracket `[certified, not certified]`.
    pub bracket: Option<(f64, f64)>,
    pub evaluations: Vec<(f64, Disconjugacy)>,
}

/// Bisection for the largest λ in `[lo, hi]` whose disconjugacy check certifies on the half
/// range from `x0` toward `side`. Reported as a bracket, not as a spectral quantity.
pub fn estimate_threshold(problem: &Problem, side: Side, lo: f64, hi: f64, iterations: usize, params: &ClassifyParams) -> Result<ThresholdEstimate> {
    let mut evaluations = Vec::new();
    let mut check = |l: f64| -> Result<Disconjugacy> {
        let v = disconjugacy_check(problem, l, problem.x0, side, params)?.verdict;
        evaluations.push((l, v));
        Ok(v)
    };
    if check(lo)? != Disconjugacy::Certified {
        return Ok(ThresholdEstimate { side, lambda: None, bracket: None, evaluations });
    }
    if check(hi)? == Disconjugacy::Certified {
        return Ok(ThresholdEstimate { side, lambda: Some(hi), bracket: Some((hi, hi)), evaluations });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..iterations {
        let mid = 0.5 * (a + b);
        if check(mid)? == Disconjugacy::Certified {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(ThresholdEstimate { side, lambda: Some(a), bracket: Some((a, b)), evaluations })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitPointReport {
    pub side: Side,
    pub start: f64,
    pub ladder: TruncationLadder,
    pub growth: GrowthFit,
    /// `∫ (r/p)^{1/2}` diverges: sufficient for the limit point case.
    pub limit_point: bool,
    /// Matrix problems use `(tr R · tr P⁻¹)^{1/2}/m`, which is not backed by a theorem.
    pub heuristic: bool,
}

/// The divergence criterion `∫^{endpoint} (r/p)^{1/2} = ∞` along a ladder from `c`.
pub fn limit_point_criterion(problem: &Problem, side: Side, c: f64, params: &LadderParams) -> Result<LimitPointReport> {
    if problem.threshold(side).is_none() {
        return Err(Error::Precondition(format!(
            "the criterion needs a nonoscillation certificate at {side}; run classify or declare a threshold"
        )));
    }
    let cut = ladder::cutoffs_from(problem, c, side, params)?;
    let coeffs = &problem.coefficients;
    let m = problem.dim() as f64;
    let scalar = problem.is_scalar();
    let cum = quad::cumulative(
        |x| {
            let val = if scalar {
                (coeffs.r(x)[(0, 0)].re / coeffs.p(x)[(0, 0)].re).sqrt()
            } else {
                let pinv = linalg::inverse(&coeffs.p(x), x)?;
                (coeffs.r(x).trace().re * pinv.trace().re).sqrt() / m
            };
            Ok(linalg::scalar(C64::new(val, 0.0)))
        },
        c,
        &cut,
        QuadOptions::default(),
    )?;
    let n = cum.values.len();
    let values: Vec<f64> = cum.values.iter().map(|v| v[(0, 0)].re.abs()).collect();
    let s: Vec<f64> = cut[..n].iter().map(|&x| ladder::distance_parameter(problem, side, c, x)).collect();
    let growth = fit_growth(&s, &values, params.rel_tol);
    let ladder = TruncationLadder::new(side, cut[..n].to_vec(), cum.values, cut[n..].to_vec(), params.abs_tol, params.rel_tol)?;
    Ok(LimitPointReport { side, start: c, limit_point: growth.verdict == Growth::Diverging, growth, ladder, heuristic: !scalar })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositivityClass {
    Improving,
    PreservingNotImproving,
    Neither,
}

/// Entrywise sign class of a real matrix.
pub fn positivity_class(a: &CMat) -> Result<PositivityClass> {
    if a.iter().any(|v| v.im != 0.0) {
        return Err(Error::Precondition("positivity classes are defined for real matrices".into()));
    }
    if a.iter().all(|v| v.re > 0.0) {
        Ok(PositivityClass::Improving)
    } else if a.iter().all(|v| v.re >= 0.0) {
        Ok(PositivityClass::PreservingNotImproving)
    } else {
        Ok(PositivityClass::Neither)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DefinitenessRow {
    pub parameter: usize,
    pub x: f64,
    pub min_eig: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefinitenessScan {
    pub rows: Vec<DefinitenessRow>,
    pub positive_definite_everywhere: bool,
    /// Every sampled point has a nonpositive eigenvalue.
    pub nowhere_positive_definite: bool,
}

/// Smallest eigenvalue of the Hermitian part of `family(k, x)` over parameters and points.
pub fn positive_definite_scan(family: impl Fn(usize, f64) -> CMat, parameters: usize, xs: &[f64]) -> DefinitenessScan {
    let mut rows = Vec::with_capacity(parameters * xs.len());
    for k in 0..parameters {
        for &x in xs {
            let min_eig = linalg::min_eigenvalue(&linalg::re_part(&family(k, x)));
            rows.push(DefinitenessRow { parameter: k, x, min_eig });
        }
    }
    DefinitenessScan {
        positive_definite_everywhere: rows.iter().all(|r| r.min_eig > 0.0),
        nowhere_positive_definite: rows.iter().all(|r| r.min_eig <= 0.0),
        rows,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorScanRow {
    #[serde(serialize_with = "linalg::ser_mat")]
    pub factor: CMat,
    /// First sampled `x` where `U(x)·F` is not positivity preserving.
    pub witness: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorScan {
    pub rows: Vec<FactorScanRow>,
    pub every_factor_fails: bool,
}

/// For each invertible real factor `F` whose entries come from `levels`, look for a sampled
/// `x` at which `solution(x)·F` is not positivity preserving.
pub fn right_factor_scan(solution: impl Fn(f64) -> Result<CMat>, m: usize, levels: &[f64], xs: &[f64]) -> Result<FactorScan> {
    let n = m * m;
    let total = levels.len().pow(n as u32);
    let samples: Vec<CMat> = xs.iter().map(|&x| solution(x)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for idx in 0..total {
        let mut rest = idx;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            entries.push(levels[rest % levels.len()]);
            rest /= levels.len();
        }
        let factor = linalg::from_real(m, m, &entries);
        if linalg::det(&factor).norm() < 1e-12 {
            continue;
        }
        let mut witness = None;
        for (&x, u) in xs.iter().zip(&samples) {
            if positivity_class(&(u * &factor))? == PositivityClass::Neither {
                witness = Some(x);
                break;
            }
        }
        rows.push(FactorScanRow { factor, witness });
    }
    Ok(FactorScan { every_factor_fails: rows.iter().all(|r| r.witness.is_some()), rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub endpoint: Side,
    pub lambda: f64,
    /// `(cutoff, zeros of the shot solution in [x0, cutoff])`; determinant sign changes for
    /// matrix problems.
    pub zero_trend: Vec<(f64, usize)>,
    pub disconjugacy: DisconjugacyReport,
    pub limit_point: Option<LimitPointReport>,
    pub threshold: Option<ThresholdEstimate>,
}

/// Zero counts of `Φ_{x0}` along the ladder, disconjugacy at `λ`, a threshold bracket over
/// `threshold_range`, and the limit point criterion.
pub fn classify(
    problem: &Problem,
    side: Side,
    lambda: f64,
    threshold_range: Option<(f64, f64)>,
    params: &ClassifyParams,
) -> Result<Classification> {
    let cut = ladder::cutoffs(problem, side, &params.ladder)?;
    let z = SpectralParameter::real(lambda);
    let mut zero_trend = Vec::with_capacity(cut.len());
    if problem.is_scalar() {
        let pair = normalized_pair(problem, z, 0.0, &cut, problem.tolerances.ode)?;
        for &c in &cut {
            let (lo, hi) = if c > problem.x0 { (problem.x0, c) } else { (c, problem.x0) };
            zero_trend.push((c, count_zeros(problem, &pair.phi, lo, hi)?.count));
        }
    } else {
        let m = problem.dim();
        let init = QuasiState::new(problem.x0, CMat::zeros(m, m), linalg::identity(m));
        let last = *cut.last().expect("ladder has rungs");
        let segs = span_segments(problem, z, init, last, SEGMENT, problem.tolerances.ode)?;
        let crossings = determinant_crossings(&segs, problem.x0);
        for &c in &cut {
            let n = crossings.iter().filter(|&&x| (x - problem.x0).abs() <= (c - problem.x0).abs()).count();
            zero_trend.push((c, n));
        }
    }
    let disconjugacy = disconjugacy_check(problem, lambda, problem.x0, side, params)?;
    let threshold = match threshold_range {
        Some((lo, hi)) => Some(estimate_threshold(problem, side, lo, hi, 30, params)?),
        None => None,
    };
    let mut annotated = problem.clone();
    if disconjugacy.verdict == Disconjugacy::Certified {
        let t = threshold.as_ref().and_then(|t| t.lambda).map_or(lambda + f64::EPSILON, |l| l.max(lambda));
        match side {
            Side::Minus => annotated.thresholds.lambda_a = annotated.thresholds.lambda_a.or(Some(t)),
            Side::Plus => annotated.thresholds.lambda_b = annotated.thresholds.lambda_b.or(Some(t)),
        }
    }
    let limit_point = limit_point_criterion(&annotated, side, problem.x0, &params.ladder).ok();
    Ok(Classification { endpoint: side, lambda, zero_trend, disconjugacy, limit_point, threshold })
}
