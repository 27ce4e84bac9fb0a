//! Truncation ladders: monotone cutoffs approaching an endpoint, per-rung values, and
//! extrapolated limits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::problem::{EndpointKind, Problem, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderGeometry {
    Geometric,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderParams {
    pub rungs: usize,
    /// Distance of the first rung from `x0` (infinite endpoints).
    pub first: f64,
    /// Distance of the last rung from `x0` (infinite endpoints).
    pub reach: f64,
    /// `None` picks geometric toward infinity and toward regular ends, linear toward
    /// finite singular ends.
    pub geometry: Option<LadderGeometry>,
    /// Smallest relative distance to a finite singular endpoint under geometric spacing.
    pub closest: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for LadderParams {
    fn default() -> Self {
        LadderParams {
            rungs: 40,
            first: 0.25,
            reach: 30.0,
            geometry: None,
            closest: 1e-6,
            abs_tol: 1e-8,
            rel_tol: 1e-8,
        }
    }
}

impl LadderParams {
    pub fn with_rungs(mut self, rungs: usize) -> Self {
        self.rungs = rungs;
        self
    }

    pub fn with_reach(mut self, reach: f64) -> Self {
        self.reach = reach;
        self
    }
}

fn geometric(first: f64, last: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![last];
    }
    let ratio = (last / first).powf(1.0 / (n - 1) as f64);
    (0..n).map(|k| if k == n - 1 { last } else { first * ratio.powi(k as i32) }).collect()
}

/// Cutoffs from `problem.x0` toward the endpoint on `side`, strictly monotone.
pub fn cutoffs(problem: &Problem, side: Side, params: &LadderParams) -> Result<Vec<f64>> {
    cutoffs_from(problem, problem.x0, side, params)
}

pub fn cutoffs_from(problem: &Problem, start: f64, side: Side, params: &LadderParams) -> Result<Vec<f64>> {
    let n = params.rungs;
    if n < 3 {
        return Err(Error::Config("a ladder needs at least 3 rungs".into()));
    }
    let end = problem.endpoint(side);
    let s = side.sign();
    let xs: Vec<f64> = match end.kind() {
        EndpointKind::Infinite => {
            let d = match params.geometry.unwrap_or(LadderGeometry::Geometric) {
                LadderGeometry::Geometric => geometric(params.first, params.reach, n),
                LadderGeometry::Linear => (1..=n).map(|k| params.reach * k as f64 / n as f64).collect(),
            };
            d.into_iter().map(|d| start + s * d).collect()
        }
        EndpointKind::Finite => {
            let span = (end.value - start).abs();
            if end.is_regular() {
                // Distances to the endpoint shrink geometrically; the last rung is the endpoint.
                let mut d = geometric(span * 0.9, span * 1e-10, n - 1);
                d.push(0.0);
                d.into_iter().map(|d| end.value - s * d).collect()
            } else {
                match params.geometry.unwrap_or(LadderGeometry::Linear) {
                    LadderGeometry::Linear => {
                        (1..=n).map(|k| start + s * span * k as f64 / (n + 1) as f64).collect()
                    }
                    LadderGeometry::Geometric => geometric(span * 0.9, span * params.closest, n)
                        .into_iter()
                        .map(|d| end.value - s * d)
                        .collect(),
                }
            }
        }
    };
    if !xs.windows(2).all(|w| s * (w[1] - w[0]) > 0.0) || xs.iter().any(|&x| !problem.contains(x)) {
        return Err(Error::Config(format!("ladder toward {side} is not strictly monotone inside the interval")));
    }
    Ok(xs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extrapolation {
    /// Geometric decay of rung differences detected; Aitken/Richardson correction applied.
    Richardson,
    /// Raw last rung, error from the Cauchy difference.
    LastRung,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationLadder {
    pub side: Side,
    pub cutoffs: Vec<f64>,
    #[serde(serialize_with = "linalg::ser_mats")]
    pub values: Vec<CMat>,
    /// Cutoffs dropped because the rung value was singular or non-finite.
    pub skipped: Vec<f64>,
    #[serde(serialize_with = "linalg::ser_mat")]
    pub extrapolated: CMat,
    pub error: f64,
    pub converged: bool,
    pub extrapolation: Extrapolation,
}

impl TruncationLadder {
    pub fn new(side: Side, cutoffs: Vec<f64>, values: Vec<CMat>, skipped: Vec<f64>, abs_tol: f64, rel_tol: f64) -> Result<Self> {
        if cutoffs.len() != values.len() {
            return Err(Error::DimensionMismatch("cutoffs and values differ in length".into()));
        }
        if values.len() < 2 {
            return Err(Error::NonConvergence(format!("only {} usable rungs", values.len())));
        }
        let n = values.len();
        let diff = |k: usize| linalg::norm(&(&values[k] - &values[k - 1]));
        let d1 = diff(n - 1);
        let d0 = if n >= 3 { diff(n - 2) } else { d1 };
        let floor = d1.max(d0) / 4.0;
        let last = values[n - 1].clone();

        let mut extrapolated = last.clone();
        let mut error = floor;
        let mut extrapolation = Extrapolation::LastRung;
        if n >= 4 && d1 > 0.0 && d0 > 0.0 {
            let dm = diff(n - 3);
            let r1 = d1 / d0;
            let r0 = if dm > 0.0 { d0 / dm } else { f64::NAN };
            if r1 < 0.9 && r0.is_finite() && (r1 - r0).abs() <= 0.2 * r0.max(r1) {
                let correction = (&values[n - 1] - &values[n - 2]) * C64::new(r1 / (1.0 - r1), 0.0);
                error = floor.max(linalg::norm(&correction));
                extrapolated = last + correction;
                extrapolation = Extrapolation::Richardson;
            }
        }
        let converged = error <= abs_tol + rel_tol * linalg::norm(&extrapolated);
        Ok(TruncationLadder { side, cutoffs, values, skipped, extrapolated, error, converged, extrapolation })
    }

    pub fn last_value(&self) -> &CMat {
        &self.values[self.values.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    Diverging,
    Converging,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    /// Local log-log slopes `Δ ln I / Δ ln s` over the ladder.
    pub power_exponents: Vec<f64>,
    /// Local exponential rates `Δ ln I / Δ s`.
    pub exponential_rates: Vec<f64>,
    pub verdict: Growth,
}

/// Classify a positive, nondecreasing sequence of partial integrals `values` sampled at
/// distance parameters `s` (s → ∞ toward the endpoint).
pub fn fit_growth(s: &[f64], values: &[f64], tol: f64) -> GrowthFit {
    let n = values.len();
    let mut power = Vec::new();
    let mut rate = Vec::new();
    for k in 1..n {
        let (i0, i1) = (values[k - 1].abs(), values[k].abs());
        if i0 > 0.0 && i1 > 0.0 && s[k - 1] > 0.0 {
            let dl = i1.ln() - i0.ln();
            power.push(dl / (s[k].ln() - s[k - 1].ln()));
            rate.push(dl / (s[k] - s[k - 1]));
        }
    }
    let verdict = if n < 3 || power.len() < 3 {
        Growth::Inconclusive
    } else {
        let last_inc = (values[n - 1] - values[n - 2]).abs();
        let prev_inc = (values[n - 2] - values[n - 3]).abs();
        let scale = 1.0 + values[n - 1].abs();
        let m = power.len();
        let e_last = power[m - 1];
        let e_mid = power[m / 2];
        if last_inc <= tol * scale && prev_inc <= tol * scale {
            Growth::Converging
        } else if e_last >= 0.2 && e_last >= 0.5 * e_mid {
            Growth::Diverging
        } else {
            Growth::Inconclusive
        }
    };
    GrowthFit { power_exponents: power, exponential_rates: rate, verdict }
}

/// Distance parameter used by [`fit_growth`]: grows without bound toward the endpoint.
pub fn distance_parameter(problem: &Problem, side: Side, start: f64, x: f64) -> f64 {
    let end = problem.endpoint(side);
    match end.kind() {
        EndpointKind::Infinite => (x - start).abs(),
        EndpointKind::Finite => {
            let gap = (end.value - x).abs();
            if gap == 0.0 {
                f64::INFINITY
            } else {
                (end.value - start).abs() / gap
            }
        }
    }
}
