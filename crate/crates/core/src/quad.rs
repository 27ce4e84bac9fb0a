//! Adaptive Gauss–Kronrod (7/15) quadrature for matrix-valued integrands.
//!
//! Integrands return `Result` because evaluating them usually means
//! advancing an ODE solution to the node.

use crate::error::{Error, Result};
use crate::linalg::{norm, CMat};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.000_000_000_000_000_0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: CMat,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: CMat,
    error: f64,
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Piece>
where
    F: FnMut(f64) -> Result<CMat>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = &fc * nalgebra::Complex::new(WGK[7], 0.0);
    let mut gauss = &fc * nalgebra::Complex::new(WG[3], 0.0);
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        let s = f1 + f2;
        kron += &s * nalgebra::Complex::new(WGK[j], 0.0);
        if j % 2 == 1 {
            gauss += &s * nalgebra::Complex::new(WG[j / 2], 0.0);
        }
    }
    let scale = nalgebra::Complex::new(h, 0.0);
    let value = kron * scale;
    let gauss = gauss * scale;
    let error = norm(&(&value - &gauss));
    if !value.iter().all(|v| v.is_finite()) {
        return Err(Error::Quadrature { a, b, reason: "non-finite integrand".into() });
    }
    Ok(Piece { a, b, value, error })
}

/// Integrate `f` over `[a, b]` (either orientation).
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<CMat>,
{
    if a == b {
        let probe = f(a)?;
        return Ok(QuadResult {
            value: CMat::zeros(probe.nrows(), probe.ncols()),
            error: 0.0,
            intervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pieces = vec![gk15(&mut f, lo, hi)?];
    loop {
        let total: CMat = pieces.iter().skip(1).fold(pieces[0].value.clone(), |acc, p| acc + &p.value);
        let err: f64 = pieces.iter().map(|p| p.error).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * norm(&total));
        if err <= tol {
            return Ok(QuadResult {
                value: total * nalgebra::Complex::new(sign, 0.0),
                error: err,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                a: lo,
                b: hi,
                reason: format!("error estimate {err:.3e} above {tol:.3e} after {} intervals", pieces.len()),
            });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature { a: lo, b: hi, reason: "interval too small to bisect".into() });
        }
        pieces.push(gk15(&mut f, p.a, mid)?);
        pieces.push(gk15(&mut f, mid, p.b)?);
    }
}

/// Integrate over consecutive segments `[nodes[k], nodes[k+1]]`, returning one result per segment.
pub fn integrate_segments<F>(mut f: F, nodes: &[f64], opts: QuadOptions) -> Result<Vec<QuadResult>>
where
    F: FnMut(f64) -> Result<CMat>,
{
    nodes.windows(2).map(|w| integrate(&mut f, w[0], w[1], opts)).collect()
}

/// Running integrals `∫_start^{t_k} f` at monotone `targets` (all on one side of `start`).
///
/// Stops at the first failing segment; `values` then holds the integrals up to the last
/// target reached and `failure` the error.
pub struct Cumulative {
    pub values: Vec<CMat>,
    pub failure: Option<Error>,
}

pub fn cumulative<F>(mut f: F, start: f64, targets: &[f64], opts: QuadOptions) -> Result<Cumulative>
where
    F: FnMut(f64) -> Result<CMat>,
{
    let mut values = Vec::with_capacity(targets.len());
    let mut acc: Option<CMat> = None;
    let mut from = start;
    for &t in targets {
        // Accuracy is needed relative to the running total, not to each segment.
        let seg_opts = match &acc {
            Some(a) => QuadOptions { abs_tol: opts.abs_tol.max(opts.rel_tol * norm(a)), ..opts },
            None => opts,
        };
        match integrate(&mut f, from, t, seg_opts) {
            Ok(r) => {
                let next = match acc.take() {
                    Some(a) => a + r.value,
                    None => r.value,
                };
                values.push(next.clone());
                acc = Some(next);
                from = t;
            }
            Err(e) => {
                if values.is_empty() && !matches!(e, Error::Vanishing { .. } | Error::Singular { .. } | Error::Conditioning { .. }) {
                    return Err(e);
                }
                return Ok(Cumulative { values, failure: Some(e) });
            }
        }
    }
    Ok(Cumulative { values, failure: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{scalar, C64};

    #[test]
    fn exponential_integral() {
        let r = integrate(|x| Ok(scalar(C64::new((-3.0 * x).exp(), 0.0))), 0.0, 1.0, QuadOptions::default()).unwrap();
        let exact = (1.0 - (-3.0f64).exp()) / 3.0;
        assert!((r.value[(0, 0)].re - exact).abs() < 1e-14);
    }

    #[test]
    fn reversed_orientation_flips_sign() {
        let f = |x: f64| Ok(scalar(C64::new(x * x, x)));
        let fw = integrate(f, 0.0, 2.0, QuadOptions::default()).unwrap();
        let bw = integrate(f, 2.0, 0.0, QuadOptions::default()).unwrap();
        assert!((fw.value[(0, 0)] + bw.value[(0, 0)]).norm() < 1e-14);
        assert!((fw.value[(0, 0)] - C64::new(8.0 / 3.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn failing_integrand_propagates() {
        let r = integrate(|_| Err(Error::Vanishing { x: 0.5 }), 0.0, 1.0, QuadOptions::default());
        assert!(matches!(r, Err(Error::Vanishing { .. })));
    }

    #[test]
    fn peaked_integrand_needs_subdivision() {
        let r = integrate(
            |x| Ok(scalar(C64::new(1.0 / (1e-4 + (x - 0.3).powi(2)), 0.0))),
            0.0,
            1.0,
            QuadOptions::default(),
        )
        .unwrap();
        let exact = 100.0 * ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan());
        assert!((r.value[(0, 0)].re - exact).abs() < 1e-9 * exact);
        assert!(r.intervals > 1);
    }

    #[test]
    fn cumulative_running_sums() {
        let c = cumulative(|x| Ok(scalar(C64::new(2.0 * x, 0.0))), 1.0, &[2.0, 3.0, 5.0], QuadOptions::default()).unwrap();
        let got: Vec<f64> = c.values.iter().map(|v| v[(0, 0)].re).collect();
        assert!((got[0] - 3.0).abs() < 1e-13 && (got[1] - 8.0).abs() < 1e-13 && (got[2] - 24.0).abs() < 1e-12);
        let c = cumulative(
            |x| if x > 2.5 { Err(Error::Vanishing { x }) } else { Ok(scalar(C64::new(1.0, 0.0))) },
            0.0,
            &[1.0, 2.0, 3.0],
            QuadOptions::default(),
        )
        .unwrap();
        assert_eq!(c.values.len(), 2);
        assert!(c.failure.is_some());
    }
}
