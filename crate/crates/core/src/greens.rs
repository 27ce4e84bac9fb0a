//! Green's function of the self-adjoint realization for scalar problems that are limit point
//! at both ends and bounded below.

use std::io::Write;

use serde::Serialize;

use crate::canonical::{self, matrix_principal, PrincipalParams};
use crate::error::{Error, Result};
use crate::ladder::{self, TruncationLadder};
use crate::linalg::{self, C64};
use crate::problem::{Problem, Side, SpectralParameter};
use crate::quasi::{self, fmt_f64, QuasiState, SolutionTrace};
use crate::weyl::{weyl_solution, WeylParams};

fn check_problem(problem: &Problem, z: SpectralParameter) -> Result<()> {
    if !problem.is_scalar() {
        return Err(Error::Precondition("Green's functions are implemented for scalar problems only".into()));
    }
    for side in [Side::Minus, Side::Plus] {
        if problem.declared_limit_point(side) != Some(true) {
            return Err(Error::Precondition(format!("endpoint {side} is not certified limit point")));
        }
    }
    if z.is_real() {
        match problem.thresholds.lower_bound {
            None => return Err(Error::Precondition("real λ needs a declared lower bound λ₀".into())),
            Some(l0) if !(z.0.re < l0) => {
                return Err(Error::Precondition(format!("λ = {} is not below the lower bound {l0}", z.0.re)))
            }
            _ => {}
        }
    }
    Ok(())
}

/// A trace normalized at `x0` on one side (`own`) extended through `x0` to `other_end` by
/// integrating from `init`. Extending in the direction where the solution grows is stable.
fn extend_through_x0(problem: &Problem, own: &SolutionTrace, init: &QuasiState, other_end: f64) -> Result<SolutionTrace> {
    let mut samples = own.samples.clone();
    if other_end != init.x {
        let ext = quasi::integrate(problem, own.z, init, &[other_end], own.tol)?;
        samples.extend(ext.samples);
    }
    SolutionTrace::from_samples(own.z, own.tol, samples)
}

fn scalar_u(problem: &Problem, t: &SolutionTrace, x: f64) -> Result<(C64, C64)> {
    let s = t.state_at(problem, x)?.unscaled();
    Ok((s.u[(0, 0)], s.v[(0, 0)]))
}

/// `G(z, x, x′) = ψ_−(z, min)ψ_+(z, max) / W(ψ_+, ψ_−)` on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct GreensKernel {
    pub z: SpectralParameter,
    pub x0: f64,
    pub lo: f64,
    pub hi: f64,
    pub psi_minus: SolutionTrace,
    pub psi_plus: SolutionTrace,
    pub m_minus: C64,
    pub m_plus: C64,
    /// `W(ψ_+, ψ_−) = m_− − m_+` for `ψ_±(x0) = 1`.
    pub wronskian: C64,
}

impl GreensKernel {
    pub fn eval(&self, problem: &Problem, x: f64, xp: f64) -> Result<C64> {
        let (l, r) = if x <= xp { (x, xp) } else { (xp, x) };
        let (um, _) = scalar_u(problem, &self.psi_minus, l)?;
        let (up, _) = scalar_u(problem, &self.psi_plus, r)?;
        Ok(um * up / self.wronskian)
    }

    /// `(G, p∂ₓG)` at `x` for fixed `x′`, taking the branch `x > x′` when `right` is set.
    pub fn eval_with_flux(&self, problem: &Problem, x: f64, xp: f64, right: bool) -> Result<(C64, C64)> {
        if right {
            let (c, _) = scalar_u(problem, &self.psi_minus, xp)?;
            let (u, v) = scalar_u(problem, &self.psi_plus, x)?;
            Ok((c * u / self.wronskian, c * v / self.wronskian))
        } else {
            let (c, _) = scalar_u(problem, &self.psi_plus, xp)?;
            let (u, v) = scalar_u(problem, &self.psi_minus, x)?;
            Ok((c * u / self.wronskian, c * v / self.wronskian))
        }
    }
}

pub fn greens_kernel(problem: &Problem, z: SpectralParameter, lo: f64, hi: f64, params: &WeylParams) -> Result<GreensKernel> {
    check_problem(problem, z)?;
    let x0 = problem.x0;
    if !(lo <= hi && problem.contains(lo) && problem.contains(hi)) {
        return Err(Error::Config(format!("kernel range [{lo}, {hi}] is not inside the interval")));
    }
    let one = linalg::scalar(C64::new(1.0, 0.0));
    let span_plus = (hi - x0).max(params.segment);
    let span_minus = (x0 - lo).max(params.segment);
    let plus = weyl_solution(problem, z, Side::Plus, span_plus, params)?;
    let minus = weyl_solution(problem, z, Side::Minus, span_minus, params)?;
    let (m_plus, m_minus) = (plus.evaluation.value[(0, 0)], minus.evaluation.value[(0, 0)]);
    let psi_plus = extend_through_x0(problem, &plus.trace, &QuasiState::new(x0, one.clone(), linalg::scalar(m_plus)), lo.min(x0))?;
    let psi_minus = extend_through_x0(problem, &minus.trace, &QuasiState::new(x0, one, linalg::scalar(m_minus)), hi.max(x0))?;
    let wronskian = m_minus - m_plus;
    if wronskian.norm() < 1e-12 {
        return Err(Error::Singular { x: x0 });
    }
    Ok(GreensKernel { z, x0, lo, hi, psi_minus, psi_plus, m_minus, m_plus, wronskian })
}

pub fn greens_eval(problem: &Problem, z: SpectralParameter, x: f64, xp: f64, params: &WeylParams) -> Result<C64> {
    greens_kernel(problem, z, x.min(xp).min(problem.x0), x.max(xp).max(problem.x0), params)?.eval(problem, x, xp)
}

/// Kernel built from principal solutions at real `λ < λ₀`:
/// `G = (∫_{x0}^b p⁻¹u_a⁻²) u_b(x0)⁻¹u_a(x0) · u_a(min)u_b(max)`.
#[derive(Debug, Clone)]
pub struct PrincipalKernel {
    pub lambda: f64,
    pub x0: f64,
    pub ua: SolutionTrace,
    pub ub: SolutionTrace,
    pub prefactor: f64,
    pub prefactor_ladder: TruncationLadder,
}

impl PrincipalKernel {
    pub fn eval(&self, problem: &Problem, x: f64, xp: f64) -> Result<f64> {
        let (l, r) = if x <= xp { (x, xp) } else { (xp, x) };
        let (ua0, _) = scalar_u(problem, &self.ua, self.x0)?;
        let (ub0, _) = scalar_u(problem, &self.ub, self.x0)?;
        let (ua, _) = scalar_u(problem, &self.ua, l)?;
        let (ub, _) = scalar_u(problem, &self.ub, r)?;
        Ok((C64::new(self.prefactor, 0.0) * ua0 / ub0 * ua * ub).re)
    }
}

pub fn principal_kernel(problem: &Problem, lambda: f64, lo: f64, hi: f64, params: &PrincipalParams) -> Result<PrincipalKernel> {
    check_problem(problem, SpectralParameter::real(lambda))?;
    let x0 = problem.x0;
    let span_plus = (hi - x0).max(params.segment);
    let span_minus = (x0 - lo).max(params.segment);
    let ub = matrix_principal(problem, lambda, Side::Plus, &PrincipalParams { span: span_plus, ..*params })?;
    let ua = matrix_principal(problem, lambda, Side::Minus, &PrincipalParams { span: span_minus, ..*params })?;
    let one = linalg::scalar(C64::new(1.0, 0.0));
    let (ma, mb) = (ua.m_at_x0(), ub.m_at_x0());
    // u_a continued toward b (where it grows) along the ladder for the prefactor.
    let cut = ladder::cutoffs(problem, Side::Plus, &params.ladder)?;
    let mut targets = cut.clone();
    targets.push(hi.max(x0));
    let ua_right = quasi::integrate(problem, SpectralParameter::real(lambda), &QuasiState::new(x0, one.clone(), ma), &targets, params.ode_tol)?;
    let cum = canonical::gram_integrals(problem, &ua_right, &ua_right, x0, &cut)?;
    let n = cum.values.len();
    let prefactor_ladder = TruncationLadder::new(
        Side::Plus,
        cut[..n].to_vec(),
        cum.values,
        cut[n..].to_vec(),
        params.ladder.abs_tol,
        params.ladder.rel_tol,
    )?;
    if !prefactor_ladder.converged {
        return Err(Error::NonConvergence(format!(
            "prefactor integral did not converge (error {:.3e})",
            prefactor_ladder.error
        )));
    }
    let prefactor = prefactor_ladder.extrapolated[(0, 0)].re;
    let ua_trace = extend_through_x0(problem, &ua.trace, &QuasiState::new(x0, one.clone(), ua.m_at_x0()), hi.max(x0))?;
    let ub_trace = extend_through_x0(problem, &ub.trace, &QuasiState::new(x0, one, mb), lo.min(x0))?;
    Ok(PrincipalKernel { lambda, x0, ua: ua_trace, ub: ub_trace, prefactor, prefactor_ladder })
}

#[derive(Debug, Clone, Serialize)]
pub struct GreensVerification {
    pub z: SpectralParameter,
    pub xprime: f64,
    pub step: f64,
    /// Jump of `p∂ₓG` across `x = x′` from one-sided finite differences of `G`.
    pub jump_fd: C64,
    /// The same jump from the quasi-derivatives of the two branches.
    pub jump_exact: C64,
    /// `max |−(pG′)′ + (q − z r)G|` over grid points away from `x′`.
    pub max_residual: f64,
    pub residual_points: usize,
    pub symmetry: f64,
}

/// Check that `G(z, ·, x′)` is annihilated by `ℓ − z` away from `x′` and that its flux jumps
/// by −1 at `x′`.
pub fn greens_verify(problem: &Problem, kernel: &GreensKernel, xprime: f64, grid: &[f64]) -> Result<GreensVerification> {
    let h = 1e-2;
    let guard = 4.0 * h;
    let coeffs = &problem.coefficients;
    let z = kernel.z.0;
    let mut max_residual = 0.0f64;
    let mut residual_points = 0;
    for &x in grid {
        if (x - xprime).abs() <= guard || x - 2.0 * h < kernel.lo || x + 2.0 * h > kernel.hi {
            continue;
        }
        let right = x > xprime;
        let flux = |t: f64| kernel.eval_with_flux(problem, t, xprime, right).map(|(_, f)| f);
        let d = (-flux(x + 2.0 * h)? + flux(x + h)? * 8.0 - flux(x - h)? * 8.0 + flux(x - 2.0 * h)?) / (12.0 * h);
        let (g, _) = kernel.eval_with_flux(problem, x, xprime, right)?;
        let q = coeffs.q(x)[(0, 0)];
        let r = coeffs.r(x)[(0, 0)];
        max_residual = max_residual.max((-d + (q - z * r) * g).norm());
        residual_points += 1;
    }
    if xprime - 4.0 * h < kernel.lo || xprime + 4.0 * h > kernel.hi {
        return Err(Error::Config("grid too coarse near x′: one-sided stencils leave the kernel range".into()));
    }
    let g = |x: f64| kernel.eval(problem, x, xprime);
    let (g0, g1, g2, g3, g4) = (g(xprime)?, g(xprime + h)?, g(xprime + 2.0 * h)?, g(xprime + 3.0 * h)?, g(xprime + 4.0 * h)?);
    let right = (g0 * -25.0 + g1 * 48.0 - g2 * 36.0 + g3 * 16.0 - g4 * 3.0) / (12.0 * h);
    let (l1, l2, l3, l4) = (g(xprime - h)?, g(xprime - 2.0 * h)?, g(xprime - 3.0 * h)?, g(xprime - 4.0 * h)?);
    let left = (g0 * 25.0 - l1 * 48.0 + l2 * 36.0 - l3 * 16.0 + l4 * 3.0) / (12.0 * h);
    let p = coeffs.p(xprime)[(0, 0)];
    let jump_fd = p * (right - left);
    let (_, fr) = kernel.eval_with_flux(problem, xprime, xprime, true)?;
    let (_, fl) = kernel.eval_with_flux(problem, xprime, xprime, false)?;
    let jump_exact = fr - fl;
    let mut symmetry = 0.0f64;
    for &x in grid {
        symmetry = symmetry.max((kernel.eval(problem, x, xprime)? - kernel.eval(problem, xprime, x)?).norm());
    }
    Ok(GreensVerification { z: kernel.z, xprime, step: h, jump_fd, jump_exact, max_residual, residual_points, symmetry })
}

/// CSV rows `x, x′, re_g, im_g` over the product grid.
pub fn write_kernel_csv<W: Write>(mut w: W, problem: &Problem, kernel: &GreensKernel, xs: &[f64], xps: &[f64]) -> Result<()> {
    writeln!(w, "x,xprime,re_g,im_g")?;
    for &x in xs {
        for &xp in xps {
            let g = kernel.eval(problem, x, xp)?;
            writeln!(w, "{},{},{},{}", fmt_f64(x), fmt_f64(xp), fmt_f64(g.re), fmt_f64(g.im))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtins, Endpoint};

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn free_kernel_closed_form() {
        let p = builtins::free_line();
        let k = greens_kernel(&p, SpectralParameter::real(-1.0), -4.0, 4.0, &WeylParams::default()).unwrap();
        assert!((k.wronskian - C64::new(2.0, 0.0)).norm() < 1e-8);
        for &x in &grid(-4.0, 4.0, 9) {
            for &xp in &grid(-3.5, 3.5, 8) {
                let g = k.eval(&p, x, xp).unwrap();
                assert!((g.re - (-(x - xp).abs()).exp() / 2.0).abs() < 1e-6);
                assert!(g.re > 0.0);
                assert_eq!(g, k.eval(&p, xp, x).unwrap());
            }
        }
    }

    #[test]
    fn free_kernel_complex() {
        let p = builtins::free_line();
        let z = C64::new(0.5, 1.0);
        let s = (-z).sqrt();
        let k = greens_kernel(&p, SpectralParameter(z), -2.0, 2.0, &WeylParams::default()).unwrap();
        let g = k.eval(&p, -1.0, 0.7).unwrap();
        assert!((g - (-s * 1.7).exp() / (s * 2.0)).norm() < 1e-6);
    }

    #[test]
    fn verification_on_free_and_variable_problems() {
        let p = builtins::free_line();
        let k = greens_kernel(&p, SpectralParameter::real(-1.0), -3.0, 3.0, &WeylParams::default()).unwrap();
        let v = greens_verify(&p, &k, 0.0, &grid(-2.5, 2.5, 21)).unwrap();
        assert!((v.jump_fd + 1.0).norm() < 1e-6, "{}", v.jump_fd);
        assert!((v.jump_exact + 1.0).norm() < 1e-10);
        assert!(v.max_residual < 1e-6);
        // q = 2 sech²: still ≥ 0, so λ₀ = 0 is a lower bound.
        let mut p = builtins::scalar(
            "sech",
            Endpoint::minus_infinity(),
            Endpoint::plus_infinity(),
            0.0,
            |_| 1.0,
            |x| 2.0 / x.cosh().powi(2),
            |_| 1.0,
        );
        p.thresholds = builtins::free_line().thresholds;
        let k = greens_kernel(&p, SpectralParameter::real(-1.5), -3.0, 3.0, &WeylParams::default()).unwrap();
        let v = greens_verify(&p, &k, 0.3, &grid(-2.5, 2.5, 21)).unwrap();
        assert!((v.jump_fd + 1.0).norm() < 1e-5);
        assert!(v.max_residual < 1e-6, "{}", v.max_residual);
    }

    #[test]
    fn principal_form_matches_psi_form() {
        let p = builtins::free_line();
        let pk = principal_kernel(&p, -1.0, -3.0, 3.0, &PrincipalParams::default()).unwrap();
        assert!((pk.prefactor - 0.5).abs() < 1e-8);
        let k = greens_kernel(&p, SpectralParameter::real(-1.0), -3.0, 3.0, &WeylParams::default()).unwrap();
        for &x in &grid(-3.0, 3.0, 7) {
            for &xp in &grid(-3.0, 3.0, 5) {
                let a = pk.eval(&p, x, xp).unwrap();
                let b = k.eval(&p, x, xp).unwrap().re;
                assert!((a - b).abs() <= 1e-7 * b.abs(), "{x} {xp}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = builtins::example312(1.0);
        assert!(greens_kernel(&p, SpectralParameter::real(-2.0), -1.0, 1.0, &WeylParams::default()).is_err());
        let p = builtins::free_line();
        assert!(greens_kernel(&p, SpectralParameter::real(0.5), -1.0, 1.0, &WeylParams::default()).is_err());
        let p = builtins::free_half_line(1.0);
        assert!(greens_kernel(&p, SpectralParameter::real(-1.0), 0.5, 2.0, &WeylParams::default()).is_err());
    }

    #[test]
    fn kernel_csv() {
        let p = builtins::free_line();
        let k = greens_kernel(&p, SpectralParameter::real(-1.0), -1.0, 1.0, &WeylParams::default()).unwrap();
        let mut buf = Vec::new();
        write_kernel_csv(&mut buf, &p, &k, &[-1.0, 0.0, 1.0], &[0.0, 0.5]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }
}
