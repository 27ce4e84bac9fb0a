//! Closed-form reference solutions and a brute-force quadrature used to check the numerical
//! paths independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::quasi::QuasiState;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `sinh(w)/w`, continuous at 0.
fn sinhc(w: C64) -> C64 {
    if w.norm() < 1e-6 {
        c(1.0) + w * w / 6.0
    } else {
        w.sinh() / w
    }
}

/// Constant-coefficient Schrödinger oracle `-U'' + QU = zU` (`P = R = I`), with `Q` Hermitian.
///
/// Everything is evaluated in the eigenbasis of `Q`, where the system decouples into scalar
/// equations `u'' = (d_k − z) u`.
#[derive(Debug, Clone)]
pub struct ConstMatrixOracle {
    pub q: CMat,
    pub z: C64,
    pub x0: f64,
    eigenvalues: Vec<f64>,
    basis: CMat,
}

/// Value, first and second derivative of a closed-form solution.
#[derive(Debug, Clone)]
pub struct Jet {
    pub u: CMat,
    pub du: CMat,
    pub ddu: CMat,
}

impl Jet {
    pub fn state(&self, x: f64) -> QuasiState {
        QuasiState::new(x, self.u.clone(), self.du.clone())
    }
}

impl ConstMatrixOracle {
    pub fn new(q: CMat, z: C64, x0: f64) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::DimensionMismatch("Q must be square".into()));
        }
        if linalg::hermitian_defect(&q) > 1e-12 * (1.0 + linalg::norm(&q)) {
            return Err(Error::Precondition("Q must be Hermitian".into()));
        }
        let (eigenvalues, basis) = linalg::hermitian_eigen(&q);
        Ok(ConstMatrixOracle { q, z, x0, eigenvalues, basis })
    }

    pub fn scalar(q: f64, z: C64, x0: f64) -> Self {
        ConstMatrixOracle::new(linalg::scalar(c(q)), z, x0).expect("1x1 real matrix is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn rotate(&self, diag: impl Fn(usize) -> C64) -> CMat {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_fn(self.dim(), |k, _| diag(k)));
        &self.basis * d * self.basis.adjoint()
    }

    /// Per-eigenvalue `w_k = d_k − z`, the squared exponential rate.
    fn gaps(&self) -> Vec<C64> {
        self.eigenvalues.iter().map(|&d| c(d) - self.z).collect()
    }

    /// Principal square roots `s_k = √(d_k − z)` with `Re s_k > 0`.
    pub fn rates(&self) -> Result<Vec<C64>> {
        self.gaps()
            .into_iter()
            .map(|w| {
                if w.im == 0.0 && w.re <= 0.0 {
                    Err(Error::BranchAmbiguity(format!(
                        "Q − zI has the real nonpositive eigenvalue {:.6e}; no decaying solution",
                        w.re
                    )))
                } else {
                    Ok(w.sqrt())
                }
            })
            .collect()
    }

    /// `S = (Q − zI)^{1/2}` with positive definite real part.
    pub fn sqrt(&self) -> Result<CMat> {
        let s = self.rates()?;
        Ok(self.rotate(|k| s[k]))
    }

    /// `M₊(z) = −S`.
    pub fn m_plus(&self) -> Result<CMat> {
        Ok(-self.sqrt()?)
    }

    /// `M₋(z) = S`.
    pub fn m_minus(&self) -> Result<CMat> {
        self.sqrt()
    }

    /// `Θ(x) = cosh(S(x − x0))`, with `Θ(x0) = I`, `Θ'(x0) = 0`.
    pub fn theta(&self, x: f64) -> Jet {
        let t = x - self.x0;
        let w = self.gaps();
        let s: Vec<C64> = w.iter().map(|w| w.sqrt()).collect();
        Jet {
            u: self.rotate(|k| (s[k] * t).cosh()),
            du: self.rotate(|k| w[k] * t * sinhc(s[k] * t)),
            ddu: self.rotate(|k| w[k] * (s[k] * t).cosh()),
        }
    }

    /// `Φ(x) = S⁻¹ sinh(S(x − x0))`, with `Φ(x0) = 0`, `Φ'(x0) = I`.
    pub fn phi(&self, x: f64) -> Jet {
        let t = x - self.x0;
        let w = self.gaps();
        let s: Vec<C64> = w.iter().map(|w| w.sqrt()).collect();
        Jet {
            u: self.rotate(|k| t * sinhc(s[k] * t)),
            du: self.rotate(|k| (s[k] * t).cosh()),
            ddu: self.rotate(|k| w[k] * t * sinhc(s[k] * t)),
        }
    }

    /// Weyl solution normalized at `x0`: `e^{−S(x−x0)}` on the plus side, `e^{S(x−x0)}` on the minus side.
    pub fn weyl(&self, plus: bool, x: f64) -> Result<Jet> {
        let t = x - self.x0;
        let sgn = if plus { -1.0 } else { 1.0 };
        let s = self.rates()?;
        let e = |k: usize| (s[k] * (sgn * t)).exp();
        Ok(Jet {
            u: self.rotate(e),
            du: self.rotate(|k| s[k] * sgn * e(k)),
            ddu: self.rotate(|k| s[k] * s[k] * e(k)),
        })
    }

    /// Relative residual of `-U'' + (Q − z)U` for a jet.
    pub fn residual(&self, jet: &Jet) -> f64 {
        let m = self.dim();
        let res = -&jet.ddu + (&self.q - linalg::identity(m) * self.z) * &jet.u;
        linalg::norm(&res) / (1.0 + linalg::norm(&jet.u) + linalg::norm(&jet.ddu))
    }

    /// Largest residual of Θ, Φ (and the Weyl solutions when a branch exists) at `n` seeded
    /// random points within distance `radius` of `x0`.
    pub fn self_check(&self, seed: u64, n: usize, radius: f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..n {
            let x = self.x0 + rng.gen_range(-radius..radius);
            worst = worst.max(self.residual(&self.theta(x))).max(self.residual(&self.phi(x)));
            for plus in [true, false] {
                if let Ok(j) = self.weyl(plus, x) {
                    worst = worst.max(self.residual(&j));
                }
            }
        }
        worst
    }
}

/// `M₊(z)` for `-U'' + QU = zU` with constant Hermitian `Q`.
pub fn const_matrix_m(q: &CMat, z: C64) -> Result<CMat> {
    ConstMatrixOracle::new(q.clone(), z, 0.0)?.m_plus()
}

/// `m₊(z)` of the free problem `-u'' = zu`: `−√(−z)` with positive real part.
pub fn free_m_plus(z: C64) -> Result<C64> {
    Ok(ConstMatrixOracle::scalar(0.0, z, 0.0).m_plus()?[(0, 0)])
}

/// `δ₋(E) = √|E − q0|`, `δ₊(E) = √|E + q0|`.
pub fn example312_deltas(q0: f64, e: f64) -> Result<(f64, f64)> {
    if !(e <= -q0.abs()) {
        return Err(Error::Precondition(format!("E = {e} must satisfy E ≤ −|q0| = {}", -q0.abs())));
    }
    Ok(((e - q0).abs().sqrt(), (e + q0).abs().sqrt()))
}

/// The principal solution at +∞ of the `example-312` system and its derivative.
pub fn example312_principal_jet(q0: f64, e: f64, x: f64) -> Result<Jet> {
    let (dm, dp) = example312_deltas(q0, e)?;
    let (a, b) = ((-dm * x).exp(), (-dp * x).exp());
    let mk = |f: f64, g: f64| linalg::from_real(2, 2, &[f, -g, f, g]);
    Ok(Jet {
        u: mk(a, b),
        du: mk(-dm * a, -dp * b),
        ddu: mk(dm * dm * a, dp * dp * b),
    })
}

pub fn example312_principal(q0: f64, e: f64, x: f64) -> Result<CMat> {
    Ok(example312_principal_jet(q0, e, x)?.u)
}

/// `[∫_0^x U⁻¹(U⁻¹)*]⁻¹ = diag(4δ₋/(e^{2δ₋x} − 1), 4δ₊/(e^{2δ₊x} − 1))` for the solution above.
pub fn example312_inverse_integral(q0: f64, e: f64, x: f64) -> Result<CMat> {
    let (dm, dp) = example312_deltas(q0, e)?;
    let f = |d: f64| if d == 0.0 { 2.0 / x } else { 4.0 * d / (2.0 * d * x).exp_m1() };
    Ok(linalg::from_real(2, 2, &[f(dm), 0.0, 0.0, f(dp)]))
}

/// `Ũ∞(E, x) = U∞(E, x)·F` for a constant right factor `F`.
pub fn example312_tilde(q0: f64, e: f64, factor: &CMat, x: f64) -> Result<CMat> {
    Ok(example312_principal(q0, e, x)? * factor)
}

/// Free parameters of the closed-form general solution stated for `example-313`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Example313Params {
    pub c: [f64; 2],
    pub c_tilde: [f64; 2],
    pub d: [f64; 4],
    pub d_tilde: [f64; 2],
}

impl Example313Params {
    /// The parameters for which the display commutes with `Q`.
    pub fn commuting(d_tilde1: f64, d_tilde2: f64) -> Self {
        Example313Params { c: [-2.0 * d_tilde1, -2.0 * d_tilde2], c_tilde: [0.0; 2], d: [0.0; 4], d_tilde: [d_tilde1, d_tilde2] }
    }
}

/// Entries of the stated closed-form general solution for `example-313`, with their second
/// derivatives (`order` = 0 or 2).
///
/// These formulas do not satisfy `-U'' + QU = -2U`; see [`example313_display_residual`].
fn display_entries(p: &Example313Params, x: f64, order: i32) -> CMat {
    let r2 = 2f64.sqrt();
    let r7 = 7f64.sqrt();
    let ex = |k: f64| k.powi(order) * (k * x).exp();
    let sign = if order == 2 { -1.0 } else { 1.0 };
    let (cs, sn) = (sign * x.cos(), sign * x.sin());
    let u11 = p.c[0] * ex(r2) + p.c[1] * ex(-r2);
    let u21 = p.c_tilde[0] * ex(2.0) + p.c_tilde[1] * ex(-2.0) - p.c[0] / 2.0 * ex(r2) - p.c[1] / 2.0 * ex(-r2);
    let u22 = p.d[0] * cs + p.d[1] * sn + p.d[2] * ex(r7) + p.d[3] * ex(-r7);
    let u12 = p.d_tilde[0] * ex(r2) + p.d_tilde[1] * ex(-r2) - p.d[0] / 3.0 * cs - p.d[1] / 3.0 * sn
        + p.d[2] / 5.0 * ex(r7)
        + p.d[3] / 5.0 * ex(-r7);
    linalg::from_real(2, 2, &[u11, u12, u21, u22])
}

pub fn example313_display(p: &Example313Params, x: f64) -> CMat {
    display_entries(p, x, 0)
}

/// `-U'' + QU + 2U` for the displayed formulas; nonzero in general.
pub fn example313_display_residual(p: &Example313Params, x: f64) -> CMat {
    let q = linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 2.0]);
    let u = display_entries(p, x, 0);
    let ddu = display_entries(p, x, 2);
    -ddu + &q * &u + &u * c(2.0)
}

/// The commuting family `[[−2A, A], [A, 0]]`, `A = d̃₁e^{√2x} + d̃₂e^{−√2x}`.
pub fn example313_commuting(d_tilde1: f64, d_tilde2: f64, x: f64) -> CMat {
    let a = example313_amplitude(d_tilde1, d_tilde2, x);
    linalg::from_real(2, 2, &[-2.0 * a, a, a, 0.0])
}

pub fn example313_amplitude(d_tilde1: f64, d_tilde2: f64, x: f64) -> f64 {
    let r2 = 2f64.sqrt();
    d_tilde1 * (r2 * x).exp() + d_tilde2 * (-r2 * x).exp()
}

/// Closed-form eigenvalues `−A ± √2|A|` of the commuting family, ascending.
pub fn example313_commuting_eigenvalues(d_tilde1: f64, d_tilde2: f64, x: f64) -> [f64; 2] {
    let a = example313_amplitude(d_tilde1, d_tilde2, x);
    [-a - 2f64.sqrt() * a.abs(), -a + 2f64.sqrt() * a.abs()]
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: FnMut(f64) -> C64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: C64,
    fm: C64,
    fb: C64,
    whole: C64,
    tol: f64,
    depth: u32,
) -> Result<C64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
    let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Quadrature { a, b, reason: "non-finite integrand".into() });
    }
    if delta.norm() <= 15.0 * tol || depth == 0 {
        if depth == 0 && delta.norm() > 15.0 * tol {
            return Err(Error::Quadrature { a, b, reason: "recursion depth exhausted".into() });
        }
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Adaptive Simpson quadrature over `[a, b]`, independent of the Gauss–Kronrod path.
pub fn brute_quadrature<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<C64> {
    if a == b {
        return Ok(c(0.0));
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    simpson(&mut f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `∫_a^∞ f` by summing unit-doubling blocks until a block contributes less than `tol`.
pub fn brute_quadrature_to_infinity<F: FnMut(f64) -> C64>(mut f: F, a: f64, tol: f64) -> Result<C64> {
    let mut total = c(0.0);
    let mut lo = a;
    let mut width = 1.0;
    for _ in 0..200 {
        let piece = brute_quadrature(&mut f, lo, lo + width, 0.1 * tol)?;
        total += piece;
        lo += width;
        if piece.norm() < tol {
            return Ok(total);
        }
        width = (width * 1.5).min(8.0);
    }
    Err(Error::NonConvergence("improper integral tail did not decay".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn free_m_plus_values() {
        assert_abs_diff_eq!(free_m_plus(c(-1.0)).unwrap().re, -1.0, epsilon = 1e-15);
        let m = free_m_plus(C64::new(0.0, 1.0)).unwrap();
        let want = C64::from_polar(1.0, 0.75 * std::f64::consts::PI);
        assert!((m - want).norm() < 1e-14);
    }

    #[test]
    fn branch_ambiguity_on_spectrum() {
        assert!(matches!(free_m_plus(c(1.0)), Err(Error::BranchAmbiguity(_))));
    }

    #[test]
    fn example312_m_in_eigenbasis() {
        let q = linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let m = const_matrix_m(&q, c(-2.0)).unwrap();
        let v = |s: f64| linalg::from_real(2, 1, &[1.0 / 2f64.sqrt(), s / 2f64.sqrt()]);
        let e1 = (v(1.0).adjoint() * &m * v(1.0))[(0, 0)];
        let e2 = (v(-1.0).adjoint() * &m * v(-1.0))[(0, 0)];
        let off = (v(1.0).adjoint() * &m * v(-1.0))[(0, 0)];
        assert_abs_diff_eq!(e1.re, -3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(e2.re, -1.0, epsilon = 1e-14);
        assert!(off.norm() < 1e-14);
    }

    #[test]
    fn riccati_of_weyl_jet_is_m() {
        let o = ConstMatrixOracle::new(linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 2.0]), C64::new(0.5, 1.0), 0.3).unwrap();
        let j = o.weyl(true, 0.3).unwrap();
        let ric = &j.du * linalg::inverse(&j.u, 0.3).unwrap();
        assert!(linalg::norm(&(ric - o.m_plus().unwrap())) < 1e-14);
    }

    #[test]
    fn oracle_residuals_are_tiny() {
        for (q, z) in [
            (linalg::from_real(1, 1, &[0.0]), C64::new(-1.0, 0.0)),
            (linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]), C64::new(-2.0, 0.0)),
            (linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 2.0]), C64::new(1.0, 1.0)),
        ] {
            let o = ConstMatrixOracle::new(q, z, 0.0).unwrap();
            assert!(o.self_check(7, 100, 5.0) < 1e-10);
        }
    }

    #[test]
    fn theta_phi_initial_data() {
        let o = ConstMatrixOracle::new(linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 2.0]), c(-2.0), 1.0).unwrap();
        let (t, p) = (o.theta(1.0), o.phi(1.0));
        let i = linalg::identity(2);
        assert!(linalg::norm(&(t.u - &i)) < 1e-15 && linalg::norm(&t.du) < 1e-15);
        assert!(linalg::norm(&p.u) < 1e-15 && linalg::norm(&(p.du - &i)) < 1e-15);
    }

    #[test]
    fn example312_closed_forms() {
        let u = example312_principal(1.0, -2.0, 0.0).unwrap();
        assert!(linalg::norm(&(u - linalg::from_real(2, 2, &[1.0, -1.0, 1.0, 1.0]))) < 1e-15);
        let (dm, dp) = example312_deltas(1.0, -2.0).unwrap();
        for x in [0.5, 1.0, 3.0] {
            let d = linalg::det(&example312_principal(1.0, -2.0, x).unwrap());
            assert_abs_diff_eq!(d.re, 2.0 * (-(dm + dp) * x).exp(), epsilon = 1e-14);
            let jet = example312_principal_jet(1.0, -2.0, x).unwrap();
            let o = ConstMatrixOracle::new(linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]), c(-2.0), 0.0).unwrap();
            assert!(o.residual(&jet) < 1e-14);
            // (U')*U is diagonal with entries −2δ e^{−2δx}.
            let prod = jet.du.adjoint() * &jet.u;
            assert_abs_diff_eq!(prod[(0, 0)].re, -2.0 * dm * (-2.0 * dm * x).exp(), epsilon = 1e-14);
            assert_abs_diff_eq!(prod[(1, 1)].re, -2.0 * dp * (-2.0 * dp * x).exp(), epsilon = 1e-14);
            assert!(prod[(0, 1)].norm() < 1e-15);
        }
        assert!(example312_deltas(1.0, -0.5).is_err());
    }

    #[test]
    fn example312_inverse_integral_matches_quadrature() {
        let x = 1.0;
        let mut int = CMat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                int[(i, j)] = brute_quadrature(
                    |t| {
                        let u = example312_principal(1.0, -2.0, t).unwrap();
                        let ui = linalg::inverse(&u, t).unwrap();
                        (&ui * ui.adjoint())[(i, j)]
                    },
                    0.0,
                    x,
                    1e-13,
                )
                .unwrap();
            }
        }
        let inv = linalg::inverse(&int, x).unwrap();
        let want = example312_inverse_integral(1.0, -2.0, x).unwrap();
        assert!(linalg::norm(&(inv - want)) < 1e-10);
    }

    #[test]
    fn example313_display_is_not_a_solution() {
        let p = Example313Params { c: [1.0, 0.0], ..Default::default() };
        let u = example313_display(&p, 1.0);
        assert_abs_diff_eq!(u[(0, 0)].re, 2f64.sqrt().exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 0)].re, -(2f64.sqrt().exp()) / 2.0, epsilon = 1e-14);
        // The first column misses the equation by −e^{√2x}/2 in the first row.
        let res = example313_display_residual(&p, 1.0);
        assert_abs_diff_eq!(res[(0, 0)].re, -(2f64.sqrt().exp()) / 2.0, epsilon = 1e-12);
        assert!(res[(1, 0)].norm() < 1e-12);
        // The commuting family misses by A·I.
        let res = example313_display_residual(&Example313Params::commuting(1.0, 0.0), 0.5);
        let a = example313_amplitude(1.0, 0.0, 0.5);
        assert!(linalg::norm(&(res - linalg::identity(2) * c(a))) < 1e-12);
    }

    #[test]
    fn commuting_family_matches_display_and_eigenvalues() {
        for x in [-1.0, 0.0, 0.7] {
            let fam = example313_commuting(1.0, -0.5, x);
            let disp = example313_display(&Example313Params::commuting(1.0, -0.5), x);
            assert!(linalg::norm(&(&fam - disp)) < 1e-13);
            let ev = linalg::hermitian_eigenvalues(&fam);
            let want = example313_commuting_eigenvalues(1.0, -0.5, x);
            assert_abs_diff_eq!(ev[0], want[0], epsilon = 1e-12);
            assert_abs_diff_eq!(ev[1], want[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn brute_quadrature_oracles() {
        let v = brute_quadrature(|x| c((-3.0 * x).exp()), 0.0, 1.0, 1e-13).unwrap();
        assert_abs_diff_eq!(v.re, (1.0 - (-3.0f64).exp()) / 3.0, epsilon = 1e-12);
        let v = brute_quadrature_to_infinity(|x| c(1.0 / x.cosh().powi(2)), 0.0, 1e-13).unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn brute_agrees_with_gauss_kronrod() {
        let f = |x: f64| c(x.sin() * (-x).exp() + x * x);
        let b = brute_quadrature(f, -1.0, 2.0, 1e-13).unwrap();
        let g = crate::quad::integrate(|x| Ok(linalg::scalar(f(x))), -1.0, 2.0, Default::default()).unwrap();
        assert!((b - g.value[(0, 0)]).norm() < 1e-9);
    }
}
