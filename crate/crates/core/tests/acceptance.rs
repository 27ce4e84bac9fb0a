//! Acceptance criteria: one PASS/FAIL line per criterion. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use weyl_principal::canonical::{principal_test, PrincipalParams};
use weyl_principal::classify::{disconjugacy_check, positive_definite_scan, right_factor_scan, ClassifyParams, Disconjugacy};
use weyl_principal::greens::{greens_kernel, greens_verify, principal_kernel};
use weyl_principal::ladder::LadderParams;
use weyl_principal::linalg::{self, C64};
use weyl_principal::oracles;
use weyl_principal::problem::{builtins, Problem, Side, SpectralParameter};
use weyl_principal::quasi::SolutionTrace;
use weyl_principal::weyl::{
    alpha_mobius, herglotz_check, identification_check, identity_suite, m_alpha, m_limit, truncated_identity, weyl_solution,
    WeylParams,
};
use weyl_principal::Result;

type Outcome = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn free_m(p: &Problem, z: C64) -> Result<C64> {
    Ok(m_limit(p, SpectralParameter(z), Side::Plus, &LadderParams::default())?.value[(0, 0)])
}

fn criterion1() -> Outcome {
    let p = builtins::free_line();
    let mut worst: f64 = 0.0;
    let want_i = C64::from_polar(1.0, 0.75 * PI);
    for (z, want) in [(c(-1.0, 0.0), c(-1.0, 0.0)), (c(0.0, 1.0), want_i)] {
        let got = free_m(&p, z)?;
        let riccati = oracles::free_m_plus(z)?;
        worst = worst.max((got - want).norm()).max((got - riccati).norm());
    }
    Ok((worst <= 1e-6, format!("max |m - exact| = {worst:.2e}")))
}

fn criterion2() -> Outcome {
    let p = builtins::example312(1.0);
    let e = m_limit(&p, SpectralParameter::real(-2.0), Side::Plus, &LadderParams::default())?;
    let oracle = oracles::const_matrix_m(&p.coefficients.q(0.0), c(-2.0, 0.0))?;
    let jet = oracles::example312_principal_jet(1.0, -2.0, 0.0)?;
    let riccati = &jet.du * linalg::inverse(&jet.u, 0.0)?;
    let d1 = linalg::max_abs(&(&e.value - &oracle));
    let d2 = linalg::max_abs(&(&e.value - &riccati));
    Ok((d1 <= 1e-6 && d2 <= 1e-6, format!("vs eigendecomposition {d1:.2e}, vs closed-form Riccati {d2:.2e}")))
}

fn criterion3() -> Outcome {
    let p = builtins::example312(1.0);
    let samples = (0..=400)
        .map(|k| {
            let x = 0.05 * k as f64;
            oracles::example312_principal_jet(1.0, -2.0, x).map(|j| j.state(x))
        })
        .collect::<Result<Vec<_>>>()?;
    let trace = SolutionTrace::from_samples(SpectralParameter::real(-2.0), 1e-12, samples)?;
    let cut = [1.0, 2.0, 5.0, 10.0, 15.0, 20.0];
    let cert = principal_test(&p, &trace, Side::Plus, 0.0, &cut, 1e-8)?;
    let mut rel: f64 = 0.0;
    for (k, &x) in cut.iter().take(3).enumerate() {
        let want = oracles::example312_inverse_integral(1.0, -2.0, x)?;
        for i in 0..2 {
            rel = rel.max(((cert.values[k][(i, i)] - want[(i, i)]) / want[(i, i)]).norm());
        }
    }
    let last = linalg::norm(cert.values.last().expect("rungs"));
    Ok((rel <= 1e-6 && last < 1e-8, format!("relative error at x in {{1,2,5}} {rel:.2e}, norm at x = 20 {last:.2e}")))
}

fn criterion4() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (p, l) in [(builtins::free_line(), -1.0), (builtins::example312(1.0), -2.0), (builtins::example313(), -3.0)] {
        let r = identification_check(&p, l, Side::Plus, &PrincipalParams::default())?;
        worst = worst.max(r.deviation);
        parts.push(format!("{} {:.1e}", p.name, r.deviation));
    }
    Ok((worst <= 1e-6, parts.join(", ")))
}

fn criterion5() -> Outcome {
    let xs = [-1.5, -0.5, 0.7, 2.0];
    let mut worst: f64 = 0.0;
    for p in [builtins::free_line(), builtins::example312(1.0), builtins::example313()] {
        for z in [c(-3.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)] {
            worst = worst.max(identity_suite(&p, SpectralParameter(z), &xs)?.max_residual);
        }
    }
    Ok((worst <= 1e-8, format!("max residual {worst:.2e} over 3 problems x 4 z")))
}

fn criterion6() -> Outcome {
    let zs = [c(0.0, 1.0), c(1.0, 1.0), c(-3.0, 0.5)];
    let (mut ok, mut min_eig, mut sym) = (true, f64::INFINITY, 0f64);
    for p in [builtins::example312(1.0), builtins::example313()] {
        let r = herglotz_check(&p, Side::Plus, &zs, &LadderParams::default(), 1e-8)?;
        ok &= r.ok;
        for e in &r.entries {
            min_eig = min_eig.min(e.min_eig);
            sym = sym.max(e.symmetry);
        }
    }
    Ok((ok && min_eig > 0.0 && sym <= 1e-8, format!("min eig Im M {min_eig:.3e}, max |M(z) - M(conj z)*| {sym:.1e}")))
}

fn criterion7() -> Outcome {
    let p = builtins::example312(1.0);
    let rows = truncated_identity(&p, SpectralParameter::new(1.0, 1.0), &[1.0, 3.0, 5.0])?;
    let worst = rows.iter().map(|r| r.relative_residual).fold(0.0, f64::max);
    Ok((worst <= 1e-7, format!("max relative residual {worst:.2e}")))
}

fn criterion8() -> Outcome {
    let p = builtins::free_line();
    let k = greens_kernel(&p, SpectralParameter::real(-1.0), -4.0, 4.0, &WeylParams::default())?;
    let mut g_err: f64 = 0.0;
    for i in 0..=12 {
        for j in 0..=12 {
            let (x, xp) = (-3.0 + 0.5 * i as f64, -3.0 + 0.5 * j as f64);
            g_err = g_err.max((k.eval(&p, x, xp)? - c(0.5 * (-(x - xp).abs()).exp(), 0.0)).norm());
        }
    }
    let grid: Vec<f64> = (1..40).map(|i| -3.9 + 0.2 * i as f64).collect();
    let mut jump: f64 = 0.0;
    for xp in [-1.0, 0.0, 0.3, 2.0] {
        let v = greens_verify(&p, &k, xp, &grid)?;
        jump = jump.max((v.jump_fd + 1.0).norm()).max((v.jump_exact + 1.0).norm());
    }
    let pk = principal_kernel(&p, -2.0, -3.0, 3.0, &PrincipalParams::default())?;
    let mut min = f64::INFINITY;
    for i in 0..20 {
        for j in 0..20 {
            let (x, xp) = (-2.5 + 5.0 * i as f64 / 19.0, -2.5 + 5.0 * j as f64 / 19.0);
            min = min.min(pk.eval(&p, x, xp)?);
        }
    }
    let ok = g_err <= 1e-6 && jump <= 1e-5 && min > 0.0;
    Ok((ok, format!("max |G - e^-|x-x'|/2| {g_err:.2e}, max |jump + 1| {jump:.2e}, min of principal kernel on 20x20 {min:.3e}")))
}

fn criterion9() -> Outcome {
    let r = disconjugacy_check(&builtins::example313(), -3.0, 0.0, Side::Plus, &ClassifyParams::default())?;
    let certified = r.verdict == Disconjugacy::Certified;
    let xs: Vec<f64> = (0..=40).map(|k| -4.0 + 0.2 * k as f64).collect();
    let family = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (-0.5, 2.0), (2.0, 3.0)];
    let scan = positive_definite_scan(|k, x| oracles::example313_commuting(family[k].0, family[k].1, x), family.len(), &xs);
    let xs: Vec<f64> = (0..=20).map(|k| -5.0 + 0.5 * k as f64).collect();
    let levels = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let f = right_factor_scan(|x| oracles::example312_principal(1.0, -1.0, x), 2, &levels, &xs)?;
    let ok = certified && scan.nowhere_positive_definite && f.every_factor_fails;
    Ok((
        ok,
        format!(
            "disconjugacy at -3 {:?}; commuting family nowhere PD {}; {} right factors all non-preserving {}",
            r.verdict,
            scan.nowhere_positive_definite,
            f.rows.len(),
            f.every_factor_fails
        ),
    ))
}

fn criterion10() -> Outcome {
    let p = builtins::free_line();
    let params = LadderParams::default();
    let mut worst: f64 = 0.0;
    for alpha in [PI / 6.0, PI / 3.0] {
        for z in [SpectralParameter::real(-1.0), SpectralParameter::new(0.0, 1.0)] {
            let a = m_alpha(&p, z, Side::Plus, alpha, &params)?;
            worst = worst.max(a.discrepancy.unwrap_or(f64::INFINITY));
        }
    }
    Ok((worst <= 1e-6, format!("max branch discrepancy {worst:.2e}")))
}

/// The scalar values above recomputed through the matrix code path (m = 1).
fn criterion11() -> Outcome {
    let s = builtins::free_line();
    let m = s.as_matrix();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();

    for z in [c(-1.0, 0.0), c(0.0, 1.0)] {
        worst = worst.max((free_m(&s, z)? - free_m(&m, z)?).norm());
    }
    notes.push(format!("m values {worst:.1e}"));

    let is = identification_check(&s, -1.0, Side::Plus, &PrincipalParams::default())?;
    let im = identification_check(&m, -1.0, Side::Plus, &PrincipalParams::default())?;
    let d = (is.deviation - im.deviation).abs().max(linalg::max_abs(&(&is.weyl_m - &im.weyl_m)));
    worst = worst.max(d);
    notes.push(format!("identification {d:.1e}"));

    let xs = [-1.5, -0.5, 0.7, 2.0];
    let mut d: f64 = 0.0;
    for z in [c(-3.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)] {
        let rs = identity_suite(&s, SpectralParameter(z), &xs)?.max_residual;
        let rm = identity_suite(&m, SpectralParameter(z), &xs)?.max_residual;
        d = d.max((rs - rm).abs());
    }
    worst = worst.max(d);
    notes.push(format!("identity residuals {d:.1e}"));

    // Green's function G = ψ₋(x<)ψ₊(x>)/(M₋ − M₊) assembled from matrix-path Weyl solutions.
    let z = SpectralParameter::real(-1.0);
    let wp = WeylParams::default();
    let wplus = weyl_solution(&m, z, Side::Plus, 4.0, &wp)?;
    let wminus = weyl_solution(&m, z, Side::Minus, 4.0, &wp)?;
    let w = wminus.evaluation.value[(0, 0)] - wplus.evaluation.value[(0, 0)];
    let ks = greens_kernel(&s, z, -4.0, 4.0, &wp)?;
    let mut d: f64 = 0.0;
    for i in 0..=12 {
        for j in 0..=12 {
            let (x, xp) = (-3.0 + 0.5 * i as f64, -3.0 + 0.5 * j as f64);
            let (lo, hi) = if x <= xp { (x, xp) } else { (xp, x) };
            let gm = wminus.trace.state_at(&m, lo)?.u_true()[(0, 0)] * wplus.trace.state_at(&m, hi)?.u_true()[(0, 0)] / w;
            d = d.max((gm - ks.eval(&s, x, xp)?).norm());
        }
    }
    worst = worst.max(d);
    notes.push(format!("Green's function {d:.1e}"));

    // α-values: the matrix-path m transformed by the Möbius relation against both scalar branches.
    let mut d: f64 = 0.0;
    for alpha in [PI / 6.0, PI / 3.0] {
        for z in [c(-1.0, 0.0), c(0.0, 1.0)] {
            let a = m_alpha(&s, SpectralParameter(z), Side::Plus, alpha, &LadderParams::default())?;
            let via_matrix = alpha_mobius(free_m(&m, z)?, alpha);
            let branch_gap = a.discrepancy.unwrap_or(0.0);
            d = d.max(((a.evaluation.value[(0, 0)] - via_matrix).norm() - branch_gap).max(0.0));
        }
    }
    worst = worst.max(d);
    notes.push(format!("alpha values {d:.1e}"));

    Ok((worst <= 1e-8, notes.join(", ")))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("free-scalar m-function by the limit formula", criterion1),
        ("example-312 matrix M against oracles", criterion2),
        ("principality ladder of example-312", criterion3),
        ("Weyl and principal solutions coincide", criterion4),
        ("identity suite", criterion5),
        ("Herglotz suite", criterion6),
        ("truncated imaginary-part identity", criterion7),
        ("Green's functions", criterion8),
        ("example-313 and example-312 positivity properties", criterion9),
        ("alpha-boundary branch consistency", criterion10),
        ("scalar/matrix consistency", criterion11),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {:>2} {}: {name}: {detail} [{secs:.1} s]", k + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
