//! Principality ladder for Q = [[0, 1], [1, 0]] at E = −2. For the closed-form decaying
//! solution the inverse of ∫₀ˣ U⁻¹U⁻* is diag-like with entries 4δ/(e^{2δx} − 1); the
//! numerically constructed principal solution gets the same verdict.
use weyl_principal::canonical::{matrix_principal, principal_test, PrincipalParams};
use weyl_principal::linalg;
use weyl_principal::oracles;
use weyl_principal::problem::{builtins, Side, SpectralParameter};
use weyl_principal::quasi::SolutionTrace;

fn main() -> weyl_principal::Result<()> {
    let p = builtins::example312(1.0);
    let samples = (0..=400)
        .map(|k| {
            let x = 0.05 * k as f64;
            oracles::example312_principal_jet(1.0, -2.0, x).map(|j| j.state(x))
        })
        .collect::<weyl_principal::Result<Vec<_>>>()?;
    let trace = SolutionTrace::from_samples(SpectralParameter::real(-2.0), 1e-12, samples)?;
    let cut = [1.0, 2.0, 5.0, 10.0, 20.0];
    let c = principal_test(&p, &trace, Side::Plus, 0.0, &cut, 1e-8)?;
    for (x, v) in cut.iter().zip(&c.values) {
        let exact = oracles::example312_inverse_integral(1.0, -2.0, *x)?;
        let rel = (0..2).map(|i| ((v[(i, i)] - exact[(i, i)]) / exact[(i, i)]).norm()).fold(0.0, f64::max);
        println!("x = {x:5.1}  ‖ladder‖ = {:.3e}  relative diagonal error {rel:.1e}", linalg::norm(v));
    }
    println!("closed-form solution: {:?}", c.verdict);
    let mp = matrix_principal(&p, -2.0, Side::Plus, &PrincipalParams::default())?;
    println!("constructed solution: {:?}; PU'U⁻¹ at x0:{}", mp.certificate.verdict, mp.m_at_x0());
    Ok(())
}
