//! m₊ of the free problem from the limit formula, against the closed form −√(−z).
use weyl_principal::ladder::LadderParams;
use weyl_principal::linalg::C64;
use weyl_principal::oracles::free_m_plus;
use weyl_principal::problem::{builtins, Side, SpectralParameter};
use weyl_principal::weyl::m_limit;

fn main() -> weyl_principal::Result<()> {
    let p = builtins::free_line();
    for z in [C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(1.0, 1.0)] {
        let e = m_limit(&p, SpectralParameter(z), Side::Plus, &LadderParams::default())?;
        let exact = free_m_plus(z)?;
        println!(
            "z = {z:>8}: m = {:.10}  |m - exact| = {:.2e}  ladder error {:.1e}  converged {}",
            e.scalar_value(),
            (e.scalar_value() - exact).norm(),
            e.error,
            e.converged
        );
    }
    Ok(())
}
