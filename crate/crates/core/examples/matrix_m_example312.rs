//! M₊(−2) for Q = [[0, 1], [1, 0]]: limit formula, Riccati quotient of the decaying
//! solution, and the eigendecomposition oracle.
use weyl_principal::ladder::LadderParams;
use weyl_principal::linalg::{self, C64};
use weyl_principal::oracles;
use weyl_principal::problem::{builtins, Side, SpectralParameter};
use weyl_principal::weyl::{m_limit, m_riccati, weyl_solution, WeylParams};

fn main() -> weyl_principal::Result<()> {
    let p = builtins::example312(1.0);
    let z = SpectralParameter::real(-2.0);
    let limit = m_limit(&p, z, Side::Plus, &LadderParams::default())?;
    let oracle = oracles::const_matrix_m(&p.coefficients.q(0.0), C64::new(-2.0, 0.0))?;
    let w = weyl_solution(&p, z, Side::Plus, 2.0, &WeylParams::default())?;
    let riccati = m_riccati(&p, &w.trace, Side::Plus)?;
    println!("limit formula:{}", limit.value);
    println!("oracle:{}", oracle);
    println!("max |limit - oracle|   = {:.2e}", linalg::max_abs(&(&limit.value - &oracle)));
    println!("max |riccati - oracle| = {:.2e}", linalg::max_abs(&(&riccati.value - &oracle)));
    Ok(())
}
