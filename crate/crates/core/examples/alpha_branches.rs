//! m_α for the boundary condition cos α u + sin α pu' = 0 from both integral branches,
//! compared with the Möbius transform of m.
use std::f64::consts::PI;
use weyl_principal::ladder::LadderParams;
use weyl_principal::problem::{builtins, Side, SpectralParameter};
use weyl_principal::weyl::{alpha_mobius, m_alpha, m_limit};

fn main() -> weyl_principal::Result<()> {
    let p = builtins::free_line();
    let params = LadderParams::default();
    for z in [SpectralParameter::real(-1.0), SpectralParameter::new(0.0, 1.0)] {
        let m = m_limit(&p, z, Side::Plus, &params)?.scalar_value();
        for alpha in [PI / 6.0, PI / 3.0] {
            let a = m_alpha(&p, z, Side::Plus, alpha, &params)?;
            println!(
                "z = {:>6} α = {alpha:.4}: m_α = {:.10}  branch gap {:.1e}  Möbius gap {:.1e}  excised zeros {:?}",
                z.0,
                a.evaluation.scalar_value(),
                a.discrepancy.unwrap_or(0.0),
                (a.evaluation.scalar_value() - alpha_mobius(m, alpha)).norm(),
                a.excised_zeros
            );
        }
    }
    Ok(())
}
