//! Residuals of the normalized-pair identities, W(θ, φ) = 1 and the Wronskian drift identity.
use weyl_principal::linalg::C64;
use weyl_principal::problem::{builtins, SpectralParameter};
use weyl_principal::weyl::identity_suite;

fn main() -> weyl_principal::Result<()> {
    let xs = [-1.5, -0.5, 0.7, 2.0];
    for p in [builtins::free_line(), builtins::example312(1.0), builtins::example313()] {
        for z in [C64::new(-3.0, 0.0), C64::new(0.0, 1.0), C64::new(1.0, 1.0)] {
            let r = identity_suite(&p, SpectralParameter(z), &xs)?;
            let worst = r.entries.iter().max_by(|a, b| a.residual.total_cmp(&b.residual)).expect("entries");
            println!("{:>12} z = {z:>6}: max residual {:.1e} ({})", p.name, r.max_residual, worst.name);
        }
    }
    Ok(())
}
