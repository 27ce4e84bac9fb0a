//! Im M₊(z) > 0 and M₊(z̄) = M₊(z)* on the upper half-plane, plus the Wronskian
//! connection M₋ − M₊ between the two Weyl solutions.
use weyl_principal::ladder::LadderParams;
use weyl_principal::linalg::C64;
use weyl_principal::problem::{builtins, Side, SpectralParameter};
use weyl_principal::weyl::{herglotz_check, wronskian_connection, WeylParams};

fn main() -> weyl_principal::Result<()> {
    let zs = [C64::new(0.0, 1.0), C64::new(1.0, 1.0), C64::new(-3.0, 0.5)];
    for p in [builtins::example312(1.0), builtins::example313()] {
        let r = herglotz_check(&p, Side::Plus, &zs, &LadderParams::default(), 1e-8)?;
        println!("{}: Herglotz ok = {}", p.name, r.ok);
        for e in &r.entries {
            println!("  {}", serde_json::to_string(e).expect("serializable"));
        }
        let c = wronskian_connection(&p, SpectralParameter::new(1.0, 1.0), &WeylParams::default())?;
        println!("  connection residual at z = 1+i: {:.1e}", c.residual);
    }
    Ok(())
}
