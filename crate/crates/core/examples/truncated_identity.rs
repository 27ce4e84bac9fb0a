//! Im M_y(z) = Im z ∫ U_y* R U_y on the truncated interval [x0, y].
use weyl_principal::problem::{builtins, SpectralParameter};
use weyl_principal::weyl::truncated_identity;

fn main() -> weyl_principal::Result<()> {
    let p = builtins::example312(1.0);
    for r in truncated_identity(&p, SpectralParameter::new(1.0, 1.0), &[1.0, 3.0, 5.0])? {
        println!("y = {}: relative residual {:.1e}", r.y, r.relative_residual);
    }
    Ok(())
}
