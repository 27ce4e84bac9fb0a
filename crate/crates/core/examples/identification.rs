//! Weyl solutions at real λ below the threshold coincide with principal solutions.
use weyl_principal::canonical::PrincipalParams;
use weyl_principal::problem::{builtins, Side};
use weyl_principal::weyl::identification_check;

fn main() -> weyl_principal::Result<()> {
    for (p, l) in [(builtins::free_line(), -1.0), (builtins::example312(1.0), -2.0), (builtins::example313(), -3.0)] {
        let r = identification_check(&p, l, Side::Plus, &PrincipalParams::default())?;
        println!("{:>12} λ = {l:5.1}: sup deviation over [x0, x0+{}] = {:.2e}", p.name, r.span, r.deviation);
    }
    Ok(())
}
