//! The kernel built from principal solutions at λ = −2 (free problem): it is positive and
//! equals e^{−√2|x−x'|}/(2√2).
use weyl_principal::canonical::PrincipalParams;
use weyl_principal::greens::principal_kernel;
use weyl_principal::problem::builtins;

fn main() -> weyl_principal::Result<()> {
    let p = builtins::free_line();
    let k = principal_kernel(&p, -2.0, -3.0, 3.0, &PrincipalParams::default())?;
    let s = 2f64.sqrt();
    let (mut min, mut worst) = (f64::INFINITY, 0f64);
    for i in 0..20 {
        for j in 0..20 {
            let (x, xp) = (-2.5 + 5.0 * i as f64 / 19.0, -2.5 + 5.0 * j as f64 / 19.0);
            let g = k.eval(&p, x, xp)?;
            min = min.min(g);
            worst = worst.max((g - (-s * (x - xp).abs()).exp() / (2.0 * s)).abs());
        }
    }
    println!("prefactor {:.10}, min over 20×20 grid {min:.3e}, max error {worst:.1e}", k.prefactor);
    Ok(())
}
