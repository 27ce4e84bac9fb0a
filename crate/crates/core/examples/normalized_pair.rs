//! Integrate the normalized pair θ, φ of the free problem and compare with cosh, sinh.
use weyl_principal::canonical::normalized_pair;
use weyl_principal::problem::{builtins, SpectralParameter};

fn main() -> weyl_principal::Result<()> {
    let p = builtins::free_line();
    let xs: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
    let pair = normalized_pair(&p, SpectralParameter::real(-1.0), 0.0, &xs, 1e-12)?;
    println!("{:>5} {:>22} {:>22}", "x", "θ(x) - cosh x", "φ(x) - sinh x");
    for &x in &xs {
        let th = pair.theta.state_at(&p, x)?.u_true()[(0, 0)].re;
        let ph = pair.phi.state_at(&p, x)?.u_true()[(0, 0)].re;
        println!("{x:5.1} {:22.3e} {:22.3e}", th - x.cosh(), ph - x.sinh());
    }
    pair.theta.write_csv(std::io::stdout().lock())?;
    Ok(())
}
