//! Green's function of −u'' at z = −1: e^{−|x−x'|}/2, its flux jump and the equation residual.
use weyl_principal::greens::{greens_kernel, greens_verify};
use weyl_principal::problem::{builtins, SpectralParameter};
use weyl_principal::weyl::WeylParams;

fn main() -> weyl_principal::Result<()> {
    let p = builtins::free_line();
    let k = greens_kernel(&p, SpectralParameter::real(-1.0), -4.0, 4.0, &WeylParams::default())?;
    let mut worst: f64 = 0.0;
    for i in 0..=16 {
        for j in 0..=16 {
            let (x, xp) = (-3.0 + 0.375 * i as f64, -3.0 + 0.375 * j as f64);
            worst = worst.max((k.eval(&p, x, xp)?.re - 0.5 * (-(x - xp).abs()).exp()).abs());
        }
    }
    println!("max |G - e^(-|x-x'|)/2| on a 17×17 grid: {worst:.2e}");
    let grid: Vec<f64> = (1..40).map(|i| -3.9 + 0.2 * i as f64).collect();
    let v = greens_verify(&p, &k, 0.3, &grid)?;
    println!("flux jump: finite differences {:.8}, exact {:.8}; max residual {:.1e}", v.jump_fd, v.jump_exact, v.max_residual);
    Ok(())
}
