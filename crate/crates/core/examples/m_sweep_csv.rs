//! Sweep M₊ of Q = [[0, 1], [1, 0]] over a line in the upper half-plane and print CSV.
use weyl_principal::ladder::LadderParams;
use weyl_principal::linalg::C64;
use weyl_principal::problem::{builtins, Side};
use weyl_principal::weyl::{m_sweep, write_sweep_csv};

fn main() -> weyl_principal::Result<()> {
    let p = builtins::example312(1.0);
    let zs: Vec<C64> = (0..9).map(|k| C64::new(-4.0 + k as f64, 0.5)).collect();
    let rows = m_sweep(&p, Side::Plus, &zs, &LadderParams::default());
    write_sweep_csv(std::io::stdout().lock(), p.dim(), &zs, &rows)
}
