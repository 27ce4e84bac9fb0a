//! Positivity classes: the commuting family of Q = [[0, 1], [1, 2]] is nowhere positive
//! definite, and no right factor makes the principal solution of Q = [[0, 1], [1, 0]]
//! positivity preserving for all x.
use weyl_principal::classify::{positive_definite_scan, right_factor_scan};
use weyl_principal::oracles;

fn main() -> weyl_principal::Result<()> {
    let xs: Vec<f64> = (0..=40).map(|k| -4.0 + 0.2 * k as f64).collect();
    let family = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (-0.5, 2.0)];
    let scan = positive_definite_scan(|k, x| oracles::example313_commuting(family[k].0, family[k].1, x), family.len(), &xs);
    let max_min = scan.rows.iter().map(|r| r.min_eig).fold(f64::NEG_INFINITY, f64::max);
    println!("commuting family: nowhere positive definite = {}, largest min-eigenvalue {max_min:.3e}", scan.nowhere_positive_definite);
    let xs: Vec<f64> = (0..=20).map(|k| -5.0 + 0.5 * k as f64).collect();
    let levels = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let f = right_factor_scan(|x| oracles::example312_principal(1.0, -1.0, x), 2, &levels, &xs)?;
    println!("{} invertible right factors, every one fails somewhere: {}", f.rows.len(), f.every_factor_fails);
    Ok(())
}
