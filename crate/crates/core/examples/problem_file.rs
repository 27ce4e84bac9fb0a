//! Load a problem from TOML and run a command through the CLI layer, as the binary does.
use weyl_principal::cli::{main_with_args, write_problem_file};
use weyl_principal::config::parse_problem;

const TEXT: &str = r#"
name = "quartic"
x0 = 1.0
[interval]
a = 0.0
b = "inf"
a_regular = false
[coefficients]
kind = "builtin"
name = "scalar-power"
q = [1.0, 2.0]
[thresholds]
lambda_b = 0.0
"#;

fn main() -> weyl_principal::Result<()> {
    let p = parse_problem(TEXT)?;
    println!("{:?}, q(2) = {}", p, p.coefficients.q(2.0)[(0, 0)].re);
    let dir = std::env::temp_dir().join("weyl-principal-example");
    std::fs::create_dir_all(&dir)?;
    let file = write_problem_file(&dir, "quartic.toml", TEXT)?;
    let out = dir.join("out");
    let code = main_with_args(["weyl-principal", "--problem", file.to_str().unwrap(), "--cmd", "mfun", "--out", out.to_str().unwrap(), "--z", "i", "--z", "-1"]);
    println!("exit status {code}; report in {}", out.display());
    Ok(())
}
