//! The binary's exit codes and outputs.

use std::path::Path;
use std::process::Command;

fn run(dir: &Path, toml: &str, args: &[&str]) -> (i32, serde_json::Value) {
    let file = dir.join("problem.toml");
    std::fs::write(&file, toml).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_weyl-principal"))
        .arg("--problem")
        .arg(&file)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap();
    let json = serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null);
    (out.status.code().unwrap(), json)
}

#[test]
fn mfun_free_scalar_prints_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = run(dir.path(), "[coefficients]\nkind = \"builtin\"\nname = \"free-scalar\"\n", &["--cmd", "mfun", "--z", "-1"]);
    assert_eq!(code, 0);
    let m = &v["result"]["evaluations"][0]["value"][0][0];
    assert!((m[0].as_f64().unwrap() + 1.0).abs() < 1e-8);
    assert!(m[1].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn identify_example313() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[coefficients]\nkind = \"builtin\"\nname = \"example-313\"\n[thresholds]\nlambda_b = -2.0\n";
    let (code, v) = run(dir.path(), text, &["--cmd", "identify", "--lambda", "-3"]);
    assert_eq!(code, 0);
    assert!(v["result"]["max_diff"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn validate_negative_p() {
    let dir = tempfile::tempdir().unwrap();
    let text = "x0 = 0.5\n[interval]\na = 0.0\nb = 1.0\n[coefficients]\nkind = \"piecewise\"\n[[coefficients.pieces]]\nfrom = 0.0\np = [-1.0]\nq = [0.0]\nr = [1.0]\n";
    let (code, v) = run(dir.path(), text, &["--cmd", "validate"]);
    assert_eq!(code, 2);
    assert_eq!(v["result"]["violations"][0]["invariant"], "p not positive");
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[coefficients]\nkind = \"builtin\"\nname = \"example-312\"\n";
    let (code, v) = run(dir.path(), text, &["--cmd", "verify-identities", "--z", "i", "--tol", "1e-30"]);
    assert_eq!(code, 1);
    assert_eq!(v["ok"], false);
}

#[test]
fn bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(dir.path(), "", &["--cmd", "mfun", "--z", "nonsense"]);
    assert_eq!(code, 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = "seed = 11\n[coefficients]\nkind = \"builtin\"\nname = \"example-313\"\n[thresholds]\nlambda_b = -2.0\n";
    let args = ["--cmd", "classify", "--lambda", "-3", "--lambda", "-1"];
    run(dir.path(), text, &args);
    let first = std::fs::read(dir.path().join("out/classify.json")).unwrap();
    run(dir.path(), text, &args);
    assert_eq!(first, std::fs::read(dir.path().join("out/classify.json")).unwrap());
}
