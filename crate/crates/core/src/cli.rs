//! Command-line front end. Every command writes `<out>/<command>.json` (also printed to
//! stdout) and, where useful, CSV files next to it.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::canonical::{matrix_principal, normalized_pair, PrincipalParams, Verdict};
use crate::classify::{classify, ClassifyParams};
use crate::config::load_problem;
use crate::error::{Error, Result};
use crate::greens::{greens_kernel, greens_verify, principal_kernel, write_kernel_csv};
use crate::ladder::LadderParams;
use crate::linalg::{self, C64};
use crate::oracles::ConstMatrixOracle;
use crate::problem::{validate, EndpointKind, Problem, Side, SpectralParameter};
use crate::weyl::{identification_check, identity_suite, m_limit, m_sweep, write_sweep_csv, WeylParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Solve,
    Mfun,
    MfunSweep,
    Principal,
    Greens,
    Classify,
    Identify,
    VerifyIdentities,
    OracleDiff,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Solve => "solve",
            Command::Mfun => "mfun",
            Command::MfunSweep => "mfun-sweep",
            Command::Principal => "principal",
            Command::Greens => "greens",
            Command::Classify => "classify",
            Command::Identify => "identify",
            Command::VerifyIdentities => "verify-identities",
            Command::OracleDiff => "oracle-diff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Plus,
    Minus,
    Both,
}

impl SideArg {
    fn sides(self) -> Vec<Side> {
        match self {
            SideArg::Plus => vec![Side::Plus],
            SideArg::Minus => vec![Side::Minus],
            SideArg::Both => vec![Side::Minus, Side::Plus],
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "weyl-principal", about = "Weyl-Titchmarsh and principal solutions of Sturm-Liouville problems")]
pub struct RunConfig {
    /// Problem definition file (TOML).
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum)]
    pub cmd: Command,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Complex spectral parameter such as `1+2i`, `-3`, `i`; repeatable.
    #[arg(long = "z", value_parser = parse_complex, allow_hyphen_values = true)]
    pub z: Vec<C64>,
    /// Real spectral parameter; repeatable.
    #[arg(long = "lambda", allow_hyphen_values = true)]
    pub lambda: Vec<f64>,
    /// Acceptance tolerance of the command's checks.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of truncation-ladder rungs.
    #[arg(long)]
    pub rungs: Option<usize>,
    /// Overrides the problem file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "plus")]
    pub side: SideArg,
}

/// Outcome of a run; `code()` is the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
    ConfigError,
    NonConvergence,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::CheckFailed => 1,
            Status::ConfigError => 2,
            Status::NonConvergence => 3,
        }
    }

    fn of_error(e: &Error) -> Status {
        if e.is_numerical() {
            Status::NonConvergence
        } else {
            Status::ConfigError
        }
    }
}

/// Parse `a+bi`, `a-bi`, `a`, `bi`, `i`, `-i` (locale independent).
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot read complex number '{s}'");
    if t.is_empty() {
        return Err(bad());
    }
    let num = |p: &str| p.parse::<f64>().map_err(|_| bad());
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return Ok(C64::new(num(&t)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => num(other)?,
    };
    Ok(C64::new(num(re)?, im))
}

/// Parse arguments and run; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(cfg) => run(&cfg).code(),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                Status::ConfigError.code()
            } else {
                0
            }
        }
    }
}

/// Run one command. Failures are reported as JSON on stdout and in the output directory.
pub fn run(cfg: &RunConfig) -> Status {
    let name = cfg.cmd.name();
    let (status, body) = match execute(cfg) {
        Ok(r) => r,
        Err(e) => {
            let status = Status::of_error(&e);
            (status, json!({ "error": e.to_string() }))
        }
    };
    let report = json!({
        "command": name,
        "status": status.code(),
        "ok": status == Status::Ok,
        "result": body,
    });
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    if fs::create_dir_all(&cfg.out).and_then(|_| fs::write(cfg.out.join(format!("{name}.json")), format!("{text}\n"))).is_err() {
        eprintln!("cannot write to {}", cfg.out.display());
        return Status::ConfigError;
    }
    // A closed stdout (e.g. piped into `head`) must not change the exit status.
    let _ = writeln!(std::io::stdout(), "{text}");
    status
}

fn ladder(cfg: &RunConfig) -> LadderParams {
    match cfg.rungs {
        Some(n) => LadderParams::default().with_rungs(n),
        None => LadderParams::default(),
    }
}

fn zs(cfg: &RunConfig) -> Vec<C64> {
    if cfg.z.is_empty() {
        vec![C64::new(0.0, 1.0)]
    } else {
        cfg.z.clone()
    }
}

/// Requested λ values, or one unit below the declared threshold.
fn lambdas(cfg: &RunConfig, problem: &Problem, side: Side) -> Result<Vec<f64>> {
    if !cfg.lambda.is_empty() {
        return Ok(cfg.lambda.clone());
    }
    problem
        .threshold(side)
        .map(|t| vec![t - 1.0])
        .ok_or_else(|| Error::Config(format!("no --lambda given and no threshold declared at {side}")))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn csv_file(cfg: &RunConfig, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(&cfg.out)?;
    Ok(BufWriter::new(File::create(cfg.out.join(name))?))
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// A window of half-width `w` around `x0`, clipped to the sample window of the problem.
fn window(problem: &Problem, w: f64) -> (f64, f64) {
    let (lo, hi) = problem.sample_window();
    (lo.max(problem.x0 - w), hi.min(problem.x0 + w))
}

fn status_of(ok: bool) -> Status {
    if ok {
        Status::Ok
    } else {
        Status::CheckFailed
    }
}

fn execute(cfg: &RunConfig) -> Result<(Status, Value)> {
    let mut problem = load_problem(&cfg.problem)?;
    if let Some(seed) = cfg.seed {
        problem.seed = seed;
    }
    let problem = problem;
    match cfg.cmd {
        Command::Validate => {
            let v = validate(&problem);
            let status = if v.is_empty() { Status::Ok } else { Status::ConfigError };
            Ok((status, json!({ "problem": problem.name, "seed": problem.seed, "violations": to_value(&v) })))
        }
        Command::Solve => solve(cfg, &problem),
        Command::Mfun => {
            let mut rows = Vec::new();
            let mut all = true;
            for z in zs(cfg) {
                for side in cfg.side.sides() {
                    let e = m_limit(&problem, SpectralParameter(z), side, &ladder(cfg))?;
                    all &= e.converged;
                    rows.push(to_value(&e));
                }
            }
            let status = if all { Status::Ok } else { Status::NonConvergence };
            Ok((status, json!({ "problem": problem.name, "evaluations": rows })))
        }
        Command::MfunSweep => {
            let z = zs(cfg);
            let mut summary = Vec::new();
            let mut all = true;
            for side in cfg.side.sides() {
                let rows = m_sweep(&problem, side, &z, &ladder(cfg));
                let file = format!("mfun_sweep_{side}.csv");
                let mut w = csv_file(cfg, &file)?;
                write_sweep_csv(&mut w, problem.dim(), &z, &rows)?;
                w.flush()?;
                let converged = rows.iter().filter(|r| r.as_ref().is_ok_and(|e| e.converged)).count();
                all &= converged == rows.len();
                summary.push(json!({ "side": side, "file": file, "points": rows.len(), "converged": converged }));
            }
            let status = if all { Status::Ok } else { Status::NonConvergence };
            Ok((status, json!({ "problem": problem.name, "sweeps": summary })))
        }
        Command::Principal => principal(cfg, &problem),
        Command::Greens => greens(cfg, &problem),
        Command::Classify => {
            let params = ClassifyParams { seed: problem.seed, ladder: ladder(cfg), ..ClassifyParams::default() };
            let mut out = Vec::new();
            for side in cfg.side.sides() {
                let ls = lambdas(cfg, &problem, side).or_else(|_| problem.thresholds.lower_bound.map(|l| vec![l - 1.0]).ok_or(()));
                let ls = ls.map_err(|_| Error::Config("classify needs --lambda".into()))?;
                let range = if ls.len() >= 2 {
                    Some((ls.iter().copied().fold(f64::INFINITY, f64::min), ls.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
                } else {
                    None
                };
                for (k, &l) in ls.iter().enumerate() {
                    let r = if k == 0 { range } else { None };
                    out.push(to_value(&classify(&problem, side, l, r, &params)?));
                }
            }
            Ok((Status::Ok, json!({ "problem": problem.name, "classifications": out })))
        }
        Command::Identify => {
            let tol = cfg.tol.unwrap_or(1e-6);
            let params = PrincipalParams { ladder: ladder(cfg), ..PrincipalParams::default() };
            let mut out = Vec::new();
            let mut worst: f64 = 0.0;
            for side in cfg.side.sides() {
                for l in lambdas(cfg, &problem, side)? {
                    let r = identification_check(&problem, l, side, &params)?;
                    worst = worst.max(r.deviation);
                    out.push(to_value(&r));
                }
            }
            Ok((status_of(worst <= tol), json!({ "problem": problem.name, "tol": tol, "max_diff": worst, "reports": out })))
        }
        Command::VerifyIdentities => {
            let tol = cfg.tol.unwrap_or(1e-8);
            let (lo, hi) = window(&problem, 3.0);
            let xs: Vec<f64> = grid(lo, hi, 7).into_iter().filter(|&x| x != problem.x0).collect();
            let mut out = Vec::new();
            let mut worst: f64 = 0.0;
            for z in zs(cfg) {
                let r = identity_suite(&problem, SpectralParameter(z), &xs)?;
                worst = worst.max(r.max_residual);
                out.push(to_value(&r));
            }
            Ok((status_of(worst <= tol), json!({ "problem": problem.name, "tol": tol, "max_residual": worst, "reports": out })))
        }
        Command::OracleDiff => oracle_diff(cfg, &problem),
    }
}

fn solve(cfg: &RunConfig, problem: &Problem) -> Result<(Status, Value)> {
    let z: Vec<C64> = if cfg.z.is_empty() && !cfg.lambda.is_empty() {
        cfg.lambda.iter().map(|&l| C64::new(l, 0.0)).collect()
    } else {
        zs(cfg)
    };
    let (lo, hi) = window(problem, 10.0);
    let targets = grid(lo, hi, 201);
    let mut out = Vec::new();
    for (k, &zk) in z.iter().enumerate() {
        let pair = normalized_pair(problem, SpectralParameter(zk), 0.0, &targets, problem.tolerances.ode)?;
        let files = [format!("theta_{k}.csv"), format!("phi_{k}.csv")];
        for (trace, f) in [&pair.theta, &pair.phi].into_iter().zip(&files) {
            let mut w = csv_file(cfg, f)?;
            trace.write_csv(&mut w)?;
            w.flush()?;
        }
        out.push(json!({ "z": [zk.re, zk.im], "x0": pair.x0, "range": [lo, hi], "samples": pair.theta.samples.len(), "files": files }));
    }
    Ok((Status::Ok, json!({ "problem": problem.name, "solutions": out })))
}

fn principal(cfg: &RunConfig, problem: &Problem) -> Result<(Status, Value)> {
    let params = PrincipalParams { ladder: ladder(cfg), ..PrincipalParams::default() };
    let mut out = Vec::new();
    let mut all = true;
    let mut k = 0;
    for side in cfg.side.sides() {
        for l in lambdas(cfg, problem, side)? {
            let p = matrix_principal(problem, l, side, &params)?;
            let file = format!("principal_{k}.csv");
            k += 1;
            let mut w = csv_file(cfg, &file)?;
            p.trace.write_csv(&mut w)?;
            w.flush()?;
            all &= p.certificate.verdict == Verdict::Principal;
            out.push(json!({
                "lambda": l,
                "side": side,
                "m_at_x0": linalg::ser_mat(&p.m_at_x0(), serde_json::value::Serializer).expect("matrix"),
                "segments": to_value(&p.segments),
                "certificate": to_value(&p.certificate),
                "file": file,
            }));
        }
    }
    Ok((status_of(all), json!({ "problem": problem.name, "principal": out })))
}

fn greens(cfg: &RunConfig, problem: &Problem) -> Result<(Status, Value)> {
    let tol = cfg.tol.unwrap_or(1e-5);
    let (lo, hi) = window(problem, 5.0);
    let xs = grid(lo, hi, 41);
    let wp = WeylParams { ladder: ladder(cfg), ..WeylParams::default() };
    let mut out = Vec::new();
    let mut ok = true;
    let zlist: Vec<C64> = if cfg.z.is_empty() && !cfg.lambda.is_empty() { Vec::new() } else { zs(cfg) };
    for (k, &z) in zlist.iter().enumerate() {
        let kernel = greens_kernel(problem, SpectralParameter(z), lo, hi, &wp)?;
        let file = format!("greens_{k}.csv");
        let mut w = csv_file(cfg, &file)?;
        write_kernel_csv(&mut w, problem, &kernel, &xs, &xs)?;
        w.flush()?;
        let interior: Vec<f64> = xs.iter().copied().filter(|&x| x > lo + 0.1 && x < hi - 0.1).collect();
        let v = greens_verify(problem, &kernel, problem.x0, &interior)?;
        ok &= (v.jump_fd + 1.0).norm() <= tol && (v.jump_exact + 1.0).norm() <= tol && v.symmetry <= tol;
        out.push(json!({ "z": [z.re, z.im], "wronskian": [kernel.wronskian.re, kernel.wronskian.im], "verification": to_value(&v), "file": file }));
    }
    let params = PrincipalParams { ladder: ladder(cfg), ..PrincipalParams::default() };
    for &l in &cfg.lambda {
        let kernel = principal_kernel(problem, l, lo, hi, &params)?;
        let g = grid(lo, hi, 20);
        let mut min: f64 = f64::INFINITY;
        for &x in &g {
            for &xp in &g {
                min = min.min(kernel.eval(problem, x, xp)?);
            }
        }
        ok &= min > 0.0;
        out.push(json!({ "lambda": l, "prefactor": kernel.prefactor, "grid": g.len(), "min_value": min, "positive": min > 0.0 }));
    }
    Ok((status_of(ok), json!({ "problem": problem.name, "tol": tol, "kernels": out })))
}

/// Constant-coefficient Schrödinger problems (`P = R = I`, `Q` constant) have closed-form M.
fn constant_schrodinger(problem: &Problem, side: Side) -> Option<linalg::CMat> {
    let c = &problem.coefficients;
    let x = problem.x0;
    let id = linalg::identity(problem.dim());
    let probes = [x, x + 0.37, x - 0.61, x + 2.3];
    let q = c.q(x);
    let constant = probes.iter().all(|&y| {
        !problem.contains(y) || (linalg::max_abs(&(c.q(y) - &q)) == 0.0 && linalg::max_abs(&(c.p(y) - &id)) == 0.0 && linalg::max_abs(&(c.r(y) - &id)) == 0.0)
    });
    let infinite = problem.endpoint(side).kind() == EndpointKind::Infinite;
    (constant && infinite).then_some(q)
}

fn oracle_diff(cfg: &RunConfig, problem: &Problem) -> Result<(Status, Value)> {
    let tol = cfg.tol.unwrap_or(1e-6);
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    let mut converged = true;
    for side in cfg.side.sides() {
        let q = constant_schrodinger(problem, side)
            .ok_or_else(|| Error::Config(format!("no closed-form oracle for '{}' at {side}", problem.name)))?;
        for z in zs(cfg) {
            let e = m_limit(problem, SpectralParameter(z), side, &ladder(cfg))?;
            let oracle = ConstMatrixOracle::new(q.clone(), z, problem.x0)?;
            let exact = match side {
                Side::Plus => oracle.m_plus()?,
                Side::Minus => oracle.m_minus()?,
            };
            let diff = linalg::max_abs(&(&e.value - &exact));
            worst = worst.max(diff);
            converged &= e.converged;
            out.push(json!({
                "z": [z.re, z.im],
                "side": side,
                "computed": to_value(&e),
                "oracle": linalg::ser_mat(&exact, serde_json::value::Serializer).expect("matrix"),
                "max_abs_diff": diff,
            }));
        }
    }
    let status = if worst > tol {
        Status::CheckFailed
    } else if !converged {
        Status::NonConvergence
    } else {
        Status::Ok
    };
    Ok((status, json!({ "problem": problem.name, "tol": tol, "max_abs_diff": worst, "comparisons": out })))
}

/// Convenience for examples and tests: write a TOML problem file into `dir`.
pub fn write_problem_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}
