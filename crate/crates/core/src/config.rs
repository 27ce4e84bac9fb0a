//! Problem definition files (TOML).
//!
//! ```toml
//! name = "half-line"
//! x0 = 1.0
//! seed = 7
//!
//! [interval]
//! a = 0.0
//! b = "inf"
//! a_regular = false
//!
//! [coefficients]
//! kind = "builtin"            # or "piecewise"
//! name = "scalar-power"
//! p = [1.0, 4.0]              # coefficient c and power k: c·x^k
//!
//! [tolerances]
//! hermitian = 1e-10
//!
//! [thresholds]
//! lambda_b = 0.0
//! ```
//!
//! Builtins: `free-scalar`, `scalar-power` (`p`, `q`, `r` as `[c, k]`), `scalar-exponential`
//! (`c`, `k`), `constant-matrix` (`p`, `q`, `r` as row arrays; `p` and `r` default to `I`),
//! `example-312` (`q0`) and `example-313`.
//!
//! Piecewise tables list pieces with a starting point `from`; each coefficient is a sum of
//! terms `[c, k, s]` meaning `c·x^k·e^{s·x}`, or a bare number for a constant. Matrix tables
//! (`dim > 1`) give each coefficient as `dim²` such entries in row-major order.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::problem::{builtins, Coefficients, Endpoint, MatrixCoefficients, MatrixFn, Problem, ScalarCoefficients, ScalarFn, Thresholds, Tolerances};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    name: Option<String>,
    x0: Option<f64>,
    seed: Option<u64>,
    interval: Option<IntervalSection>,
    coefficients: CoefficientSection,
    tolerances: Option<ToleranceSection>,
    thresholds: Option<Thresholds>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalSection {
    a: Bound,
    b: Bound,
    a_regular: Option<bool>,
    b_regular: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Bound {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceSection {
    hermitian: Option<f64>,
    ode: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum CoefficientSection {
    Builtin {
        name: String,
        q0: Option<f64>,
        c: Option<f64>,
        k: Option<f64>,
        p: Option<toml::Value>,
        q: Option<toml::Value>,
        r: Option<toml::Value>,
    },
    Piecewise {
        #[serde(default = "one")]
        dim: usize,
        pieces: Vec<Piece>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Piece {
    from: Bound,
    p: Vec<Expr>,
    q: Vec<Expr>,
    r: Vec<Expr>,
}

/// One scalar expression: a constant or a list of `[c, k, s]` terms.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Expr {
    Constant(f64),
    Terms(Vec<[f64; 3]>),
}

impl Expr {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Constant(c) => *c,
            Expr::Terms(ts) => ts
                .iter()
                .map(|&[c, k, s]| {
                    let pow = if k == 0.0 { 1.0 } else { x.powf(k) };
                    let exp = if s == 0.0 { 1.0 } else { (s * x).exp() };
                    c * pow * exp
                })
                .sum(),
        }
    }
}

fn parse_bound(b: &Bound) -> Result<f64> {
    match b {
        Bound::Number(v) => Ok(*v),
        Bound::Text(s) => match s.trim() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => other.parse::<f64>().map_err(|_| Error::Config(format!("cannot read endpoint '{other}'"))),
        },
    }
}

fn endpoint(v: f64, regular: Option<bool>) -> Endpoint {
    if v == f64::INFINITY {
        Endpoint::plus_infinity()
    } else if v == f64::NEG_INFINITY {
        Endpoint::minus_infinity()
    } else if regular.unwrap_or(true) {
        Endpoint::regular(v)
    } else {
        Endpoint::finite(v)
    }
}

fn pair(v: &Option<toml::Value>, default: (f64, f64), what: &str) -> Result<(f64, f64)> {
    match v {
        None => Ok(default),
        Some(val) => {
            let arr: [f64; 2] = val.clone().try_into().map_err(|e| Error::Config(format!("{what}: expected [c, k] ({e})")))?;
            Ok((arr[0], arr[1]))
        }
    }
}

fn matrix(v: &Option<toml::Value>, dim: Option<usize>, what: &str) -> Result<Option<CMat>> {
    let Some(val) = v else { return Ok(None) };
    let rows: Vec<Vec<f64>> = val.clone().try_into().map_err(|e| Error::Config(format!("{what}: expected rows of numbers ({e})")))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) || dim.is_some_and(|d| d != n) {
        return Err(Error::Config(format!("{what}: expected a square matrix of matching size")));
    }
    let flat: Vec<f64> = rows.concat();
    Ok(Some(linalg::from_real(n, n, &flat)))
}

/// Parse a problem definition from TOML text.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let interval = match &file.interval {
        Some(i) => {
            let (a, b) = (parse_bound(&i.a)?, parse_bound(&i.b)?);
            if !(a < b) || a == f64::INFINITY || b == f64::NEG_INFINITY {
                return Err(Error::Config(format!("interval ({a}, {b}) is empty")));
            }
            Some((endpoint(a, i.a_regular), endpoint(b, i.b_regular)))
        }
        None => None,
    };
    let x0_given = file.x0;
    let needs_interval = |name: &str| interval.ok_or_else(|| Error::Config(format!("builtin '{name}' needs an [interval] section")));
    let mut problem = match &file.coefficients {
        CoefficientSection::Builtin { name, q0, c, k, p, q, r } => {
            let x0 = x0_given.unwrap_or(0.0);
            match name.as_str() {
                "free-scalar" => match interval {
                    None => builtins::free_line().with_x0(x0),
                    Some((a, b)) => builtins::free_scalar(a, b, x0),
                },
                "scalar-power" => {
                    let (a, b) = needs_interval(name)?;
                    builtins::scalar_power(a, b, x0, pair(p, (1.0, 0.0), "p")?, pair(q, (0.0, 0.0), "q")?, pair(r, (1.0, 0.0), "r")?)
                }
                "scalar-exponential" => {
                    let (a, b) = needs_interval(name)?;
                    builtins::scalar_exponential(a, b, x0, c.unwrap_or(1.0), k.unwrap_or(-1.0))
                }
                "constant-matrix" => {
                    let qm = matrix(q, None, "q")?.ok_or_else(|| Error::Config("constant-matrix needs q".into()))?;
                    let n = qm.nrows();
                    let pm = matrix(p, Some(n), "p")?.unwrap_or_else(|| linalg::identity(n));
                    let rm = matrix(r, Some(n), "r")?.unwrap_or_else(|| linalg::identity(n));
                    let (a, b) = interval.unwrap_or((Endpoint::minus_infinity(), Endpoint::plus_infinity()));
                    builtins::constant_matrix("constant-matrix", a, b, x0, pm, qm, rm)
                }
                "example-312" => builtins::example312(q0.unwrap_or(1.0)).with_x0(x0),
                "example-313" => builtins::example313().with_x0(x0),
                other => return Err(Error::Config(format!("unknown builtin '{other}'"))),
            }
        }
        CoefficientSection::Piecewise { dim, pieces } => {
            let (a, b) = needs_interval("piecewise")?;
            let x0 = x0_given.ok_or_else(|| Error::Config("piecewise problems need x0".into()))?;
            piecewise(a, b, x0, *dim, pieces)?
        }
    };
    if let Some(name) = file.name {
        problem.name = name;
    }
    if let Some(seed) = file.seed {
        problem.seed = seed;
    }
    if let Some(t) = file.tolerances {
        problem.tolerances = Tolerances {
            hermitian: t.hermitian.unwrap_or(problem.tolerances.hermitian),
            ode: t.ode.unwrap_or(problem.tolerances.ode),
        };
    }
    if let Some(t) = file.thresholds {
        let th = &mut problem.thresholds;
        th.lambda_a = t.lambda_a.or(th.lambda_a);
        th.lambda_b = t.lambda_b.or(th.lambda_b);
        th.lower_bound = t.lower_bound.or(th.lower_bound);
        th.limit_point_a = t.limit_point_a.or(th.limit_point_a);
        th.limit_point_b = t.limit_point_b.or(th.limit_point_b);
    }
    if !problem.contains(problem.x0) {
        return Err(Error::Config(format!("x0 = {} is not inside the interval", problem.x0)));
    }
    Ok(problem)
}

pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

struct Table {
    starts: Vec<f64>,
    pieces: Vec<[Vec<Expr>; 3]>,
}

impl Table {
    fn piece(&self, x: f64) -> &[Vec<Expr>; 3] {
        let i = self.starts.partition_point(|&s| s <= x).saturating_sub(1);
        &self.pieces[i]
    }
}

fn piecewise(a: Endpoint, b: Endpoint, x0: f64, dim: usize, pieces: &[Piece]) -> Result<Problem> {
    if pieces.is_empty() {
        return Err(Error::Config("piecewise coefficients need at least one piece".into()));
    }
    if dim == 0 {
        return Err(Error::Config("dim must be positive".into()));
    }
    let mut starts = Vec::with_capacity(pieces.len());
    let mut table = Vec::with_capacity(pieces.len());
    for (i, piece) in pieces.iter().enumerate() {
        let s = parse_bound(&piece.from)?;
        if i == 0 && s > a.value {
            return Err(Error::Config("the first piece must start at or before the left endpoint".into()));
        }
        if starts.last().is_some_and(|&prev| s <= prev) {
            return Err(Error::Config("piece starts must increase".into()));
        }
        for (name, e) in [("p", &piece.p), ("q", &piece.q), ("r", &piece.r)] {
            if e.len() != dim * dim {
                return Err(Error::Config(format!("piece {i}: {name} needs {} entries", dim * dim)));
            }
        }
        starts.push(s);
        table.push([piece.p.clone(), piece.q.clone(), piece.r.clone()]);
    }
    let breakpoints: Vec<f64> = starts.iter().copied().skip(1).collect();
    let table = Arc::new(Table { starts, pieces: table });
    let coefficients = if dim == 1 {
        let f = |k: usize| {
            let t = Arc::clone(&table);
            Arc::new(move |x: f64| t.piece(x)[k][0].eval(x)) as ScalarFn
        };
        Coefficients::Scalar(ScalarCoefficients { p: f(0), q: f(1), r: f(2), breakpoints })
    } else {
        let f = |k: usize| {
            let t = Arc::clone(&table);
            Arc::new(move |x: f64| {
                let entries: Vec<f64> = t.piece(x)[k].iter().map(|e| e.eval(x)).collect();
                CMat::from_row_iterator(dim, dim, entries.into_iter().map(|v| C64::new(v, 0.0)))
            }) as MatrixFn
        };
        Coefficients::Matrix(MatrixCoefficients { dim, p: f(0), q: f(1), r: f(2), breakpoints })
    };
    Ok(Problem::new("piecewise", a, b, coefficients, x0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{validate, EndpointKind};

    #[test]
    fn builtin_free_scalar() {
        let p = parse_problem("[coefficients]\nkind = \"builtin\"\nname = \"free-scalar\"\n").unwrap();
        assert_eq!(p.a.kind(), EndpointKind::Infinite);
        assert_eq!(p.thresholds.lower_bound, Some(0.0));
        let p = parse_problem(
            "x0 = 1.0\n[interval]\na = 0.0\nb = \"inf\"\na_regular = false\n[coefficients]\nkind = \"builtin\"\nname = \"free-scalar\"\n[thresholds]\nlambda_b = 0.0\n",
        )
        .unwrap();
        assert!(!p.a.is_regular());
        assert_eq!(p.thresholds.lambda_b, Some(0.0));
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn builtin_examples_and_matrix() {
        let p = parse_problem("seed = 3\n[coefficients]\nkind = \"builtin\"\nname = \"example-312\"\nq0 = 2.0\n").unwrap();
        assert_eq!(p.seed, 3);
        assert_eq!(p.coefficients.q(0.0)[(0, 1)].re, 2.0);
        let p = parse_problem("[coefficients]\nkind = \"builtin\"\nname = \"constant-matrix\"\nq = [[0.0, 1.0], [1.0, 2.0]]\n").unwrap();
        assert_eq!(p.dim(), 2);
        assert!(validate(&p).is_empty());
        assert!(parse_problem("[coefficients]\nkind = \"builtin\"\nname = \"nope\"\n").is_err());
    }

    #[test]
    fn piecewise_tables() {
        let text = r#"
x0 = 0.5
[interval]
a = 0.0
b = 2.0
[coefficients]
kind = "piecewise"
[[coefficients.pieces]]
from = 0.0
p = [1.0]
q = [[[2.0, 1.0, 0.0]]]
r = [1.0]
[[coefficients.pieces]]
from = 1.0
p = [[[1.0, 0.0, 0.5]]]
q = [0.0]
r = [1.0]
"#;
        let p = parse_problem(text).unwrap();
        assert_eq!(p.coefficients.q(0.5)[(0, 0)].re, 1.0);
        assert!((p.coefficients.p(1.5)[(0, 0)].re - 0.75f64.exp()).abs() < 1e-15);
        assert_eq!(p.coefficients.breakpoints(), &[1.0]);
    }

    #[test]
    fn negative_p_is_a_violation() {
        let text = "x0 = 0.5\n[interval]\na = 0.0\nb = 1.0\n[coefficients]\nkind = \"piecewise\"\n[[coefficients.pieces]]\nfrom = 0.0\np = [-1.0]\nq = [0.0]\nr = [1.0]\n";
        let p = parse_problem(text).unwrap();
        assert!(!validate(&p).is_empty());
    }

    #[test]
    fn bundled_problem_files_parse() {
        for text in [
            include_str!("../problems/free-scalar.toml"),
            include_str!("../problems/example-312.toml"),
            include_str!("../problems/example-313.toml"),
            include_str!("../problems/step-potential.toml"),
        ] {
            let p = parse_problem(text).unwrap();
            assert!(validate(&p).is_empty(), "{}", p.name);
        }
    }

    #[test]
    fn bad_files_are_config_errors() {
        assert!(matches!(parse_problem("x0 = \"a\""), Err(Error::Config(_))));
        assert!(matches!(
            parse_problem("x0 = 5.0\n[interval]\na = 0.0\nb = 1.0\n[coefficients]\nkind = \"builtin\"\nname = \"free-scalar\"\n"),
            Err(Error::Config(_))
        ));
    }
}
