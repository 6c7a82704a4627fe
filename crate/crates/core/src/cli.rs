//! Command-line front end: `solve`, `eval` and `verify`.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 expression blow-up,
//! 3 verification failure. All output is collected and written once.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::{One, Signed};
use serde::Serialize;
use serde_json::json;

use crate::dyson::{self, OracleError};
use crate::expr::{Bindings, Expr, ExprError, Poly, Rational, Symbol};
use crate::lie::{self, Generator, SeriesError, SeriesSolution};
use crate::numeric::{self, CatalogEntry, ExactSolution};
use crate::parser::{parse_expression, parse_problem, render, Names, ProblemKind, ProblemSpec};

pub const DEFAULT_ORDER: u32 = 6;
pub const HIGH_ORDER: u32 = 12;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_RESOURCE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliOutcome {
    fn ok(stdout: String) -> Self {
        CliOutcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, message: impl std::fmt::Display) -> Self {
        CliOutcome {
            code,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "chronexp",
    version,
    about = "Lie-series solutions of Cauchy problems u_t + F = 0"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the truncated series solution of a problem document.
    Solve(SolveArgs),
    /// Evaluate the series numerically.
    Eval(EvalArgs),
    /// Run verification suites, or check a problem document.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Catalog,
    Dyson,
    Homomorphism,
    All,
}

#[derive(Debug, Args)]
struct OrderArgs {
    /// Truncation order N (default: the document's order, or 6 for suites).
    #[arg(long)]
    order: Option<u32>,
    /// Permit orders above 12.
    #[arg(long)]
    allow_high_order: bool,
}

impl OrderArgs {
    fn resolve(&self, fallback: u32) -> Result<u32, CliOutcome> {
        let n = self.order.unwrap_or(fallback);
        if n > HIGH_ORDER && !self.allow_high_order {
            return Err(CliOutcome::fail(
                EXIT_INPUT,
                format!("order {n} exceeds {HIGH_ORDER}; pass --allow-high-order to proceed"),
            ));
        }
        Ok(n)
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    spec: PathBuf,
    #[command(flatten)]
    order: OrderArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct EvalArgs {
    spec: PathBuf,
    #[command(flatten)]
    order: OrderArgs,
    /// Initial data: `c=1`, `c1=1,c2=0.5` (ode/system), or initial functions
    /// of x separated by `;` (pde).
    #[arg(long)]
    ic: String,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    t: Vec<f64>,
    /// Comma-separated space points (pde).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Values for parameters or a symbolic initial time, e.g. `a=0.5`.
    #[arg(long = "set")]
    set: Vec<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Problem document to check; without it only the suites run.
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    #[command(flatten)]
    order: OrderArgs,
    /// Catalog entry whose equation the document's series must satisfy.
    #[arg(long)]
    reference: Option<String>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I) -> CliOutcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CliOutcome {
                    code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CliOutcome::ok(text)
            };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    result.unwrap_or_else(|e| e)
}

fn load(path: &Path) -> Result<ProblemSpec, CliOutcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliOutcome::fail(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| CliOutcome::fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn series_failure(e: SeriesError) -> CliOutcome {
    match e {
        SeriesError::ExpressionBlowup { .. } => CliOutcome::fail(EXIT_RESOURCE, e),
        _ => CliOutcome::fail(EXIT_INPUT, e),
    }
}

fn oracle_failure(e: OracleError) -> CliOutcome {
    match e {
        OracleError::ExpressionBlowup { .. } | OracleError::Series(SeriesError::ExpressionBlowup { .. }) => {
            CliOutcome::fail(EXIT_RESOURCE, e)
        }
        _ => CliOutcome::fail(EXIT_INPUT, e),
    }
}

fn solve_problem(p: &ProblemSpec, order: u32) -> Result<SeriesSolution, CliOutcome> {
    Generator::new(p).lie_coefficients(order).map_err(series_failure)
}

/// "(t)" for a = 0, otherwise "(t - a)".
fn tau_text(p: &ProblemSpec, names: &Names) -> String {
    if p.initial_time.is_zero() {
        format!("({})", p.time_name)
    } else {
        let tau = (Expr::time() - p.initial_time.clone())
            .normalize()
            .expect("t - a normalizes");
        format!("({})", render(&tau, names))
    }
}

/// One field of the series as `u = c - (t)*c^2 + ...`. Each monomial of
/// each coefficient becomes its own term; a fractional coefficient is set
/// off with spaces, as in `(t)^2/2 * c_xxxx`.
pub fn render_series_line(sol: &SeriesSolution, field: usize) -> String {
    let p = &sol.problem;
    let names = Names::initial_data(p);
    let tau = tau_text(p, &names);
    let mut terms: Vec<(bool, String)> = Vec::new();
    for (n, c) in sol.coeffs[field].iter().enumerate() {
        let poly = Poly::from_expr(c).expect("series coefficients normalize");
        for (m, q) in poly.terms() {
            let negative = q.is_negative();
            let q = q.abs();
            let mon = (!m.is_one()).then(|| render(&Poly::from_monomial(m.clone(), Rational::one()).to_expr(), &names));
            let body = if n == 0 {
                render(&Poly::from_monomial(m.clone(), q).to_expr(), &names)
            } else {
                let mut s = tau.clone();
                if n > 1 {
                    write!(s, "^{n}").unwrap();
                }
                if !q.numer().is_one() {
                    write!(s, "*{}", q.numer()).unwrap();
                }
                let fractional = !q.denom().is_one();
                if fractional {
                    write!(s, "/{}", q.denom()).unwrap();
                }
                if let Some(mon) = mon {
                    s.push_str(if fractional { " * " } else { "*" });
                    s.push_str(&mon);
                }
                s
            };
            terms.push((negative, body));
        }
    }
    let mut out = format!("{} = ", p.field_names[field]);
    if terms.is_empty() {
        out.push('0');
    }
    for (i, (negative, body)) in terms.iter().enumerate() {
        match (i, negative) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        out.push_str(body);
    }
    out
}

fn coefficient_json(sol: &SeriesSolution) -> serde_json::Value {
    let names = Names::initial_data(&sol.problem);
    let mut list = Vec::new();
    for (i, cs) in sol.coeffs.iter().enumerate() {
        for (n, c) in cs.iter().enumerate() {
            list.push(json!({
                "field": sol.problem.field_names[i],
                "n": n,
                "expr": render(c, &names),
            }));
        }
    }
    serde_json::Value::Array(list)
}

fn document(
    problem: &ProblemSpec,
    coefficients: serde_json::Value,
    evaluations: serde_json::Value,
    reports: serde_json::Value,
) -> String {
    let doc = json!({
        "problem": problem.to_json(),
        "coefficients": coefficients,
        "evaluations": evaluations,
        "reports": reports,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json output serializes");
    s.push('\n');
    s
}

fn cmd_solve(a: &SolveArgs) -> Result<CliOutcome, CliOutcome> {
    let mut p = load(&a.spec)?;
    let order = a.order.resolve(p.order)?;
    p.order = order;
    let sol = solve_problem(&p, order)?;
    let out = match a.format {
        Format::Text => (0..p.field_count())
            .map(|i| render_series_line(&sol, i) + "\n")
            .collect(),
        Format::Json => document(&p, coefficient_json(&sol), json!([]), json!([])),
    };
    Ok(CliOutcome::ok(out))
}

fn parse_assignment(s: &str) -> Result<(String, f64), CliOutcome> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| CliOutcome::fail(EXIT_INPUT, format!("expected name=value, got `{s}`")))?;
    let v = value
        .trim()
        .parse::<f64>()
        .map_err(|_| CliOutcome::fail(EXIT_INPUT, format!("`{value}` is not a number")))?;
    Ok((name.trim().to_string(), v))
}

/// Bindings for `--set` values: parameters and a symbolic initial time.
fn settings(p: &ProblemSpec, set: &[String]) -> Result<Bindings, CliOutcome> {
    let mut b = Bindings::new();
    for s in set {
        let (name, v) = parse_assignment(s)?;
        let sym = if p.initial_name.as_deref() == Some(name.as_str()) {
            Symbol::InitialTime
        } else if p.params.contains(&name) {
            Symbol::Param(name)
        } else {
            return Err(CliOutcome::fail(
                EXIT_INPUT,
                format!("`{name}` is neither a parameter nor the initial time"),
            ));
        };
        b.insert(sym, v);
    }
    Ok(b)
}

fn ode_initial_values(p: &ProblemSpec, ic: &str) -> Result<Vec<f64>, CliOutcome> {
    let data_names = Names::initial_data(p).fields;
    let mut values = vec![None; p.field_count()];
    for part in ic.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, v) = parse_assignment(part)?;
        let k = data_names
            .iter()
            .position(|n| *n == name)
            .or_else(|| p.field_names.iter().position(|n| *n == name))
            .ok_or_else(|| CliOutcome::fail(EXIT_INPUT, format!("unknown initial-data name `{name}`")))?;
        values[k] = Some(v);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            v.ok_or_else(|| CliOutcome::fail(EXIT_INPUT, format!("missing initial value for {}", data_names[k])))
        })
        .collect()
}

fn pde_initial_functions(p: &ProblemSpec, ic: &str) -> Result<Vec<Expr>, CliOutcome> {
    let mut names = Names::for_problem(p);
    names.fields.clear();
    let parts: Vec<&str> = ic.split(';').collect();
    if parts.len() != p.field_count() {
        return Err(CliOutcome::fail(
            EXIT_INPUT,
            format!("expected {} initial functions separated by `;`", p.field_count()),
        ));
    }
    parts
        .iter()
        .map(|s| parse_expression(s.trim(), &names).map_err(|e| CliOutcome::fail(EXIT_INPUT, format!("--ic: {e}"))))
        .collect()
}

fn cmd_eval(a: &EvalArgs) -> Result<CliOutcome, CliOutcome> {
    let mut p = load(&a.spec)?;
    let order = a.order.resolve(p.order)?;
    p.order = order;
    let env = settings(&p, &a.set)?;
    let is_pde = p.kind == ProblemKind::Pde;
    let initial = if is_pde {
        if a.x.is_empty() {
            return Err(CliOutcome::fail(EXIT_INPUT, "pde evaluation needs --x"));
        }
        if p.space_dim() != 1 {
            return Err(CliOutcome::fail(EXIT_INPUT, "eval supports one space variable"));
        }
        numeric::InitialData::Functions(pde_initial_functions(&p, &a.ic)?)
    } else {
        numeric::InitialData::Values(ode_initial_values(&p, &a.ic)?)
    };
    let sol = solve_problem(&p, order)?;
    let entry = CatalogEntry {
        name: "cli",
        problem: p.clone(),
        exact: ExactSolution::NumericOnly,
        initial,
        env,
        validity: None,
        note: "",
    };
    let xs: Vec<Vec<f64>> = if is_pde {
        a.x.iter().map(|x| vec![*x]).collect()
    } else {
        vec![Vec::new()]
    };
    let expr_failure = |e: ExprError| CliOutcome::fail(EXIT_INPUT, e);
    let mut rows = Vec::new();
    for &t in &a.t {
        for x in &xs {
            let b = entry
                .initial_bindings(sol.coeffs.iter().flatten(), x)
                .map_err(expr_failure)?;
            let values = sol.eval(t, &b).map_err(expr_failure)?;
            rows.push((t, x.first().copied(), values));
        }
    }
    let out = match a.format {
        Format::Text => {
            let mut s = String::new();
            let mut header = vec![p.time_name.clone()];
            if is_pde {
                header.push(p.space_names[0].clone());
            }
            header.extend(p.field_names.iter().cloned());
            s.push_str(&header.join("\t"));
            s.push('\n');
            for (t, x, values) in &rows {
                let mut cells = vec![t.to_string()];
                cells.extend(x.map(|x| x.to_string()));
                cells.extend(values.iter().map(|v| v.to_string()));
                s.push_str(&cells.join("\t"));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let evals: Vec<_> = rows
                .iter()
                .map(|(t, x, values)| {
                    let fields: serde_json::Map<_, _> = p
                        .field_names
                        .iter()
                        .cloned()
                        .zip(values.iter().map(|v| json!(v)))
                        .collect();
                    json!({"t": t, "x": x, "values": fields})
                })
                .collect();
            document(&p, coefficient_json(&sol), json!(evals), json!([]))
        }
    };
    Ok(CliOutcome::ok(out))
}

/// One verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_order: Option<u32>,
}

impl Check {
    fn new(suite: &str, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            suite: suite.into(),
            name: name.into(),
            passed,
            detail: detail.into(),
            norm: None,
            failing_order: None,
        }
    }

    fn with_norm(mut self, norm: f64) -> Self {
        self.norm = Some(norm);
        self
    }

    fn with_failing_order(mut self, order: Option<u32>) -> Self {
        self.failing_order = order;
        self
    }
}

/// Sample x points for PDE catalog comparisons.
pub const SAMPLE_POINTS: [f64; 5] = [0.0, 0.3, 1.0, 2.0, 3.0];

/// Offset at which catalog series are compared with their references, and
/// the error bound 100·τ^{N+1} applied there.
const COMPARE_OFFSET: f64 = 0.05;

fn residual_check(suite: &str, name: &str, sol: &SeriesSolution, equation: &ProblemSpec) -> Result<Check, SeriesError> {
    let report = lie::residual(sol, equation)?;
    let failing = report.first_failing_order();
    let detail = match failing {
        None => format!("residual vanishes through order {}", sol.order.saturating_sub(1)),
        Some(n) => format!("residual nonzero: first failing order {n}"),
    };
    Ok(Check::new(suite, format!("{name}/residual"), report.passed(), detail).with_failing_order(failing))
}

/// Exact-solution, residual and numeric checks over the catalog.
pub fn catalog_suite(order: u32) -> Result<Vec<Check>, SeriesError> {
    let mut checks = Vec::new();
    for entry in numeric::catalog() {
        if let Some(ok) = entry.check_exact()? {
            checks.push(Check::new(
                "catalog",
                format!("{}/exact-solution", entry.name),
                ok,
                "closed form satisfies the equation and initial condition",
            ));
        }
        let sol = Generator::new(&entry.problem).lie_coefficients(order)?;
        checks.push(residual_check("catalog", entry.name, &sol, &entry.problem)?);
        let bound = (100.0 * COMPARE_OFFSET.powi(order as i32 + 1)).max(1e-12);
        let check = match numeric::compare_series_to_reference(&sol, &entry, &[COMPARE_OFFSET], &SAMPLE_POINTS) {
            Ok(table) => {
                let err = table.max_error();
                Check::new(
                    "catalog",
                    format!("{}/reference", entry.name),
                    err <= bound,
                    format!("max error {err:.3e} at t - a = {COMPARE_OFFSET} (bound {bound:.1e})"),
                )
                .with_norm(err)
            }
            Err(e) => Check::new("catalog", format!("{}/reference", entry.name), false, e.to_string()),
        };
        checks.push(check);
    }
    Ok(checks)
}

pub const INVERSE_TOLERANCE: f64 = 1e-11;

/// Chronological-vs-exponential equivalence and the matrix product-integral
/// checks.
pub fn dyson_suite(order: u32, seed: u64) -> Result<Vec<Check>, OracleError> {
    let mut checks = Vec::new();
    for entry in numeric::catalog().into_iter().filter(CatalogEntry::has_polynomial_rhs) {
        let report = dyson::chron_equiv_check(&entry.problem, order)?;
        let mismatch = report.first_mismatch().map(|m| m.order);
        let detail = match mismatch {
            None => format!("Picard iterate equals Lie series through order {order}"),
            Some(n) => format!("mismatch at order {n}"),
        };
        checks.push(
            Check::new("dyson", format!("{}/chron-equiv", entry.name), report.passed(), detail)
                .with_failing_order(mismatch),
        );
    }
    let paths = [
        ("airy/inverse-identity", dyson::airy_path(0.0, 1.0, 1e-2)?),
        (
            "random4/inverse-identity",
            dyson::random_smooth_path(4, seed, 0.0, 1.0, 1e-2)?,
        ),
    ];
    for (name, path) in paths {
        let r = dyson::check_inverse_identity(&path).residual;
        checks.push(
            Check::new(
                "dyson",
                name,
                r <= INVERSE_TOLERANCE,
                format!("|E^-1 E - I|_inf = {r:.3e} (bound {INVERSE_TOLERANCE:.0e})"),
            )
            .with_norm(r),
        );
    }
    let nil = dyson::nilpotent_path(0.0, 1.0, 10)?;
    let expected = dyson::Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let err = dyson::inf_norm(&(dyson::matrix_texp(&nil) - expected));
    checks.push(Check::new("dyson", "nilpotent/exact", err <= 1e-12, format!("error {err:.3e}")).with_norm(err));
    let random = dyson::random_smooth_path(4, seed, 0.0, 1.0, 0.1)?;
    let points = dyson::product_integral_errors(&random, &PRODUCT_STEPS)?;
    let slope = dyson::loglog_slope(&points);
    checks.push(
        Check::new(
            "dyson",
            "product-integral/order",
            (slope - 2.0).abs() <= 0.3,
            format!("self-convergence slope {slope:.3} (expected 2 +/- 0.3)"),
        )
        .with_norm(slope),
    );
    Ok(checks)
}

/// Step counts on [0, 1] giving h from 1e-1 down to 1e-3.
pub const PRODUCT_STEPS: [usize; 5] = [10, 30, 100, 300, 1000];

/// Test functions for the homomorphism check of each catalog entry.
pub fn homomorphism_functions(entry: &CatalogEntry) -> Vec<Expr> {
    let p = &entry.problem;
    let c = Expr::sym(p.initial_symbol(0));
    if p.kind == ProblemKind::Pde {
        if matches!(entry.name, "heat" | "burgers") {
            vec![c * Expr::jet(0, &[1])]
        } else {
            Vec::new()
        }
    } else {
        vec![c.clone().pow(2), c.pow(3)]
    }
}

pub fn homomorphism_suite(order: u32) -> Result<Vec<Check>, SeriesError> {
    let mut checks = Vec::new();
    for entry in numeric::catalog() {
        let names = Names::initial_data(&entry.problem);
        let generator = Generator::new(&entry.problem);
        for g in homomorphism_functions(&entry) {
            let report = generator.check_homomorphism(&g, order)?;
            let mismatch = report.first_mismatch();
            let shown = render(&g, &names);
            let detail = match mismatch {
                None => format!("series of {shown} equals {shown} of the series through order {order}"),
                Some(n) => format!("{shown}: mismatch at order {n}"),
            };
            checks.push(
                Check::new(
                    "homomorphism",
                    format!("{}/{shown}", entry.name),
                    report.passed(),
                    detail,
                )
                .with_failing_order(mismatch),
            );
        }
    }
    Ok(checks)
}

fn spec_checks(path: &Path, p: &ProblemSpec, order: u32, reference: Option<&str>) -> Result<Vec<Check>, CliOutcome> {
    let label = path
        .file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    let sol = solve_problem(p, order)?;
    let mut checks = Vec::new();
    let (equation, against) = match reference {
        Some(name) => {
            let entry = numeric::catalog_entry(name)
                .ok_or_else(|| CliOutcome::fail(EXIT_INPUT, format!("no catalog entry named `{name}`")))?;
            (entry.problem, format!("against {name}: "))
        }
        None => (p.clone(), String::new()),
    };
    let mut check = residual_check("spec", &label, &sol, &equation).map_err(series_failure)?;
    check.detail.insert_str(0, &against);
    checks.push(check);
    if p.kind != ProblemKind::Pde {
        match dyson::chron_equiv_check(p, order) {
            Ok(report) => {
                let mismatch = report.first_mismatch().map(|m| m.order);
                checks.push(
                    Check::new(
                        "spec",
                        format!("{label}/chron-equiv"),
                        report.passed(),
                        "Picard iterate vs Lie series",
                    )
                    .with_failing_order(mismatch),
                );
            }
            Err(OracleError::NonPolynomialRhs { .. }) => {}
            Err(e) => return Err(oracle_failure(e)),
        }
    }
    Ok(checks)
}

fn cmd_verify(a: &VerifyArgs) -> Result<CliOutcome, CliOutcome> {
    let order = a.order.resolve(DEFAULT_ORDER)?;
    let mut checks = Vec::new();
    let mut problem = None;
    if let Some(path) = &a.spec {
        let p = load(path)?;
        let n = a.order.resolve(p.order)?;
        checks.extend(spec_checks(path, &p, n, a.reference.as_deref())?);
        problem = Some(p);
    } else if a.reference.is_some() {
        return Err(CliOutcome::fail(EXIT_INPUT, "--reference needs a problem document"));
    }
    let suite = match (a.suite, &a.spec) {
        (Some(s), _) => Some(s),
        (None, None) => Some(Suite::All),
        (None, Some(_)) => None,
    };
    if let Some(s) = suite {
        if matches!(s, Suite::Catalog | Suite::All) {
            checks.extend(catalog_suite(order).map_err(series_failure)?);
        }
        if matches!(s, Suite::Dyson | Suite::All) {
            checks.extend(dyson_suite(order, a.seed).map_err(oracle_failure)?);
        }
        if matches!(s, Suite::Homomorphism | Suite::All) {
            checks.extend(homomorphism_suite(order).map_err(series_failure)?);
        }
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let out = match a.format {
        Format::Text => {
            let mut s = String::new();
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                writeln!(s, "{status}  {}/{}  {}", c.suite, c.name, c.detail).unwrap();
            }
            writeln!(s, "summary: {} passed, {failed} failed", checks.len() - failed).unwrap();
            s
        }
        Format::Json => {
            let reports = serde_json::to_value(&checks).expect("reports serialize");
            match &problem {
                Some(p) => document(p, json!([]), json!([]), reports),
                None => {
                    let mut s =
                        serde_json::to_string_pretty(&json!({ "reports": reports })).expect("json output serializes");
                    s.push('\n');
                    s
                }
            }
        }
    };
    let code = if failed == 0 { EXIT_OK } else { EXIT_VERIFY };
    Ok(CliOutcome {
        code,
        stdout: out,
        stderr: if failed == 0 {
            String::new()
        } else {
            format!("{failed} check(s) failed\n")
        },
    })
}
