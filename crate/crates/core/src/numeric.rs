//! Reference numerics: classical RK4 for ODE systems and a small catalog of
//! problems with closed-form (or characteristic, or numeric-only) solutions.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dyson::loglog_slope;
use crate::expr::{Bindings, Expr, ExprError, MultiIndex, Symbol};
use crate::lie::SeriesSolution;
use crate::parser::{parse_expression, parse_problem, Names, ProblemKind, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("non-finite value at t = {t}")]
    NonFiniteValue { t: f64 },
    #[error("RK4 needs an ode or system problem")]
    UnsupportedKind,
    #[error("expected {expected} initial values, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("characteristic iteration did not converge at x = {x}")]
    NoConvergence { x: f64 },
    #[error("entry and series solution describe different problems")]
    Mismatch,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Classical RK4 on u' = −F(t, u) from the problem's initial time to `t_end`.
/// `env` binds parameters and, when the initial time is symbolic, `a`.
pub fn rk4_solve(
    p: &ProblemSpec,
    env: &Bindings,
    initial: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<Vec<f64>, NumericError> {
    if p.kind == ProblemKind::Pde {
        return Err(NumericError::UnsupportedKind);
    }
    if initial.len() != p.field_count() {
        return Err(NumericError::WrongArity {
            expected: p.field_count(),
            got: initial.len(),
        });
    }
    let steps = steps.max(1);
    let a = p.initial_time.eval_num(env)?;
    let h = (t_end - a) / steps as f64;
    let mut bindings = env.clone();
    let mut rate = |t: f64, u: &[f64]| -> Result<Vec<f64>, NumericError> {
        bindings.insert(Symbol::Time, t);
        for (i, v) in u.iter().enumerate() {
            bindings.insert(p.initial_symbol(i), *v);
        }
        p.rhs.iter().map(|f| Ok(-f.eval_num(&bindings)?)).collect()
    };
    let axpy = |u: &[f64], k: &[f64], s: f64| -> Vec<f64> { u.iter().zip(k).map(|(x, y)| x + s * y).collect() };
    let mut u = initial.to_vec();
    for step in 0..steps {
        let t = a + step as f64 * h;
        let k1 = rate(t, &u)?;
        let k2 = rate(t + h / 2.0, &axpy(&u, &k1, h / 2.0))?;
        let k3 = rate(t + h / 2.0, &axpy(&u, &k2, h / 2.0))?;
        let k4 = rate(t + h, &axpy(&u, &k3, h))?;
        for i in 0..u.len() {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(NumericError::NonFiniteValue { t: t + h });
        }
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExactSolution {
    /// u_i as expressions in t, the initial time and the initial data (ODE)
    /// or in t and x for the entry's initial functions (PDE).
    Closed(Vec<Expr>),
    /// Scalar first-order PDE u_t + u·u_x = 0 solved pointwise from
    /// u = g(x − (t − a)u).
    Characteristics,
    NumericOnly,
}

/// Initial data used when the entry is evaluated numerically.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Values(Vec<f64>),
    /// Functions of the space variables, one per field.
    Functions(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub problem: ProblemSpec,
    pub exact: ExactSolution,
    pub initial: InitialData,
    /// Values for parameters and a symbolic initial time.
    pub env: Bindings,
    /// Largest t − a for which the reference is trustworthy.
    pub validity: Option<f64>,
    pub note: &'static str,
}

struct Raw {
    name: &'static str,
    doc: &'static str,
    exact: Option<&'static [&'static str]>,
    characteristics: bool,
    initial: &'static [&'static str],
    env: &'static [(&'static str, f64)],
    validity: Option<f64>,
    note: &'static str,
}

const RAW: &[Raw] = &[
    Raw {
        name: "exponential",
        doc: r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"-u"},"order":6}"#,
        exact: Some(&["c*exp(t)"]),
        characteristics: false,
        initial: &["0.7"],
        env: &[],
        validity: None,
        note: "u' = u",
    },
    Raw {
        name: "riccati",
        doc: r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"u^2"},"order":6}"#,
        exact: Some(&["c/(1 + c*t)"]),
        characteristics: false,
        initial: &["1"],
        env: &[],
        validity: Some(1.0),
        note: "pole at t - a = -1/c",
    },
    Raw {
        name: "explicit_time",
        doc: r#"{"kind":"ode","time":{"name":"t","initial":"a"},"fields":["u"],"rhs":{"u":"-t*u"},"order":6}"#,
        exact: Some(&["c*exp(t^2/2 - a^2/2)"]),
        characteristics: false,
        initial: &["0.8"],
        env: &[("a", 0.3)],
        validity: None,
        note: "symbolic initial time",
    },
    Raw {
        name: "harmonic",
        doc: r#"{"kind":"system","time":{"name":"t","initial":"0"},"fields":["u","v"],"rhs":{"u":"-v","v":"u"},"order":6}"#,
        exact: Some(&["c1*cos(t) + c2*sin(t)", "c2*cos(t) - c1*sin(t)"]),
        characteristics: false,
        initial: &["1", "0.5"],
        env: &[],
        validity: None,
        note: "u' = v, v' = -u",
    },
    Raw {
        name: "lotka_volterra",
        doc: r#"{"kind":"system","time":{"name":"t","initial":"0"},"fields":["p","q"],"rhs":{"p":"-2/3*p + 4/3*p*q","q":"q - p*q"},"order":6}"#,
        exact: None,
        characteristics: false,
        initial: &["0.9", "0.9"],
        env: &[],
        validity: None,
        note: "numeric reference only (RK4)",
    },
    Raw {
        name: "transport",
        doc: r#"{"kind":"pde","time":{"name":"t","initial":"0"},"space":["x"],"fields":["u"],"rhs":{"u":"u_x"},"order":6}"#,
        exact: Some(&["cos(x - t)"]),
        characteristics: false,
        initial: &["cos(x)"],
        env: &[],
        validity: None,
        note: "u(t, x) = c(x - (t - a))",
    },
    Raw {
        name: "heat",
        doc: r#"{"kind":"pde","time":{"name":"t","initial":"0"},"space":["x"],"fields":["u"],"rhs":{"u":"-u_xx"},"order":6}"#,
        exact: Some(&["exp(-t)*sin(x)"]),
        characteristics: false,
        initial: &["sin(x)"],
        env: &[],
        validity: None,
        note: "separation of variables",
    },
    Raw {
        name: "burgers",
        doc: r#"{"kind":"pde","time":{"name":"t","initial":"0"},"space":["x"],"fields":["u"],"rhs":{"u":"u*u_x"},"order":6}"#,
        exact: None,
        characteristics: true,
        initial: &["sin(x)"],
        env: &[],
        validity: Some(1.0),
        note: "characteristics; valid for t - a < 1/max|c'|",
    },
];

fn build(raw: &Raw) -> CatalogEntry {
    let problem = parse_problem(raw.doc).expect("catalog problems are valid");
    let names = Names::initial_data(&problem);
    let parse = |s: &str| parse_expression(s, &names).expect("catalog expressions parse");
    let exact = match (raw.exact, raw.characteristics) {
        (Some(list), _) => ExactSolution::Closed(list.iter().map(|s| parse(s)).collect()),
        (None, true) => ExactSolution::Characteristics,
        (None, false) => ExactSolution::NumericOnly,
    };
    let initial = if problem.kind == ProblemKind::Pde {
        InitialData::Functions(raw.initial.iter().map(|s| parse(s)).collect())
    } else {
        InitialData::Values(
            raw.initial
                .iter()
                .map(|s| s.parse().expect("numeric literal"))
                .collect(),
        )
    };
    let env = raw
        .env
        .iter()
        .map(|(n, v)| {
            let sym = if problem.initial_name.as_deref() == Some(*n) {
                Symbol::InitialTime
            } else {
                Symbol::param(*n)
            };
            (sym, *v)
        })
        .collect();
    CatalogEntry {
        name: raw.name,
        problem,
        exact,
        initial,
        env,
        validity: raw.validity,
        note: raw.note,
    }
}

/// The fixed reference catalog.
pub fn catalog() -> Vec<CatalogEntry> {
    RAW.iter().map(build).collect()
}

pub fn catalog_entry(name: &str) -> Option<CatalogEntry> {
    RAW.iter().find(|r| r.name == name).map(build)
}

impl CatalogEntry {
    pub fn has_polynomial_rhs(&self) -> bool {
        self.problem.kind != ProblemKind::Pde && self.problem.rhs.iter().all(is_polynomial_in_state)
    }

    pub fn initial_time(&self) -> Result<f64, ExprError> {
        self.problem.initial_time.eval_num(&self.env)
    }

    /// Bindings for the initial data at space point `x`: every jet occurring
    /// in `exprs` is bound to the corresponding derivative of the initial
    /// function (PDE) or to the initial value (ODE).
    pub fn initial_bindings<'a>(
        &self,
        exprs: impl IntoIterator<Item = &'a Expr>,
        x: &[f64],
    ) -> Result<Bindings, ExprError> {
        let mut b = self.env.clone();
        for (j, v) in x.iter().enumerate() {
            b.insert(Symbol::Space(j), *v);
        }
        let mut syms = std::collections::BTreeSet::new();
        for e in exprs {
            e.collect_symbols(&mut syms);
        }
        for s in syms {
            if let Symbol::Jet { field, alpha } = &s {
                let value = match &self.initial {
                    InitialData::Values(v) => v[*field],
                    InitialData::Functions(g) => jet_of(&g[*field], alpha)?.eval_num(&b)?,
                };
                b.insert(s.clone(), value);
            }
        }
        Ok(b)
    }

    /// Reference value of every field at t = a + tau.
    pub fn reference(&self, tau: f64, x: &[f64]) -> Result<Vec<f64>, NumericError> {
        let a = self.initial_time()?;
        match &self.exact {
            ExactSolution::Closed(us) => {
                let mut b = self.initial_bindings(us, x)?;
                b.insert(Symbol::Time, a + tau);
                Ok(us.iter().map(|u| u.eval_num(&b)).collect::<Result<_, _>>()?)
            }
            ExactSolution::Characteristics => {
                let InitialData::Functions(g) = &self.initial else {
                    return Err(NumericError::Mismatch);
                };
                Ok(vec![burgers_point(&g[0], tau, x[0])?])
            }
            ExactSolution::NumericOnly => {
                let InitialData::Values(c) = &self.initial else {
                    return Err(NumericError::Mismatch);
                };
                if tau == 0.0 {
                    return Ok(c.clone());
                }
                // h⁴ error far below any series error at the offsets used.
                let steps = ((tau.abs() / 1e-3).ceil() as usize).max(200);
                rk4_solve(&self.problem, &self.env, c, a + tau, steps)
            }
        }
    }

    /// Symbolic check that a closed-form solution satisfies the initial
    /// condition and ∂u/∂t + F = 0. `None` when there is no closed form.
    pub fn check_exact(&self) -> Result<Option<bool>, ExprError> {
        let ExactSolution::Closed(us) = &self.exact else {
            return Ok(None);
        };
        let p = &self.problem;
        let mut initial_map = BTreeMap::new();
        initial_map.insert(Symbol::Time, p.initial_time.clone());
        for (i, u) in us.iter().enumerate() {
            let at_a = u.subst_many(&initial_map)?;
            let expected = match &self.initial {
                InitialData::Functions(g) => g[i].clone(),
                InitialData::Values(_) => Expr::sym(p.initial_symbol(i)),
            };
            if at_a != expected.normalize()? {
                return Ok(Some(false));
            }
        }
        for (i, f) in p.rhs.iter().enumerate() {
            let mut map = BTreeMap::new();
            for s in f.symbols() {
                if let Symbol::Jet { field, alpha } = &s {
                    map.insert(s.clone(), jet_of(&us[*field], alpha)?);
                }
            }
            let res = (us[i].diff(&Symbol::Time)? + f.subst_many(&map)?).normalize()?;
            if !res.is_zero() {
                return Ok(Some(false));
            }
        }
        Ok(Some(true))
    }
}

fn is_polynomial_in_state(f: &Expr) -> bool {
    match f {
        Expr::Const(_) | Expr::Sym(_) => true,
        Expr::Pow(b, n) => *n >= 0 && is_polynomial_in_state(b),
        Expr::Mul(v) | Expr::Add(v) => v.iter().all(is_polynomial_in_state),
        Expr::Func(_, a) => !a.contains_where(&|s| matches!(s, Symbol::Time | Symbol::Jet { .. })),
    }
}

/// D^α g for a function of the space variables.
fn jet_of(g: &Expr, alpha: &MultiIndex) -> Result<Expr, ExprError> {
    let mut e = g.clone();
    for (j, &k) in alpha.as_slice().iter().enumerate() {
        for _ in 0..k {
            e = e.diff(&Symbol::Space(j))?;
        }
    }
    Ok(e)
}

/// Solves u = g(x − τu) by fixed-point iteration (a contraction while
/// τ·max|g'| < 1) to 1e-14.
fn burgers_point(g: &Expr, tau: f64, x: f64) -> Result<f64, NumericError> {
    let mut b = Bindings::new();
    let mut at = |y: f64| -> Result<f64, ExprError> {
        b.insert(Symbol::Space(0), y);
        g.eval_num(&b)
    };
    let mut u = at(x)?;
    for _ in 0..10_000 {
        let next = at(x - tau * u)?;
        if (next - u).abs() <= 1e-14 {
            return Ok(next);
        }
        u = next;
    }
    Err(NumericError::NoConvergence { x })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub offset: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.max_error).fold(0.0, f64::max)
    }

    /// Log-log slope of error against offset; zero-error rows are skipped.
    pub fn slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.offset > 0.0 && r.max_error > 0.0)
            .map(|r| (r.offset, r.max_error))
            .collect();
        loglog_slope(&pts)
    }
}

/// Max absolute error (over fields and sample points) between the series and
/// the entry's reference at each t − a in `t_offsets`. For ODE entries
/// `points` is ignored and the entry's initial values are used.
pub fn compare_series_to_reference(
    sol: &SeriesSolution,
    entry: &CatalogEntry,
    t_offsets: &[f64],
    points: &[f64],
) -> Result<ErrorTable, NumericError> {
    if sol.problem.rhs != entry.problem.rhs || sol.problem.initial_time != entry.problem.initial_time {
        return Err(NumericError::Mismatch);
    }
    let a = entry.initial_time()?;
    let xs: Vec<Vec<f64>> = if entry.problem.kind == ProblemKind::Pde {
        points.iter().map(|x| vec![*x]).collect()
    } else {
        vec![Vec::new()]
    };
    let mut rows = Vec::new();
    for &tau in t_offsets {
        let mut worst: f64 = 0.0;
        for x in &xs {
            let b = entry.initial_bindings(sol.coeffs.iter().flatten(), x)?;
            let series = sol.eval(a + tau, &b)?;
            let reference = entry.reference(tau, x)?;
            for (s, r) in series.iter().zip(&reference) {
                worst = worst.max((s - r).abs());
            }
        }
        rows.push(ErrorRow {
            offset: tau,
            max_error: worst,
        });
    }
    Ok(ErrorTable { rows })
}
