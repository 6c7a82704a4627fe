//! Lie series for the ordinary-exponent form of the solution.
//!
//! The generator acts on expressions in the initial-data jets c_k, D^α c_k,
//! the space variables, free parameters and the auxiliary time s:
//!
//! ```text
//! A[e] = Σ_j Σ_α D_x^α(F_j(s, x, c, …)) · ∂e/∂(D^α c_j) − ∂e/∂s
//! ```
//!
//! For ODEs and systems only α = 0 occurs. For evolution PDEs this is the
//! evolutionary prolongation of F, which is what the functional-derivative
//! generator reduces to on local expressions. The solution coefficients are
//! `C_{i,n} = (−1)^n / n! · (Aⁿ c_i)|_{s=a}`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use thiserror::Error;

use crate::expr::{Bindings, Expr, ExprError, MultiIndex, Poly, Rational, Symbol};
use crate::parser::ProblemSpec;
use crate::series::{compose, TruncSeries};

pub const DEFAULT_TERM_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("expression blow-up: {terms} terms at order {order} exceeds the budget of {budget}")]
    ExpressionBlowup { order: u32, terms: usize, budget: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("incompatible problems: {0}")]
    Incompatible(String),
}

/// The derivation A of the ordinary-exponent form, with the time symbol of
/// each right-hand side renamed to the auxiliary symbol s.
#[derive(Debug, Clone)]
pub struct Generator {
    problem: ProblemSpec,
    rhs: Vec<Poly>,
    budget: usize,
}

pub fn build_generator(p: &ProblemSpec) -> Generator {
    Generator::new(p)
}

/// D^α F_j, memoized per (j, α).
#[derive(Default)]
struct ProlongationCache {
    entries: HashMap<(usize, MultiIndex), Poly>,
}

impl ProlongationCache {
    fn get(&mut self, rhs: &[Poly], field: usize, alpha: &MultiIndex) -> Poly {
        if let Some(p) = self.entries.get(&(field, alpha.clone())) {
            return p.clone();
        }
        let value = match alpha.split_first() {
            None => rhs[field].clone(),
            Some((j, rest)) => total_derivative_poly(&self.get(rhs, field, &rest), j),
        };
        self.entries.insert((field, alpha.clone()), value.clone());
        value
    }
}

/// D_{x_j} e = ∂e/∂x_j + Σ D^{α+e_j} c_k · ∂e/∂(D^α c_k).
pub fn total_derivative(e: &Expr, space_index: usize) -> Result<Expr, ExprError> {
    Ok(total_derivative_poly(&Poly::from_expr(e)?, space_index).to_expr())
}

fn total_derivative_poly(e: &Poly, j: usize) -> Poly {
    let mut out = e.diff(&Symbol::Space(j));
    for s in e.symbols() {
        if let Symbol::Jet { field, alpha } = &s {
            // Jets without direction j are constant along it.
            let Some(next) = alpha.shifted(j) else { continue };
            let d = e.diff(&s);
            out.add_assign(&d.mul(&Poly::sym(Symbol::jet(*field, next))));
        }
    }
    out
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::from(1), |acc, k| acc * BigInt::from(k))
}

/// (−1)^n / n!
fn lie_weight(n: u32) -> Rational {
    let sign = if n.is_multiple_of(2) { 1 } else { -1 };
    Rational::new(BigInt::from(sign), factorial(n))
}

impl Generator {
    pub fn new(p: &ProblemSpec) -> Self {
        let rhs = p
            .rhs
            .iter()
            .map(|f| {
                Poly::from_expr(f)
                    .and_then(|q| q.subst(&Symbol::Time, &Expr::aux()))
                    .expect("validated right-hand sides normalize")
            })
            .collect();
        Generator {
            problem: p.clone(),
            rhs,
            budget: DEFAULT_TERM_BUDGET,
        }
    }

    pub fn with_term_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    /// The F_j with t renamed to s.
    pub fn substituted_rhs(&self) -> Vec<Expr> {
        self.rhs.iter().map(Poly::to_expr).collect()
    }

    /// A[e]. `e` must not contain the time symbol.
    pub fn apply(&self, e: &Expr) -> Result<Expr, ExprError> {
        debug_assert!(!e.contains(&Symbol::Time), "apply expects expressions in s, not t");
        let p = Poly::from_expr(e)?;
        Ok(self.apply_poly(&p, &mut ProlongationCache::default()).to_expr())
    }

    fn apply_poly(&self, e: &Poly, cache: &mut ProlongationCache) -> Poly {
        let mut out = e.diff(&Symbol::Aux).neg();
        for s in e.symbols() {
            if let Symbol::Jet { field, alpha } = &s {
                let de = e.diff(&s);
                if de.is_zero() {
                    continue;
                }
                let flow = cache.get(&self.rhs, *field, alpha);
                out.add_assign(&flow.mul(&de));
            }
        }
        out
    }

    /// Coefficients (−1)^n/n!·(Aⁿ seed)|_{s=a} for n = 0..=order.
    fn iterate(&self, seed: Poly, order: u32) -> Result<Vec<Expr>, SeriesError> {
        let a = &self.problem.initial_time;
        let mut cache = ProlongationCache::default();
        let mut cur = seed;
        let mut out = Vec::with_capacity(order as usize + 1);
        for n in 0..=order {
            if n > 0 {
                cur = self.apply_poly(&cur, &mut cache);
                if cur.len() > self.budget {
                    return Err(SeriesError::ExpressionBlowup {
                        order: n,
                        terms: cur.len(),
                        budget: self.budget,
                    });
                }
            }
            let at_a = cur.subst(&Symbol::Aux, a)?;
            out.push(at_a.scale(&lie_weight(n)).to_expr());
        }
        Ok(out)
    }

    pub fn lie_coefficients(&self, order: u32) -> Result<SeriesSolution, SeriesError> {
        let coeffs = (0..self.problem.field_count())
            .map(|k| self.iterate(Poly::sym(self.problem.initial_symbol(k)), order))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SeriesSolution {
            problem: self.problem.clone(),
            expansion_point: self.problem.initial_time.clone(),
            order,
            coeffs,
        })
    }

    /// Series of E⁻¹ applied to the function `g` of the jets.
    pub fn apply_series_to_function(&self, g: &Expr, order: u32) -> Result<Vec<Expr>, SeriesError> {
        self.iterate(Poly::from_expr(g)?, order)
    }

    /// Compares the series of `g` (seeded recursion) against `g` evaluated on
    /// the truncated solution series, order by order.
    pub fn check_homomorphism(&self, g: &Expr, order: u32) -> Result<HomomorphismReport, SeriesError> {
        let direct = self.apply_series_to_function(g, order)?;
        let sol = self.lie_coefficients(order)?;
        let composed = sol.compose(g)?;
        let orders = direct
            .into_iter()
            .zip(composed)
            .enumerate()
            .map(|(n, (lhs, rhs))| OrderComparison {
                order: n as u32,
                equal: lhs == rhs,
                lhs,
                rhs,
            })
            .collect();
        Ok(HomomorphismReport {
            function: g.clone(),
            orders,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderComparison {
    pub order: u32,
    pub lhs: Expr,
    pub rhs: Expr,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomomorphismReport {
    pub function: Expr,
    pub orders: Vec<OrderComparison>,
}

impl HomomorphismReport {
    pub fn passed(&self) -> bool {
        self.orders.iter().all(|o| o.equal)
    }

    pub fn first_mismatch(&self) -> Option<u32> {
        self.orders.iter().find(|o| !o.equal).map(|o| o.order)
    }
}

/// Truncated Taylor solution u_i ≈ Σ_n C_{i,n} (t − a)^n.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    pub problem: ProblemSpec,
    pub expansion_point: Expr,
    pub order: u32,
    /// `coeffs[i][n]` = C_{i,n}.
    pub coeffs: Vec<Vec<Expr>>,
}

impl SeriesSolution {
    /// Horner evaluation at time `t`. `initial_data` binds every jet in the
    /// coefficients plus any parameters, space variables and, for a symbolic
    /// initial time, `Symbol::InitialTime`.
    pub fn eval(&self, t: f64, initial_data: &Bindings) -> Result<Vec<f64>, ExprError> {
        let a = self.expansion_point.eval_num(initial_data)?;
        let tau = t - a;
        self.coeffs
            .iter()
            .map(|cs| {
                let mut acc = 0.0;
                for c in cs.iter().rev() {
                    acc = acc * tau + c.eval_num(initial_data)?;
                }
                Ok(acc)
            })
            .collect()
    }

    /// Σ_n C_{i,n} (t − a)^n as an expression in t.
    pub fn polynomial(&self, field: usize) -> Result<Expr, ExprError> {
        let tau = Expr::time() - self.expansion_point.clone();
        let terms = self.coeffs[field]
            .iter()
            .enumerate()
            .map(|(n, c)| c.clone() * tau.clone().pow(n as i64))
            .collect();
        Expr::Add(terms).normalize()
    }

    /// Series of every jet D^α c_k, computed by total differentiation of the
    /// coefficients.
    fn jet_series(&self, field: usize, alpha: &MultiIndex) -> Result<TruncSeries, ExprError> {
        let mut coeffs = self.coeffs[field]
            .iter()
            .map(Poly::from_expr)
            .collect::<Result<Vec<_>, _>>()?;
        for (j, &k) in alpha.as_slice().iter().enumerate() {
            for _ in 0..k {
                coeffs = coeffs.iter().map(|c| total_derivative_poly(c, j)).collect();
            }
        }
        Ok(TruncSeries::new(coeffs, self.order as usize + 1))
    }

    fn series_lookup(&self, g: &Poly, with_time: bool) -> Result<BTreeMap<Symbol, TruncSeries>, ExprError> {
        let len = self.order as usize + 1;
        let mut map = BTreeMap::new();
        for s in g.symbols() {
            match &s {
                Symbol::Jet { field, alpha } if *field < self.coeffs.len() => {
                    let series = self.jet_series(*field, alpha)?;
                    map.insert(s.clone(), series);
                }
                Symbol::Time if with_time => {
                    let a = Poly::from_expr(&self.expansion_point)?;
                    map.insert(Symbol::Time, TruncSeries::new(vec![a, Poly::one()], len));
                }
                _ => {}
            }
        }
        Ok(map)
    }

    /// g(series of the jets), truncated at the solution order.
    pub fn compose(&self, g: &Expr) -> Result<Vec<Expr>, ExprError> {
        let p = Poly::from_expr(g)?;
        let map = self.series_lookup(&p, false)?;
        let out = compose(&p, self.order as usize + 1, &|s| map.get(s).cloned())?;
        Ok(out.coeffs().iter().map(Poly::to_expr).collect())
    }
}

/// Residual ∂u/∂t + F(t, x, u, jets of u) of a truncated series, as
/// coefficients of (t − a)^n for n = 0..order−1.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `residuals[i][n]`
    pub residuals: Vec<Vec<Expr>>,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.residuals.iter().flatten().all(Expr::is_zero)
    }

    /// Smallest series order n ≥ 1 whose coefficient C_n is inconsistent with
    /// the equation, i.e. the residual at (t − a)^{n−1} is nonzero.
    pub fn first_failing_order(&self) -> Option<u32> {
        self.residuals
            .iter()
            .filter_map(|r| r.iter().position(|e| !e.is_zero()))
            .min()
            .map(|n| n as u32 + 1)
    }
}

/// Checks the series against the equation of `equation` (usually the
/// problem that produced it).
pub fn residual(sol: &SeriesSolution, equation: &ProblemSpec) -> Result<ResidualReport, SeriesError> {
    if equation.field_count() != sol.problem.field_count() || equation.space_dim() != sol.problem.space_dim() {
        return Err(SeriesError::Incompatible(
            "field count or space dimension differs".into(),
        ));
    }
    if equation.initial_time != sol.expansion_point {
        return Err(SeriesError::Incompatible("initial times differ".into()));
    }
    let len = sol.order as usize;
    let mut residuals = Vec::new();
    for (i, f) in equation.rhs.iter().enumerate() {
        let p = Poly::from_expr(f)?;
        let map = sol.series_lookup(&p, true)?;
        let composed = compose(&p, sol.order as usize + 1, &|s| map.get(s).cloned())?;
        let mut row = Vec::with_capacity(len);
        for n in 0..len {
            let du = Poly::from_expr(&sol.coeffs[i][n + 1])?.scale(&Rational::from_integer(BigInt::from(n + 1)));
            row.push(du.add(&composed.coeffs()[n]).to_expr());
        }
        residuals.push(row);
    }
    Ok(ResidualReport { residuals })
}

/// Convenience: build the generator and the series at the problem's order.
pub fn solve(p: &ProblemSpec) -> Result<SeriesSolution, SeriesError> {
    Generator::new(p).lie_coefficients(p.order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_problem;

    fn ode(rhs: &str, initial: &str) -> ProblemSpec {
        parse_problem(&format!(
            r#"{{"kind":"ode","time":{{"name":"t","initial":"{initial}"}},"fields":["u"],"rhs":{{"u":"{rhs}"}},"order":6}}"#
        ))
        .unwrap()
    }

    fn pde(rhs: &str) -> ProblemSpec {
        parse_problem(&format!(
            r#"{{"kind":"pde","time":{{"name":"t","initial":"0"}},"space":["x"],"fields":["u"],"rhs":{{"u":"{rhs}"}},"order":6}}"#
        ))
        .unwrap()
    }

    fn c() -> Expr {
        Expr::jet(0, &[])
    }

    fn n(e: Expr) -> Expr {
        e.normalize().unwrap()
    }

    #[test]
    fn generator_substitutes_time() {
        assert_eq!(Generator::new(&ode("u^2", "0")).substituted_rhs(), vec![n(c().pow(2))]);
        assert_eq!(
            Generator::new(&ode("t*u", "0")).substituted_rhs(),
            vec![n(Expr::aux() * c())]
        );
        let g = Generator::new(&pde("u*u_x"));
        assert_eq!(g.substituted_rhs(), vec![n(Expr::jet(0, &[0]) * Expr::jet(0, &[1]))]);
    }

    #[test]
    fn total_derivative_examples() {
        let c = Expr::jet(0, &[0]);
        let cx = Expr::jet(0, &[1]);
        let cxx = Expr::jet(0, &[2]);
        assert_eq!(total_derivative(&c, 0).unwrap(), cx);
        assert_eq!(
            total_derivative(&(c.clone() * cx.clone()), 0).unwrap(),
            n(cx.clone().pow(2) + c.clone() * cxx)
        );
        let x = Expr::space(0);
        assert_eq!(total_derivative(&(x.clone() * c.clone()), 0).unwrap(), n(c + x * cx));
    }

    #[test]
    fn riccati_generator_powers() {
        let g = Generator::new(&ode("u^2", "0"));
        let e1 = g.apply(&c()).unwrap();
        assert_eq!(e1, n(c().pow(2)));
        let e2 = g.apply(&e1).unwrap();
        assert_eq!(e2, n(Expr::int(2) * c().pow(3)));
        assert_eq!(g.apply(&e2).unwrap(), n(Expr::int(6) * c().pow(4)));
    }

    #[test]
    fn explicit_time_generator() {
        let g = Generator::new(&ode("t*u", "0"));
        let e1 = g.apply(&c()).unwrap();
        assert_eq!(e1, n(Expr::aux() * c()));
        assert_eq!(g.apply(&e1).unwrap(), n(Expr::aux().pow(2) * c() - c()));
    }

    #[test]
    fn burgers_generator() {
        let g = Generator::new(&pde("u*u_x"));
        let (c, cx, cxx) = (Expr::jet(0, &[0]), Expr::jet(0, &[1]), Expr::jet(0, &[2]));
        let e1 = g.apply(&c).unwrap();
        assert_eq!(e1, n(c.clone() * cx.clone()));
        let e2 = g.apply(&e1).unwrap();
        assert_eq!(e2, n(Expr::int(2) * c.clone() * cx.pow(2) + c.pow(2) * cxx));
    }

    fn column(p: &ProblemSpec, order: u32) -> Vec<Expr> {
        Generator::new(p).lie_coefficients(order).unwrap().coeffs[0].clone()
    }

    #[test]
    fn coefficient_examples() {
        let expected: Vec<Expr> = vec![c(), -c().pow(2), c().pow(3), -c().pow(4)]
            .into_iter()
            .map(n)
            .collect();
        assert_eq!(column(&ode("u^2", "0"), 3), expected);

        let expected: Vec<Expr> = vec![c(), c(), c() / Expr::int(2), c() / Expr::int(6)]
            .into_iter()
            .map(n)
            .collect();
        assert_eq!(column(&ode("-u", "0"), 3), expected);

        let cxx = Expr::jet(0, &[2]);
        let c0 = Expr::jet(0, &[0]);
        let expected: Vec<Expr> = vec![c0, cxx, Expr::jet(0, &[4]) / Expr::int(2)]
            .into_iter()
            .map(n)
            .collect();
        assert_eq!(column(&pde("-u_xx"), 2), expected);
    }

    #[test]
    fn harmonic_system_coefficients() {
        let p = parse_problem(r#"{"kind":"system","time":{"name":"t","initial":"0"},"fields":["u","v"],"rhs":{"u":"-v","v":"u"},"order":3}"#).unwrap();
        let sol = solve(&p).unwrap();
        let (c1, c2) = (Expr::jet(0, &[]), Expr::jet(1, &[]));
        let expected: Vec<Expr> = vec![c1.clone(), c2.clone(), -c1 / Expr::int(2), -c2 / Expr::int(6)]
            .into_iter()
            .map(n)
            .collect();
        assert_eq!(sol.coeffs[0], expected);
    }

    #[test]
    fn eval_series_examples() {
        let sol = Generator::new(&ode("u^2", "0")).lie_coefficients(8).unwrap();
        let mut b = Bindings::new();
        b.insert(Symbol::initial(0, 0), 1.0);
        assert!((sol.eval(0.1, &b).unwrap()[0] - 1.0 / 1.1).abs() <= 1e-8);
        assert_eq!(sol.eval(0.0, &b).unwrap()[0], 1.0);

        let sol = Generator::new(&pde("-u_xx")).lie_coefficients(6).unwrap();
        let x: f64 = 0.3;
        let mut b = Bindings::new();
        for k in 0..=12u32 {
            let v = match k % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            };
            b.insert(Symbol::jet(0, MultiIndex::new(vec![k])), v);
        }
        let got = sol.eval(0.05, &b).unwrap()[0];
        assert!((got - (-0.05f64).exp() * x.sin()).abs() <= 1e-10);
    }

    #[test]
    fn series_of_functions() {
        let g = Generator::new(&ode("-u", "0"));
        let got = g.apply_series_to_function(&c().pow(2), 3).unwrap();
        let expected: Vec<Expr> = vec![
            c().pow(2),
            Expr::int(2) * c().pow(2),
            Expr::int(2) * c().pow(2),
            Expr::rational(4, 3) * c().pow(2),
        ]
        .into_iter()
        .map(n)
        .collect();
        assert_eq!(got, expected);

        let g = Generator::new(&ode("u^2", "0"));
        assert_eq!(
            g.apply_series_to_function(&c(), 5).unwrap(),
            g.lie_coefficients(5).unwrap().coeffs[0]
        );
        let sol = g.lie_coefficients(4).unwrap();
        assert_eq!(
            g.apply_series_to_function(&c().pow(3), 4).unwrap(),
            sol.compose(&c().pow(3)).unwrap()
        );
    }

    #[test]
    fn homomorphism_holds() {
        for p in [ode("-u", "0"), ode("u^2", "0"), ode("-t*u", "a")] {
            for g in [c().pow(2), c().pow(3)] {
                let r = Generator::new(&p).check_homomorphism(&g, 5).unwrap();
                assert!(r.passed(), "{:?}", r.first_mismatch());
            }
        }
        let heat = pde("-u_xx");
        let g = Expr::jet(0, &[0]) * Expr::jet(0, &[1]);
        assert!(Generator::new(&heat).check_homomorphism(&g, 3).unwrap().passed());
    }

    #[test]
    fn residual_vanishes_and_detects_sign_flip() {
        let p = ode("u^2", "0");
        let sol = solve(&p).unwrap();
        assert!(residual(&sol, &p).unwrap().passed());
        let flipped = ode("-u^2", "0");
        let wrong = solve(&flipped).unwrap();
        let r = residual(&wrong, &p).unwrap();
        assert_eq!(r.first_failing_order(), Some(1));
    }

    #[test]
    fn budget_is_enforced() {
        let g = Generator::new(&pde("u*u_x")).with_term_budget(3);
        assert!(matches!(
            g.lie_coefficients(6),
            Err(SeriesError::ExpressionBlowup { .. })
        ));
    }

    #[test]
    fn symbolic_initial_time_coefficients() {
        // u' = t u with u(a) = c: u''(a) = (a^2 + 1) c.
        let sol = solve(&ode("-t*u", "a")).unwrap();
        let a = Expr::sym(Symbol::InitialTime);
        assert_eq!(sol.coeffs[0][1], n(a.clone() * c()));
        assert_eq!(sol.coeffs[0][2], n((a.pow(2) * c() + c()) / Expr::int(2)));
    }
}
