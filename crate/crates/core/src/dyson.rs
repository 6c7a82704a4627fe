//! Independent oracles for the time-ordered (chronological) side.
//!
//! * Symbolic Picard iteration `u ← c − ∫_a^t F(τ, u(τ)) dτ`, whose iterated
//!   integrals are the anti-chronologically ordered exponential applied to
//!   `c`. [`chron_equiv_check`] compares it with the Lie series order by
//!   order.
//! * Numeric product integrals for linear matrix generators: the ordered
//!   exponential `E` (later factors on the left) and its inverse `E⁻¹`
//!   (earlier factors on the left, negated generator).

use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{Expr, ExprError, Poly, Rational, Symbol};
use crate::lie::{Generator, SeriesError};
use crate::parser::{ProblemKind, ProblemSpec};
use crate::series::{compose, TruncSeries};

pub type Matrix = DMatrix<f64>;

pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("rhs of field {field} is not polynomial in time and fields")]
    NonPolynomialRhs { field: usize },
    #[error("Picard iteration supports ode and system problems only")]
    UnsupportedKind,
    #[error("expression blow-up: {terms} terms exceeds the budget of {budget}")]
    ExpressionBlowup { terms: usize, budget: usize },
    #[error("invalid matrix path: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// k-th Picard iterate, as coefficients of (t − a)^n.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardIterate {
    pub problem: ProblemSpec,
    pub iterations: u32,
    pub expansion_point: Expr,
    /// `coeffs[i][n]`; trailing zeros trimmed.
    pub coeffs: Vec<Vec<Expr>>,
}

impl PicardIterate {
    /// Coefficient of (t − a)^n, zero beyond the stored degree.
    pub fn coeff(&self, field: usize, n: usize) -> Expr {
        self.coeffs[field].get(n).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn polynomial(&self, field: usize) -> Result<Expr, ExprError> {
        let tau = Expr::time() - self.expansion_point.clone();
        let terms = self.coeffs[field]
            .iter()
            .enumerate()
            .map(|(n, c)| c.clone() * tau.clone().pow(n as i64))
            .collect();
        Expr::Add(terms).normalize()
    }
}

/// Polynomial degree contributed by one symbol, or `None` when the symbol is
/// a constant of the iteration.
fn symbol_degree(s: &Symbol, degrees: &[usize]) -> Option<usize> {
    match s {
        Symbol::Time => Some(1),
        Symbol::Jet { field, .. } => Some(degrees[*field]),
        _ => None,
    }
}

fn check_polynomial(rhs: &[Poly]) -> Result<(), OracleError> {
    for (field, p) in rhs.iter().enumerate() {
        for (m, _) in p.terms() {
            for (atom, power) in m.factors() {
                let varying = atom.contains_where(&|s| matches!(s, Symbol::Time | Symbol::Jet { .. }));
                let ok = match atom {
                    Expr::Sym(_) => !varying || *power > 0,
                    _ => !varying,
                };
                if !ok {
                    return Err(OracleError::NonPolynomialRhs { field });
                }
            }
        }
    }
    Ok(())
}

fn degree_bound(rhs: &[Poly], degrees: &[usize]) -> usize {
    let mut best = 0;
    for p in rhs {
        for (m, _) in p.terms() {
            let mut d = 0;
            for (atom, power) in m.factors() {
                if let Expr::Sym(s) = atom {
                    if let Some(k) = symbol_degree(s, degrees) {
                        d += k * (*power as usize);
                    }
                }
            }
            best = best.max(d);
        }
    }
    best + 1
}

pub const DEFAULT_PICARD_BUDGET: usize = 1_000_000;

fn picard(p: &ProblemSpec, k: u32, max_order: Option<usize>) -> Result<PicardIterate, OracleError> {
    if p.kind == ProblemKind::Pde {
        return Err(OracleError::UnsupportedKind);
    }
    let rhs = p.rhs.iter().map(Poly::from_expr).collect::<Result<Vec<_>, _>>()?;
    check_polynomial(&rhs)?;
    let a = Poly::from_expr(&p.initial_time)?;
    let n_fields = p.field_count();
    let mut current: Vec<Vec<Poly>> = (0..n_fields).map(|i| vec![Poly::sym(p.initial_symbol(i))]).collect();
    let mut degrees = vec![0usize; n_fields];
    for _ in 0..k {
        let mut len = degree_bound(&rhs, &degrees);
        if let Some(cap) = max_order {
            len = len.min(cap + 1);
        }
        let lookup = |s: &Symbol| -> Option<TruncSeries> {
            match s {
                Symbol::Time => Some(TruncSeries::new(vec![a.clone(), Poly::one()], len)),
                Symbol::Jet { field, .. } => Some(TruncSeries::new(current[*field].clone(), len)),
                _ => None,
            }
        };
        let mut next = Vec::with_capacity(n_fields);
        for (i, f) in rhs.iter().enumerate() {
            // Integrand coefficients 0..len-1 give u up to degree len.
            let integrand = compose(f, len, &lookup)?;
            let mut u = vec![Poly::sym(p.initial_symbol(i))];
            for (n, g) in integrand.coeffs().iter().enumerate() {
                if max_order.is_some_and(|cap| n + 1 > cap) {
                    break;
                }
                u.push(g.scale(&Rational::new(BigInt::from(-1), BigInt::from(n + 1))));
            }
            while u.len() > 1 && u.last().is_some_and(Poly::is_zero) {
                u.pop();
            }
            let terms: usize = u.iter().map(Poly::len).sum();
            if terms > DEFAULT_PICARD_BUDGET {
                return Err(OracleError::ExpressionBlowup {
                    terms,
                    budget: DEFAULT_PICARD_BUDGET,
                });
            }
            next.push(u);
        }
        degrees = next.iter().map(|u| u.len() - 1).collect();
        current = next;
    }
    Ok(PicardIterate {
        problem: p.clone(),
        iterations: k,
        expansion_point: p.initial_time.clone(),
        coeffs: current
            .into_iter()
            .map(|u| u.iter().map(Poly::to_expr).collect())
            .collect(),
    })
}

/// Full (untruncated) k-th Picard iterate with exact τ-integration.
pub fn picard_iterate(p: &ProblemSpec, k: u32) -> Result<PicardIterate, OracleError> {
    picard(p, k, None)
}

/// k-th Picard iterate with every polynomial truncated beyond
/// (t − a)^max_order. Coefficients up to `max_order` equal those of the full
/// iterate, since integration only raises degrees.
pub fn picard_iterate_truncated(p: &ProblemSpec, k: u32, max_order: usize) -> Result<PicardIterate, OracleError> {
    picard(p, k, Some(max_order))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceEntry {
    pub field: usize,
    pub order: u32,
    pub chronological: Expr,
    pub exponential: Expr,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronEquivReport {
    pub entries: Vec<EquivalenceEntry>,
}

impl ChronEquivReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.equal)
    }

    pub fn first_mismatch(&self) -> Option<&EquivalenceEntry> {
        self.entries.iter().find(|e| !e.equal)
    }
}

/// Compares the N-th Picard iterate (time-ordered form) with the Lie series
/// (ordinary-exponent form) coefficient by coefficient for n = 0..=N.
pub fn chron_equiv_check(p: &ProblemSpec, order: u32) -> Result<ChronEquivReport, OracleError> {
    let chron = picard_iterate_truncated(p, order, order as usize)?;
    let lie = Generator::new(p).lie_coefficients(order)?;
    let mut entries = Vec::new();
    for field in 0..p.field_count() {
        for n in 0..=order {
            let chronological = chron.coeff(field, n as usize);
            let exponential = lie.coeffs[field][n as usize].clone();
            entries.push(EquivalenceEntry {
                field,
                order: n,
                equal: chronological == exponential,
                chronological,
                exponential,
            });
        }
    }
    Ok(ChronEquivReport { entries })
}

pub type Sampler = Arc<dyn Fn(f64) -> Matrix + Send + Sync>;

/// Uniform grid a = τ₀ < … < τ_K = t with samples L(τ).
#[derive(Clone)]
pub struct MatrixPath {
    dim: usize,
    start: f64,
    end: f64,
    steps: usize,
    sampler: Sampler,
}

impl std::fmt::Debug for MatrixPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixPath")
            .field("dim", &self.dim)
            .field("start", &self.start)
            .field("end", &self.end)
            .field("steps", &self.steps)
            .finish()
    }
}

impl MatrixPath {
    pub fn new(dim: usize, start: f64, end: f64, steps: usize, sampler: Sampler) -> Result<Self, OracleError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(OracleError::InvalidPath(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if !start.is_finite() || !end.is_finite() || end <= start || steps == 0 {
            return Err(OracleError::InvalidPath(
                "need start < end and at least one step".into(),
            ));
        }
        Ok(MatrixPath {
            dim,
            start,
            end,
            steps,
            sampler,
        })
    }

    /// Grid with step `h`, which must divide `end − start` (up to rounding).
    pub fn with_step(dim: usize, start: f64, end: f64, h: f64, sampler: Sampler) -> Result<Self, OracleError> {
        if h.is_nan() || h <= 0.0 {
            return Err(OracleError::InvalidPath("step must be positive".into()));
        }
        let k = ((end - start) / h).round();
        if k < 1.0 || ((end - start) - k * h).abs() > 1e-9 * (end - start).abs().max(1.0) {
            return Err(OracleError::InvalidPath(format!(
                "step {h} does not divide the interval"
            )));
        }
        MatrixPath::new(dim, start, end, k as usize, sampler)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn sample(&self, tau: f64) -> Matrix {
        let m = (self.sampler)(tau);
        assert_eq!(
            m.shape(),
            (self.dim, self.dim),
            "sampler returned a matrix of the wrong shape"
        );
        m
    }

    /// Same sampler on a different interval or grid.
    pub fn rescaled(&self, end: f64, steps: usize) -> Result<Self, OracleError> {
        MatrixPath::new(self.dim, self.start, end, steps, self.sampler.clone())
    }

    fn midpoint(&self, k: usize) -> f64 {
        self.start + (k as f64 + 0.5) * self.step()
    }
}

pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor
/// series. Terms are summed until they stop changing the partial sum, which
/// keeps the truncation error well under 1e-13 relative.
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let norm = inf_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut sum = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if inf_norm(&term) <= f64::EPSILON * 1e-3 * inf_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// E ≈ exp(h L(τ_K^mid)) ⋯ exp(h L(τ_1^mid)).
pub fn matrix_texp(path: &MatrixPath) -> Matrix {
    let h = path.step();
    let mut e = Matrix::identity(path.dim, path.dim);
    for k in 0..path.steps {
        e = expm(&(path.sample(path.midpoint(k)) * h)) * e;
    }
    e
}

/// E⁻¹ ≈ exp(−h L(τ_1^mid)) ⋯ exp(−h L(τ_K^mid)).
pub fn matrix_texp_inverse(path: &MatrixPath) -> Matrix {
    let h = path.step();
    let mut e = Matrix::identity(path.dim, path.dim);
    for k in 0..path.steps {
        e *= expm(&(path.sample(path.midpoint(k)) * -h));
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseIdentityReport {
    /// ‖E⁻¹E − I‖_∞
    pub residual: f64,
}

pub fn check_inverse_identity(path: &MatrixPath) -> InverseIdentityReport {
    let prod = matrix_texp_inverse(path) * matrix_texp(path);
    let residual = inf_norm(&(prod - Matrix::identity(path.dim, path.dim)));
    InverseIdentityReport { residual }
}

/// Least-squares slope of log(error) against log(h).
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(h, e)| (h.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Self-convergence of the product integral: for each step count K, the
/// error ‖E_K − E_{2K}‖_∞ against h = (t − a)/K.
pub fn product_integral_errors(path: &MatrixPath, step_counts: &[usize]) -> Result<Vec<(f64, f64)>, OracleError> {
    step_counts
        .iter()
        .map(|&k| {
            let coarse = path.rescaled(path.end, k)?;
            let fine = path.rescaled(path.end, 2 * k)?;
            let err = inf_norm(&(matrix_texp(&coarse) - matrix_texp(&fine)));
            Ok((coarse.step(), err))
        })
        .collect()
}

/// L(τ) = [[0, 1], [−τ, 0]], the first-order form of the Airy equation.
pub fn airy_path(start: f64, end: f64, h: f64) -> Result<MatrixPath, OracleError> {
    let sampler: Sampler = Arc::new(|tau| Matrix::from_row_slice(2, 2, &[0.0, 1.0, -tau, 0.0]));
    MatrixPath::with_step(2, start, end, h, sampler)
}

/// L(τ) = A + τB + sin(2τ)C with seeded entries in [−1/2, 1/2].
pub fn random_smooth_path(dim: usize, seed: u64, start: f64, end: f64, h: f64) -> Result<MatrixPath, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Matrix::from_fn(dim, dim, |_, _| rng.gen_range(-0.5..0.5));
    let (a, b, c) = (draw(), draw(), draw());
    let sampler: Sampler = Arc::new(move |tau| &a + &b * tau + &c * (2.0 * tau).sin());
    MatrixPath::with_step(dim, start, end, h, sampler)
}

/// Constant L = [[0, 1], [0, 0]].
pub fn nilpotent_path(start: f64, end: f64, steps: usize) -> Result<MatrixPath, OracleError> {
    let sampler: Sampler = Arc::new(|_| Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
    MatrixPath::new(2, start, end, steps, sampler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_problem;

    fn riccati() -> ProblemSpec {
        parse_problem(r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"u^2"},"order":6}"#)
            .unwrap()
    }

    fn n(e: Expr) -> Expr {
        e.normalize().unwrap()
    }

    #[test]
    fn picard_riccati_iterates() {
        let c = Expr::jet(0, &[]);
        let p = riccati();
        let k0 = picard_iterate(&p, 0).unwrap();
        assert_eq!(k0.coeffs[0], vec![c.clone()]);
        let k1 = picard_iterate(&p, 1).unwrap();
        assert_eq!(k1.coeffs[0], vec![c.clone(), n(-c.clone().pow(2))]);
        let k2 = picard_iterate(&p, 2).unwrap();
        let expected: Vec<Expr> = vec![
            c.clone(),
            -c.clone().pow(2),
            c.clone().pow(3),
            Expr::rational(-1, 3) * c.clone().pow(4),
        ]
        .into_iter()
        .map(n)
        .collect();
        assert_eq!(k2.coeffs[0], expected);
    }

    #[test]
    fn truncated_matches_full_prefix() {
        let p = riccati();
        let full = picard_iterate(&p, 4).unwrap();
        let cut = picard_iterate_truncated(&p, 4, 4).unwrap();
        for n in 0..=4 {
            assert_eq!(full.coeff(0, n), cut.coeff(0, n));
        }
        assert_eq!(full.coeffs[0].len(), 16);
    }

    #[test]
    fn non_polynomial_rhs_rejected() {
        let p = parse_problem(
            r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"sin(u)"},"order":3}"#,
        )
        .unwrap();
        assert!(matches!(
            picard_iterate(&p, 2),
            Err(OracleError::NonPolynomialRhs { field: 0 })
        ));
        let p = parse_problem(
            r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"1/u"},"order":3}"#,
        )
        .unwrap();
        assert!(matches!(
            picard_iterate(&p, 2),
            Err(OracleError::NonPolynomialRhs { .. })
        ));
        // Constant non-polynomial factors are fine.
        let p = parse_problem(
            r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"sqrt(2)*u"},"order":3}"#,
        )
        .unwrap();
        assert!(chron_equiv_check(&p, 4).unwrap().passed());
    }

    #[test]
    fn nilpotent_exponential_is_exact() {
        for steps in [1, 7, 100] {
            let path = nilpotent_path(0.0, 1.0, steps).unwrap();
            let e = matrix_texp(&path);
            assert!(inf_norm(&(e - Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]))) <= 1e-12);
            let einv = matrix_texp_inverse(&path);
            assert!(inf_norm(&(einv - Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]))) <= 1e-12);
        }
    }

    #[test]
    fn zero_generator_gives_identity() {
        let path = MatrixPath::new(3, 0.0, 1.0, 10, Arc::new(|_| Matrix::zeros(3, 3))).unwrap();
        assert_eq!(matrix_texp(&path), Matrix::identity(3, 3));
        assert_eq!(matrix_texp_inverse(&path), Matrix::identity(3, 3));
        assert_eq!(check_inverse_identity(&path).residual, 0.0);
    }

    #[test]
    fn expm_matches_rotation() {
        let theta = 3.7;
        let a = Matrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let e = expm(&a);
        let r = Matrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        assert!(inf_norm(&(e - r)) < 1e-13);
    }

    #[test]
    fn path_validation() {
        let s: Sampler = Arc::new(|_| Matrix::zeros(17, 17));
        assert!(MatrixPath::new(17, 0.0, 1.0, 10, s).is_err());
        assert!(airy_path(0.0, 1.0, 0.3).is_err());
        assert!(airy_path(0.0, 1.0, -0.1).is_err());
        assert!(airy_path(1.0, 0.0, 0.1).is_err());
    }
}
