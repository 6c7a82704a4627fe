//! Immutable symbolic expressions over exact rationals.
//!
//! An [`Expr`] is a plain tree. Arithmetic through the operator traits only
//! builds trees; [`Expr::normalize`] maps a tree to its canonical
//! representative, which is what equality checks compare. Internally the
//! canonical form is computed through [`Poly`], a sparse sum of monomials
//! over atoms (symbols, function applications and inverted sums).

mod poly;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

pub(crate) use poly::Poly;

/// Exact rational coefficient. Always reduced with a positive denominator.
pub type Rational = BigRational;

/// Numeric values bound to symbols for [`Expr::eval_num`].
pub type Bindings = HashMap<Symbol, f64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound symbol {0:?}")]
    UnboundSymbol(Symbol),
    #[error("domain error: {0}")]
    DomainError(String),
}

/// Orders of spatial differentiation, one entry per space variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(orders: Vec<u32>) -> Self {
        MultiIndex(orders)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total differentiation order |α|.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// α + e_j, or `None` when the index has no direction `j`.
    pub fn shifted(&self, j: usize) -> Option<Self> {
        let mut out = self.0.clone();
        *out.get_mut(j)? += 1;
        Some(MultiIndex(out))
    }

    /// α − e_j for the first direction with a nonzero entry.
    pub(crate) fn split_first(&self) -> Option<(usize, Self)> {
        let j = self.0.iter().position(|&k| k > 0)?;
        let mut rest = self.0.clone();
        rest[j] -= 1;
        Some((j, MultiIndex(rest)))
    }
}

/// Symbol classes. A `Jet` with the all-zero multi-index is the bare
/// initial-data symbol c_k; for ODE problems the multi-index is empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Time,
    Aux,
    InitialTime,
    Space(usize),
    Jet { field: usize, alpha: MultiIndex },
    Param(String),
}

impl Symbol {
    pub fn jet(field: usize, alpha: MultiIndex) -> Self {
        Symbol::Jet { field, alpha }
    }

    /// The initial-data symbol c_field in a problem with `dim` space variables.
    pub fn initial(field: usize, dim: usize) -> Self {
        Symbol::Jet {
            field,
            alpha: MultiIndex::zero(dim),
        }
    }

    pub fn param(name: impl Into<String>) -> Self {
        Symbol::Param(name.into())
    }

    pub fn is_jet(&self) -> bool {
        matches!(self, Symbol::Jet { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Ln, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn eval(self, x: f64) -> Result<f64, ExprError> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Ln if x > 0.0 => Ok(x.ln()),
            Func::Ln => Err(ExprError::DomainError(format!("ln({x})"))),
            Func::Sqrt if x >= 0.0 => Ok(x.sqrt()),
            Func::Sqrt => Err(ExprError::DomainError(format!("sqrt({x})"))),
        }
    }
}

/// Expression tree. The variant order is the node-kind rank used by the
/// canonical ordering of `Add`/`Mul` children.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(Rational),
    Sym(Symbol),
    Pow(Box<Expr>, i64),
    Mul(Vec<Expr>),
    Add(Vec<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Const(Rational::from_integer(BigInt::from(n)))
    }

    pub fn rational(num: i64, den: i64) -> Expr {
        Expr::Const(Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn sym(s: Symbol) -> Expr {
        Expr::Sym(s)
    }

    pub fn time() -> Expr {
        Expr::Sym(Symbol::Time)
    }

    pub fn aux() -> Expr {
        Expr::Sym(Symbol::Aux)
    }

    pub fn space(j: usize) -> Expr {
        Expr::Sym(Symbol::Space(j))
    }

    pub fn jet(field: usize, alpha: &[u32]) -> Expr {
        Expr::Sym(Symbol::jet(field, MultiIndex::new(alpha.to_vec())))
    }

    pub fn param(name: &str) -> Expr {
        Expr::Sym(Symbol::param(name))
    }

    pub fn pow(self, n: i64) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Box::new(arg))
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self {
            Expr::Const(q) => Some(q),
            _ => None,
        }
    }

    /// True only for the literal constant zero; normalize first for a
    /// semantic test.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(q) if q.is_zero())
    }

    /// Number of top-level summands.
    pub fn term_count(&self) -> usize {
        match self {
            Expr::Add(v) => v.len(),
            e if e.is_zero() => 0,
            _ => 1,
        }
    }

    pub fn normalize(&self) -> Result<Expr, ExprError> {
        Ok(Poly::from_expr(self)?.to_expr())
    }

    /// Partial derivative with every symbol (jets included) treated as an
    /// independent coordinate. The result is normalized.
    pub fn diff(&self, sym: &Symbol) -> Result<Expr, ExprError> {
        Ok(Poly::from_expr(self)?.diff(sym).to_expr())
    }

    /// Replaces every occurrence of `sym` by `value`, then normalizes.
    pub fn subst(&self, sym: &Symbol, value: &Expr) -> Result<Expr, ExprError> {
        self.replace(&|s| (s == sym).then(|| value.clone())).normalize()
    }

    /// Simultaneous substitution of several symbols.
    pub fn subst_many(&self, map: &BTreeMap<Symbol, Expr>) -> Result<Expr, ExprError> {
        self.replace(&|s| map.get(s).cloned()).normalize()
    }

    fn replace(&self, f: &dyn Fn(&Symbol) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Sym(s) => f(s).unwrap_or_else(|| self.clone()),
            Expr::Pow(b, n) => Expr::Pow(Box::new(b.replace(f)), *n),
            Expr::Mul(v) => Expr::Mul(v.iter().map(|e| e.replace(f)).collect()),
            Expr::Add(v) => Expr::Add(v.iter().map(|e| e.replace(f)).collect()),
            Expr::Func(g, a) => Expr::Func(*g, Box::new(a.replace(f))),
        }
    }

    pub fn eval_num(&self, bindings: &Bindings) -> Result<f64, ExprError> {
        match self {
            Expr::Const(q) => Ok(rational_to_f64(q)),
            Expr::Sym(s) => bindings
                .get(s)
                .copied()
                .ok_or_else(|| ExprError::UnboundSymbol(s.clone())),
            Expr::Pow(b, n) => {
                let x = b.eval_num(bindings)?;
                if x == 0.0 && *n < 0 {
                    return Err(ExprError::DomainError("zero raised to a negative power".into()));
                }
                Ok(match i32::try_from(*n) {
                    Ok(k) => x.powi(k),
                    Err(_) => x.powf(*n as f64),
                })
            }
            Expr::Mul(v) => v.iter().try_fold(1.0, |acc, e| Ok(acc * e.eval_num(bindings)?)),
            Expr::Add(v) => v.iter().try_fold(0.0, |acc, e| Ok(acc + e.eval_num(bindings)?)),
            Expr::Func(f, a) => f.eval(a.eval_num(bindings)?),
        }
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    pub(crate) fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Expr::Const(_) => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Pow(b, _) => b.collect_symbols(out),
            Expr::Mul(v) | Expr::Add(v) => v.iter().for_each(|e| e.collect_symbols(out)),
            Expr::Func(_, a) => a.collect_symbols(out),
        }
    }

    pub fn contains(&self, sym: &Symbol) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Sym(s) => s == sym,
            Expr::Pow(b, _) => b.contains(sym),
            Expr::Mul(v) | Expr::Add(v) => v.iter().any(|e| e.contains(sym)),
            Expr::Func(_, a) => a.contains(sym),
        }
    }

    pub fn contains_where(&self, pred: &dyn Fn(&Symbol) -> bool) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Sym(s) => pred(s),
            Expr::Pow(b, _) => b.contains_where(pred),
            Expr::Mul(v) | Expr::Add(v) => v.iter().any(|e| e.contains_where(pred)),
            Expr::Func(_, a) => a.contains_where(pred),
        }
    }

    /// Highest |α| over jet symbols, 0 when there are none.
    pub fn max_jet_order(&self) -> u32 {
        self.symbols()
            .iter()
            .filter_map(|s| match s {
                Symbol::Jet { alpha, .. } => Some(alpha.order()),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

pub(crate) fn rational_to_f64(q: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    // Huge numerator/denominator: scale down before dividing.
    let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(1000);
    let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Rational> for Expr {
    fn from(q: Rational) -> Self {
        Expr::Const(q)
    }
}

impl From<Symbol> for Expr {
    fn from(s: Symbol) -> Self {
        Expr::Sym(s)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, rhs])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, -rhs])
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(vec![self, rhs])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Mul(vec![self, rhs.pow(-1)])
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(q) => Expr::Const(-q),
            e => Expr::Mul(vec![Expr::int(-1), e]),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::render(self, &crate::parser::Names::generic()))
    }
}

pub(crate) fn is_one(q: &Rational) -> bool {
    q.is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c() -> Expr {
        Expr::jet(0, &[])
    }

    fn cx() -> Expr {
        Expr::jet(0, &[1])
    }

    fn c0() -> Expr {
        Expr::jet(0, &[0])
    }

    fn n(e: Expr) -> Expr {
        e.normalize().unwrap()
    }

    #[test]
    fn additive_identity() {
        let x = Expr::space(0);
        assert_eq!(n(x.clone() + Expr::zero()), x);
    }

    #[test]
    fn constant_folding() {
        let e = Expr::int(2) * (c() + c());
        assert_eq!(n(e), Expr::Mul(vec![Expr::int(4), c()]));
    }

    #[test]
    fn commutative_merge() {
        let e = c0() * cx() + cx() * c0();
        let expected = Expr::Mul(vec![Expr::int(2), c0(), cx()]);
        assert_eq!(n(e), expected);
        // Term-multiset oracle: both summands carry the same factor multiset.
        let mut a = vec![c0(), cx()];
        let mut b = vec![cx(), c0()];
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn power_rule() {
        let e = c().pow(2);
        assert_eq!(e.diff(&Symbol::initial(0, 0)).unwrap(), n(Expr::int(2) * c()));
    }

    #[test]
    fn diff_linear_in_aux() {
        let e = Expr::aux() * c();
        assert_eq!(e.diff(&Symbol::Aux).unwrap(), c());
    }

    #[test]
    fn jets_are_independent() {
        let e = c0() * cx();
        let d = e.diff(&Symbol::jet(0, MultiIndex::new(vec![1]))).unwrap();
        assert_eq!(d, c0());
        // Finite-difference oracle on eval_num.
        let mut b = Bindings::new();
        b.insert(Symbol::jet(0, MultiIndex::new(vec![0])), 1.3);
        let h = 1e-5;
        let f = |v: f64| {
            let mut bb = b.clone();
            bb.insert(Symbol::jet(0, MultiIndex::new(vec![1])), v);
            e.eval_num(&bb).unwrap()
        };
        let fd = (f(0.7 + h) - f(0.7 - h)) / (2.0 * h);
        assert!((fd - d.eval_num(&b).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn substitution_examples() {
        let s = Symbol::Aux;
        let a = Expr::sym(Symbol::InitialTime);
        let e = Expr::aux().pow(2) * c();
        assert_eq!(e.subst(&s, &a).unwrap(), n(a.clone().pow(2) * c()));
        let e = c() - Expr::aux() * c().pow(2);
        assert_eq!(e.subst(&s, &Expr::zero()).unwrap(), c());
        let e = Expr::apply(Func::Exp, Expr::aux());
        let folded = e.subst(&s, &Expr::zero()).unwrap();
        assert_eq!(folded, Expr::one());
        let mut b = Bindings::new();
        b.insert(Symbol::Aux, 0.0);
        assert_eq!(e.eval_num(&b).unwrap(), folded.eval_num(&Bindings::new()).unwrap());
    }

    #[test]
    fn eval_examples() {
        let mut b = Bindings::new();
        b.insert(Symbol::initial(0, 0), 3.0);
        assert_eq!(c().pow(2).eval_num(&b).unwrap(), 9.0);
        let mut b = Bindings::new();
        b.insert(Symbol::Time, 0.0);
        assert_eq!(Expr::apply(Func::Sin, Expr::time()).eval_num(&b).unwrap(), 0.0);

        let cxx = Expr::jet(0, &[2]);
        let e = Expr::int(2) * c0() * cx().pow(2) + c0().pow(2) * cxx;
        let mut b = Bindings::new();
        b.insert(Symbol::jet(0, MultiIndex::new(vec![0])), 1.0);
        b.insert(Symbol::jet(0, MultiIndex::new(vec![1])), 2.0);
        b.insert(Symbol::jet(0, MultiIndex::new(vec![2])), -1.0);
        assert_eq!(e.eval_num(&b).unwrap(), 7.0);
    }

    #[test]
    fn eval_errors() {
        assert!(matches!(
            c().eval_num(&Bindings::new()),
            Err(ExprError::UnboundSymbol(_))
        ));
        let e = Expr::apply(Func::Ln, Expr::param("k"));
        let mut b = Bindings::new();
        b.insert(Symbol::param("k"), -1.0);
        assert!(matches!(e.eval_num(&b), Err(ExprError::DomainError(_))));
        let e = Expr::apply(Func::Sqrt, Expr::param("k"));
        assert!(matches!(e.eval_num(&b), Err(ExprError::DomainError(_))));
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = Expr::one() / (c() - c());
        assert_eq!(e.normalize(), Err(ExprError::DivisionByZero));
        assert_eq!(
            (Expr::one() / c()).subst(&Symbol::initial(0, 0), &Expr::zero()),
            Err(ExprError::DivisionByZero)
        );
    }

    #[test]
    fn pow_exponents_normalized() {
        assert_eq!(n(c().pow(1)), c());
        assert_eq!(n(c().pow(0)), Expr::one());
        assert_eq!(n(c().pow(2) * c().pow(-2)), Expr::one());
    }

    #[test]
    fn rational_functions_share_atoms() {
        let lhs = Expr::one() / (Expr::int(2) + Expr::int(2) * c());
        let rhs = Expr::rational(1, 2) / (Expr::one() + c());
        assert_eq!(n(lhs), n(rhs));
        let lhs = c() / (c() + c().pow(2));
        let rhs = Expr::one() / (c() + Expr::one());
        assert_eq!(n(lhs), n(rhs));
    }

    #[test]
    fn function_derivatives() {
        let x = Symbol::Space(0);
        let xe = Expr::space(0);
        let cases = [
            (Func::Sin, Expr::apply(Func::Cos, xe.clone())),
            (Func::Cos, -Expr::apply(Func::Sin, xe.clone())),
            (Func::Exp, Expr::apply(Func::Exp, xe.clone())),
            (Func::Ln, xe.clone().pow(-1)),
            (
                Func::Sqrt,
                Expr::rational(1, 2) * Expr::apply(Func::Sqrt, xe.clone()).pow(-1),
            ),
        ];
        for (f, expected) in cases {
            assert_eq!(Expr::apply(f, xe.clone()).diff(&x).unwrap(), n(expected), "{f:?}");
        }
        // Chain rule through a nested argument.
        let e = Expr::apply(Func::Sin, xe.clone().pow(2));
        let expected = Expr::int(2) * xe.clone() * Expr::apply(Func::Cos, xe.clone().pow(2));
        assert_eq!(e.diff(&x).unwrap(), n(expected));
    }

    #[test]
    fn sqrt_of_perfect_square_folds() {
        assert_eq!(n(Expr::apply(Func::Sqrt, Expr::rational(9, 4))), Expr::rational(3, 2));
        assert!(matches!(
            n(Expr::apply(Func::Sqrt, Expr::int(2))),
            Expr::Func(Func::Sqrt, _)
        ));
    }

    #[test]
    fn huge_rationals_convert() {
        let big = Rational::new(BigInt::from(10).pow(400), BigInt::from(3) * BigInt::from(10).pow(400));
        assert!((rational_to_f64(&big) - 1.0 / 3.0).abs() < 1e-15);
        let big = Rational::new(-BigInt::from(10).pow(400), BigInt::from(10).pow(399));
        assert!((rational_to_f64(&big) + 10.0).abs() < 1e-12);
    }
}
