//! Canonical sum-of-monomials form.
//!
//! Atoms are normalized `Sym`, `Func` or `Add` expressions. An `Add` atom
//! only ever carries a negative exponent (positive powers of sums are
//! expanded) and is stored primitive: no common Sym/Func factor across its
//! terms and leading coefficient 1. Expanding products and folding constants
//! makes equal Laurent polynomials in the atoms identical.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::{is_one, Expr, ExprError, Func, Rational, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub(crate) struct Monomial(Vec<(Expr, i64)>);

impl Monomial {
    pub(crate) fn one() -> Self {
        Monomial(Vec::new())
    }

    fn atom(e: Expr, p: i64) -> Self {
        Monomial(vec![(e, p)])
    }

    pub(crate) fn factors(&self) -> &[(Expr, i64)] {
        &self.0
    }

    pub(crate) fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let p = a[i].1 + b[j].1;
                    if p != 0 {
                        out.push((a[i].0.clone(), p));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    fn without(&self, idx: usize, new_power: i64) -> Monomial {
        let mut v = self.0.clone();
        if new_power == 0 {
            v.remove(idx);
        } else {
            v[idx].1 = new_power;
        }
        Monomial(v)
    }

    fn to_factor_exprs(&self) -> Vec<Expr> {
        self.0
            .iter()
            .map(|(a, p)| {
                if *p == 1 {
                    a.clone()
                } else {
                    Expr::Pow(Box::new(a.clone()), *p)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub(crate) fn zero() -> Self {
        Poly::default()
    }

    pub(crate) fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub(crate) fn constant(q: Rational) -> Self {
        let mut p = Poly::zero();
        p.add_term(Monomial::one(), q);
        p
    }

    pub(crate) fn sym(s: Symbol) -> Self {
        Poly::atom(Expr::Sym(s))
    }

    fn atom(e: Expr) -> Self {
        Poly::from_monomial(Monomial::atom(e, 1), Rational::one())
    }

    pub(crate) fn from_monomial(m: Monomial, c: Rational) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn len(&self) -> usize {
        self.terms.len()
    }

    pub(crate) fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub(crate) fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Poly) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub(crate) fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub(crate) fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub(crate) fn neg(&self) -> Poly {
        self.scale(&-Rational::one())
    }

    pub(crate) fn scale(&self, q: &Rational) -> Poly {
        if q.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect(),
        }
    }

    pub(crate) fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub(crate) fn pow(&self, n: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub(crate) fn powi(&self, n: i64) -> Result<Poly, ExprError> {
        let k = u32::try_from(n.unsigned_abs())
            .map_err(|_| ExprError::DomainError(format!("exponent {n} out of range")))?;
        if n >= 0 {
            Ok(self.pow(k))
        } else {
            Ok(self.invert()?.pow(k))
        }
    }

    /// Inverse of a monomial, re-expanding any sum atom whose exponent turns
    /// positive.
    fn invert_monomial(m: &Monomial, c: &Rational) -> Poly {
        let mut plain = Monomial::one();
        let mut expanded = Poly::one();
        for (atom, p) in &m.0 {
            if matches!(atom, Expr::Add(_)) && -*p > 0 {
                let sum = Poly::from_expr(atom).expect("stored atoms are normalized");
                expanded = expanded.mul(&sum.pow((-*p) as u32));
            } else {
                plain = plain.mul(&Monomial::atom(atom.clone(), -*p));
            }
        }
        expanded.mul(&Poly::from_monomial(plain, c.recip()))
    }

    pub(crate) fn invert(&self) -> Result<Poly, ExprError> {
        if self.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            return Ok(Poly::invert_monomial(m, c));
        }
        // Common Sym/Func factor (Laurent gcd), then make the sum monic.
        let atoms: BTreeSet<&Expr> = self
            .terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(a, _)| a))
            .filter(|a| !matches!(a, Expr::Add(_)))
            .collect();
        let gcd = Monomial(
            atoms
                .into_iter()
                .filter_map(|a| {
                    let p = self
                        .terms
                        .keys()
                        .map(|m| m.0.iter().find(|(b, _)| b == a).map_or(0, |(_, p)| *p))
                        .min()
                        .unwrap_or(0);
                    (p != 0).then(|| (a.clone(), p))
                })
                .collect(),
        );
        let gcd_inv = Monomial(gcd.0.iter().map(|(a, p)| (a.clone(), -p)).collect());
        let mut primitive = Poly::zero();
        for (m, c) in &self.terms {
            primitive.add_term(m.mul(&gcd_inv), c.clone());
        }
        let lead = primitive.terms.values().next().unwrap().clone();
        let primitive = primitive.scale(&lead.recip());
        let atom = primitive.to_expr();
        let outer = Poly::from_monomial(gcd_inv, lead.recip());
        Ok(outer.mul(&Poly::from_monomial(Monomial::atom(atom, -1), Rational::one())))
    }

    /// Function application with constant folding at exact special values.
    pub(crate) fn func(f: Func, arg: &Poly) -> Poly {
        if let Some(q) = arg.as_constant() {
            match f {
                Func::Exp | Func::Cos if q.is_zero() => return Poly::one(),
                Func::Sin if q.is_zero() => return Poly::zero(),
                Func::Ln if q.is_one() => return Poly::zero(),
                Func::Sqrt if !q.is_negative() => {
                    let (n, d) = (q.numer(), q.denom());
                    let (rn, rd) = (n.sqrt(), d.sqrt());
                    if &(&rn * &rn) == n && &(&rd * &rd) == d {
                        return Poly::constant(Rational::new(rn, rd));
                    }
                }
                _ => {}
            }
        }
        Poly::atom(Expr::Func(f, Box::new(arg.to_expr())))
    }

    pub(crate) fn from_expr(e: &Expr) -> Result<Poly, ExprError> {
        match e {
            Expr::Const(q) => Ok(Poly::constant(q.clone())),
            Expr::Sym(s) => Ok(Poly::sym(s.clone())),
            Expr::Add(v) => {
                let mut acc = Poly::zero();
                for x in v {
                    acc.add_assign(&Poly::from_expr(x)?);
                }
                Ok(acc)
            }
            Expr::Mul(v) => {
                let factors = v.iter().map(Poly::from_expr).collect::<Result<Vec<_>, _>>()?;
                if factors.iter().any(Poly::is_zero) {
                    return Ok(Poly::zero());
                }
                Ok(factors.iter().fold(Poly::one(), |acc, f| acc.mul(f)))
            }
            // Negative powers are pushed through products and powers so that
            // 1/(A^2) and (1/A)^2 give the same atom A^-2 without expanding A^2.
            Expr::Pow(b, n) if *n < 0 => match b.as_ref() {
                Expr::Pow(inner, m) if *m > 0 => match m.checked_mul(*n) {
                    Some(k) => Poly::from_expr(&Expr::Pow(inner.clone(), k)),
                    None => Err(ExprError::DomainError("exponent overflow".into())),
                },
                Expr::Mul(v) => {
                    let factors = v
                        .iter()
                        .map(|f| Poly::from_expr(&Expr::Pow(Box::new(f.clone()), *n)))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(factors.iter().fold(Poly::one(), |acc, f| acc.mul(f)))
                }
                _ => Poly::from_expr(b)?.powi(*n),
            },
            Expr::Pow(b, n) => Poly::from_expr(b)?.powi(*n),
            Expr::Func(f, a) => Ok(Poly::func(*f, &Poly::from_expr(a)?)),
        }
    }

    pub(crate) fn to_expr(&self) -> Expr {
        let mut terms: Vec<Expr> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut factors = m.to_factor_exprs();
                if !is_one(c) {
                    factors.push(Expr::Const(c.clone()));
                }
                match factors.len() {
                    0 => Expr::Const(c.clone()),
                    1 => factors.pop().unwrap(),
                    _ => {
                        factors.sort();
                        Expr::Mul(factors)
                    }
                }
            })
            .collect();
        match terms.len() {
            0 => Expr::Const(Rational::zero()),
            1 => terms.pop().unwrap(),
            _ => {
                terms.sort();
                Expr::Add(terms)
            }
        }
    }

    pub(crate) fn diff(&self, sym: &Symbol) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            for (idx, (atom, p)) in m.0.iter().enumerate() {
                let datom = match atom {
                    Expr::Sym(s) if s == sym => Poly::one(),
                    Expr::Sym(_) => continue,
                    _ if !atom.contains(sym) => continue,
                    Expr::Func(f, arg) => {
                        let parg = Poly::from_expr(arg).expect("stored atoms are normalized");
                        let darg = parg.diff(sym);
                        if darg.is_zero() {
                            continue;
                        }
                        Poly::func_derivative(*f, arg, &parg).mul(&darg)
                    }
                    Expr::Add(_) => Poly::from_expr(atom).expect("stored atoms are normalized").diff(sym),
                    _ => unreachable!("atoms are Sym, Func or Add"),
                };
                if datom.is_zero() {
                    continue;
                }
                let rest = Poly::from_monomial(m.without(idx, p - 1), c * Rational::from_integer(BigInt::from(*p)));
                out.add_assign(&rest.mul(&datom));
            }
        }
        out
    }

    fn func_derivative(f: Func, arg: &Expr, parg: &Poly) -> Poly {
        let same = |g: Func| Poly::atom(Expr::Func(g, Box::new(arg.clone())));
        match f {
            Func::Sin => same(Func::Cos),
            Func::Cos => same(Func::Sin).neg(),
            Func::Exp => same(Func::Exp),
            Func::Ln => parg.invert().expect("argument with nonzero derivative is nonzero"),
            Func::Sqrt => Poly::from_monomial(
                Monomial::atom(Expr::Func(Func::Sqrt, Box::new(arg.clone())), -1),
                Rational::new(BigInt::from(1), BigInt::from(2)),
            ),
        }
    }

    pub(crate) fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (a, _) in &m.0 {
                a.collect_symbols(&mut out);
            }
        }
        out
    }

    pub(crate) fn contains(&self, sym: &Symbol) -> bool {
        self.terms.keys().any(|m| m.0.iter().any(|(a, _)| a.contains(sym)))
    }

    pub(crate) fn subst(&self, sym: &Symbol, value: &Expr) -> Result<Poly, ExprError> {
        if !self.contains(sym) {
            return Ok(self.clone());
        }
        Poly::from_expr(&self.to_expr().replace(&|s| (s == sym).then(|| value.clone())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity_on_canonical_forms() {
        let c = Expr::jet(0, &[]);
        let e = (Expr::one() + c.clone()).pow(-2) * c.clone() + Expr::apply(Func::Sin, c.clone() * Expr::int(3));
        let p = Poly::from_expr(&e).unwrap();
        assert_eq!(Poly::from_expr(&p.to_expr()).unwrap(), p);
    }

    #[test]
    fn invert_undoes_sum_atoms() {
        let c = Expr::jet(0, &[]);
        let s = Poly::from_expr(&(Expr::one() + c)).unwrap();
        let inv = s.invert().unwrap();
        assert_eq!(inv.invert().unwrap(), s);
    }
}
