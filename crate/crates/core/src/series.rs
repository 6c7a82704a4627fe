//! Truncated power series in (t − a) with exact symbolic coefficients.
//!
//! Used to compose expressions with series (right-hand sides for residuals
//! and Picard steps, test functions for the homomorphism check). Elementary
//! functions use the usual Taylor-mode recurrences.

use num_bigint::BigInt;

use crate::expr::{Expr, ExprError, Func, Poly, Rational, Symbol};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TruncSeries {
    coeffs: Vec<Poly>,
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

impl TruncSeries {
    pub(crate) fn new(mut coeffs: Vec<Poly>, len: usize) -> Self {
        coeffs.resize(len, Poly::zero());
        TruncSeries { coeffs }
    }

    pub(crate) fn constant(p: Poly, len: usize) -> Self {
        TruncSeries::new(vec![p], len)
    }

    pub(crate) fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub(crate) fn coeffs(&self) -> &[Poly] {
        &self.coeffs
    }

    pub(crate) fn add(&self, other: &Self) -> Self {
        TruncSeries {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub(crate) fn scale_poly(&self, p: &Poly) -> Self {
        TruncSeries {
            coeffs: self.coeffs.iter().map(|a| a.mul(p)).collect(),
        }
    }

    pub(crate) fn mul(&self, other: &Self) -> Self {
        let n = self.len();
        let mut out = vec![Poly::zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(n - i) {
                if !b.is_zero() {
                    out[i + j].add_assign(&a.mul(b));
                }
            }
        }
        TruncSeries { coeffs: out }
    }

    fn pow(&self, k: u32) -> Self {
        let mut result = TruncSeries::constant(Poly::one(), self.len());
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    fn recip(&self) -> Result<Self, ExprError> {
        let g0 = self.coeffs[0].invert()?;
        let mut g = vec![g0.clone()];
        for n in 1..self.len() {
            let mut acc = Poly::zero();
            for k in 1..=n {
                acc.add_assign(&self.coeffs[k].mul(&g[n - k]));
            }
            g.push(acc.mul(&g0).neg());
        }
        Ok(TruncSeries { coeffs: g })
    }

    fn powi(&self, n: i64) -> Result<Self, ExprError> {
        let k = u32::try_from(n.unsigned_abs())
            .map_err(|_| ExprError::DomainError(format!("exponent {n} out of range")))?;
        if n >= 0 {
            Ok(self.pow(k))
        } else {
            Ok(self.recip()?.pow(k))
        }
    }

    /// Σ_{k=1}^{n} k·f_k·g_{n−k}
    fn weighted(f: &[Poly], g: &[Poly], n: usize) -> Poly {
        let mut acc = Poly::zero();
        for k in 1..=n {
            if !f[k].is_zero() && !g[n - k].is_zero() {
                acc.add_assign(&f[k].mul(&g[n - k]).scale(&rat(k as i64, 1)));
            }
        }
        acc
    }

    fn apply(&self, func: Func) -> Result<Self, ExprError> {
        let f = &self.coeffs;
        let len = self.len();
        let head = |g: Func| Poly::func(g, &f[0]);
        let coeffs = match func {
            Func::Exp => {
                let mut g = vec![head(Func::Exp)];
                for n in 1..len {
                    g.push(Self::weighted(f, &g, n).scale(&rat(1, n as i64)));
                }
                g
            }
            Func::Sin | Func::Cos => {
                let mut s = vec![head(Func::Sin)];
                let mut c = vec![head(Func::Cos)];
                for n in 1..len {
                    let sn = Self::weighted(f, &c, n).scale(&rat(1, n as i64));
                    let cn = Self::weighted(f, &s, n).scale(&rat(-1, n as i64));
                    s.push(sn);
                    c.push(cn);
                }
                if func == Func::Sin {
                    s
                } else {
                    c
                }
            }
            Func::Ln => {
                let inv = f[0].invert()?;
                let mut g = vec![head(Func::Ln)];
                for n in 1..len {
                    let mut acc = Poly::zero();
                    for k in 1..n {
                        acc.add_assign(&g[k].mul(&f[n - k]).scale(&rat(k as i64, 1)));
                    }
                    let gn = f[n].sub(&acc.scale(&rat(1, n as i64))).mul(&inv);
                    g.push(gn);
                }
                g
            }
            Func::Sqrt => {
                let g0 = head(Func::Sqrt);
                let half_inv = g0.invert()?.scale(&rat(1, 2));
                let mut g = vec![g0];
                for n in 1..len {
                    let mut acc = f[n].clone();
                    for k in 1..n {
                        acc = acc.sub(&g[k].mul(&g[n - k]));
                    }
                    g.push(acc.mul(&half_inv));
                }
                g
            }
        };
        Ok(TruncSeries { coeffs })
    }
}

/// Substitutes series for symbols in `p` (symbols without a series are
/// constants) and expands to `len` coefficients.
pub(crate) fn compose(
    p: &Poly,
    len: usize,
    lookup: &dyn Fn(&Symbol) -> Option<TruncSeries>,
) -> Result<TruncSeries, ExprError> {
    let mut out = TruncSeries::constant(Poly::zero(), len);
    for (m, c) in p.terms() {
        let mut term = TruncSeries::constant(Poly::constant(c.clone()), len);
        let mut scalar = Poly::one();
        for (atom, power) in m.factors() {
            let atom_series = match atom_series(atom, len, lookup)? {
                Some(s) => s,
                None => {
                    // Constant with respect to every substituted symbol.
                    scalar = scalar.mul(&Poly::from_expr(&Expr::Pow(Box::new(atom.clone()), *power))?);
                    continue;
                }
            };
            term = term.mul(&atom_series.powi(*power)?);
        }
        out = out.add(&term.scale_poly(&scalar));
    }
    Ok(out)
}

fn atom_series(
    atom: &Expr,
    len: usize,
    lookup: &dyn Fn(&Symbol) -> Option<TruncSeries>,
) -> Result<Option<TruncSeries>, ExprError> {
    match atom {
        Expr::Sym(s) => Ok(lookup(s)),
        Expr::Func(f, arg) => {
            let inner = Poly::from_expr(arg)?;
            if !depends(&inner, lookup) {
                return Ok(None);
            }
            Ok(Some(compose(&inner, len, lookup)?.apply(*f)?))
        }
        Expr::Add(_) => {
            let inner = Poly::from_expr(atom)?;
            if !depends(&inner, lookup) {
                return Ok(None);
            }
            Ok(Some(compose(&inner, len, lookup)?))
        }
        _ => unreachable!("atoms are Sym, Func or Add"),
    }
}

fn depends(p: &Poly, lookup: &dyn Fn(&Symbol) -> Option<TruncSeries>) -> bool {
    p.symbols().iter().any(|s| lookup(s).is_some())
}
