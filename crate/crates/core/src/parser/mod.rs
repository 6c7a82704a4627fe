//! Expression text front-end: tokenizer, recursive-descent parser and
//! renderer.
//!
//! Grammar, loosest to tightest: `+ -`, `* /`, unary minus, `^` (right
//! associative, integer exponents only), primaries (numbers, identifiers,
//! function calls, parentheses). A field name followed by `_` and space
//! letters is a jet, e.g. `u_xx` or `v_xy`.

mod problem;

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use thiserror::Error;

use crate::expr::{Expr, ExprError, Func, MultiIndex, Rational, Symbol};

pub use problem::{parse_problem, ProblemError, ProblemKind, ProblemSpec};

pub const DEFAULT_MAX_JET_ORDER: u32 = 8;

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan { start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {}..{}: {message}", span.start, span.end)]
    Syntax { message: String, span: SourceSpan },
    #[error("unknown identifier `{name}` at {}..{}", span.start, span.end)]
    UnknownIdentifier { name: String, span: SourceSpan },
    #[error("jet `{name}` has derivative order {order}, above the cap of {cap}")]
    MixedDerivativeOrderTooHigh {
        name: String,
        order: u32,
        cap: u32,
        span: SourceSpan,
    },
    #[error("{source} at {}..{}", span.start, span.end)]
    Expr { source: ExprError, span: SourceSpan },
}

impl ParseError {
    pub fn span(&self) -> SourceSpan {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::UnknownIdentifier { span, .. }
            | ParseError::MixedDerivativeOrderTooHigh { span, .. }
            | ParseError::Expr { span, .. } => *span,
        }
    }
}

/// Identifier table used both to classify identifiers while parsing and to
/// print symbols while rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Names {
    pub time: String,
    /// Name of the auxiliary variable s; `None` makes it unparseable.
    pub aux: Option<String>,
    /// Name of a symbolic initial time; `None` makes it unparseable.
    pub initial: Option<String>,
    pub space: Vec<String>,
    /// Jet prefixes, indexed by field.
    pub fields: Vec<String>,
    pub params: Vec<String>,
    pub max_jet_order: u32,
}

impl Names {
    /// Names used by `Display`: t, s, a, x/y/z, u (or u1, u2, ...).
    pub fn generic() -> Self {
        Names {
            time: "t".into(),
            aux: Some("s".into()),
            initial: Some("a".into()),
            space: vec!["x".into(), "y".into(), "z".into()],
            fields: Vec::new(),
            params: Vec::new(),
            max_jet_order: DEFAULT_MAX_JET_ORDER,
        }
    }

    /// Context for right-hand sides: fields stand for the unknowns.
    pub fn for_problem(p: &ProblemSpec) -> Self {
        Names {
            time: p.time_name.clone(),
            aux: None,
            initial: None,
            space: p.space_names.clone(),
            fields: p.field_names.clone(),
            params: p.params.clone(),
            max_jet_order: DEFAULT_MAX_JET_ORDER,
        }
    }

    /// Context for series coefficients and exact solutions: jets print as
    /// initial data `c` (one field) or `c1`, `c2`, ... and the symbolic
    /// initial time is visible.
    pub fn initial_data(p: &ProblemSpec) -> Self {
        let mut names = Names::for_problem(p);
        names.initial = p.initial_name.clone();
        // Coefficient jets grow with the series order; the cap guards input only.
        names.max_jet_order = u32::MAX;
        let taken = |n: &str| {
            n == p.time_name
                || p.space_names.iter().any(|s| s == n)
                || p.params.iter().any(|s| s == n)
                || p.initial_name.as_deref() == Some(n)
        };
        let base = if ["c", "c1"].iter().any(|n| taken(n)) {
            "ic"
        } else {
            "c"
        };
        names.fields = if p.field_names.len() == 1 {
            vec![base.to_string()]
        } else {
            (1..=p.field_names.len()).map(|i| format!("{base}{i}")).collect()
        };
        names
    }

    fn field_name(&self, k: usize) -> String {
        match self.fields.get(k) {
            Some(n) => n.clone(),
            None if self.fields.is_empty() && k == 0 => "u".into(),
            None => format!("u{}", k + 1),
        }
    }

    fn space_name(&self, j: usize) -> String {
        self.space.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1))
    }

    fn symbol_name(&self, s: &Symbol) -> String {
        match s {
            Symbol::Time => self.time.clone(),
            Symbol::Aux => self.aux.clone().unwrap_or_else(|| "s".into()),
            Symbol::InitialTime => self.initial.clone().unwrap_or_else(|| "a".into()),
            Symbol::Space(j) => self.space_name(*j),
            Symbol::Param(n) => n.clone(),
            Symbol::Jet { field, alpha } => {
                let mut out = self.field_name(*field);
                if alpha.order() > 0 {
                    out.push('_');
                    for (j, &k) in alpha.as_slice().iter().enumerate() {
                        let letter = self.space_name(j);
                        for _ in 0..k {
                            out.push_str(&letter);
                        }
                    }
                }
                out
            }
        }
    }

    fn classify(&self, name: &str, span: SourceSpan) -> Result<Symbol, ParseError> {
        if name == self.time {
            return Ok(Symbol::Time);
        }
        if self.aux.as_deref() == Some(name) {
            return Ok(Symbol::Aux);
        }
        if self.initial.as_deref() == Some(name) {
            return Ok(Symbol::InitialTime);
        }
        if let Some(j) = self.space.iter().position(|s| s == name) {
            return Ok(Symbol::Space(j));
        }
        if let Some(k) = self.fields.iter().position(|s| s == name) {
            return Ok(Symbol::initial(k, self.space.len()));
        }
        if self.params.iter().any(|s| s == name) {
            return Ok(Symbol::param(name));
        }
        if let Some((prefix, suffix)) = name.split_once('_') {
            if let Some(k) = self.fields.iter().position(|s| s == prefix) {
                let mut alpha = vec![0u32; self.space.len()];
                let mut ok = !suffix.is_empty() && !self.space.is_empty();
                for ch in suffix.chars() {
                    match self
                        .space
                        .iter()
                        .position(|s| s.len() == ch.len_utf8() && s.starts_with(ch))
                    {
                        Some(j) => alpha[j] += 1,
                        None => ok = false,
                    }
                }
                if ok {
                    let order: u32 = alpha.iter().sum();
                    if order > self.max_jet_order {
                        return Err(ParseError::MixedDerivativeOrderTooHigh {
                            name: name.into(),
                            order,
                            cap: self.max_jet_order,
                            span,
                        });
                    }
                    return Ok(Symbol::jet(k, MultiIndex::new(alpha)));
                }
            }
        }
        Err(ParseError::UnknownIdentifier {
            name: name.into(),
            span,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        let start = i;
        let single = match ch {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            i += 1;
            out.push((tok, SourceSpan::new(start, i)));
            continue;
        }
        if ch.is_ascii_digit() || ch == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let int_part = &text[start..i];
            let mut frac_part = "";
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let fs = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                frac_part = &text[fs..i];
            }
            let span = SourceSpan::new(start, i);
            if int_part.is_empty() && frac_part.is_empty() {
                return Err(ParseError::Syntax {
                    message: "malformed number".into(),
                    span,
                });
            }
            let digits: BigInt = format!("{int_part}{frac_part}").parse().expect("ascii digits");
            let scale = BigInt::from(10).pow(frac_part.len() as u32);
            out.push((Tok::Num(Rational::new(digits, scale)), span));
            continue;
        }
        if ch.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), SourceSpan::new(start, i)));
            continue;
        }
        let width = text[start..].chars().next().map_or(1, char::len_utf8);
        return Err(ParseError::Syntax {
            message: format!("unexpected character `{}`", &text[start..start + width]),
            span: SourceSpan::new(start, start + width),
        });
    }
    out.push((Tok::End, SourceSpan::new(text.len(), text.len())));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    names: &'a Names,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            t => format!("{t:?}"),
        };
        ParseError::Syntax {
            message: format!("expected {what}, found {found}"),
            span: self.span(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(-self.term()?);
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Add(terms)
        })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.unary()?];
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    factors.push(self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    factors.push(self.unary()?.pow(-1));
                }
                _ => break,
            }
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr::Mul(factors)
        })
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(-self.unary()?)
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let start = self.span().start;
        let exponent = self.unary()?;
        let end = self.toks[self.pos.saturating_sub(1)].1.end.max(start);
        let span = SourceSpan::new(start, end);
        let value = exponent
            .normalize()
            .map_err(|source| ParseError::Expr { source, span })?;
        let n = value
            .as_const()
            .filter(|q| q.is_integer())
            .and_then(|q| q.to_integer().to_i64())
            .ok_or_else(|| ParseError::Syntax {
                message: "exponent must be an integer constant".into(),
                span,
            })?;
        Ok(base.pow(n))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                Ok(Expr::Const(q))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                let (_, span) = self.bump();
                if *self.peek() == Tok::LParen {
                    let f = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                        name: name.clone(),
                        span,
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.unexpected("`)`"));
                    }
                    self.bump();
                    return Ok(Expr::apply(f, arg));
                }
                Ok(Expr::Sym(self.names.classify(&name, span)?))
            }
            _ => Err(self.unexpected("a number, identifier or `(`")),
        }
    }
}

/// Parses `text` in the identifier context `names` and returns the
/// normalized expression.
pub fn parse_expression(text: &str, names: &Names) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        names,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    e.normalize().map_err(|source| ParseError::Expr {
        source,
        span: SourceSpan::new(0, text.len()),
    })
}

// Precedence levels used to decide parenthesization.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;

/// Renders `e` as text that [`parse_expression`] reads back (with the same
/// `names`) to `e.normalize()`.
pub fn render(e: &Expr, names: &Names) -> String {
    let mut out = String::new();
    write_expr(e, names, 0, &mut out);
    out
}

fn write_rational(q: &Rational, out: &mut String) {
    if q.denom().is_one() {
        let _ = write!(out, "{}", q.numer());
    } else {
        let _ = write!(out, "{}/{}", q.numer(), q.denom());
    }
}

/// Splits a product into (coefficient, numerator factors, denominator factors).
fn split_product(e: &Expr) -> (Rational, Vec<Expr>, Vec<Expr>) {
    let factors: Vec<Expr> = match e {
        Expr::Mul(v) => v.clone(),
        other => vec![other.clone()],
    };
    let mut coeff = Rational::one();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for f in factors {
        match f {
            Expr::Const(q) => coeff *= q,
            Expr::Pow(b, n) if n < 0 => den.push(if n == -1 { *b } else { Expr::Pow(b, -n) }),
            other => num.push(other),
        }
    }
    (coeff, num, den)
}

fn is_negative_term(e: &Expr) -> bool {
    match e {
        Expr::Const(q) => q.is_negative(),
        Expr::Mul(_) => split_product(e).0.is_negative(),
        _ => false,
    }
}

fn write_expr(e: &Expr, names: &Names, ctx: u8, out: &mut String) {
    match e {
        Expr::Const(q) => {
            let prec = if q.is_negative() {
                PREC_UNARY
            } else if q.denom().is_one() {
                u8::MAX
            } else {
                PREC_MUL
            };
            paren(prec < ctx, out, |out| write_rational(q, out));
        }
        Expr::Sym(s) => out.push_str(&names.symbol_name(s)),
        Expr::Func(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(a, names, 0, out);
            out.push(')');
        }
        Expr::Add(v) if v.is_empty() => out.push('0'),
        Expr::Add(v) => paren(PREC_ADD < ctx, out, |out| {
            for (i, t) in v.iter().enumerate() {
                if i == 0 {
                    write_expr(t, names, PREC_ADD, out);
                } else if is_negative_term(t) {
                    out.push_str(" - ");
                    write_expr(&negate_term(t), names, PREC_ADD + 1, out);
                } else {
                    out.push_str(" + ");
                    write_expr(t, names, PREC_ADD + 1, out);
                }
            }
        }),
        Expr::Pow(b, n) if *n < 0 => write_product(&Rational::one(), &[], &[Expr::Pow(b.clone(), -n)], names, ctx, out),
        Expr::Pow(b, n) => paren(PREC_POW < ctx, out, |out| {
            write_expr(b, names, PREC_POW + 1, out);
            let _ = write!(out, "^{n}");
        }),
        Expr::Mul(_) => {
            let (coeff, num, den) = split_product(e);
            write_product(&coeff, &num, &den, names, ctx, out);
        }
    }
}

fn negate_term(e: &Expr) -> Expr {
    match e {
        Expr::Const(q) => Expr::Const(-q),
        _ => {
            let (coeff, num, den) = split_product(e);
            let mut v = vec![Expr::Const(-coeff)];
            v.extend(num);
            v.extend(den.into_iter().map(|d| d.pow(-1)));
            Expr::Mul(v)
        }
    }
}

fn write_product(coeff: &Rational, num: &[Expr], den: &[Expr], names: &Names, ctx: u8, out: &mut String) {
    let negative = coeff.is_negative();
    let prec = if negative { PREC_UNARY } else { PREC_MUL };
    paren(prec < ctx, out, |out| {
        if negative {
            out.push('-');
        }
        let mag = coeff.abs();
        let mut first = true;
        if !mag.numer().is_one() || num.is_empty() {
            let _ = write!(out, "{}", mag.numer());
            first = false;
        }
        for f in num {
            if !first {
                out.push('*');
            }
            write_expr(f, names, PREC_MUL + 1, out);
            first = false;
        }
        if !mag.denom().is_one() {
            let _ = write!(out, "/{}", mag.denom());
        }
        for d in den {
            out.push('/');
            write_expr(d, names, PREC_UNARY + 1, out);
        }
    });
}

fn paren(wrap: bool, out: &mut String, body: impl FnOnce(&mut String)) {
    if wrap {
        out.push('(');
    }
    body(out);
    if wrap {
        out.push(')');
    }
}
