//! Cauchy problem documents (JSON).
//!
//! Right-hand sides follow the convention `u_t + F(t, x, u, jets) = 0`:
//! `"rhs": {"u": "u^2"}` is the Riccati equation u' = -u^2.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_expression, render, Names, ParseError};
use crate::expr::{Expr, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Ode,
    System,
    Pde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TimeDoc {
    pub name: String,
    pub initial: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ProblemDoc {
    pub kind: ProblemKind,
    pub time: TimeDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub space: Vec<String>,
    pub fields: Vec<String>,
    pub rhs: BTreeMap<String, String>,
    pub order: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("in {location}: {error}")]
    Parse { location: String, error: ParseError },
}

/// A validated Cauchy problem u_i(a) = c_i, ∂u_i/∂t + F_i = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub time_name: String,
    /// Either a constant or `Sym(InitialTime)`.
    pub initial_time: Expr,
    /// Display name of a symbolic initial time.
    pub initial_name: Option<String>,
    pub space_names: Vec<String>,
    pub field_names: Vec<String>,
    pub params: Vec<String>,
    /// F_i indexed like `field_names`, in initial-data jet symbols.
    pub rhs: Vec<Expr>,
    pub order: u32,
}

impl ProblemSpec {
    pub fn field_count(&self) -> usize {
        self.field_names.len()
    }

    pub fn space_dim(&self) -> usize {
        self.space_names.len()
    }

    pub fn rhs_for(&self, field: &str) -> Option<&Expr> {
        let k = self.field_names.iter().position(|f| f == field)?;
        self.rhs.get(k)
    }

    /// The bare initial-data symbol c_k.
    pub fn initial_symbol(&self, k: usize) -> Symbol {
        Symbol::initial(k, self.space_dim())
    }

    /// Same problem with different right-hand sides.
    pub fn with_rhs(&self, rhs: Vec<Expr>) -> Result<ProblemSpec, ProblemError> {
        let mut p = self.clone();
        p.rhs = rhs
            .iter()
            .map(Expr::normalize)
            .collect::<Result<_, _>>()
            .map_err(|e| ProblemError::Validation(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn to_doc(&self) -> ProblemDoc {
        let names = Names::for_problem(self);
        let initial = match &self.initial_name {
            Some(n) => n.clone(),
            None => render(&self.initial_time, &names),
        };
        ProblemDoc {
            kind: self.kind,
            time: TimeDoc {
                name: self.time_name.clone(),
                initial,
            },
            space: self.space_names.clone(),
            fields: self.field_names.clone(),
            rhs: self
                .field_names
                .iter()
                .zip(&self.rhs)
                .map(|(f, e)| (f.clone(), render(e, &names)))
                .collect(),
            order: self.order,
            params: self.params.clone(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_doc()).expect("problem documents serialize")
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let invalid = |msg: String| Err(ProblemError::Validation(msg));
        if self.order == 0 {
            return invalid("order must be a positive integer".into());
        }
        if self.field_names.is_empty() {
            return invalid("at least one field is required".into());
        }
        if self.rhs.len() != self.field_names.len() {
            return invalid("one right-hand side per field is required".into());
        }
        match self.kind {
            ProblemKind::Ode if self.field_names.len() != 1 => {
                return invalid("kind `ode` takes exactly one field; use `system`".into());
            }
            ProblemKind::Ode | ProblemKind::System if !self.space_names.is_empty() => {
                return invalid(format!("kind `{}` takes no space variables", kind_name(self.kind)));
            }
            ProblemKind::Pde if self.space_names.is_empty() => {
                return invalid("kind `pde` needs at least one space variable".into());
            }
            _ => {}
        }
        let mut seen = BTreeSet::new();
        let all = std::iter::once(&self.time_name)
            .chain(&self.space_names)
            .chain(&self.field_names)
            .chain(&self.params)
            .chain(self.initial_name.iter());
        for name in all {
            if !is_identifier(name) {
                return invalid(format!(
                    "`{name}` is not a valid identifier (letters and digits, starting with a letter)"
                ));
            }
            if crate::expr::Func::from_name(name).is_some() {
                return invalid(format!("`{name}` is a reserved function name"));
            }
            if !seen.insert(name.as_str()) {
                return invalid(format!("name `{name}` is declared more than once"));
            }
        }
        if let Some(bad) = self.space_names.iter().find(|s| s.chars().count() != 1) {
            return invalid(format!("space variable `{bad}` must be a single letter"));
        }
        match &self.initial_time {
            Expr::Const(_) => {}
            Expr::Sym(Symbol::InitialTime) if self.initial_name.is_some() => {}
            _ => return invalid("initial time must be a number or a single identifier".into()),
        }
        for (f, e) in self.field_names.iter().zip(&self.rhs) {
            for s in e.symbols() {
                match s {
                    Symbol::Time | Symbol::Param(_) => {}
                    Symbol::Space(j) if j < self.space_dim() => {}
                    Symbol::Jet { field, alpha } if field < self.field_count() && alpha.dim() == self.space_dim() => {
                        if self.kind != ProblemKind::Pde && alpha.order() > 0 {
                            return invalid(format!(
                                "rhs of `{f}` uses spatial derivatives in a `{}` problem",
                                kind_name(self.kind)
                            ));
                        }
                    }
                    other => return invalid(format!("rhs of `{f}` uses a symbol not allowed there: {other:?}")),
                }
            }
        }
        Ok(())
    }
}

fn kind_name(k: ProblemKind) -> &'static str {
    match k {
        ProblemKind::Ode => "ode",
        ProblemKind::System => "system",
        ProblemKind::Pde => "pde",
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Parses and validates a JSON problem document.
pub fn parse_problem(doc: &str) -> Result<ProblemSpec, ProblemError> {
    let doc: ProblemDoc = serde_json::from_str(doc).map_err(|e| ProblemError::Schema(e.to_string()))?;
    from_doc(doc)
}

pub(crate) fn from_doc(doc: ProblemDoc) -> Result<ProblemSpec, ProblemError> {
    let mut spec = ProblemSpec {
        kind: doc.kind,
        time_name: doc.time.name.clone(),
        initial_time: Expr::zero(),
        initial_name: None,
        space_names: doc.space.clone(),
        field_names: doc.fields.clone(),
        params: doc.params.clone(),
        rhs: Vec::new(),
        order: doc.order,
    };

    let initial = doc.time.initial.trim();
    if is_identifier(initial) {
        spec.initial_time = Expr::Sym(Symbol::InitialTime);
        spec.initial_name = Some(initial.to_string());
    } else {
        let mut names = Names::for_problem(&spec);
        names.fields.clear();
        names.space.clear();
        names.params.clear();
        names.time = String::new();
        let value = parse_expression(initial, &names).map_err(|error| ProblemError::Parse {
            location: "time.initial".into(),
            error,
        })?;
        if value.as_const().is_none() {
            return Err(ProblemError::Validation(
                "initial time must be a number or a single identifier".into(),
            ));
        }
        spec.initial_time = value;
    }

    let declared: BTreeSet<&String> = doc.fields.iter().collect();
    let given: BTreeSet<&String> = doc.rhs.keys().collect();
    if let Some(missing) = declared.difference(&given).next() {
        return Err(ProblemError::Validation(format!("missing rhs for field `{missing}`")));
    }
    if let Some(extra) = given.difference(&declared).next() {
        return Err(ProblemError::Validation(format!(
            "rhs given for undeclared field `{extra}`"
        )));
    }
    // Names must be sane before identifiers can be classified.
    spec.rhs = vec![Expr::zero(); doc.fields.len()];
    spec.validate()?;

    let names = Names::for_problem(&spec);
    for (k, field) in doc.fields.iter().enumerate() {
        let text = &doc.rhs[field];
        spec.rhs[k] = parse_expression(text, &names).map_err(|error| {
            if let ParseError::UnknownIdentifier { name, .. } = &error {
                if let Some((prefix, _)) = name.split_once('_') {
                    if doc.fields.iter().any(|f| f == prefix) && spec.kind != ProblemKind::Pde {
                        return ProblemError::Validation(format!(
                            "rhs of `{field}` uses the jet `{name}`, but a `{}` problem has no space variables",
                            kind_name(spec.kind)
                        ));
                    }
                }
            }
            ProblemError::Parse {
                location: format!("rhs.{field}"),
                error,
            }
        })?;
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riccati_document() {
        let p = parse_problem(
            r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"u^2"},"order":4}"#,
        )
        .unwrap();
        assert_eq!(p.kind, ProblemKind::Ode);
        assert_eq!(p.rhs[0], Expr::jet(0, &[]).pow(2));
        assert_eq!(p.order, 4);
        assert_eq!(p.initial_time, Expr::zero());
    }

    #[test]
    fn heat_document() {
        let p = parse_problem(r#"{"kind":"pde","time":{"name":"t","initial":"0"},"space":["x"],"fields":["u"],"rhs":{"u":"-u_xx"},"order":3}"#).unwrap();
        assert_eq!(p.rhs[0], -Expr::jet(0, &[2]));
        assert_eq!(p.space_dim(), 1);
    }

    #[test]
    fn jets_rejected_in_ode() {
        let err = parse_problem(
            r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"u_x"},"order":3}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::Validation(_)), "{err:?}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_problem(
            r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"u"},"order":3,"extra":1}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::Schema(_)));
        let err = parse_problem(r#"{"kind":"ode","time":{"name":"t"},"fields":["u"],"rhs":{"u":"u"},"order":3}"#)
            .unwrap_err();
        assert!(matches!(err, ProblemError::Schema(_)));
    }

    #[test]
    fn kind_mismatches_rejected() {
        let two_fields =
            r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u","v"],"rhs":{"u":"v","v":"u"},"order":3}"#;
        assert!(matches!(parse_problem(two_fields), Err(ProblemError::Validation(_))));
        let no_space = r#"{"kind":"pde","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"u"},"order":3}"#;
        assert!(matches!(parse_problem(no_space), Err(ProblemError::Validation(_))));
        let missing_rhs =
            r#"{"kind":"system","time":{"name":"t","initial":"0"},"fields":["u","v"],"rhs":{"u":"v"},"order":3}"#;
        assert!(matches!(parse_problem(missing_rhs), Err(ProblemError::Validation(_))));
        let dup = r#"{"kind":"ode","time":{"name":"u","initial":"0"},"fields":["u"],"rhs":{"u":"u"},"order":3}"#;
        assert!(matches!(parse_problem(dup), Err(ProblemError::Validation(_))));
        let zero_order = r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"u"},"order":0}"#;
        assert!(matches!(parse_problem(zero_order), Err(ProblemError::Validation(_))));
    }

    #[test]
    fn symbolic_initial_time_and_params() {
        let p = parse_problem(r#"{"kind":"ode","time":{"name":"t","initial":"a"},"fields":["u"],"rhs":{"u":"-k*t*u"},"order":3,"params":["k"]}"#).unwrap();
        assert_eq!(p.initial_time, Expr::Sym(Symbol::InitialTime));
        assert_eq!(p.initial_name.as_deref(), Some("a"));
        assert!(p.rhs[0].contains(&Symbol::param("k")));
        let p = parse_problem(
            r#"{"kind":"ode","time":{"name":"t","initial":"1/2"},"fields":["u"],"rhs":{"u":"u"},"order":3}"#,
        )
        .unwrap();
        assert_eq!(p.initial_time, Expr::rational(1, 2));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = parse_problem(
            r#"{"kind":"ode","time":{"name":"t","initial":"0"},"fields":["u"],"rhs":{"u":"u + w"},"order":3}"#,
        )
        .unwrap_err();
        match err {
            ProblemError::Parse { location, error } => {
                assert_eq!(location, "rhs.u");
                assert_eq!(error.span(), crate::parser::SourceSpan::new(4, 5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn document_echo_reparses() {
        let text = r#"{"kind":"pde","time":{"name":"t","initial":"0"},"space":["x"],"fields":["u"],"rhs":{"u":"u*u_x - 1/2*x"},"order":3}"#;
        let p = parse_problem(text).unwrap();
        let again = parse_problem(&p.to_json().to_string()).unwrap();
        assert_eq!(p, again);
    }
}
