//! Operator-exponential solutions of nonlinear Cauchy problems.
//!
//! For `u_t + F(t, x, u, D_x^α u) = 0` with `u(a) = c`, the solution is the
//! exponential of the derivation `A = Σ_j Σ_α D_x^α(F_j)|_{t=s} ∂/∂(D^α c_j) − ∂/∂s`
//! applied to `c` and evaluated at `s = a`:
//!
//! ```text
//! u = Σ_n (−1)^n (t − a)^n / n! · (Aⁿ c)|_{s=a}
//! ```
//!
//! [`lie`] builds these series exactly over the rationals. [`dyson`] holds the
//! independent checks: symbolic Picard iteration (the time-ordered series
//! applied to `c`) and numeric time-ordered matrix exponentials.
//! [`numeric`] supplies RK4 and closed-form references.

pub mod cli;
pub mod dyson;
pub mod expr;
pub mod lie;
pub mod numeric;
pub mod parser;
pub(crate) mod series;

pub use expr::{Bindings, Expr, ExprError, Func, MultiIndex, Rational, Symbol};
pub use parser::{
    parse_expression, parse_problem, render, Names, ParseError, ProblemError, ProblemKind, ProblemSpec, SourceSpan,
};
