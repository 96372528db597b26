//! The probabilistic process calculus: expressions, terms, one-step semantics,
//! static validation and a text syntax.

mod ast;
mod expr;
mod semantics;
mod text;
mod validate;

pub use ast::{same_process, Definitions, ProcName, ProcRef, Process};
pub use expr::{Expr, Op, VarName};
pub use semantics::{pstep, Branch, Effect, StepDistribution};
pub use text::{parse_expr, parse_process, parse_program, print_program, ProgramText};
pub use validate::{validate, validate_with, ValidationOptions, ValidationReport, Violation};
