use std::fmt;
use std::ops;
use std::sync::Arc;

use crate::dataspace::DataState;
use crate::error::{Error, Result};

/// Name of a data variable, cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarName(Arc<str>);

impl VarName {
    pub fn new(name: &str) -> Self {
        VarName(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for VarName {
    fn from(s: &str) -> Self {
        VarName::new(s)
    }
}

impl From<String> for VarName {
    fn from(s: String) -> Self {
        VarName(Arc::from(s))
    }
}

impl fmt::Debug for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Min,
    Max,
    Sqrt,
    Abs,
    Lt,
    Le,
    Eq,
    Ne,
    Gt,
    Ge,
    And,
    Or,
    Not,
    /// `ite(c, a, b)`: `a` when `c` is 1, `b` when it is 0.
    Ite,
}

impl Op {
    /// Required argument count; `None` means two or more.
    pub fn arity(self) -> Option<usize> {
        match self {
            Op::Neg | Op::Sqrt | Op::Abs | Op::Not => Some(1),
            Op::Add | Op::Sub | Op::Mul | Op::Div => Some(2),
            Op::Lt | Op::Le | Op::Eq | Op::Ne | Op::Gt | Op::Ge => Some(2),
            Op::And | Op::Or => Some(2),
            Op::Ite => Some(3),
            Op::Min | Op::Max => None,
        }
    }

    /// Name used in function-call syntax.
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            Op::Min => Some("min"),
            Op::Max => Some("max"),
            Op::Sqrt => Some("sqrt"),
            Op::Abs => Some("abs"),
            Op::Ite => Some("ite"),
            _ => None,
        }
    }

    pub fn from_function_name(name: &str) -> Option<Op> {
        Some(match name {
            "min" => Op::Min,
            "max" => Op::Max,
            "sqrt" => Op::Sqrt,
            "abs" => Op::Abs,
            "ite" => Op::Ite,
            _ => return None,
        })
    }

    pub(crate) fn infix_symbol(self) -> Option<&'static str> {
        Some(match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::And => "and",
            Op::Or => "or",
            _ => return None,
        })
    }
}

/// Expressions over data variables. Booleans are encoded as 1 and 0.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(VarName),
    Apply(Op, Vec<Expr>),
}

fn bool_value(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(VarName::new(name))
    }

    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    /// Builds an operator node, checking the argument count.
    pub fn apply(op: Op, args: Vec<Expr>) -> Result<Expr> {
        let ok = match op.arity() {
            Some(n) => args.len() == n,
            None => args.len() >= 2,
        };
        if !ok {
            return Err(Error::structural(format!(
                "operator {op:?} applied to {} arguments",
                args.len()
            )));
        }
        Ok(Expr::Apply(op, args))
    }

    fn binary(op: Op, a: Expr, b: Expr) -> Expr {
        Expr::Apply(op, vec![a, b])
    }

    pub fn lt(self, rhs: impl Into<Expr>) -> Expr {
        Expr::binary(Op::Lt, self, rhs.into())
    }

    pub fn le(self, rhs: impl Into<Expr>) -> Expr {
        Expr::binary(Op::Le, self, rhs.into())
    }

    pub fn gt(self, rhs: impl Into<Expr>) -> Expr {
        Expr::binary(Op::Gt, self, rhs.into())
    }

    pub fn ge(self, rhs: impl Into<Expr>) -> Expr {
        Expr::binary(Op::Ge, self, rhs.into())
    }

    pub fn equals(self, rhs: impl Into<Expr>) -> Expr {
        Expr::binary(Op::Eq, self, rhs.into())
    }

    pub fn not_equals(self, rhs: impl Into<Expr>) -> Expr {
        Expr::binary(Op::Ne, self, rhs.into())
    }

    pub fn and(self, rhs: Expr) -> Expr {
        Expr::binary(Op::And, self, rhs)
    }

    pub fn or(self, rhs: Expr) -> Expr {
        Expr::binary(Op::Or, self, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Expr {
        Expr::Apply(Op::Not, vec![self])
    }

    pub fn min(self, rhs: impl Into<Expr>) -> Expr {
        Expr::binary(Op::Min, self, rhs.into())
    }

    pub fn max(self, rhs: impl Into<Expr>) -> Expr {
        Expr::binary(Op::Max, self, rhs.into())
    }

    pub fn sqrt(self) -> Expr {
        Expr::Apply(Op::Sqrt, vec![self])
    }

    pub fn abs(self) -> Expr {
        Expr::Apply(Op::Abs, vec![self])
    }

    pub fn ite(cond: Expr, then: impl Into<Expr>, otherwise: impl Into<Expr>) -> Expr {
        Expr::Apply(Op::Ite, vec![cond, then.into(), otherwise.into()])
    }

    /// Evaluates the expression in `state`.
    pub fn eval(&self, state: &DataState) -> Result<f64> {
        match self {
            Expr::Const(v) => Ok(*v),
            Expr::Var(name) => {
                let index = state.space().index_of(name.as_str()).ok_or_else(|| {
                    Error::structural(format!("unknown variable `{name}` in expression"))
                })?;
                Ok(state.value(index))
            }
            Expr::Apply(op, args) => self.eval_op(*op, args, state),
        }
    }

    fn eval_op(&self, op: Op, args: &[Expr], state: &DataState) -> Result<f64> {
        let fail = |reason: &str| Error::Eval {
            expr: self.to_string(),
            reason: reason.to_string(),
        };
        let arg = |i: usize| args[i].eval(state);
        let value = match op {
            Op::Add => arg(0)? + arg(1)?,
            Op::Sub => arg(0)? - arg(1)?,
            Op::Mul => arg(0)? * arg(1)?,
            Op::Div => {
                let den = arg(1)?;
                if den == 0.0 {
                    return Err(fail("division by zero"));
                }
                arg(0)? / den
            }
            Op::Neg => -arg(0)?,
            Op::Min => {
                let mut acc = arg(0)?;
                for a in &args[1..] {
                    acc = acc.min(a.eval(state)?);
                }
                acc
            }
            Op::Max => {
                let mut acc = arg(0)?;
                for a in &args[1..] {
                    acc = acc.max(a.eval(state)?);
                }
                acc
            }
            Op::Sqrt => {
                let x = arg(0)?;
                if x < 0.0 {
                    return Err(fail("square root of a negative number"));
                }
                x.sqrt()
            }
            Op::Abs => arg(0)?.abs(),
            Op::Lt => bool_value(arg(0)? < arg(1)?),
            Op::Le => bool_value(arg(0)? <= arg(1)?),
            Op::Eq => bool_value(arg(0)? == arg(1)?),
            Op::Ne => bool_value(arg(0)? != arg(1)?),
            Op::Gt => bool_value(arg(0)? > arg(1)?),
            Op::Ge => bool_value(arg(0)? >= arg(1)?),
            Op::And => bool_value(truth(args, 0, state, &fail)? && truth(args, 1, state, &fail)?),
            Op::Or => bool_value(truth(args, 0, state, &fail)? || truth(args, 1, state, &fail)?),
            Op::Not => bool_value(!truth(args, 0, state, &fail)?),
            Op::Ite => {
                if truth(args, 0, state, &fail)? {
                    arg(1)?
                } else {
                    arg(2)?
                }
            }
        };
        if value.is_nan() {
            return Err(fail("result is not a number"));
        }
        Ok(value)
    }

    /// Calls `f` on every variable the expression reads.
    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a VarName)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => f(name),
            Expr::Apply(_, args) => args.iter().for_each(|a| a.visit_vars(f)),
        }
    }

    /// Replaces variable names through `map`; names it returns `None` for are kept.
    pub fn rename(&self, map: &impl Fn(&str) -> Option<String>) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(*v),
            Expr::Var(name) => match map(name.as_str()) {
                Some(new) => Expr::Var(VarName::from(new)),
                None => Expr::Var(name.clone()),
            },
            Expr::Apply(op, args) => Expr::Apply(*op, args.iter().map(|a| a.rename(map)).collect()),
        }
    }
}

/// Boolean operands must evaluate to exactly 0 or 1.
fn truth(
    args: &[Expr],
    i: usize,
    state: &DataState,
    fail: &impl Fn(&str) -> Error,
) -> Result<bool> {
    let v = args[i].eval(state)?;
    if v == 1.0 {
        Ok(true)
    } else if v == 0.0 {
        Ok(false)
    } else {
        Err(fail("boolean operand is neither 0 nor 1"))
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::Const(v)
    }
}

impl From<&str> for Expr {
    fn from(name: &str) -> Self {
        Expr::var(name)
    }
}

macro_rules! arith {
    ($trait:ident, $method:ident, $op:expr) => {
        impl<R: Into<Expr>> ops::$trait<R> for Expr {
            type Output = Expr;
            fn $method(self, rhs: R) -> Expr {
                Expr::binary($op, self, rhs.into())
            }
        }
    };
}

arith!(Add, add, Op::Add);
arith!(Sub, sub, Op::Sub);
arith!(Mul, mul, Op::Mul);
arith!(Div, div, Op::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Apply(Op::Neg, vec![self])
    }
}

// Precedence levels used by the printer and the parser.
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_NOT: u8 = 3;
const PREC_CMP: u8 = 4;
const PREC_ADD: u8 = 5;
const PREC_MUL: u8 = 6;
const PREC_ATOM: u8 = 8;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => PREC_MUL + 1,
            Expr::Const(_) | Expr::Var(_) => PREC_ATOM,
            Expr::Apply(op, _) => match op {
                Op::Or => PREC_OR,
                Op::And => PREC_AND,
                Op::Not => PREC_NOT,
                Op::Lt | Op::Le | Op::Eq | Op::Ne | Op::Gt | Op::Ge => PREC_CMP,
                Op::Add | Op::Sub => PREC_ADD,
                Op::Mul | Op::Div => PREC_MUL,
                _ => PREC_ATOM,
            },
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let prec = self.precedence();
        if prec < min_prec {
            f.write_str("(")?;
            self.write_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Apply(op, args) => {
                if let Some(name) = op.function_name() {
                    write!(f, "{name}(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        a.write_at(f, 0)?;
                    }
                    return f.write_str(")");
                }
                match op {
                    Op::Neg => {
                        f.write_str("-(")?;
                        args[0].write_at(f, 0)?;
                        f.write_str(")")
                    }
                    Op::Not => {
                        f.write_str("not ")?;
                        args[0].write_at(f, PREC_NOT)
                    }
                    _ => {
                        let sym = op.infix_symbol().expect("binary operator has a symbol");
                        // left-associative chains; comparisons do not chain at all
                        let (lhs_min, rhs_min) = if prec == PREC_CMP {
                            (PREC_CMP + 1, PREC_CMP + 1)
                        } else {
                            (prec, prec + 1)
                        };
                        args[0].write_at(f, lhs_min)?;
                        write!(f, " {sym} ")?;
                        args[1].write_at(f, rhs_min)
                    }
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{DataSpace, VarSpec};

    fn state(pairs: &[(&str, f64)]) -> DataState {
        let space = DataSpace::new(
            pairs
                .iter()
                .map(|(n, _)| VarSpec::continuous(*n, -100.0, 100.0))
                .collect(),
        )
        .unwrap();
        DataState::new(space, pairs.iter().map(|(_, v)| *v).collect()).unwrap()
    }

    #[test]
    fn pump_decrease_branch() {
        let d = state(&[("q1", 3.0)]);
        let e = Expr::constant(0.0).max(Expr::var("q1") - 1.2);
        assert!((e.eval(&d).unwrap() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn comparison_encodes_as_one() {
        let d = state(&[("l1", 12.0)]);
        let e = Expr::var("l1").gt(Expr::constant(10.0) + 0.5);
        assert_eq!(e.eval(&d).unwrap(), 1.0);
        assert_eq!(Expr::constant(5.0).eval(&d).unwrap(), 5.0);
    }

    #[test]
    fn evaluation_errors_name_the_subexpression() {
        let d = state(&[("x", 0.0)]);
        let e = Expr::constant(1.0) + Expr::constant(2.0) / Expr::var("x");
        match e.eval(&d) {
            Err(Error::Eval { expr, reason }) => {
                assert_eq!(expr, "2 / x");
                assert!(reason.contains("division by zero"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let neg = (Expr::var("x") - 1.0).sqrt();
        assert!(matches!(neg.eval(&d), Err(Error::Eval { .. })));
    }

    #[test]
    fn boolean_operands_are_strict() {
        let d = state(&[("x", 0.5)]);
        assert!(Expr::var("x").and(Expr::constant(1.0)).eval(&d).is_err());
        let ok = Expr::var("x").gt(0.0).and(Expr::var("x").lt(1.0));
        assert_eq!(ok.eval(&d).unwrap(), 1.0);
    }

    #[test]
    fn arity_checked() {
        assert!(Expr::apply(Op::Sqrt, vec![]).is_err());
        assert!(Expr::apply(Op::Max, vec![Expr::Const(1.0)]).is_err());
        assert!(Expr::apply(Op::Max, vec![Expr::Const(1.0); 3]).is_ok());
    }

    #[test]
    fn display_uses_minimal_parentheses() {
        let e = (Expr::var("a") + Expr::var("b")) * Expr::var("c") - Expr::var("d");
        assert_eq!(e.to_string(), "(a + b) * c - d");
        let e = Expr::var("a") - (Expr::var("b") - Expr::var("c"));
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::var("t").lt(Expr::constant(100.0) - 1.8).and(Expr::var("c").equals(0.0));
        assert_eq!(e.to_string(), "t < 100 - 1.8 and c == 0");
        assert_eq!((-Expr::var("x")).to_string(), "-(x)");
        assert_eq!(Expr::Const(-0.4).to_string(), "-0.4");
    }
}
