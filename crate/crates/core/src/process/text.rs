//! Text syntax for processes and definitions.
//!
//! ```text
//! Pin := if [l1 > 10.5] (max(0, q1 - 1.2) -> q1).Pin
//!        else if [l1 < 9.5] (min(6, q1 + 1.2) -> q1).Pin
//!        else √.Pin;
//! Tanks := Pin | Pout;
//! ```
//!
//! Operators from loosest to tightest: `|` (synchronous), `||[p]`
//! (interleaving), `p: P + q: Q` (choice), then prefixes, conditionals,
//! calls and parenthesised terms. `(->).P` is accepted for `√.P`.
//! `#` starts a comment that runs to the end of the line.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::ast::{Definitions, ProcRef, Process};
use super::expr::{Expr, Op, VarName};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
    Tick,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 22] = [
    "||[", ":=", "->", "<=", ">=", "==", "!=", "(", ")", "[", "]", ",", ".", ";", ":", "+", "-",
    "*", "/", "<", ">", "|",
];

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            })
        };
        if c == '√' {
            push(&mut out, Tok::Tick);
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                // a dot directly followed by a non-digit ends the number (`1.P` is not a float)
                if chars[i] == '.' && !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    break;
                }
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| Error::Parse {
                line: start_line,
                column: start_col,
                message: format!("malformed number `{text}`"),
            })?;
            col += i - start;
            push(&mut out, Tok::Num(value));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                push(&mut out, Tok::Sym(sym));
                i += sym.len();
                col += sym.len();
            }
            None => {
                return Err(Error::Parse {
                    line,
                    column: col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

const KEYWORDS: [&str; 5] = ["if", "else", "and", "or", "not"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                Ok(name)
            }
            other => self.error(format!("expected a name, found {}", describe(&other))),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let negative = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            other => self.error(format!("expected a number, found {}", describe(&other))),
        }
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self.is_kw("or") {
            self.bump();
            lhs = Expr::Apply(Op::Or, vec![lhs, self.and_expr()?]);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.not_expr()?;
        while self.is_kw("and") {
            self.bump();
            lhs = Expr::Apply(Op::And, vec![lhs, self.not_expr()?]);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.is_kw("not") {
            self.bump();
            return Ok(Expr::Apply(Op::Not, vec![self.not_expr()?]));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Sym("<") => Op::Lt,
            Tok::Sym("<=") => Op::Le,
            Tok::Sym("==") => Op::Eq,
            Tok::Sym("!=") => Op::Ne,
            Tok::Sym(">") => Op::Gt,
            Tok::Sym(">=") => Op::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        if matches!(self.peek(), Tok::Sym("<" | "<=" | "==" | "!=" | ">" | ">=")) {
            return self.error("comparisons do not chain; add parentheses");
        }
        Ok(Expr::Apply(op, vec![lhs, rhs]))
    }

    fn add_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => Op::Add,
                Tok::Sym("-") => Op::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Apply(op, vec![lhs, self.mul_expr()?]);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => Op::Mul,
                Tok::Sym("/") => Op::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Apply(op, vec![lhs, self.unary_expr()?]);
        }
    }

    fn unary_expr(&mut self) -> Result<Expr> {
        if self.is_sym("-") {
            if let Tok::Num(v) = self.peek_at(1).clone() {
                self.bump();
                self.bump();
                return Ok(Expr::Const(-v));
            }
            self.bump();
            return Ok(Expr::Apply(Op::Neg, vec![self.unary_expr()?]));
        }
        self.primary_expr()
    }

    fn primary_expr(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                if self.is_sym("(") {
                    let Some(op) = Op::from_function_name(&name) else {
                        return self.error(format!("unknown function `{name}`"));
                    };
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.eat_sym(",") {
                        args.push(self.expr()?);
                    }
                    self.expect_sym(")")?;
                    return Expr::apply(op, args).or_else(|e| self.error(e.to_string()));
                }
                Ok(Expr::Var(VarName::from(name)))
            }
            other => self.error(format!("expected an expression, found {}", describe(&other))),
        }
    }

    // ---- processes ----

    fn process(&mut self) -> Result<ProcRef> {
        let mut lhs = self.interleave()?;
        while self.is_sym("|") {
            self.bump();
            lhs = Process::par(lhs, self.interleave()?);
        }
        Ok(lhs)
    }

    fn interleave(&mut self) -> Result<ProcRef> {
        let mut lhs = self.choice()?;
        while self.eat_sym("||[") {
            let p = self.number()?;
            self.expect_sym("]")?;
            lhs = Process::interleave(lhs, p, self.choice()?);
        }
        Ok(lhs)
    }

    fn starts_weight(&self) -> bool {
        matches!(
            (self.peek(), self.peek_at(1), self.peek_at(2)),
            (Tok::Num(_), Tok::Sym(":"), _) | (Tok::Sym("-"), Tok::Num(_), Tok::Sym(":"))
        )
    }

    fn choice(&mut self) -> Result<ProcRef> {
        if !self.starts_weight() {
            return self.primary();
        }
        let mut branches = Vec::new();
        loop {
            let w = self.number()?;
            self.expect_sym(":")?;
            branches.push((w, self.primary()?));
            if !self.eat_sym("+") {
                break;
            }
            if !self.starts_weight() {
                return self.error("expected `weight:` after `+`");
            }
        }
        Ok(Process::choice(branches))
    }

    fn primary(&mut self) -> Result<ProcRef> {
        match self.peek().clone() {
            Tok::Tick => {
                self.bump();
                self.expect_sym(".")?;
                Ok(Process::tick(self.primary()?))
            }
            Tok::Ident(kw) if kw == "if" => {
                self.bump();
                self.expect_sym("[")?;
                let guard = self.expr()?;
                self.expect_sym("]")?;
                let then = self.primary()?;
                self.expect_kw("else")?;
                let otherwise = self.primary()?;
                Ok(Process::cond(guard, then, otherwise))
            }
            Tok::Sym("(") => {
                let save = self.pos;
                match self.try_prefix() {
                    Ok(Some(p)) => Ok(p),
                    Ok(None) | Err(_) => {
                        self.pos = save;
                        self.bump();
                        let p = self.process()?;
                        self.expect_sym(")")?;
                        Ok(p)
                    }
                }
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                Ok(Process::call(&name))
            }
            other => self.error(format!("expected a process, found {}", describe(&other))),
        }
    }

    /// Parses `(e, .. -> x, ..).P`; `Ok(None)` when the parenthesis opens something else.
    fn try_prefix(&mut self) -> Result<Option<ProcRef>> {
        self.expect_sym("(")?;
        let mut exprs = Vec::new();
        if !self.is_sym("->") {
            exprs.push(self.expr()?);
            while self.eat_sym(",") {
                exprs.push(self.expr()?);
            }
        }
        if !self.eat_sym("->") {
            return Ok(None);
        }
        let mut vars = Vec::new();
        if !self.is_sym(")") {
            vars.push(VarName::from(self.ident()?));
            while self.eat_sym(",") {
                vars.push(VarName::from(self.ident()?));
            }
        }
        self.expect_sym(")")?;
        if exprs.len() != vars.len() {
            return self.error(format!(
                "prefix assigns {} expressions to {} variables",
                exprs.len(),
                vars.len()
            ));
        }
        self.expect_sym(".")?;
        let next = self.primary()?;
        Ok(Some(Arc::new(Process::Prefix { exprs, vars, next })))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Tick => "`√`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a single process term.
pub fn parse_process(src: &str) -> Result<ProcRef> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let proc = p.process()?;
    p.eat_sym(";");
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after process", describe(p.peek())));
    }
    Ok(proc)
}

/// Parses a single expression.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after expression", describe(p.peek())));
    }
    Ok(e)
}

/// A parsed model text: definitions plus an optional entry term.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramText {
    pub defs: Definitions,
    pub main: Option<ProcRef>,
}

/// Parses `A := P;` definitions, optionally followed by one entry term.
pub fn parse_program(src: &str) -> Result<ProgramText> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut defs = Definitions::new();
    let mut main = None;
    while *p.peek() != Tok::Eof {
        if main.is_some() {
            return p.error("only one entry term is allowed, after the definitions");
        }
        let is_def = matches!((p.peek(), p.peek_at(1)), (Tok::Ident(_), Tok::Sym(":=")));
        if is_def {
            let name = p.ident()?;
            p.bump();
            if defs.lookup(&name).is_some() {
                return p.error(format!("process `{name}` defined twice"));
            }
            let body = p.process()?;
            p.expect_sym(";")?;
            defs.define(&name, body);
        } else {
            main = Some(p.process()?);
            p.eat_sym(";");
        }
    }
    Ok(ProgramText { defs, main })
}

// ---- printing ----

const P_PAR: u8 = 1;
const P_INTER: u8 = 2;
const P_CHOICE: u8 = 3;
const P_PRIM: u8 = 4;

fn proc_prec(p: &Process) -> u8 {
    match p {
        Process::Par(..) => P_PAR,
        Process::Interleave { .. } => P_INTER,
        Process::Choice(_) => P_CHOICE,
        _ => P_PRIM,
    }
}

fn write_proc(f: &mut fmt::Formatter<'_>, p: &Process, min: u8) -> fmt::Result {
    if proc_prec(p) < min {
        f.write_str("(")?;
        write_proc(f, p, 0)?;
        return f.write_str(")");
    }
    match p {
        Process::Prefix { exprs, vars, next } => {
            if exprs.is_empty() {
                f.write_str("√")?;
            } else {
                f.write_str("(")?;
                for (i, e) in exprs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(" -> ")?;
                for (i, x) in vars.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")?;
            }
            f.write_str(".")?;
            write_proc(f, next, P_PRIM)
        }
        Process::If {
            guard,
            then,
            otherwise,
        } => {
            write!(f, "if [{guard}] ")?;
            write_proc(f, then, P_PRIM)?;
            f.write_str(" else ")?;
            write_proc(f, otherwise, P_PRIM)
        }
        Process::Choice(options) => {
            for (i, (w, q)) in options.iter().enumerate() {
                if i > 0 {
                    f.write_str(" + ")?;
                }
                write!(f, "{w}: ")?;
                write_proc(f, q, P_PRIM)?;
            }
            Ok(())
        }
        Process::Interleave { left, p, right } => {
            write_proc(f, left, P_INTER)?;
            write!(f, " ||[{p}] ")?;
            write_proc(f, right, P_CHOICE)
        }
        Process::Par(l, r) => {
            write_proc(f, l, P_PAR)?;
            f.write_str(" | ")?;
            write_proc(f, r, P_INTER)
        }
        Process::Call(name) => write!(f, "{name}"),
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_proc(f, self, 0)
    }
}

/// Renders definitions (and an optional entry term) in the text syntax.
pub fn print_program(defs: &Definitions, main: Option<&ProcRef>) -> String {
    let mut out = String::new();
    for (name, body) in defs.iter() {
        out.push_str(&format!("{name} := {body};\n"));
    }
    if let Some(m) = main {
        out.push_str(&format!("{m};\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_pump_controller() {
        let src = "Pin := if [l1 > 10 + 0.5] (max(0, q1 - 1.2) -> q1).Pin \
                   else if [l1 < 10 - 0.5] (min(6, q1 + 1.2) -> q1).Pin else √.Pin;\n\
                   Pout := √.Pout;\nPin | Pout";
        let prog = parse_program(src).unwrap();
        assert_eq!(prog.defs.len(), 2);
        assert_eq!(
            *prog.main.unwrap(),
            Process::Par(Process::call("Pin"), Process::call("Pout"))
        );
    }

    #[test]
    fn empty_prefix_spellings_agree() {
        assert_eq!(parse_process("(->).A").unwrap(), parse_process("√.A").unwrap());
    }

    #[test]
    fn parenthesised_process_vs_prefix() {
        let p = parse_process("(A | B) ||[0.25] ((x + 1 -> x).C)").unwrap();
        match &*p {
            Process::Interleave { left, p, right } => {
                assert_eq!(*p, 0.25);
                assert!(matches!(**left, Process::Par(..)));
                assert!(matches!(**right, Process::Prefix { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn choice_and_negative_literals() {
        let p = parse_process("0.3: (-0.4 -> t).A + 0.7: (-(y) -> t).A").unwrap();
        let Process::Choice(bs) = &*p else { panic!() };
        assert_eq!(bs.len(), 2);
        let Process::Prefix { exprs, .. } = &*bs[0].1 else { panic!() };
        assert_eq!(exprs[0], Expr::Const(-0.4));
        let Process::Prefix { exprs, .. } = &*bs[1].1 else { panic!() };
        assert_eq!(exprs[0], Expr::Apply(Op::Neg, vec![Expr::var("y")]));
    }

    #[test]
    fn errors_carry_position() {
        match parse_process("if [x > 1] A\n  els B") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_process("(1, 2 -> x).A").is_err());
        assert!(parse_expr("a < b < c").is_err());
        assert!(parse_expr("foo(1)").is_err());
        assert!(parse_program("A := √.A; A := √.A;").is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-100.0f64..100.0).prop_map(Expr::Const),
            prop_oneof![Just("x"), Just("y"), Just("l_1")].prop_map(Expr::var),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            let bin = prop_oneof![
                Just(Op::Add),
                Just(Op::Sub),
                Just(Op::Mul),
                Just(Op::Div),
                Just(Op::Lt),
                Just(Op::Le),
                Just(Op::Eq),
                Just(Op::Ne),
                Just(Op::Gt),
                Just(Op::Ge),
                Just(Op::And),
                Just(Op::Or),
                Just(Op::Min),
                Just(Op::Max),
            ];
            let un = prop_oneof![Just(Op::Neg), Just(Op::Not), Just(Op::Sqrt), Just(Op::Abs)];
            prop_oneof![
                (bin, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Apply(op, vec![a, b])),
                (un, inner.clone()).prop_map(|(op, a)| Expr::Apply(op, vec![a])),
                (inner.clone(), inner.clone(), inner.clone())
                    .prop_map(|(a, b, c)| Expr::Apply(Op::Ite, vec![a, b, c])),
                proptest::collection::vec(inner, 3..5).prop_map(|v| Expr::Apply(Op::Max, v)),
            ]
        })
    }

    fn arb_process() -> impl Strategy<Value = ProcRef> {
        let leaf = prop_oneof![Just("A"), Just("B"), Just("Ctrl")].prop_map(Process::call);
        leaf.prop_recursive(5, 40, 3, |inner| {
            prop_oneof![
                (proptest::collection::vec((arb_expr(), prop_oneof![Just("x"), Just("y")]), 0..3), inner.clone())
                    .prop_map(|(asg, next)| Process::prefix(asg, next)),
                (arb_expr(), inner.clone(), inner.clone()).prop_map(|(g, a, b)| Process::cond(g, a, b)),
                (proptest::collection::vec((0.0f64..1.0, inner.clone()), 1..4))
                    .prop_map(Process::choice),
                (inner.clone(), 0.0f64..1.0, inner.clone()).prop_map(|(a, p, b)| Process::interleave(a, p, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Process::par(a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn expr_print_parse_identity(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_expr(&printed).unwrap();
            prop_assert_eq!(back, e, "printed as {}", printed);
        }

        #[test]
        fn process_print_parse_identity(p in arb_process()) {
            let printed = p.to_string();
            let back = parse_process(&printed).unwrap();
            prop_assert_eq!(back, p, "printed as {}", printed);
        }
    }
}
