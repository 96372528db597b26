use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use super::expr::{Expr, VarName};

/// Name of a process variable (a recursive definition).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProcName(Arc<str>);

impl ProcName {
    pub fn new(name: &str) -> Self {
        ProcName(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ProcName {
    fn from(s: &str) -> Self {
        ProcName::new(s)
    }
}

impl fmt::Debug for ProcName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ProcName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type ProcRef = Arc<Process>;

/// Process terms. Subterms are shared, so cloning a term is cheap.
#[derive(Clone, Debug, PartialEq)]
pub enum Process {
    /// `(e1, .., en -> x1, .., xn).next`; both lists empty is the tick prefix.
    Prefix {
        exprs: Vec<Expr>,
        vars: Vec<VarName>,
        next: ProcRef,
    },
    If {
        guard: Expr,
        then: ProcRef,
        otherwise: ProcRef,
    },
    /// Generative probabilistic choice.
    Choice(Vec<(f64, ProcRef)>),
    /// Probabilistic interleaving: the left side moves with probability `p`.
    Interleave {
        left: ProcRef,
        p: f64,
        right: ProcRef,
    },
    /// Synchronous parallel composition.
    Par(ProcRef, ProcRef),
    Call(ProcName),
}

impl Process {
    pub fn prefix(assignments: Vec<(Expr, &str)>, next: ProcRef) -> ProcRef {
        let (exprs, vars) = assignments
            .into_iter()
            .map(|(e, x)| (e, VarName::new(x)))
            .unzip();
        Arc::new(Process::Prefix { exprs, vars, next })
    }

    pub fn assign(expr: impl Into<Expr>, var: &str, next: ProcRef) -> ProcRef {
        Process::prefix(vec![(expr.into(), var)], next)
    }

    pub fn tick(next: ProcRef) -> ProcRef {
        Arc::new(Process::Prefix {
            exprs: Vec::new(),
            vars: Vec::new(),
            next,
        })
    }

    /// `n` consecutive tick prefixes before `next`.
    pub fn ticks(n: usize, next: ProcRef) -> ProcRef {
        (0..n).fold(next, |acc, _| Process::tick(acc))
    }

    pub fn cond(guard: Expr, then: ProcRef, otherwise: ProcRef) -> ProcRef {
        Arc::new(Process::If {
            guard,
            then,
            otherwise,
        })
    }

    pub fn choice(branches: Vec<(f64, ProcRef)>) -> ProcRef {
        Arc::new(Process::Choice(branches))
    }

    pub fn interleave(left: ProcRef, p: f64, right: ProcRef) -> ProcRef {
        Arc::new(Process::Interleave { left, p, right })
    }

    pub fn par(left: ProcRef, right: ProcRef) -> ProcRef {
        Arc::new(Process::Par(left, right))
    }

    /// Left-nested synchronous composition of all parts.
    pub fn par_all(parts: impl IntoIterator<Item = ProcRef>) -> Option<ProcRef> {
        parts.into_iter().reduce(Process::par)
    }

    pub fn call(name: &str) -> ProcRef {
        Arc::new(Process::Call(ProcName::new(name)))
    }

    pub fn is_tick(&self) -> bool {
        matches!(self, Process::Prefix { exprs, .. } if exprs.is_empty())
    }

    /// Renames data variables (both read and written) and process variables.
    pub fn rename(
        &self,
        vars: &impl Fn(&str) -> Option<String>,
        procs: &impl Fn(&str) -> Option<String>,
    ) -> ProcRef {
        let again = |p: &ProcRef| p.rename(vars, procs);
        Arc::new(match self {
            Process::Prefix { exprs, vars: xs, next } => Process::Prefix {
                exprs: exprs.iter().map(|e| e.rename(vars)).collect(),
                vars: xs
                    .iter()
                    .map(|x| vars(x.as_str()).map(VarName::from).unwrap_or_else(|| x.clone()))
                    .collect(),
                next: again(next),
            },
            Process::If {
                guard,
                then,
                otherwise,
            } => Process::If {
                guard: guard.rename(vars),
                then: again(then),
                otherwise: again(otherwise),
            },
            Process::Choice(bs) => Process::Choice(bs.iter().map(|(p, b)| (*p, again(b))).collect()),
            Process::Interleave { left, p, right } => Process::Interleave {
                left: again(left),
                p: *p,
                right: again(right),
            },
            Process::Par(l, r) => Process::Par(again(l), again(r)),
            Process::Call(name) => match procs(name.as_str()) {
                Some(new) => Process::Call(ProcName::new(&new)),
                None => Process::Call(name.clone()),
            },
        })
    }
}

/// Structural equality with a pointer-equality fast path.
pub fn same_process(a: &ProcRef, b: &ProcRef) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// The definitions table `A := P`, in declaration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Definitions {
    table: IndexMap<ProcName, ProcRef>,
}

impl Definitions {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a definition.
    pub fn define(&mut self, name: &str, body: ProcRef) -> &mut Self {
        self.table.insert(ProcName::new(name), body);
        self
    }

    pub fn get(&self, name: &ProcName) -> Option<&ProcRef> {
        self.table.get(name)
    }

    pub fn lookup(&self, name: &str) -> Option<&ProcRef> {
        self.table.get(&ProcName::new(name))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProcName, &ProcRef)> {
        self.table.iter()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Adds every definition of `other`; existing names are overwritten.
    pub fn extend(&mut self, other: &Definitions) {
        for (k, v) in other.iter() {
            self.table.insert(k.clone(), v.clone());
        }
    }
}
