use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::dataspace::DataSpace;
use crate::error::{Error, Result};

use super::ast::{Definitions, ProcName, ProcRef, Process};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Choice weights do not sum to one.
    WeightSum { total: f64 },
    /// A probability weight outside `[0, 1]`.
    WeightRange { weight: f64 },
    /// Both sides of a synchronous composition may write these variables.
    WriteOverlap { vars: Vec<String> },
    UndefinedProcess(String),
    /// The definition can reach itself without passing through a prefix.
    UnguardedRecursion(String),
    UnknownVariable(String),
    PrefixArity { exprs: usize, vars: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WeightSum { total } => write!(f, "choice weights sum to {total}, not 1"),
            Violation::WeightRange { weight } => write!(f, "weight {weight} outside [0, 1]"),
            Violation::WriteOverlap { vars } => {
                write!(f, "parallel components both write {}", vars.join(", "))
            }
            Violation::UndefinedProcess(n) => write!(f, "process `{n}` is not defined"),
            Violation::UnguardedRecursion(n) => write!(f, "recursion through `{n}` is not guarded"),
            Violation::UnknownVariable(n) => write!(f, "unknown data variable `{n}`"),
            Violation::PrefixArity { exprs, vars } => {
                write!(f, "prefix assigns {exprs} expressions to {vars} variables")
            }
        }
    }
}

/// Outcome of [`validate`]; empty means valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        Err(Error::validation(msg.join("; ")))
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationOptions {
    /// Variables that both sides of a synchronous composition may write.
    /// The right operand's write takes effect.
    pub allowed_overlap: BTreeSet<String>,
}

pub fn validate(process: &ProcRef, defs: &Definitions, space: &DataSpace) -> ValidationReport {
    validate_with(process, defs, space, &ValidationOptions::default())
}

pub fn validate_with(
    process: &ProcRef,
    defs: &Definitions,
    space: &DataSpace,
    options: &ValidationOptions,
) -> ValidationReport {
    let mut v = Validator {
        defs,
        space,
        options,
        report: ValidationReport::default(),
        visited: HashSet::new(),
        pending: Vec::new(),
        write_cache: BTreeMap::new(),
        unknown_seen: BTreeSet::new(),
    };
    v.term(process);
    while let Some(name) = v.pending.pop() {
        if let Some(body) = defs.get(&name) {
            let body = body.clone();
            v.term(&body);
        }
    }
    v.guardedness(process);
    v.report
}

struct Validator<'a> {
    defs: &'a Definitions,
    space: &'a DataSpace,
    options: &'a ValidationOptions,
    report: ValidationReport,
    visited: HashSet<ProcName>,
    pending: Vec<ProcName>,
    write_cache: BTreeMap<ProcName, BTreeSet<String>>,
    unknown_seen: BTreeSet<String>,
}

impl Validator<'_> {
    fn push(&mut self, v: Violation) {
        if !self.report.violations.contains(&v) {
            self.report.violations.push(v);
        }
    }

    fn check_var(&mut self, name: &str) {
        if self.space.index_of(name).is_none() && self.unknown_seen.insert(name.to_string()) {
            self.push(Violation::UnknownVariable(name.to_string()));
        }
    }

    fn check_weight(&mut self, w: f64) {
        if !(0.0..=1.0).contains(&w) {
            self.push(Violation::WeightRange { weight: w });
        }
    }

    fn term(&mut self, p: &ProcRef) {
        match &**p {
            Process::Prefix { exprs, vars, next } => {
                if exprs.len() != vars.len() {
                    self.push(Violation::PrefixArity {
                        exprs: exprs.len(),
                        vars: vars.len(),
                    });
                }
                for e in exprs {
                    let mut read = Vec::new();
                    e.visit_vars(&mut |x| read.push(x.as_str().to_string()));
                    read.iter().for_each(|x| self.check_var(x));
                }
                for x in vars {
                    self.check_var(x.as_str());
                }
                self.term(next);
            }
            Process::If {
                guard,
                then,
                otherwise,
            } => {
                let mut read = Vec::new();
                guard.visit_vars(&mut |x| read.push(x.as_str().to_string()));
                read.iter().for_each(|x| self.check_var(x));
                self.term(then);
                self.term(otherwise);
            }
            Process::Choice(options) => {
                let mut total = 0.0;
                for (w, q) in options {
                    self.check_weight(*w);
                    total += w;
                    self.term(q);
                }
                if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                    self.push(Violation::WeightSum { total });
                }
            }
            Process::Interleave { left, p, right } => {
                self.check_weight(*p);
                self.term(left);
                self.term(right);
            }
            Process::Par(l, r) => {
                let lw = self.writes(l);
                let rw = self.writes(r);
                let overlap: Vec<String> = lw
                    .intersection(&rw)
                    .filter(|x| !self.options.allowed_overlap.contains(*x))
                    .cloned()
                    .collect();
                if !overlap.is_empty() {
                    self.push(Violation::WriteOverlap { vars: overlap });
                }
                self.term(l);
                self.term(r);
            }
            Process::Call(name) => {
                if self.defs.get(name).is_none() {
                    self.push(Violation::UndefinedProcess(name.to_string()));
                } else if self.visited.insert(name.clone()) {
                    self.pending.push(name.clone());
                }
            }
        }
    }

    /// Variables written by any prefix reachable from `p` through the definitions.
    fn writes(&mut self, p: &ProcRef) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut seen = HashSet::new();
        self.collect_writes(p, &mut out, &mut seen);
        out
    }

    fn collect_writes(&mut self, p: &ProcRef, out: &mut BTreeSet<String>, seen: &mut HashSet<ProcName>) {
        match &**p {
            Process::Prefix { vars, next, .. } => {
                out.extend(vars.iter().map(|x| x.as_str().to_string()));
                self.collect_writes(next, out, seen);
            }
            Process::If { then, otherwise, .. } => {
                self.collect_writes(then, out, seen);
                self.collect_writes(otherwise, out, seen);
            }
            Process::Choice(options) => {
                for (_, q) in options {
                    self.collect_writes(q, out, seen);
                }
            }
            Process::Interleave { left, right, .. } | Process::Par(left, right) => {
                self.collect_writes(left, out, seen);
                self.collect_writes(right, out, seen);
            }
            Process::Call(name) => {
                if let Some(cached) = self.write_cache.get(name) {
                    out.extend(cached.iter().cloned());
                    return;
                }
                if !seen.insert(name.clone()) {
                    return;
                }
                if let Some(body) = self.defs.get(name).cloned() {
                    let mut inner = BTreeSet::new();
                    self.collect_writes(&body, &mut inner, seen);
                    // only cache results computed without cutting a cycle short
                    if seen.len() == 1 {
                        self.write_cache.insert(name.clone(), inner.clone());
                    }
                    out.extend(inner);
                }
                seen.remove(name);
            }
        }
    }

    fn guardedness(&mut self, root: &ProcRef) {
        // unguarded call graph over the reachable definitions
        let mut graph: BTreeMap<ProcName, BTreeSet<ProcName>> = BTreeMap::new();
        for name in &self.visited {
            if let Some(body) = self.defs.get(name) {
                let mut calls = BTreeSet::new();
                unguarded_calls(body, &mut calls);
                graph.insert(name.clone(), calls);
            }
        }
        let mut root_calls = BTreeSet::new();
        unguarded_calls(root, &mut root_calls);

        let mut state: BTreeMap<ProcName, u8> = BTreeMap::new();
        let mut bad = BTreeSet::new();
        for name in graph.keys() {
            cycle_dfs(name, &graph, &mut state, &mut Vec::new(), &mut bad);
        }
        for name in bad {
            self.push(Violation::UnguardedRecursion(name.to_string()));
        }
    }
}

fn unguarded_calls(p: &ProcRef, out: &mut BTreeSet<ProcName>) {
    match &**p {
        Process::Prefix { .. } => {}
        Process::If { then, otherwise, .. } => {
            unguarded_calls(then, out);
            unguarded_calls(otherwise, out);
        }
        Process::Choice(options) => options.iter().for_each(|(_, q)| unguarded_calls(q, out)),
        Process::Interleave { left, right, .. } | Process::Par(left, right) => {
            unguarded_calls(left, out);
            unguarded_calls(right, out);
        }
        Process::Call(name) => {
            out.insert(name.clone());
        }
    }
}

fn cycle_dfs(
    name: &ProcName,
    graph: &BTreeMap<ProcName, BTreeSet<ProcName>>,
    state: &mut BTreeMap<ProcName, u8>,
    stack: &mut Vec<ProcName>,
    bad: &mut BTreeSet<ProcName>,
) {
    match state.get(name) {
        Some(2) => return,
        Some(1) => {
            // back edge: everything on the stack from `name` is on a cycle
            if let Some(pos) = stack.iter().position(|n| n == name) {
                bad.extend(stack[pos..].iter().cloned());
            }
            return;
        }
        _ => {}
    }
    state.insert(name.clone(), 1);
    stack.push(name.clone());
    if let Some(next) = graph.get(name) {
        for m in next {
            cycle_dfs(m, graph, state, stack, bad);
        }
    }
    stack.pop();
    state.insert(name.clone(), 2);
}
