use std::fmt;
use std::sync::Arc;

use crate::dataspace::DataState;
use crate::error::{Error, Result};

use super::ast::{same_process, Definitions, ProcName, ProcRef, Process};
use super::expr::VarName;

/// A substitution `[x1 <- v1, ..]` produced by one process action.
#[derive(Clone, Default, PartialEq)]
pub struct Effect {
    assignments: Vec<(VarName, f64)>,
}

impl Effect {
    pub fn empty() -> Self {
        Effect::default()
    }

    pub fn new(assignments: Vec<(VarName, f64)>) -> Self {
        Effect { assignments }
    }

    pub fn assignments(&self) -> &[(VarName, f64)] {
        &self.assignments
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// `self` followed by `other`; on a shared variable the later write wins.
    pub fn concat(&self, other: &Effect) -> Effect {
        let mut assignments = Vec::with_capacity(self.assignments.len() + other.assignments.len());
        assignments.extend_from_slice(&self.assignments);
        assignments.extend_from_slice(&other.assignments);
        Effect { assignments }
    }

    /// Produces `theta(d)`. Values are clamped into the variable domains.
    pub fn apply(&self, state: &DataState) -> Result<DataState> {
        let mut next = state.successor();
        for (var, value) in &self.assignments {
            next.set_named(var.as_str(), *value)?;
        }
        Ok(next)
    }
}

impl fmt::Debug for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (x, v)) in self.assignments.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x} <- {v}")?;
        }
        f.write_str("]")
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub prob: f64,
    pub effect: Effect,
    pub next: ProcRef,
}

/// Finite distribution over (effect, continuation) pairs, in construction order.
#[derive(Clone, Debug, Default)]
pub struct StepDistribution {
    branches: Vec<Branch>,
}

impl StepDistribution {
    pub fn dirac(effect: Effect, next: ProcRef) -> Self {
        StepDistribution {
            branches: vec![Branch {
                prob: 1.0,
                effect,
                next,
            }],
        }
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.branches.iter().map(|b| b.prob).sum()
    }

    /// Adds mass to a pair, merging with an identical pair already present.
    fn push(&mut self, prob: f64, effect: Effect, next: ProcRef) {
        if prob <= 0.0 {
            return;
        }
        if let Some(b) = self
            .branches
            .iter_mut()
            .find(|b| b.effect == effect && same_process(&b.next, &next))
        {
            b.prob += prob;
        } else {
            self.branches.push(Branch { prob, effect, next });
        }
    }

    /// Index selected by `u` in (0, 1]: the `i` with cumulative mass below `i`
    /// strictly less than `u` and cumulative mass up to `i` at least `u`.
    pub fn select(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, b) in self.branches.iter().enumerate() {
            acc += b.prob;
            if u <= acc {
                return i;
            }
        }
        // rounding can leave the total a hair below 1
        self.branches.len() - 1
    }
}

/// One-step semantics of `process` in `state`.
pub fn pstep(process: &ProcRef, state: &DataState, defs: &Definitions) -> Result<StepDistribution> {
    step_in(process, state, defs, &mut Vec::new())
}

// `unfolding` holds the definitions entered since the last prefix; meeting one
// again means the recursion is unguarded.
fn step_in<'a>(
    process: &'a ProcRef,
    state: &DataState,
    defs: &'a Definitions,
    unfolding: &mut Vec<&'a ProcName>,
) -> Result<StepDistribution> {
    match &**process {
        Process::Prefix { exprs, vars, next } => {
            if exprs.len() != vars.len() {
                return Err(Error::structural(format!(
                    "prefix assigns {} expressions to {} variables",
                    exprs.len(),
                    vars.len()
                )));
            }
            let mut assignments = Vec::with_capacity(vars.len());
            for (e, x) in exprs.iter().zip(vars) {
                assignments.push((x.clone(), e.eval(state)?));
            }
            Ok(StepDistribution::dirac(Effect::new(assignments), next.clone()))
        }
        Process::If {
            guard,
            then,
            otherwise,
        } => {
            let v = guard.eval(state)?;
            if v == 1.0 {
                step_in(then, state, defs, unfolding)
            } else if v == 0.0 {
                step_in(otherwise, state, defs, unfolding)
            } else {
                Err(Error::Semantic(format!(
                    "guard `{guard}` evaluated to {v}, expected 0 or 1"
                )))
            }
        }
        Process::Choice(options) => {
            let mut out = StepDistribution::default();
            for (w, p) in options {
                if *w <= 0.0 {
                    continue;
                }
                for b in step_in(p, state, defs, unfolding)?.branches {
                    out.push(w * b.prob, b.effect, b.next);
                }
            }
            Ok(out)
        }
        Process::Interleave { left, p, right } => {
            let mut out = StepDistribution::default();
            if *p > 0.0 {
                for b in step_in(left, state, defs, unfolding)?.branches {
                    let next = Arc::new(Process::Interleave {
                        left: b.next,
                        p: *p,
                        right: right.clone(),
                    });
                    out.push(p * b.prob, b.effect, next);
                }
            }
            if *p < 1.0 {
                for b in step_in(right, state, defs, unfolding)?.branches {
                    let next = Arc::new(Process::Interleave {
                        left: left.clone(),
                        p: *p,
                        right: b.next,
                    });
                    out.push((1.0 - p) * b.prob, b.effect, next);
                }
            }
            Ok(out)
        }
        Process::Par(l, r) => {
            let left = step_in(l, state, defs, unfolding)?;
            let right = step_in(r, state, defs, unfolding)?;
            let mut out = StepDistribution::default();
            for a in &left.branches {
                for b in &right.branches {
                    let next = Arc::new(Process::Par(a.next.clone(), b.next.clone()));
                    out.push(a.prob * b.prob, a.effect.concat(&b.effect), next);
                }
            }
            Ok(out)
        }
        Process::Call(name) => {
            let body = defs
                .get(name)
                .ok_or_else(|| Error::structural(format!("undefined process `{name}`")))?;
            if unfolding.contains(&name) {
                return Err(Error::Semantic(format!(
                    "recursion through `{name}` is not guarded by a prefix"
                )));
            }
            unfolding.push(name);
            let out = step_in(body, state, defs, unfolding);
            unfolding.pop();
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{DataSpace, VarSpec};
    use crate::process::expr::Expr;

    fn space() -> Arc<DataSpace> {
        DataSpace::new(vec![
            VarSpec::continuous("x", -10.0, 10.0),
            VarSpec::continuous("y", -10.0, 10.0),
        ])
        .unwrap()
    }

    fn state(x: f64, y: f64) -> DataState {
        DataState::new(space(), vec![x, y]).unwrap()
    }

    #[test]
    fn tick_is_dirac_on_empty_effect() {
        let defs = Definitions::new();
        let p = Process::tick(Process::call("P"));
        let dist = pstep(&p, &state(0.0, 0.0), &defs).unwrap();
        assert_eq!(dist.len(), 1);
        assert!(dist.branches()[0].effect.is_empty());
        assert_eq!(*dist.branches()[0].next, Process::Call("P".into()));
    }

    #[test]
    fn choice_gives_weighted_mixture() {
        let defs = Definitions::new();
        let stop = Process::call("S");
        let p = Process::choice(vec![
            (0.5, Process::assign(1.0, "x", stop.clone())),
            (0.5, Process::assign(2.0, "x", stop)),
        ]);
        let dist = pstep(&p, &state(0.0, 0.0), &defs).unwrap();
        assert_eq!(dist.len(), 2);
        for (b, v) in dist.branches().iter().zip([1.0, 2.0]) {
            assert_eq!(b.prob, 0.5);
            assert_eq!(b.effect.assignments()[0].1, v);
        }
    }

    #[test]
    fn identical_pairs_merge() {
        let defs = Definitions::new();
        let stop = Process::call("S");
        let p = Process::choice(vec![
            (0.25, Process::assign(1.0, "x", stop.clone())),
            (0.75, Process::assign(1.0, "x", stop)),
        ]);
        let dist = pstep(&p, &state(0.0, 0.0), &defs).unwrap();
        assert_eq!(dist.len(), 1);
        assert_eq!(dist.branches()[0].prob, 1.0);
    }

    #[test]
    fn interleave_rewraps_continuations() {
        let defs = Definitions::new();
        let l = Process::assign(1.0, "x", Process::call("L"));
        let r = Process::assign(2.0, "y", Process::call("R"));
        let p = Process::interleave(l.clone(), 0.3, r.clone());
        let dist = pstep(&p, &state(0.0, 0.0), &defs).unwrap();
        assert_eq!(dist.len(), 2);
        let b0 = &dist.branches()[0];
        assert!((b0.prob - 0.3).abs() < 1e-15);
        assert_eq!(*b0.next, Process::Interleave { left: Process::call("L"), p: 0.3, right: r });
        let b1 = &dist.branches()[1];
        assert!((b1.prob - 0.7).abs() < 1e-15);
        assert_eq!(*b1.next, Process::Interleave { left: l, p: 0.3, right: Process::call("R") });
    }

    #[test]
    fn par_is_product_with_concatenated_effects() {
        let defs = Definitions::new();
        let l = Process::choice(vec![
            (0.5, Process::assign(1.0, "x", Process::call("A"))),
            (0.5, Process::assign(2.0, "x", Process::call("A"))),
        ]);
        let r = Process::assign(Expr::var("x") + 1.0, "y", Process::call("B"));
        let dist = pstep(&Process::par(l, r), &state(5.0, 0.0), &defs).unwrap();
        assert_eq!(dist.len(), 2);
        assert!((dist.total_mass() - 1.0).abs() < 1e-12);
        let e = &dist.branches()[0].effect;
        // both sides read the pre-step state
        assert_eq!(e.assignments()[1].1, 6.0);
        let d = e.apply(&state(5.0, 0.0)).unwrap();
        assert_eq!(d.values(), &[1.0, 6.0]);
    }

    #[test]
    fn guard_must_be_boolean() {
        let defs = Definitions::new();
        let p = Process::cond(
            Expr::var("x"),
            Process::tick(Process::call("A")),
            Process::tick(Process::call("B")),
        );
        assert!(matches!(pstep(&p, &state(0.5, 0.0), &defs), Err(Error::Semantic(_))));
        let dist = pstep(&p, &state(1.0, 0.0), &defs).unwrap();
        assert_eq!(*dist.branches()[0].next, Process::Call("A".into()));
    }

    #[test]
    fn call_unfolds_definition() {
        let mut defs = Definitions::new();
        defs.define("A", Process::assign(3.0, "y", Process::call("A")));
        let dist = pstep(&Process::call("A"), &state(0.0, 0.0), &defs).unwrap();
        assert_eq!(dist.branches()[0].effect.assignments()[0].1, 3.0);
        assert!(pstep(&Process::call("Z"), &state(0.0, 0.0), &defs).is_err());
    }

    #[test]
    fn unguarded_loop_is_reported_not_overflowed() {
        let mut defs = Definitions::new();
        defs.define("A", Process::call("A"));
        assert!(matches!(
            pstep(&Process::call("A"), &state(0.0, 0.0), &defs),
            Err(Error::Semantic(_))
        ));
    }

    #[test]
    fn selection_uses_half_open_intervals() {
        let stop = Process::call("S");
        let mut dist = StepDistribution::default();
        dist.push(0.3, Effect::empty(), stop.clone());
        dist.push(0.7, Effect::new(vec![("x".into(), 1.0)]), stop);
        assert_eq!(dist.select(1e-12), 0);
        assert_eq!(dist.select(0.3), 0);
        assert_eq!(dist.select(0.3000001), 1);
        assert_eq!(dist.select(1.0), 1);
    }
}
