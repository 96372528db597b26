//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::io::Write;
use std::sync::Arc;

use evometric::dataspace::{DataSpace, DataState, VarSpec};
use evometric::engine::Configuration;
use evometric::environment::{EnvRef, FiniteKernel, RandomStream};
use evometric::process::{parse_program, Definitions, Expr, Op, ProcRef, Process};

/// Prints one result line past the test harness's output capture.
pub fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {criterion:>2}: {verdict} {detail}");
}

// ---------------------------------------------------------------------------
// Optimal transport by exhaustive assignment

/// Exact optimal-transport cost between two uniform measures on `n` points
/// each, with cost `max(ν - ω, 0)`. Every vertex of the transport polytope
/// is a permutation, so the minimum over all `n!` assignments is the LP value.
pub fn assignment_ot(omega: &[f64], nu: &[f64]) -> f64 {
    assert_eq!(omega.len(), nu.len());
    let n = omega.len();
    let cost = |i: usize, j: usize| (nu[j] - omega[i]).max(0.0);
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| (0..n).map(|i| cost(i, p[i])).sum::<f64>();
    let mut best = total(&perm);
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(total(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

// ---------------------------------------------------------------------------
// Random processes

pub const PROC_VARS: [&str; 3] = ["x", "y", "z"];

pub fn proc_space() -> Arc<DataSpace> {
    DataSpace::new(PROC_VARS.iter().map(|v| VarSpec::continuous(*v, -10.0, 10.0)).collect()).unwrap()
}

pub fn random_state(space: &Arc<DataSpace>, rng: &mut RandomStream) -> DataState {
    let values = space.vars().iter().map(|_| rng.uniform(-10.0, 10.0)).collect();
    DataState::new(space.clone(), values).unwrap()
}

/// Guarded definitions the generated terms may call. `Half` writes `x`.
pub fn proc_defs() -> Definitions {
    parse_program(
        "Loop := √.Loop;
         Flip := 0.5: √.Loop + 0.5: √.Flip;
         Half := (x * 0.5 -> x).Half;",
    )
    .unwrap()
    .defs
}

fn random_arith(rng: &mut RandomStream, depth: u32) -> Expr {
    if depth == 0 || rng.uniform01() < 0.3 {
        return if rng.uniform01() < 0.5 {
            Expr::constant(rng.uniform(-5.0, 5.0))
        } else {
            Expr::var(PROC_VARS[rng.below(3) as usize])
        };
    }
    let op = [Op::Add, Op::Sub, Op::Mul, Op::Min, Op::Max][rng.below(5) as usize];
    let e = Expr::apply(op, vec![random_arith(rng, depth - 1), random_arith(rng, depth - 1)]).unwrap();
    if rng.uniform01() < 0.1 {
        Expr::apply(Op::Abs, vec![e]).unwrap()
    } else {
        e
    }
}

fn random_guard(rng: &mut RandomStream, depth: u32) -> Expr {
    if depth > 0 && rng.uniform01() < 0.3 {
        let a = random_guard(rng, depth - 1);
        let b = random_guard(rng, depth - 1);
        return match rng.below(3) {
            0 => a.and(b),
            1 => a.or(b),
            _ => a.not(),
        };
    }
    let op = [Op::Lt, Op::Le, Op::Gt, Op::Ge, Op::Eq, Op::Ne][rng.below(6) as usize];
    Expr::apply(op, vec![random_arith(rng, 2), random_arith(rng, 2)]).unwrap()
}

/// A random term whose prefixes only write variables in `writable`, so
/// synchronous components can be given disjoint write sets.
pub fn random_process(rng: &mut RandomStream, depth: u32, writable: &[&'static str]) -> ProcRef {
    if depth == 0 || rng.uniform01() < 0.15 {
        return match rng.below(3) {
            0 => Process::call("Loop"),
            1 => Process::call("Flip"),
            _ if writable.contains(&"x") => Process::call("Half"),
            _ => Process::tick(Process::call("Loop")),
        };
    }
    match rng.below(5) {
        0 => {
            let mut vars: Vec<&str> = writable.to_vec();
            let keep = rng.below(vars.len() as u64 + 1) as usize;
            for i in 0..vars.len() {
                let j = i + rng.below((vars.len() - i) as u64) as usize;
                vars.swap(i, j);
            }
            vars.truncate(keep);
            let asg = vars.into_iter().map(|v| (random_arith(rng, 2), v)).collect();
            Process::prefix(asg, random_process(rng, depth - 1, writable))
        }
        1 => Process::cond(
            random_guard(rng, 2),
            random_process(rng, depth - 1, writable),
            random_process(rng, depth - 1, writable),
        ),
        2 => {
            let k = 1 + rng.below(4) as usize;
            let raw: Vec<f64> = (0..k).map(|_| rng.uniform(0.05, 1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let branches = raw
                .into_iter()
                .map(|w| (w / sum, random_process(rng, depth - 1, writable)))
                .collect();
            Process::choice(branches)
        }
        3 => Process::interleave(
            random_process(rng, depth - 1, writable),
            rng.uniform(0.0, 1.0),
            random_process(rng, depth - 1, writable),
        ),
        _ => {
            let cut = rng.below(writable.len() as u64 + 1) as usize;
            let (l, r) = writable.split_at(cut);
            Process::par(random_process(rng, depth - 1, l), random_process(rng, depth - 1, r))
        }
    }
}

// ---------------------------------------------------------------------------
// Toy model with eight data states

/// Counter `x ∈ {0..3}` and flag `y ∈ {0, 1}`. `P` climbs with probability
/// 0.3; `Q` spends a raised flag to step down, otherwise jumps by two.
pub const TOY_PROGRAM: &str = "
    P := 0.3: (min(x + 1, 3) -> x).Q + 0.7: √.P;
    Q := if [y == 1] (max(x - 1, 0), 0 -> x, y).P else (min(x + 2, 3) -> x).Q;
";

/// Probability that the environment raises the flag, given the counter.
pub fn toy_flag_prob(x: f64) -> f64 {
    0.1 + 0.2 * x
}

pub fn toy_space() -> Arc<DataSpace> {
    DataSpace::new(vec![VarSpec::finite("x", &[0.0, 1.0, 2.0, 3.0]), VarSpec::finite("y", &[0.0, 1.0])]).unwrap()
}

pub fn toy_env() -> EnvRef {
    Arc::new(FiniteKernel::new("toy-flag", |d: &DataState| {
        let x = d.get("x")?;
        let p = toy_flag_prob(x);
        Ok(vec![(1.0 - p, d.update(&[("y", 0.0)])?), (p, d.update(&[("y", 1.0)])?)])
    }))
}

pub fn toy_configuration() -> Configuration {
    let prog = parse_program(TOY_PROGRAM).unwrap();
    let space = toy_space();
    let d0 = DataState::new(space, vec![0.0, 0.0]).unwrap();
    Configuration::new(Process::call("P"), d0, toy_env(), Arc::new(prog.defs)).unwrap()
}

/// Index of a toy data state in `0..8`.
pub fn toy_index(x: f64, y: f64) -> usize {
    2 * x as usize + y as usize
}

/// The exact data distribution after each of `steps` steps, computed from a
/// hand-written chain on (control point, x, y) that does not use the
/// library's semantics.
pub fn toy_exact(steps: usize) -> Vec<[f64; 8]> {
    // control point 0 is P, 1 is Q
    let mut dist = [[[0.0f64; 2]; 4]; 2];
    dist[0][0][0] = 1.0;
    let mut out = Vec::new();
    for _ in 0..steps {
        let mut next = [[[0.0f64; 2]; 4]; 2];
        let settle = |at: usize, x: usize, mass: f64, next: &mut [[[f64; 2]; 4]; 2]| {
            let p = toy_flag_prob(x as f64);
            next[at][x][1] += mass * p;
            next[at][x][0] += mass * (1.0 - p);
        };
        for (x, (at_p, at_q)) in dist[0].iter().zip(&dist[1]).enumerate() {
            for y in 0..2 {
                if at_p[y] > 0.0 {
                    settle(1, (x + 1).min(3), 0.3 * at_p[y], &mut next);
                    settle(0, x, 0.7 * at_p[y], &mut next);
                }
                if at_q[y] > 0.0 {
                    if y == 1 {
                        settle(0, x.saturating_sub(1), at_q[y], &mut next);
                    } else {
                        settle(1, (x + 2).min(3), at_q[y], &mut next);
                    }
                }
            }
        }
        dist = next;
        let mut marginal = [0.0; 8];
        for at in dist {
            for (x, ys) in at.iter().enumerate() {
                for (y, m) in ys.iter().enumerate() {
                    marginal[2 * x + y] += m;
                }
            }
        }
        out.push(marginal);
    }
    out
}
