//! Configurations and the sampling algorithms: one step, one trajectory, and
//! the empirical evolution sequence of `N` independent runs.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dataspace::{DataSpace, DataState, PenaltyRef};
use crate::environment::{env_sample, EnvRef, RandomStream, Seed};
use crate::error::{Error, Result};
use crate::process::{pstep, validate_with, Definitions, ProcRef, ValidationOptions};

/// A program, its data and its environment: `<P, d, E>`.
#[derive(Clone)]
pub struct Configuration {
    process: ProcRef,
    data: DataState,
    env: EnvRef,
    defs: Arc<Definitions>,
    options: Arc<ValidationOptions>,
}

impl Configuration {
    /// Builds a configuration after validating the process against the data space.
    pub fn new(process: ProcRef, data: DataState, env: EnvRef, defs: Arc<Definitions>) -> Result<Self> {
        Self::with_options(process, data, env, defs, &ValidationOptions::default())
    }

    pub fn with_options(
        process: ProcRef,
        data: DataState,
        env: EnvRef,
        defs: Arc<Definitions>,
        options: &ValidationOptions,
    ) -> Result<Self> {
        validate_with(&process, &defs, data.space(), options).into_result()?;
        Ok(Configuration {
            process,
            data,
            env,
            defs,
            options: Arc::new(options.clone()),
        })
    }

    /// Same program and environment, different data.
    pub fn with_data(&self, data: DataState) -> Result<Self> {
        if !data.space().same_layout(self.data.space()) {
            return Err(Error::structural("data state belongs to a different data space"));
        }
        Ok(Configuration {
            data,
            ..self.clone()
        })
    }

    /// Same data and environment, different program (re-validated with the
    /// options this configuration was built with).
    pub fn with_process(&self, process: ProcRef, defs: Arc<Definitions>) -> Result<Self> {
        Configuration::with_options(process, self.data.clone(), self.env.clone(), defs, &self.options)
    }

    /// Same program and data, different environment.
    pub fn with_env(&self, env: EnvRef) -> Self {
        Configuration {
            env,
            ..self.clone()
        }
    }

    pub fn process(&self) -> &ProcRef {
        &self.process
    }

    pub fn data(&self) -> &DataState {
        &self.data
    }

    pub fn env(&self) -> &EnvRef {
        &self.env
    }

    pub fn defs(&self) -> &Arc<Definitions> {
        &self.defs
    }

    pub fn space(&self) -> &Arc<DataSpace> {
        self.data.space()
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Configuration")
            .field("process", &self.process.to_string())
            .field("data", &self.data)
            .field("env", &self.env.id())
            .finish()
    }
}

/// One transition: pick a process move with a single uniform draw, apply its
/// effect, then let the environment act on the result.
pub fn sim_step(c: &Configuration, rng: &mut RandomStream) -> Result<Configuration> {
    let dist = pstep(&c.process, &c.data, &c.defs)?;
    if dist.is_empty() {
        return Err(Error::Semantic("process has no move".into()));
    }
    let u = rng.uniform01();
    let branch = &dist.branches()[dist.select(u)];
    let after_program = branch.effect.apply(&c.data)?;
    let data = env_sample(c.env.as_ref(), &after_program, rng)?;
    Ok(Configuration {
        process: branch.next.clone(),
        data,
        env: c.env.clone(),
        defs: c.defs.clone(),
        options: c.options.clone(),
    })
}

/// The configurations `c_0 .. c_k` of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub configs: Vec<Configuration>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &DataState> {
        self.configs.iter().map(|c| c.data())
    }

    /// CSV with columns `step` then the variables in space order.
    pub fn write_csv(&self, out: &mut impl Write, header_comments: &[String]) -> std::io::Result<()> {
        for line in header_comments {
            writeln!(out, "# {line}")?;
        }
        let Some(first) = self.configs.first() else {
            return Ok(());
        };
        write!(out, "step")?;
        for name in first.space().names() {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (i, c) in self.configs.iter().enumerate() {
            write!(out, "{i}")?;
            for v in c.data().values() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn simulate(c: &Configuration, k: usize, rng: &mut RandomStream) -> Result<Trajectory> {
    let mut configs = Vec::with_capacity(k + 1);
    configs.push(c.clone());
    for _ in 0..k {
        let next = sim_step(configs.last().expect("non-empty"), rng)?;
        configs.push(next);
    }
    Ok(Trajectory { configs })
}

/// Runs `c` for `k` steps on the stream of `run`, calling `visit` on every
/// configuration including the initial one.
fn run_observed(
    c: &Configuration,
    k: usize,
    seed: Seed,
    run: usize,
    mut visit: impl FnMut(usize, &Configuration),
) -> Result<u64> {
    let mut rng = seed.stream(run as u64);
    let mut current = c.clone();
    let mut clamps = 0u64;
    visit(0, &current);
    for step in 1..=k {
        current = sim_step(&current, &mut rng).map_err(|e| Error::RunFailed {
            run,
            step,
            source: Box::new(e),
        })?;
        clamps += u64::from(current.data().clamp_events());
        visit(step, &current);
    }
    Ok(clamps)
}

/// Collects per-run results in run order; the lowest failing run wins.
fn collect_runs<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = (0..n).into_par_iter().map(f).collect();
    results.into_iter().collect()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EstimateOptions {
    /// Keep the process term of every sampled configuration.
    pub keep_processes: bool,
}

/// `N` sampled data states at each step `0..=k`.
///
/// Values are stored step-major, then run, then variable.
#[derive(Clone)]
pub struct EmpiricalEvolutionSequence {
    space: Arc<DataSpace>,
    horizon: usize,
    runs: usize,
    values: Vec<f64>,
    processes: Option<Vec<ProcRef>>,
    clamp_events: u64,
}

impl fmt::Debug for EmpiricalEvolutionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmpiricalEvolutionSequence")
            .field("horizon", &self.horizon)
            .field("runs", &self.runs)
            .field("vars", &self.space.len())
            .finish()
    }
}

pub fn estimate(c: &Configuration, k: usize, n: usize, seed: Seed) -> Result<EmpiricalEvolutionSequence> {
    estimate_with(c, k, n, seed, EstimateOptions::default())
}

pub fn estimate_with(
    c: &Configuration,
    k: usize,
    n: usize,
    seed: Seed,
    options: EstimateOptions,
) -> Result<EmpiricalEvolutionSequence> {
    if n == 0 {
        return Err(Error::Precondition("estimate needs at least one run".into()));
    }
    let width = c.space().len();
    let per_run = collect_runs(n, |run| {
        let mut values = Vec::with_capacity((k + 1) * width);
        let mut procs = Vec::new();
        let clamps = run_observed(c, k, seed, run, |_, cfg| {
            values.extend_from_slice(cfg.data().values());
            if options.keep_processes {
                procs.push(cfg.process().clone());
            }
        })?;
        Ok((values, procs, clamps))
    })?;

    let mut values = vec![0.0; (k + 1) * n * width];
    let mut processes = options.keep_processes.then(|| Vec::with_capacity((k + 1) * n));
    let mut clamp_events = 0;
    for (run, (vals, _, clamps)) in per_run.iter().enumerate() {
        clamp_events += clamps;
        for step in 0..=k {
            let dst = (step * n + run) * width;
            values[dst..dst + width].copy_from_slice(&vals[step * width..(step + 1) * width]);
        }
    }
    if let Some(ps) = processes.as_mut() {
        for step in 0..=k {
            for (_, procs, _) in &per_run {
                ps.push(procs[step].clone());
            }
        }
    }
    Ok(EmpiricalEvolutionSequence {
        space: c.space().clone(),
        horizon: k,
        runs: n,
        values,
        processes,
        clamp_events,
    })
}

impl EmpiricalEvolutionSequence {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn space(&self) -> &Arc<DataSpace> {
        &self.space
    }

    /// Total number of clamping events over all runs and steps.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    fn offset(&self, step: usize, run: usize) -> usize {
        (step * self.runs + run) * self.space.len()
    }

    /// Raw values of run `run` at `step`, in variable order.
    pub fn values(&self, step: usize, run: usize) -> &[f64] {
        let o = self.offset(step, run);
        &self.values[o..o + self.space.len()]
    }

    pub fn state(&self, step: usize, run: usize) -> DataState {
        DataState::new(self.space.clone(), self.values(step, run).to_vec())
            .expect("stored values are in domain")
    }

    /// The sample set `E_step` as data states.
    pub fn states_at(&self, step: usize) -> Vec<DataState> {
        (0..self.runs).map(|r| self.state(step, r)).collect()
    }

    /// Values of one variable across runs at `step`.
    pub fn column(&self, step: usize, var: usize) -> Vec<f64> {
        (0..self.runs).map(|r| self.values(step, r)[var]).collect()
    }

    pub fn process(&self, step: usize, run: usize) -> Option<&ProcRef> {
        self.processes.as_ref().map(|ps| &ps[step * self.runs + run])
    }

    /// Penalty of every run at `step`.
    pub fn penalties(&self, penalty: &PenaltyRef, step: usize) -> Vec<f64> {
        (0..self.runs)
            .map(|r| penalty.eval(step, &self.state(step, r)))
            .collect()
    }

    /// One row per (run, step): `run,step,<vars..>`, run-major.
    pub fn write_samples_csv(&self, out: &mut impl Write, header_comments: &[String]) -> std::io::Result<()> {
        for line in header_comments {
            writeln!(out, "# {line}")?;
        }
        write!(out, "run,step")?;
        for name in self.space.names() {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for run in 0..self.runs {
            for step in 0..=self.horizon {
                write!(out, "{run},{step}")?;
                for v in self.values(step, run) {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    /// Per-step mean and sample standard deviation of every variable:
    /// `step,variable,mean,std`.
    pub fn write_summary_csv(&self, out: &mut impl Write, header_comments: &[String]) -> std::io::Result<()> {
        for line in header_comments {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "step,variable,mean,std")?;
        for step in 0..=self.horizon {
            for (var, spec) in self.space.vars().iter().enumerate() {
                let (mean, std) = mean_std(&self.column(step, var));
                writeln!(out, "{step},{},{mean},{std}", spec.name)?;
            }
        }
        Ok(())
    }
}

/// Mean and `N-1` standard deviation; zero spread for fewer than two samples
/// or identical samples.
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let first = xs[0];
    if xs.iter().all(|x| *x == first) {
        return (first, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Penalty values of `N` runs observed at selected steps only.
///
/// This is what the metric needs, and it avoids storing full data states for
/// long horizons. For the same seed it agrees exactly with evaluating the
/// penalty on [`estimate`]'s output.
#[derive(Clone, Debug)]
pub struct PenaltySamples {
    pub steps: Vec<usize>,
    pub runs: usize,
    /// `values[i][r]`: penalty of run `r` at `steps[i]`.
    pub values: Vec<Vec<f64>>,
}

pub fn estimate_penalties(
    c: &Configuration,
    steps: &[usize],
    n: usize,
    seed: Seed,
    penalty: &PenaltyRef,
) -> Result<PenaltySamples> {
    if n == 0 {
        return Err(Error::Precondition("estimate needs at least one run".into()));
    }
    if steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("observation steps must be strictly ascending".into()));
    }
    let k = steps.last().copied().unwrap_or(0);
    let per_run = collect_runs(n, |run| {
        let mut out = Vec::with_capacity(steps.len());
        let mut next = 0;
        run_observed(c, k, seed, run, |step, cfg| {
            if next < steps.len() && steps[next] == step {
                out.push(penalty.eval(step, cfg.data()));
                next += 1;
            }
        })?;
        Ok(out)
    })?;
    let values = (0..steps.len())
        .map(|i| per_run.iter().map(|r| r[i]).collect())
        .collect();
    Ok(PenaltySamples {
        steps: steps.to_vec(),
        runs: n,
        values,
    })
}
