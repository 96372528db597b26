//! The hemimetric on data states, its Wasserstein lifting estimated from
//! sorted penalty samples, and the discounted evolution metric.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataspace::{DataState, PenaltyRef};
use crate::engine::{estimate_penalties, Configuration};
use crate::environment::Seed;
use crate::error::{Error, Result};

/// Strictly ascending, non-empty list of observation steps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ObservationTimes(Vec<usize>);

impl ObservationTimes {
    pub fn new(steps: Vec<usize>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::validation("observation times must be non-empty"));
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("observation times must be strictly ascending"));
        }
        Ok(ObservationTimes(steps))
    }

    /// `from..=to`.
    pub fn range(from: usize, to: usize) -> Result<Self> {
        if from > to {
            return Err(Error::validation(format!("empty observation range {from}..{to}")));
        }
        Ok(ObservationTimes((from..=to).collect()))
    }

    pub fn steps(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> usize {
        self.0[0]
    }

    /// The simulation horizon `k = max OT`.
    pub fn horizon(&self) -> usize {
        *self.0.last().expect("non-empty")
    }

    /// Observation steps inside `[lo, hi]`.
    pub fn within(&self, lo: usize, hi: usize) -> Option<ObservationTimes> {
        let v: Vec<usize> = self.0.iter().copied().filter(|t| (lo..=hi).contains(t)).collect();
        (!v.is_empty()).then_some(ObservationTimes(v))
    }
}

impl TryFrom<Vec<usize>> for ObservationTimes {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        ObservationTimes::new(v)
    }
}

impl From<ObservationTimes> for Vec<usize> {
    fn from(t: ObservationTimes) -> Self {
        t.0
    }
}

/// Accepts `a..b` (inclusive) or a comma-separated list.
impl FromStr for ObservationTimes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::config("obs-times", format!("cannot parse `{s}`: {what}"));
        let s = s.trim();
        if let Some((a, b)) = s.split_once("..") {
            let a = a.trim().parse().map_err(|_| bad("range start"))?;
            let b = b.trim().trim_start_matches('=').parse().map_err(|_| bad("range end"))?;
            return ObservationTimes::range(a, b);
        }
        let steps = s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad("list entry")))
            .collect::<Result<Vec<_>>>()?;
        ObservationTimes::new(steps)
    }
}

impl fmt::Display for ObservationTimes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let contiguous = self.0.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous && self.0.len() > 2 {
            write!(f, "{}..{}", self.first(), self.horizon())
        } else {
            let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

/// Non-increasing weight `λ: OT -> (0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Discount {
    Constant { value: f64 },
    /// `gamma^tau`.
    Exponential { gamma: f64 },
}

impl Default for Discount {
    fn default() -> Self {
        Discount::Constant { value: 1.0 }
    }
}

impl Discount {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::validation(format!("constant discount {value} outside (0, 1]")));
        }
        Ok(Discount::Constant { value })
    }

    pub fn exponential(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::validation(format!("discount base {gamma} outside (0, 1]")));
        }
        Ok(Discount::Exponential { gamma })
    }

    pub fn weight(&self, tau: usize) -> f64 {
        match *self {
            Discount::Constant { value } => value,
            Discount::Exponential { gamma } => gamma.powf(tau as f64),
        }
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self, Discount::Constant { value } if *value == 1.0)
    }
}

/// Accepts `1`, `const:<c>` or `exp:<gamma>`.
impl FromStr for Discount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("discount", format!("cannot parse `{s}`; expected 1, const:<c> or exp:<gamma>"));
        let s = s.trim();
        let (kind, arg) = s.split_once(':').unwrap_or(("const", s));
        let x: f64 = arg.trim().parse().map_err(|_| bad())?;
        match kind {
            "const" | "constant" => Discount::constant(x),
            "exp" | "exponential" => Discount::exponential(x),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Discount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discount::Constant { value } => write!(f, "const:{value}"),
            Discount::Exponential { gamma } => write!(f, "exp:{gamma}"),
        }
    }
}

/// `max{ρ_τ(d2) - ρ_τ(d1), 0}`: how much worse `d2` is than `d1` at step `tau`.
pub fn data_state_metric(penalty: &PenaltyRef, tau: usize, d1: &DataState, d2: &DataState) -> Result<f64> {
    if !d1.space().same_layout(d2.space()) {
        return Err(Error::structural("data states belong to different data spaces"));
    }
    Ok((penalty.eval(tau, d2) - penalty.eval(tau, d1)).max(0.0))
}

/// Wasserstein distance between the empirical penalty distributions
/// `omega` (`N` values) and `nu` (`ℓN` values) under the ground cost
/// `max{ν - ω, 0}`. Inputs need not be sorted.
pub fn wasserstein_penalties(omega: &[f64], nu: &[f64]) -> Result<f64> {
    let n = omega.len();
    if n == 0 {
        return Err(Error::structural("empty sample set"));
    }
    if !nu.len().is_multiple_of(n) || nu.is_empty() {
        return Err(Error::structural(format!(
            "second sample set has {} elements, not a positive multiple of {n}",
            nu.len()
        )));
    }
    let scale = nu.len() / n;
    let mut omega = omega.to_vec();
    let mut nu = nu.to_vec();
    omega.sort_by(f64::total_cmp);
    nu.sort_by(f64::total_cmp);
    let total: f64 = nu
        .iter()
        .enumerate()
        .map(|(h, v)| (v - omega[h / scale]).max(0.0))
        .sum();
    Ok(total / nu.len() as f64)
}

/// Pointwise estimate `W` at step `tau` from two sample sets of data states.
pub fn compute_w(e1: &[DataState], e2: &[DataState], penalty: &PenaltyRef, tau: usize) -> Result<f64> {
    if let (Some(a), Some(b)) = (e1.first(), e2.first()) {
        if !a.space().same_layout(b.space()) {
            return Err(Error::structural("sample sets belong to different data spaces"));
        }
    }
    let omega: Vec<f64> = e1.iter().map(|d| penalty.eval(tau, d)).collect();
    let nu: Vec<f64> = e2.iter().map(|d| penalty.eval(tau, d)).collect();
    wasserstein_penalties(&omega, &nu)
}

/// Seeds for the two independent sample lineages of a distance estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPair {
    pub lhs: Seed,
    pub rhs: Seed,
}

impl SeedPair {
    /// Two decorrelated seeds derived from one master seed.
    pub fn derived(master: Seed) -> Self {
        SeedPair {
            lhs: master.derive(1),
            rhs: master.derive(2),
        }
    }

    /// Both sides on the same seed (used to check the zero self-distance).
    pub fn same(seed: Seed) -> Self {
        SeedPair { lhs: seed, rhs: seed }
    }
}

/// Everything `distance` needs besides the two configurations.
#[derive(Clone, Debug)]
pub struct DistanceSpec {
    pub penalty: PenaltyRef,
    pub discount: Discount,
    pub times: ObservationTimes,
    pub runs: usize,
    pub scale: usize,
    pub seeds: SeedPair,
}

impl DistanceSpec {
    pub fn new(penalty: PenaltyRef, times: ObservationTimes, runs: usize, scale: usize, seeds: SeedPair) -> Self {
        DistanceSpec {
            penalty,
            discount: Discount::default(),
            times,
            runs,
            scale,
            seeds,
        }
    }

    pub fn with_discount(mut self, discount: Discount) -> Self {
        self.discount = discount;
        self
    }

    fn check(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Precondition("need at least one run".into()));
        }
        if self.scale == 0 {
            return Err(Error::Precondition("scale must be at least 1".into()));
        }
        Ok(())
    }
}

/// Pointwise and supremum values of one metric estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub times: Vec<usize>,
    pub w: Vec<f64>,
    pub discounted: Vec<f64>,
    pub value: f64,
    pub argmax: usize,
    pub runs: usize,
    pub scale: usize,
    pub seeds: SeedPair,
    pub penalty: String,
    pub discount: Discount,
}

impl MetricReport {
    /// Assembles a report from pointwise values.
    pub fn from_curve(
        times: &ObservationTimes,
        w: Vec<f64>,
        discount: Discount,
        runs: usize,
        scale: usize,
        seeds: SeedPair,
        penalty: &str,
    ) -> Self {
        let discounted: Vec<f64> = times.steps().iter().zip(&w).map(|(t, w)| discount.weight(*t) * w).collect();
        let mut best = 0;
        for (i, v) in discounted.iter().enumerate() {
            if *v > discounted[best] {
                best = i;
            }
        }
        MetricReport {
            times: times.steps().to_vec(),
            value: discounted[best],
            argmax: times.steps()[best],
            w,
            discounted,
            runs,
            scale,
            seeds,
            penalty: penalty.to_string(),
            discount,
        }
    }

    /// Metric restricted to `{τ ∈ OT | τ >= from}`; zero if that set is empty.
    pub fn suffix_value(&self, from: usize) -> f64 {
        self.times
            .iter()
            .zip(&self.discounted)
            .filter(|(t, _)| **t >= from)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }

    /// `suffix_value(τ̃)` for every `τ̃` in OT, computed in one backward pass.
    pub fn suffix_curve(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.discounted.len()];
        let mut acc: f64 = 0.0;
        for i in (0..self.discounted.len()).rev() {
            acc = acc.max(self.discounted[i]);
            out[i] = acc;
        }
        out
    }

    pub fn write_csv(&self, out: &mut impl Write, header_comments: &[String]) -> std::io::Result<()> {
        for line in header_comments {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "tau,w,discounted_w")?;
        for ((t, w), d) in self.times.iter().zip(&self.w).zip(&self.discounted) {
            writeln!(out, "{t},{w},{d}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "value": self.value,
            "argmax": self.argmax,
            "curve": { "tau": self.times, "w": self.w, "discounted_w": self.discounted },
            "params": {
                "runs": self.runs,
                "scale": self.scale,
                "seeds": self.seeds,
                "penalty": self.penalty,
                "discount": self.discount,
            },
        })
    }
}

/// Estimates the evolution metric from `c1` to `c2`: `N` runs of `c1` on
/// `seeds.lhs`, `ℓN` runs of `c2` on `seeds.rhs`.
pub fn distance(c1: &Configuration, c2: &Configuration, spec: &DistanceSpec) -> Result<MetricReport> {
    spec.check()?;
    if !c1.space().same_layout(c2.space()) {
        return Err(Error::structural("configurations live in different data spaces"));
    }
    let steps = spec.times.steps();
    let lhs = estimate_penalties(c1, steps, spec.runs, spec.seeds.lhs, &spec.penalty)?;
    let rhs = estimate_penalties(c2, steps, spec.runs * spec.scale, spec.seeds.rhs, &spec.penalty)?;
    distance_from_samples(&lhs.values, &rhs.values, spec)
}

/// Metric from already-sampled penalty values, indexed `[time][run]`.
pub fn distance_from_samples(lhs: &[Vec<f64>], rhs: &[Vec<f64>], spec: &DistanceSpec) -> Result<MetricReport> {
    if lhs.len() != spec.times.len() || rhs.len() != spec.times.len() {
        return Err(Error::structural("penalty samples do not match the observation times"));
    }
    let w = lhs
        .iter()
        .zip(rhs)
        .map(|(a, b)| wasserstein_penalties(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_curve(
        &spec.times,
        w,
        spec.discount,
        spec.runs,
        spec.scale,
        spec.seeds,
        spec.penalty.id(),
    ))
}
