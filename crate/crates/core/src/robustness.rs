//! Robustness, adaptability and reliability estimates: sample perturbed
//! initial states, keep those within `η₁`, and measure how far the perturbed
//! evolutions drift from the base one.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::dataspace::{DataState, PenaltyRef};
use crate::engine::{estimate_penalties, Configuration, PenaltySamples};
use crate::environment::{RandomStream, Seed};
use crate::error::{Error, Result};
use crate::metric::{data_state_metric, distance_from_samples, Discount, DistanceSpec, ObservationTimes, SeedPair};

/// Proposes a variation of a base data state.
pub trait PerturbationSampler: Send + Sync + fmt::Debug {
    fn id(&self) -> String;

    fn propose(&self, base: &DataState, rng: &mut RandomStream) -> Result<DataState>;
}

pub type SamplerRef = Arc<dyn PerturbationSampler>;

/// Redraws selected variables uniformly on a range (by default their whole
/// domain) and keeps every other variable of the base state.
#[derive(Clone, Debug)]
pub struct UniformResample {
    ranges: Vec<(String, f64, f64)>,
    integer: bool,
}

impl UniformResample {
    /// Resample each named variable over its full domain.
    pub fn over_domains(base_space: &crate::dataspace::DataSpace, vars: &[&str]) -> Result<Self> {
        let ranges = vars
            .iter()
            .map(|v| {
                let spec = &base_space.vars()[base_space.require(v)?];
                Ok((v.to_string(), spec.lower, spec.upper))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UniformResample { ranges, integer: false })
    }

    /// Resample each listed variable on its own `[lo, hi]`.
    pub fn on_ranges(ranges: Vec<(String, f64, f64)>) -> Result<Self> {
        for (v, lo, hi) in &ranges {
            if !(lo <= hi) {
                return Err(Error::validation(format!("empty resampling range for `{v}`")));
            }
        }
        Ok(UniformResample { ranges, integer: false })
    }

    /// Draw integers uniformly from `{ceil(lo), ..., floor(hi)}` instead.
    pub fn integers(mut self) -> Result<Self> {
        for (v, lo, hi) in &self.ranges {
            if lo.ceil() > hi.floor() {
                return Err(Error::validation(format!("no integer in the resampling range for `{v}`")));
            }
        }
        self.integer = true;
        Ok(self)
    }
}

impl PerturbationSampler for UniformResample {
    fn id(&self) -> String {
        let parts: Vec<String> = self.ranges.iter().map(|(v, lo, hi)| format!("{v}~U[{lo},{hi}]")).collect();
        let kind = if self.integer { "uniform-int" } else { "uniform" };
        format!("{kind}({})", parts.join(","))
    }

    fn propose(&self, base: &DataState, rng: &mut RandomStream) -> Result<DataState> {
        let draws: Vec<(&str, f64)> = self
            .ranges
            .iter()
            .map(|(v, lo, hi)| {
                let x = if self.integer {
                    let first = lo.ceil();
                    first + rng.below((hi.floor() - first) as u64 + 1) as f64
                } else {
                    rng.uniform(*lo, *hi)
                };
                (v.as_str(), x)
            })
            .collect();
        base.update(&draws)
    }
}

/// Returns the base state unchanged; measures the sampling noise floor.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoPerturbation;

impl PerturbationSampler for NoPerturbation {
    fn id(&self) -> String {
        "identity".into()
    }

    fn propose(&self, base: &DataState, _rng: &mut RandomStream) -> Result<DataState> {
        Ok(base.successor())
    }
}

/// A sampler defined by a closure.
pub struct FnSampler<F> {
    id: String,
    f: F,
}

impl<F> FnSampler<F>
where
    F: Fn(&DataState, &mut RandomStream) -> Result<DataState> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnSampler { id: id.into(), f }
    }
}

impl<F> fmt::Debug for FnSampler<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSampler").field("id", &self.id).finish()
    }
}

impl<F> PerturbationSampler for FnSampler<F>
where
    F: Fn(&DataState, &mut RandomStream) -> Result<DataState> + Send + Sync,
{
    fn id(&self) -> String {
        self.id.clone()
    }

    fn propose(&self, base: &DataState, rng: &mut RandomStream) -> Result<DataState> {
        (self.f)(base, rng)
    }
}

/// How a candidate variation is judged close enough to the base state.
#[derive(Clone, Debug)]
pub enum Filter {
    /// Hemimetric on the initial states at step 0.
    Initial { penalty: PenaltyRef },
    /// Evolution metric over the observation times inside `[lo, hi]`.
    Evolution { penalty: PenaltyRef, lo: usize, hi: usize },
}

impl Filter {
    fn penalty(&self) -> &PenaltyRef {
        match self {
            Filter::Initial { penalty } | Filter::Evolution { penalty, .. } => penalty,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Robustness,
    Adaptability,
    Reliability,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Property::Robustness => "robustness",
            Property::Adaptability => "adaptability",
            Property::Reliability => "reliability",
        };
        f.write_str(s)
    }
}

/// Parameters of a perturbation experiment.
#[derive(Clone, Debug)]
pub struct RobustnessSpec {
    pub property: Property,
    pub filter: Filter,
    /// Penalty whose evolution metric is bounded by `η₂`.
    pub target: PenaltyRef,
    pub eta1: f64,
    /// Number of accepted variations `M`.
    pub variations: usize,
    /// Maximum number of candidates drawn.
    pub budget: usize,
    pub times: ObservationTimes,
    pub discount: Discount,
    pub runs: usize,
    pub scale: usize,
    pub seed: Seed,
}

impl RobustnessSpec {
    /// Robustness with respect to `ρ` on `[lo, hi]` and target `ρ′`.
    #[allow(clippy::too_many_arguments)]
    pub fn robustness(
        perturbation: PenaltyRef,
        target: PenaltyRef,
        interval: (usize, usize),
        eta1: f64,
        variations: usize,
        times: ObservationTimes,
        runs: usize,
        scale: usize,
        seed: Seed,
    ) -> Self {
        RobustnessSpec {
            property: Property::Robustness,
            filter: Filter::Evolution {
                penalty: perturbation,
                lo: interval.0,
                hi: interval.1,
            },
            target,
            eta1,
            variations,
            budget: default_budget(variations),
            times,
            discount: Discount::default(),
            runs,
            scale,
            seed,
        }
    }

    /// Adaptability (and reliability) use one penalty for both filter and target.
    pub fn adaptability(
        penalty: PenaltyRef,
        eta1: f64,
        variations: usize,
        times: ObservationTimes,
        runs: usize,
        scale: usize,
        seed: Seed,
    ) -> Self {
        RobustnessSpec {
            property: Property::Adaptability,
            filter: Filter::Initial { penalty: penalty.clone() },
            target: penalty,
            eta1,
            variations,
            budget: default_budget(variations),
            times,
            discount: Discount::default(),
            runs,
            scale,
            seed,
        }
    }

    pub fn reliability(
        penalty: PenaltyRef,
        eta1: f64,
        variations: usize,
        times: ObservationTimes,
        runs: usize,
        scale: usize,
        seed: Seed,
    ) -> Self {
        RobustnessSpec {
            property: Property::Reliability,
            ..RobustnessSpec::adaptability(penalty, eta1, variations, times, runs, scale, seed)
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_discount(mut self, discount: Discount) -> Self {
        self.discount = discount;
        self
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta1) {
            return Err(Error::validation(format!("eta1 = {} outside [0, 1]", self.eta1)));
        }
        if self.variations == 0 {
            return Err(Error::Precondition("need at least one variation".into()));
        }
        if self.budget < self.variations {
            return Err(Error::Precondition(format!(
                "budget {} smaller than the {} variations requested",
                self.budget, self.variations
            )));
        }
        if self.runs == 0 || self.scale == 0 {
            return Err(Error::Precondition("runs and scale must be positive".into()));
        }
        if let Filter::Evolution { lo, hi, .. } = self.filter {
            if lo > hi || hi > self.times.horizon() {
                return Err(Error::validation(format!(
                    "interval [{lo}, {hi}] not inside [0, {}]",
                    self.times.horizon()
                )));
            }
            if self.times.within(lo, hi).is_none() {
                return Err(Error::validation(format!("no observation time inside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn seeds(&self) -> ExperimentSeeds {
        ExperimentSeeds {
            base: self.seed.derive(1),
            proposals: self.seed.derive(2),
            candidates: self.seed.derive(3),
        }
    }

    fn target_spec(&self, rhs: Seed) -> DistanceSpec {
        DistanceSpec::new(
            self.target.clone(),
            self.times.clone(),
            self.runs,
            self.scale,
            SeedPair {
                lhs: self.seeds().base,
                rhs,
            },
        )
        .with_discount(self.discount)
    }
}

fn default_budget(variations: usize) -> usize {
    variations.saturating_mul(100).max(1000)
}

#[derive(Clone, Copy)]
struct ExperimentSeeds {
    base: Seed,
    proposals: Seed,
    candidates: Seed,
}

/// A proposed variation and the filter's verdict on it.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub attempt: usize,
    pub state: DataState,
    pub filter_value: f64,
    pub accepted: bool,
}

/// Base-system samples reused across every candidate.
struct BaseSamples {
    filter: Option<(ObservationTimes, PenaltySamples)>,
    target: PenaltySamples,
}

fn base_samples(spec: &RobustnessSpec, base: &Configuration) -> Result<BaseSamples> {
    let seeds = spec.seeds();
    let filter = match &spec.filter {
        Filter::Initial { .. } => None,
        Filter::Evolution { penalty, lo, hi } => {
            let times = spec.times.within(*lo, *hi).expect("checked");
            let samples = estimate_penalties(base, times.steps(), spec.runs, seeds.base, penalty)?;
            Some((times, samples))
        }
    };
    let target = estimate_penalties(base, spec.times.steps(), spec.runs, seeds.base, &spec.target)?;
    Ok(BaseSamples { filter, target })
}

fn filter_value(
    spec: &RobustnessSpec,
    base: &Configuration,
    samples: &BaseSamples,
    candidate: &Configuration,
    candidate_seed: Seed,
) -> Result<f64> {
    match (&spec.filter, &samples.filter) {
        (Filter::Initial { penalty }, _) => data_state_metric(penalty, 0, base.data(), candidate.data()),
        (Filter::Evolution { penalty, .. }, Some((times, lhs))) => {
            let rhs = estimate_penalties(candidate, times.steps(), spec.runs * spec.scale, candidate_seed, penalty)?;
            let dspec = DistanceSpec::new(
                penalty.clone(),
                times.clone(),
                spec.runs,
                spec.scale,
                SeedPair {
                    lhs: spec.seeds().base,
                    rhs: candidate_seed,
                },
            )
            .with_discount(spec.discount);
            Ok(distance_from_samples(&lhs.values, &rhs.values, &dspec)?.value)
        }
        (Filter::Evolution { .. }, None) => unreachable!("base filter samples exist for evolution filters"),
    }
}

fn propose(spec: &RobustnessSpec, sampler: &dyn PerturbationSampler, base: &Configuration, attempt: usize) -> Result<DataState> {
    let mut rng = spec.seeds().proposals.stream(attempt as u64);
    let state = sampler.propose(base.data(), &mut rng)?;
    if !state.space().same_layout(base.space()) {
        return Err(Error::structural(format!("sampler `{}` left the data space", sampler.id())));
    }
    Ok(state)
}

fn candidate_seed(spec: &RobustnessSpec, attempt: usize) -> Seed {
    spec.seeds().candidates.derive(attempt as u64)
}

/// Proposes and filters the first `attempts` candidates, in attempt order.
///
/// A candidate's state and filter value depend only on the master seed and its
/// attempt index, so raising `η₁` can only add accepted candidates.
pub fn screen_candidates(
    spec: &RobustnessSpec,
    base: &Configuration,
    sampler: &dyn PerturbationSampler,
    attempts: usize,
) -> Result<Vec<Candidate>> {
    spec.check()?;
    let samples = base_samples(spec, base)?;
    screen_range(spec, base, sampler, &samples, 0..attempts)
}

fn screen_range(
    spec: &RobustnessSpec,
    base: &Configuration,
    sampler: &dyn PerturbationSampler,
    samples: &BaseSamples,
    attempts: std::ops::Range<usize>,
) -> Result<Vec<Candidate>> {
    let one = |attempt: usize| -> Result<Candidate> {
        let state = propose(spec, sampler, base, attempt)?;
        let cfg = base.with_data(state.clone())?;
        let filter_value = filter_value(spec, base, samples, &cfg, candidate_seed(spec, attempt))?;
        Ok(Candidate {
            attempt,
            state,
            filter_value,
            accepted: filter_value <= spec.eta1,
        })
    };
    match spec.filter {
        // cheap: screen a whole batch in parallel
        Filter::Initial { .. } => {
            let v: Vec<Result<Candidate>> = attempts.into_par_iter().map(one).collect();
            v.into_iter().collect()
        }
        // each candidate already runs its simulations in parallel
        Filter::Evolution { .. } => attempts.map(one).collect(),
    }
}

/// Rejection sampling of `M` variations within `η₁` of the base configuration.
pub fn sample_perturbations(
    spec: &RobustnessSpec,
    base: &Configuration,
    sampler: &dyn PerturbationSampler,
) -> Result<(Vec<Candidate>, usize)> {
    spec.check()?;
    let samples = base_samples(spec, base)?;
    let (accepted, attempts) = collect_accepted(spec, base, sampler, &samples)?;
    Ok((accepted, attempts))
}

fn collect_accepted(
    spec: &RobustnessSpec,
    base: &Configuration,
    sampler: &dyn PerturbationSampler,
    samples: &BaseSamples,
) -> Result<(Vec<Candidate>, usize)> {
    let batch = match spec.filter {
        Filter::Initial { .. } => 256,
        Filter::Evolution { .. } => 1,
    };
    let mut accepted = Vec::with_capacity(spec.variations);
    let mut next = 0;
    while next < spec.budget {
        let end = (next + batch).min(spec.budget);
        for c in screen_range(spec, base, sampler, samples, next..end)? {
            if c.accepted {
                let attempt = c.attempt;
                accepted.push(c);
                if accepted.len() == spec.variations {
                    return Ok((accepted, attempt + 1));
                }
            }
        }
        next = end;
    }
    Err(Error::Shortfall {
        accepted: accepted.len(),
        required: spec.variations,
        attempts: next,
    })
}

/// One accepted variation and its distance curve from the base system.
#[derive(Clone, Debug, Serialize)]
pub struct VariationRecord {
    pub attempt: usize,
    pub state: Vec<f64>,
    pub filter_value: f64,
    /// Pointwise discounted distances at each observation time.
    pub discounted: Vec<f64>,
    /// Metric restricted to `{τ >= τ̃}` for each `τ̃` in OT.
    pub suffix: Vec<f64>,
}

/// The answer to one `(τ̃, η₂)` query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub tau_tilde: usize,
    pub eta2: f64,
    pub xi: f64,
    pub holds: bool,
    pub label: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessReport {
    pub property: Property,
    pub eta1: f64,
    pub sampler: String,
    pub filter_penalty: String,
    pub target_penalty: String,
    pub interval: Option<(usize, usize)>,
    pub accepted: usize,
    pub attempts: usize,
    pub runs: usize,
    pub scale: usize,
    pub seed: Seed,
    pub discount: Discount,
    pub times: Vec<usize>,
    /// `ξ_τ̃` for each `τ̃` in OT.
    pub xi: Vec<f64>,
    pub variations: Vec<VariationRecord>,
}

impl RobustnessReport {
    pub fn rejected(&self) -> usize {
        self.attempts - self.accepted
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.attempts as f64
    }

    /// `ξ_τ̃`, or `None` if `τ̃` is not an observation time.
    pub fn xi_at(&self, tau_tilde: usize) -> Option<f64> {
        self.times.iter().position(|t| *t == tau_tilde).map(|i| self.xi[i])
    }

    /// `ξ` at the first observation time; the reliability bound.
    pub fn xi_min(&self) -> f64 {
        self.xi[0]
    }

    /// Whether the samples are consistent with tolerance `η₂` from `τ̃` on.
    pub fn verdict(&self, tau_tilde: usize, eta2: f64) -> Result<Verdict> {
        let xi = self
            .xi_at(tau_tilde)
            .ok_or_else(|| Error::validation(format!("{tau_tilde} is not an observation time")))?;
        let holds = xi <= eta2;
        let label = format!(
            "{} evidence at M={} samples: xi({tau_tilde}) = {xi:.6} {} eta2 = {eta2}",
            if holds { "supporting" } else { "refuting" },
            self.accepted,
            if holds { "<=" } else { ">" },
        );
        Ok(Verdict {
            tau_tilde,
            eta2,
            xi,
            holds,
            label,
        })
    }

    pub fn write_csv(&self, out: &mut impl Write, header_comments: &[String]) -> std::io::Result<()> {
        for line in header_comments {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "tau_tilde,xi")?;
        for (t, x) in self.times.iter().zip(&self.xi) {
            writeln!(out, "{t},{x}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "spec": {
                "property": self.property,
                "eta1": self.eta1,
                "sampler": self.sampler,
                "filter_penalty": self.filter_penalty,
                "target_penalty": self.target_penalty,
                "interval": self.interval,
                "variations": self.accepted,
                "runs": self.runs,
                "scale": self.scale,
                "seed": self.seed,
                "discount": self.discount,
            },
            "acceptance": {
                "accepted": self.accepted,
                "attempts": self.attempts,
                "rejected": self.rejected(),
                "rate": self.acceptance_rate(),
            },
            "xi": { "tau_tilde": self.times, "xi": self.xi },
            "variations": self.variations,
        })
    }
}

/// Pointwise maximum of the suffix curves.
pub fn xi_from_variations(records: &[VariationRecord], len: usize) -> Vec<f64> {
    let mut xi = vec![0.0f64; len];
    for r in records {
        for (x, s) in xi.iter_mut().zip(&r.suffix) {
            *x = x.max(*s);
        }
    }
    xi
}

/// Distance curves of the given candidates from the base configuration.
pub fn measure_variations(
    spec: &RobustnessSpec,
    base: &Configuration,
    candidates: &[Candidate],
) -> Result<Vec<VariationRecord>> {
    let samples = base_samples(spec, base)?;
    measure_with(spec, base, &samples, candidates)
}

fn measure_with(
    spec: &RobustnessSpec,
    base: &Configuration,
    samples: &BaseSamples,
    candidates: &[Candidate],
) -> Result<Vec<VariationRecord>> {
    candidates
        .iter()
        .map(|c| {
            let seed = candidate_seed(spec, c.attempt);
            let cfg = base.with_data(c.state.clone())?;
            let rhs = estimate_penalties(&cfg, spec.times.steps(), spec.runs * spec.scale, seed, &spec.target)?;
            let report = distance_from_samples(&samples.target.values, &rhs.values, &spec.target_spec(seed))?;
            log::debug!("variation at attempt {}: metric {:.6}", c.attempt, report.value);
            Ok(VariationRecord {
                attempt: c.attempt,
                state: c.state.values().to_vec(),
                filter_value: c.filter_value,
                suffix: report.suffix_curve(),
                discounted: report.discounted,
            })
        })
        .collect()
}

/// Runs a full perturbation experiment.
pub fn estimate_robustness(
    spec: &RobustnessSpec,
    base: &Configuration,
    sampler: &dyn PerturbationSampler,
) -> Result<RobustnessReport> {
    spec.check()?;
    let samples = base_samples(spec, base)?;
    let (accepted, attempts) = collect_accepted(spec, base, sampler, &samples)?;
    log::info!(
        "{}: accepted {} of {attempts} candidates",
        spec.property,
        accepted.len()
    );
    let records = measure_with(spec, base, &samples, &accepted)?;
    let xi = xi_from_variations(&records, spec.times.len());
    Ok(RobustnessReport {
        property: spec.property,
        eta1: spec.eta1,
        sampler: sampler.id(),
        filter_penalty: spec.filter.penalty().id().to_string(),
        target_penalty: spec.target.id().to_string(),
        interval: match spec.filter {
            Filter::Evolution { lo, hi, .. } => Some((lo, hi)),
            Filter::Initial { .. } => None,
        },
        accepted: accepted.len(),
        attempts,
        runs: spec.runs,
        scale: spec.scale,
        seed: spec.seed,
        discount: spec.discount,
        times: spec.times.steps().to_vec(),
        xi,
        variations: records,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_adaptability(
    penalty: PenaltyRef,
    eta1: f64,
    variations: usize,
    times: ObservationTimes,
    runs: usize,
    scale: usize,
    seed: Seed,
    base: &Configuration,
    sampler: &dyn PerturbationSampler,
) -> Result<RobustnessReport> {
    let spec = RobustnessSpec::adaptability(penalty, eta1, variations, times, runs, scale, seed);
    estimate_robustness(&spec, base, sampler)
}

/// Adaptability read at the first observation time.
#[allow(clippy::too_many_arguments)]
pub fn estimate_reliability(
    penalty: PenaltyRef,
    eta1: f64,
    variations: usize,
    times: ObservationTimes,
    runs: usize,
    scale: usize,
    seed: Seed,
    base: &Configuration,
    sampler: &dyn PerturbationSampler,
) -> Result<RobustnessReport> {
    let spec = RobustnessSpec::reliability(penalty, eta1, variations, times, runs, scale, seed);
    estimate_robustness(&spec, base, sampler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{DataSpace, VarSpec, VariableValue};
    use crate::environment::Identity;
    use crate::metric::distance;
    use crate::models::three_tanks::{self, ThreeTanksParams};
    use crate::process::parse_program;

    /// `x` shrinks by 0.1 per step until it reaches 0; the environment does nothing.
    fn decay() -> (Configuration, PenaltyRef) {
        let space = DataSpace::new(vec![VarSpec::continuous("x", 0.0, 1.0)]).unwrap();
        let prog = parse_program("P := (max(0, x - 0.1) -> x).P;\nP\n").unwrap();
        let d = DataState::new(space.clone(), vec![0.0]).unwrap();
        let c = Configuration::new(prog.main.unwrap(), d, Arc::new(Identity), Arc::new(prog.defs)).unwrap();
        (c, Arc::new(VariableValue::new(&space, "x").unwrap()))
    }

    fn tanks() -> (Configuration, PenaltyRef, UniformResample) {
        let params = ThreeTanksParams::default();
        let c = three_tanks::configuration(&params, 5.0).unwrap();
        let rho: PenaltyRef = Arc::new(three_tanks::level_penalty(c.space(), &params, "l3").unwrap());
        let sampler = UniformResample::over_domains(c.space(), &three_tanks::VARIABLES).unwrap();
        (c, rho, sampler)
    }

    fn is_non_increasing(xs: &[f64]) -> bool {
        xs.windows(2).all(|w| w[1] <= w[0])
    }

    #[test]
    fn decaying_perturbation_orbit() {
        let (c, rho) = decay();
        let sampler = UniformResample::on_ranges(vec![("x".into(), 0.0, 0.3)]).unwrap();
        let spec = RobustnessSpec::reliability(rho, 0.3, 4, ObservationTimes::range(0, 10).unwrap(), 3, 2, Seed(5));
        let r = estimate_robustness(&spec, &c, &sampler).unwrap();
        assert_eq!(r.accepted, 4);
        let worst = r.variations.iter().map(|v| v.state[0]).fold(0.0, f64::max);
        // distance at step t is the perturbation left after t decrements
        for t in 0..=10 {
            let expected = (worst - 0.1 * t as f64).max(0.0);
            assert!((r.xi[t] - expected).abs() < 1e-12, "t={t}: {} vs {expected}", r.xi[t]);
        }
        assert!((r.xi_min() - worst).abs() < 1e-12);
    }

    #[test]
    fn identity_sampler_matches_self_distance() {
        let (c, rho, _) = tanks();
        let times = ObservationTimes::range(0, 20).unwrap();
        let spec = RobustnessSpec::adaptability(rho.clone(), 0.0, 3, times.clone(), 50, 2, Seed(11));
        let r = estimate_robustness(&spec, &c, &NoPerturbation).unwrap();
        assert_eq!((r.accepted, r.attempts), (3, 3));
        let mut xi = vec![0.0f64; times.len()];
        for attempt in 0..3 {
            let seeds = SeedPair {
                lhs: spec.seeds().base,
                rhs: candidate_seed(&spec, attempt),
            };
            let d = distance(&c, &c, &DistanceSpec::new(rho.clone(), times.clone(), 50, 2, seeds)).unwrap();
            for (x, s) in xi.iter_mut().zip(d.suffix_curve()) {
                *x = x.max(s);
            }
        }
        assert_eq!(r.xi, xi);
        assert!(r.xi_min() < 0.1, "noise floor {}", r.xi_min());
    }

    #[test]
    fn single_variation_curve() {
        let (c, rho, sampler) = tanks();
        let spec = RobustnessSpec::adaptability(rho, 0.3, 1, ObservationTimes::range(0, 30).unwrap(), 40, 2, Seed(2));
        let r = estimate_robustness(&spec, &c, &sampler).unwrap();
        assert_eq!(r.variations.len(), 1);
        assert_eq!(r.xi, r.variations[0].suffix);
        assert!(is_non_increasing(&r.xi));
    }

    #[test]
    fn accepted_states_respect_the_bound() {
        let (c, rho, sampler) = tanks();
        let spec = RobustnessSpec::adaptability(rho.clone(), 0.3, 200, ObservationTimes::range(0, 1).unwrap(), 2, 1, Seed(3));
        let (accepted, attempts) = sample_perturbations(&spec, &c, &sampler).unwrap();
        assert_eq!(accepted.len(), 200);
        assert!(attempts > 200);
        for cand in &accepted {
            let l3 = cand.state.get("l3").unwrap();
            assert!((2.0..=18.0).contains(&l3), "l3 = {l3}");
            assert!(data_state_metric(&rho, 0, c.data(), &cand.state).unwrap() <= 0.3);
        }
    }

    #[test]
    fn larger_eta1_accepts_a_superset() {
        let (c, rho, sampler) = tanks();
        let times = ObservationTimes::range(0, 30).unwrap();
        let small = RobustnessSpec::adaptability(rho.clone(), 0.1, 1, times.clone(), 30, 2, Seed(8));
        let large = RobustnessSpec::adaptability(rho, 0.3, 1, times, 30, 2, Seed(8));
        let a = screen_candidates(&small, &c, &sampler, 40).unwrap();
        let b = screen_candidates(&large, &c, &sampler, 40).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.state, y.state);
            assert!(!x.accepted || y.accepted);
        }
        let keep = |v: &[Candidate]| v.iter().filter(|c| c.accepted).cloned().collect::<Vec<_>>();
        let xa = xi_from_variations(&measure_variations(&small, &c, &keep(&a)).unwrap(), 31);
        let xb = xi_from_variations(&measure_variations(&large, &c, &keep(&b)).unwrap(), 31);
        assert!(xa.iter().zip(&xb).all(|(p, q)| p <= q));
    }

    #[test]
    fn reliability_is_adaptability_from_the_start() {
        let (c, rho, sampler) = tanks();
        let times = ObservationTimes::range(0, 25).unwrap();
        let adapt = RobustnessSpec::adaptability(rho.clone(), 0.3, 4, times.clone(), 30, 2, Seed(4));
        let rel = RobustnessSpec::reliability(rho, 0.3, 4, times, 30, 2, Seed(4));
        let a = estimate_robustness(&adapt, &c, &sampler).unwrap();
        let r = estimate_robustness(&rel, &c, &sampler).unwrap();
        assert_eq!(a.xi, r.xi);
        let (va, vr) = (a.verdict(0, 0.5).unwrap(), r.verdict(0, 0.5).unwrap());
        assert_eq!((va.xi, va.holds), (vr.xi, vr.holds));
        assert!(va.label.contains("evidence at M=4 samples"));
    }

    #[test]
    fn shortfall_reports_the_count() {
        let (c, rho, sampler) = tanks();
        let spec = RobustnessSpec::adaptability(rho, 0.0, 50, ObservationTimes::range(0, 1).unwrap(), 2, 1, Seed(1))
            .with_budget(60);
        match sample_perturbations(&spec, &c, &sampler) {
            Err(Error::Shortfall { required, attempts, accepted }) => {
                assert_eq!((required, attempts), (50, 60));
                assert!(accepted < 50);
            }
            other => panic!("expected a shortfall, got {other:?}"),
        }
    }

    #[test]
    fn integer_resampling() {
        let s = UniformResample::on_ranges(vec![("x".into(), 0.0, 3.0)]).unwrap().integers().unwrap();
        let space = DataSpace::new(vec![VarSpec::continuous("x", 0.0, 10.0)]).unwrap();
        let d = DataState::new(space, vec![0.0]).unwrap();
        let mut rng = Seed(1).stream(0);
        let mut seen = [false; 4];
        for _ in 0..200 {
            let x = s.propose(&d, &mut rng).unwrap().value(0);
            assert_eq!(x.fract(), 0.0);
            seen[x as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
        assert!(UniformResample::on_ranges(vec![("x".into(), 0.2, 0.8)]).unwrap().integers().is_err());
    }

    #[test]
    fn evolution_filter_on_an_interval() {
        let (c, rho) = decay();
        let sampler = UniformResample::on_ranges(vec![("x".into(), 0.0, 1.0)]).unwrap();
        // filter on steps 0..=2: the residual perturbation at step 0 is x itself
        let spec = RobustnessSpec::robustness(rho.clone(), rho, (0, 2), 0.5, 5, ObservationTimes::range(0, 8).unwrap(), 2, 1, Seed(9));
        let r = estimate_robustness(&spec, &c, &sampler).unwrap();
        assert!(r.variations.iter().all(|v| v.state[0] <= 0.5 && v.filter_value <= 0.5));
        assert!(r.variations.iter().all(|v| (v.filter_value - v.state[0]).abs() < 1e-12));
        assert!(is_non_increasing(&r.xi));
    }
}
