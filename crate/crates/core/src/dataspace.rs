//! Variables, data spaces, data states and penalty functions.
//!
//! A [`DataSpace`] is an ordered, immutable list of variables with bounded
//! domains. A [`DataState`] assigns one real to every variable of its space.
//! Writes that fall outside a domain are clamped into it and counted on the
//! resulting state, mirroring physical saturation.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    /// The variable only takes the listed values; writes snap to the nearest one.
    Finite(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

impl VarSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        VarSpec {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
        }
    }

    /// A finite-set variable whose bounds are the extremes of `values`.
    pub fn finite(name: impl Into<String>, values: &[f64]) -> Self {
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        VarSpec {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Finite(values.to_vec()),
        }
    }

    fn check(&self) -> Result<()> {
        if self.lower.is_nan() || self.upper.is_nan() || self.lower > self.upper {
            return Err(Error::validation(format!(
                "variable `{}` has invalid domain [{}, {}]",
                self.name, self.lower, self.upper
            )));
        }
        if let VarKind::Finite(values) = &self.kind {
            if values.is_empty() {
                return Err(Error::validation(format!(
                    "finite variable `{}` has an empty value set",
                    self.name
                )));
            }
            if let Some(v) = values
                .iter()
                .find(|v| v.is_nan() || **v < self.lower || **v > self.upper)
            {
                return Err(Error::validation(format!(
                    "finite variable `{}`: value {} outside [{}, {}]",
                    self.name, v, self.lower, self.upper
                )));
            }
        }
        Ok(())
    }

    /// Projects `value` into the domain. Returns the stored value and whether it changed.
    pub fn clamp(&self, value: f64) -> (f64, bool) {
        let bounded = value.clamp(self.lower, self.upper);
        let stored = match &self.kind {
            VarKind::Continuous => bounded,
            VarKind::Finite(values) => {
                let mut best = values[0];
                for &v in &values[1..] {
                    if (v - bounded).abs() < (best - bounded).abs() {
                        best = v;
                    }
                }
                best
            }
        };
        (stored, stored != value)
    }
}

/// Ordered set of variables. Immutable once built and shared through `Arc`.
#[derive(Debug)]
pub struct DataSpace {
    vars: Vec<VarSpec>,
    index: HashMap<String, usize>,
}

impl DataSpace {
    pub fn new(vars: Vec<VarSpec>) -> Result<Arc<DataSpace>> {
        let mut index = HashMap::with_capacity(vars.len());
        for (i, var) in vars.iter().enumerate() {
            var.check()?;
            if index.insert(var.name.clone(), i).is_some() {
                return Err(Error::validation(format!(
                    "duplicate variable name `{}`",
                    var.name
                )));
            }
        }
        Ok(Arc::new(DataSpace { vars, index }))
    }

    pub fn vars(&self) -> &[VarSpec] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::structural(format!("unknown variable `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|v| v.name.as_str())
    }

    /// Two spaces are compatible when they declare the same variables in the same order.
    pub fn same_layout(&self, other: &DataSpace) -> bool {
        self.vars == other.vars
    }
}

impl PartialEq for DataSpace {
    fn eq(&self, other: &Self) -> bool {
        self.same_layout(other)
    }
}

/// One value per variable of a [`DataSpace`], always inside the declared domains.
#[derive(Clone)]
pub struct DataState {
    space: Arc<DataSpace>,
    values: Vec<f64>,
    clamps: u32,
}

impl DataState {
    /// Builds a state, clamping each value into its domain.
    pub fn new(space: Arc<DataSpace>, values: Vec<f64>) -> Result<DataState> {
        if values.len() != space.len() {
            return Err(Error::structural(format!(
                "expected {} values, got {}",
                space.len(),
                values.len()
            )));
        }
        let mut state = DataState {
            values: vec![0.0; space.len()],
            space,
            clamps: 0,
        };
        for (i, v) in values.into_iter().enumerate() {
            state.set(i, v)?;
        }
        Ok(state)
    }

    /// Builds a state from `(name, value)` pairs; unmentioned variables take their lower bound.
    pub fn from_pairs<S: AsRef<str>>(space: Arc<DataSpace>, pairs: &[(S, f64)]) -> Result<DataState> {
        let base: Vec<f64> = space.vars().iter().map(|v| v.lower).collect();
        let state = DataState::new(space, base)?;
        state.update(pairs)
    }

    pub fn space(&self) -> &Arc<DataSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.values[self.space.require(name)?])
    }

    /// Number of clamping events that happened while producing this state.
    pub fn clamp_events(&self) -> u32 {
        self.clamps
    }

    /// Writes `value` at `index`, clamping into the domain.
    pub fn set(&mut self, index: usize, value: f64) -> Result<()> {
        let spec = self.space.vars().get(index).ok_or_else(|| {
            Error::structural(format!("variable index {index} out of range"))
        })?;
        if value.is_nan() {
            return Err(Error::validation(format!(
                "NaN written to variable `{}`",
                spec.name
            )));
        }
        let (stored, clamped) = spec.clamp(value);
        if clamped {
            self.clamps += 1;
        }
        self.values[index] = stored;
        Ok(())
    }

    pub fn set_named(&mut self, name: &str, value: f64) -> Result<()> {
        let index = self.space.require(name)?;
        self.set(index, value)
    }

    /// Returns a copy with the assignments applied left to right.
    ///
    /// A later assignment to the same name overrides an earlier one. The
    /// receiver is left untouched.
    pub fn update<S: AsRef<str>>(&self, assignments: &[(S, f64)]) -> Result<DataState> {
        let mut next = self.successor();
        for (name, value) in assignments {
            next.set_named(name.as_ref(), *value)?;
        }
        Ok(next)
    }

    /// A copy with the clamp counter reset, ready to receive the next writes.
    pub fn successor(&self) -> DataState {
        DataState {
            space: Arc::clone(&self.space),
            values: self.values.clone(),
            clamps: 0,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(StateDocument {
            vars: self.space.vars().to_vec(),
            values: self.values.clone(),
        })
        .expect("state document is always serializable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<DataState> {
        let doc: StateDocument = serde_json::from_value(value.clone())?;
        let space = DataSpace::new(doc.vars)?;
        DataState::new(space, doc.values)
    }
}

impl PartialEq for DataState {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.space, &other.space) || self.space.same_layout(&other.space))
            && self.values == other.values
    }
}

impl fmt::Debug for DataState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (var, v) in self.space.vars().iter().zip(&self.values) {
            map.entry(&var.name, v);
        }
        map.finish()
    }
}

#[derive(Serialize, Deserialize)]
struct StateDocument {
    vars: Vec<VarSpec>,
    values: Vec<f64>,
}

/// Resolution of penalty values. On this dyadic grid, differences of two
/// penalties and sums of two such differences are computed without rounding,
/// so the hemimetric laws hold exactly in floating point.
pub const PENALTY_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

/// Maps a raw penalty into `[0, 1]`, rounded to [`PENALTY_QUANTUM`].
/// NaN is treated as the worst penalty.
#[inline]
pub fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        1.0
    } else {
        (x.clamp(0.0, 1.0) / PENALTY_QUANTUM).round() * PENALTY_QUANTUM
    }
}

/// A time-indexed score in `[0, 1]` telling how far a state is from the objective.
///
/// Implementations must be pure: the same `(step, state)` always yields the
/// same value. Continuity is the implementor's responsibility.
pub trait Penalty: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;

    /// Unclamped value; [`Penalty::eval`] clamps it into `[0, 1]`.
    fn raw(&self, step: usize, state: &DataState) -> f64;

    fn eval(&self, step: usize, state: &DataState) -> f64 {
        clamp_unit(self.raw(step, state))
    }
}

pub type PenaltyRef = Arc<dyn Penalty>;

/// Normalised distance of one variable from a goal value:
/// `|x - goal| / max(upper - goal, goal - lower)`.
#[derive(Debug, Clone)]
pub struct GoalDistance {
    id: String,
    index: usize,
    goal: f64,
    scale: f64,
}

impl GoalDistance {
    pub fn new(space: &DataSpace, var: &str, goal: f64, lower: f64, upper: f64) -> Result<Self> {
        let index = space.require(var)?;
        let scale = (upper - goal).max(goal - lower);
        if !(scale > 0.0) {
            return Err(Error::validation(format!(
                "goal {goal} leaves no room inside [{lower}, {upper}]"
            )));
        }
        Ok(GoalDistance {
            id: format!("goal:{var}"),
            index,
            goal,
            scale,
        })
    }

    /// Uses the variable's own domain bounds as `lower` and `upper`.
    pub fn within_domain(space: &DataSpace, var: &str, goal: f64) -> Result<Self> {
        let spec = &space.vars()[space.require(var)?];
        Self::new(space, var, goal, spec.lower, spec.upper)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

impl Penalty for GoalDistance {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw(&self, _step: usize, state: &DataState) -> f64 {
        (state.value(self.index) - self.goal).abs() / self.scale
    }
}

/// Pointwise maximum of several penalties.
#[derive(Debug, Clone)]
pub struct MaxOf {
    id: String,
    parts: Vec<PenaltyRef>,
}

impl MaxOf {
    pub fn new(id: impl Into<String>, parts: Vec<PenaltyRef>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::validation("max of zero penalties"));
        }
        Ok(MaxOf {
            id: id.into(),
            parts,
        })
    }
}

impl Penalty for MaxOf {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw(&self, step: usize, state: &DataState) -> f64 {
        self.parts
            .iter()
            .map(|p| p.eval(step, state))
            .fold(0.0, f64::max)
    }
}

/// Convex combination `sum w_i * rho_i` with non-negative weights summing to one.
#[derive(Debug, Clone)]
pub struct Convex {
    id: String,
    parts: Vec<(f64, PenaltyRef)>,
}

impl Convex {
    pub fn new(id: impl Into<String>, parts: Vec<(f64, PenaltyRef)>) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "convex weights must be non-negative and sum to 1 (sum = {total})"
            )));
        }
        Ok(Convex {
            id: id.into(),
            parts,
        })
    }
}

impl Penalty for Convex {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw(&self, step: usize, state: &DataState) -> f64 {
        self.parts
            .iter()
            .map(|(w, p)| w * p.eval(step, state))
            .sum()
    }
}

/// The value of a variable used directly as a penalty (e.g. a running false-negative rate).
#[derive(Debug, Clone)]
pub struct VariableValue {
    id: String,
    index: usize,
}

impl VariableValue {
    pub fn new(space: &DataSpace, var: &str) -> Result<Self> {
        Ok(VariableValue {
            id: var.to_string(),
            index: space.require(var)?,
        })
    }
}

impl Penalty for VariableValue {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw(&self, _step: usize, state: &DataState) -> f64 {
        state.value(self.index)
    }
}

/// Ratio of two variables; zero while the denominator is zero.
#[derive(Debug, Clone)]
pub struct VariableRatio {
    id: String,
    numerator: usize,
    denominator: usize,
}

impl VariableRatio {
    pub fn new(space: &DataSpace, id: impl Into<String>, numerator: &str, denominator: &str) -> Result<Self> {
        Ok(VariableRatio {
            id: id.into(),
            numerator: space.require(numerator)?,
            denominator: space.require(denominator)?,
        })
    }
}

impl Penalty for VariableRatio {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw(&self, _step: usize, state: &DataState) -> f64 {
        let den = state.value(self.denominator);
        if den == 0.0 {
            0.0
        } else {
            state.value(self.numerator) / den
        }
    }
}

/// A penalty backed by an arbitrary closure.
pub struct FnPenalty<F> {
    id: String,
    f: F,
}

impl<F> FnPenalty<F>
where
    F: Fn(usize, &DataState) -> f64 + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnPenalty { id: id.into(), f }
    }
}

impl<F> fmt::Debug for FnPenalty<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPenalty").field("id", &self.id).finish()
    }
}

impl<F> Penalty for FnPenalty<F>
where
    F: Fn(usize, &DataState) -> f64 + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn raw(&self, step: usize, state: &DataState) -> f64 {
        (self.f)(step, state)
    }
}
