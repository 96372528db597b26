//! Fully resolved, serializable experiment configuration.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metric::{Discount, ObservationTimes};
use crate::models::{Model, ModelId, ModelParams};

/// One system under study: model parameters and its initial data state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub params: Value,
    /// Preset name of the initial data state.
    pub init: String,
    /// Per-variable overrides applied on top of the preset.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, f64>,
}

impl SystemConfig {
    pub fn build(&self, model: ModelId) -> Result<Model> {
        let overrides: Vec<(String, f64)> = self.overrides.iter().map(|(k, v)| (k.clone(), *v)).collect();
        Model::build(ModelParams::from_json(model, &self.params)?)?
            .with_preset(&self.init)?
            .with_overrides(&overrides)
    }
}

/// Resampling range of one perturbed variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbRange {
    pub var: String,
    pub lo: f64,
    pub hi: f64,
}

/// `var` (whole domain) or `var:lo:hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbArg {
    pub var: String,
    pub range: Option<(f64, f64)>,
}

impl FromStr for PerturbArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::config("perturb", format!("bad bound `{t}` in `{s}`")))
        };
        match parts.as_slice() {
            [v] if !v.is_empty() => Ok(PerturbArg {
                var: v.to_string(),
                range: None,
            }),
            [v, lo, hi] => Ok(PerturbArg {
                var: v.to_string(),
                range: Some((num(lo)?, num(hi)?)),
            }),
            _ => Err(Error::config("perturb", format!("expected `var` or `var:lo:hi`, got `{s}`"))),
        }
    }
}

/// `tau:eta2` verdict query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub tau_tilde: usize,
    pub eta2: f64,
}

impl FromStr for Query {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("query", format!("expected `tau:eta2`, got `{s}`"));
        let (t, e) = s.split_once(':').ok_or_else(bad)?;
        Ok(Query {
            tau_tilde: t.trim().parse().map_err(|_| bad())?,
            eta2: e.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub eta1: f64,
    pub variations: usize,
    pub budget: usize,
    /// Robustness only: the interval `I` of the evolution filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(usize, usize)>,
    /// Robustness only: the penalty bounded by `η₂`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_penalty: Option<String>,
    pub perturb: Vec<PerturbRange>,
    #[serde(default)]
    pub integer: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<Query>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    pub vars: Vec<String>,
    pub reference_samples: usize,
    pub reference_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    pub model: String,
    pub system: SystemConfig,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<Discount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_times: Option<ObservationTimes>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub emit_samples: bool,
    /// Distance only: the right-hand system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub both_directions: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsConfig>,
}

impl ExperimentConfig {
    pub fn model_id(&self) -> Result<ModelId> {
        self.model.parse()
    }

    /// Observation times, by default every step up to the horizon.
    pub fn times(&self) -> Result<ObservationTimes> {
        match &self.obs_times {
            Some(t) if t.horizon() > self.steps => Err(Error::config(
                "obs_times",
                format!("observation time {} is beyond the horizon {}", t.horizon(), self.steps),
            )),
            Some(t) => Ok(t.clone()),
            None => ObservationTimes::range(0, self.steps),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))
    }

    /// Canonical one-line JSON (sorted keys).
    pub fn canonical(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("configs serialize"))
    }
}

/// Serializes with object keys in sorted order.
pub fn canonical_json(v: &Value) -> String {
    serde_json::to_string(&sorted(v)).expect("JSON values serialize")
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn canonical_json_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&sorted(v)).expect("JSON values serialize");
    s.push('\n');
    s
}

fn sorted(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let ordered: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, sorted(v))).collect();
            Value::Object(ordered.into_iter().map(|(k, v)| (k.clone(), v)).collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
        other => other.clone(),
    }
}
