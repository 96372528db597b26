//! Lookup of the built-in models by id, with JSON parameters.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::dataspace::{DataState, PenaltyRef};
use crate::engine::Configuration;
use crate::error::{Error, Result};

use super::engine::{self as eng, EngineParams};
use super::three_tanks::{self as tanks, ThreeTanksParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelId {
    ThreeTanks,
    Engine,
}

impl ModelId {
    pub const ALL: [ModelId; 2] = [ModelId::ThreeTanks, ModelId::Engine];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::ThreeTanks => "three-tanks",
            ModelId::Engine => "engine",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("model", format!("unknown model `{s}` (expected three-tanks or engine)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    ThreeTanks(ThreeTanksParams),
    Engine(EngineParams),
}

impl ModelParams {
    /// Parses `params` as the parameter object of `id`; missing fields take their defaults.
    pub fn from_json(id: ModelId, params: &Value) -> Result<Self> {
        let params = if params.is_null() { json!({}) } else { params.clone() };
        let parsed = match id {
            ModelId::ThreeTanks => ModelParams::ThreeTanks(serde_json::from_value(params).map_err(param_error)?),
            ModelId::Engine => ModelParams::Engine(serde_json::from_value(params).map_err(param_error)?),
        };
        parsed.check()?;
        Ok(parsed)
    }

    pub fn id(&self) -> ModelId {
        match self {
            ModelParams::ThreeTanks(_) => ModelId::ThreeTanks,
            ModelParams::Engine(_) => ModelId::Engine,
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            ModelParams::ThreeTanks(p) => p.check(),
            ModelParams::Engine(p) => p.check(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ModelParams::ThreeTanks(p) => serde_json::to_value(p),
            ModelParams::Engine(p) => serde_json::to_value(p),
        }
        .expect("model parameters serialize")
    }
}

fn param_error(e: serde_json::Error) -> Error {
    Error::config("params", e.to_string())
}

/// Initial data state presets of each model.
pub fn presets(id: ModelId) -> &'static [(&'static str, &'static str)] {
    match id {
        ModelId::ThreeTanks => &[
            ("d0", "all tanks empty, all flows zero"),
            ("ds", "all tanks at level 5, all flows zero"),
        ],
        ModelId::Engine => &[("d0", "engines at the initial temperature, cooling off, half speed")],
    }
}

/// A built model: its configuration and named penalties.
#[derive(Clone, Debug)]
pub struct Model {
    params: ModelParams,
    config: Configuration,
    penalties: Vec<(String, PenaltyRef)>,
    init: String,
}

impl Model {
    /// Builds `params` starting from the default preset.
    pub fn build(params: ModelParams) -> Result<Self> {
        params.check()?;
        let (config, penalties) = match &params {
            ModelParams::ThreeTanks(p) => {
                let c = tanks::configuration(p, 0.0)?;
                let pens = tanks::penalties(c.space(), p)?;
                (c, pens)
            }
            ModelParams::Engine(p) => {
                let c = eng::configuration(p)?;
                let pens = eng::penalties(p, c.space())?;
                (c, pens)
            }
        };
        Ok(Model {
            params,
            config,
            penalties,
            init: "d0".into(),
        })
    }

    pub fn from_json(id: &str, params: &Value) -> Result<Self> {
        Model::build(ModelParams::from_json(id.parse()?, params)?)
    }

    pub fn id(&self) -> ModelId {
        self.params.id()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    /// Name of the initial state in use (a preset, or `custom`).
    pub fn init_name(&self) -> &str {
        &self.init
    }

    /// The data state of preset `name`.
    pub fn preset(&self, name: &str) -> Result<DataState> {
        match (&self.params, name) {
            (ModelParams::ThreeTanks(_), "d0") => tanks::state_with_levels(self.config.space(), 0.0),
            (ModelParams::ThreeTanks(_), "ds") => tanks::state_with_levels(self.config.space(), 5.0),
            (ModelParams::Engine(p), "d0") => eng::initial_state(p, self.config.space()),
            _ => {
                let known: Vec<&str> = presets(self.id()).iter().map(|(n, _)| *n).collect();
                Err(Error::config(
                    "init",
                    format!("unknown preset `{name}` for {} (known: {})", self.id(), known.join(", ")),
                ))
            }
        }
    }

    /// Switches the initial state to preset `name`.
    pub fn with_preset(mut self, name: &str) -> Result<Self> {
        let d = self.preset(name)?;
        self.config = self.config.with_data(d)?;
        self.init = name.into();
        Ok(self)
    }

    /// Overrides single variables of the current initial state.
    pub fn with_overrides(mut self, overrides: &[(String, f64)]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        for (v, _) in overrides {
            self.config.space().require(v).map_err(|e| Error::config("init", e.to_string()))?;
        }
        let d = self.config.data().update(overrides)?;
        self.config = self.config.with_data(d)?;
        self.init = format!("{}+overrides", self.init);
        Ok(self)
    }

    pub fn penalty_names(&self) -> Vec<&str> {
        self.penalties.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn penalty(&self, name: &str) -> Result<PenaltyRef> {
        self.penalties
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| {
                Error::config(
                    "penalty",
                    format!("unknown penalty `{name}` for {} (known: {})", self.id(), self.penalty_names().join(", ")),
                )
            })
    }

    /// The penalty used when none is given.
    pub fn default_penalty(&self) -> &str {
        match &self.params {
            ModelParams::ThreeTanks(_) => "l3",
            ModelParams::Engine(p) => match p.sides()[0] {
                eng::Side::L => "fn_L",
                eng::Side::R => "fn_R",
            },
        }
    }

    /// Variables with domains, value encodings, the default initial state and penalties.
    pub fn manifest(&self) -> Result<Value> {
        let space = self.config.space();
        let variables: Vec<Value> = space
            .vars()
            .iter()
            .map(|v| serde_json::to_value(v).expect("variable specs serialize"))
            .collect();
        let d0 = self.preset("d0")?;
        let initial: serde_json::Map<String, Value> = space.names().zip(d0.values()).map(|(n, v)| (n.to_string(), json!(v))).collect();
        let encodings = match self.id() {
            ModelId::ThreeTanks => json!({}),
            ModelId::Engine => eng::encodings(),
        };
        let presets: serde_json::Map<String, Value> = presets(self.id()).iter().map(|(n, d)| (n.to_string(), json!(d))).collect();
        Ok(json!({
            "model": self.id().as_str(),
            "params": self.params.to_json(),
            "variables": variables,
            "encodings": encodings,
            "initial_state": initial,
            "presets": presets,
            "penalties": self.penalty_names(),
            "environment": self.config.env().id(),
        }))
    }
}
