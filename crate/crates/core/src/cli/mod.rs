//! Command-line front end.
//!
//! Every subcommand first resolves its flags (optionally on top of a saved
//! `--config`) into an [`ExperimentConfig`], then runs it. The resolved config
//! is echoed into every output file, so any output can be reproduced with
//! `--config`.

mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metric::{Discount, ObservationTimes};
use crate::models::engine::AttackConfig;
use crate::models::{Model, ModelId, ModelParams};

pub use commands::execute;
pub use config::{ExperimentConfig, PerturbArg, PerturbRange, PerturbationConfig, Query, StatsConfig, SystemConfig};

#[derive(Debug, Parser)]
#[command(name = "evometric", version, about = "Simulate programs in probabilistic environments and measure how far their evolutions drift apart")]
pub struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Progress on stderr: -v for phases, -vv for details.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One trajectory, one CSV row per step.
    Simulate(SimulateArgs),
    /// N runs: per-step mean/std summary, optionally every sample.
    Estimate(EstimateArgs),
    /// Evolution metric between two systems.
    Distance(DistanceArgs),
    /// Robustness bound with an evolution-metric filter on an interval.
    Robustness(PerturbArgs),
    /// Adaptability bound: perturbed initial states, suffix distances.
    Adaptability(PerturbArgs),
    /// Reliability bound: adaptability read from the first observation time.
    Reliability(PerturbArgs),
    /// Per-step standard error and z-score against a larger baseline.
    Stats(StatsArgs),
    /// Variables, encodings, presets and penalties of a model, as JSON.
    Manifest(ManifestArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model id: three-tanks or engine.
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameters as a JSON object; unlisted fields keep their defaults.
    #[arg(long)]
    pub params: Option<String>,
    /// Three-tanks inflow scenario (1 or 2).
    #[arg(long)]
    pub scenario: Option<u8>,
    /// Three-tanks controller variant: plus (dead band 0.7) or minus (0.3).
    #[arg(long)]
    pub variant: Option<String>,
    /// Engine attack, e.g. act:L:1.8, sen:L:0.4, saw:L:0.4:1000 (repeatable).
    #[arg(long)]
    pub attack: Vec<String>,
    /// Initial state preset (three-tanks: d0, ds; engine: d0).
    #[arg(long)]
    pub init: Option<String>,
    /// Override one initial value, `var=value` (repeatable).
    #[arg(long = "set")]
    pub set: Vec<String>,
    /// Start from a saved experiment config; explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Horizon k.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of runs N.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, env = "EVOMETRIC_SEED")]
    pub seed: Option<u64>,
    /// Output directory (default: the main table goes to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Sample multiplier ℓ of the right-hand system.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Penalty name (see `manifest`).
    #[arg(long)]
    pub penalty: Option<String>,
    /// `1`, `const:c` or `exp:gamma`.
    #[arg(long)]
    pub discount: Option<Discount>,
    /// `a..b` or a comma-separated list.
    #[arg(long)]
    pub obs_times: Option<ObservationTimes>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, env = "EVOMETRIC_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Also write every sample (`samples.csv`, needs --out).
    #[arg(long)]
    pub emit_samples: bool,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Parameters of the right-hand system, merged over the left-hand ones.
    #[arg(long)]
    pub rhs_params: Option<String>,
    #[arg(long)]
    pub rhs_scenario: Option<u8>,
    #[arg(long)]
    pub rhs_variant: Option<String>,
    /// Attacks of the right-hand system (replace the left-hand list).
    #[arg(long)]
    pub rhs_attack: Vec<String>,
    #[arg(long)]
    pub rhs_init: Option<String>,
    #[arg(long = "rhs-set")]
    pub rhs_set: Vec<String>,
    /// Seed of the right-hand runs; --seed then seeds the left-hand runs directly.
    #[arg(long)]
    pub seed2: Option<u64>,
    /// Also measure from the right-hand system to the left-hand one (needs --out).
    #[arg(long)]
    pub both_directions: bool,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Perturbation bound η₁.
    #[arg(long)]
    pub eta1: Option<f64>,
    /// Number of accepted variations M.
    #[arg(long)]
    pub m: Option<usize>,
    /// Maximum number of candidates drawn (default max(100·M, 1000)).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Robustness: interval I as `lo..hi`.
    #[arg(long)]
    pub interval: Option<String>,
    /// Robustness: penalty bounded by η₂ (default: --penalty).
    #[arg(long)]
    pub target_penalty: Option<String>,
    /// Resampled variable, `var` (whole domain) or `var:lo:hi` (repeatable).
    #[arg(long)]
    pub perturb: Vec<PerturbArg>,
    /// Draw integer values for the perturbed variables.
    #[arg(long)]
    pub perturb_int: bool,
    /// Verdict query `tau:eta2` (repeatable).
    #[arg(long)]
    pub query: Vec<Query>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated variables (default: the model's observed levels or engine state).
    #[arg(long)]
    pub vars: Option<String>,
    /// Runs of the reference baseline (default 10·N).
    #[arg(long)]
    pub reference_samples: Option<usize>,
    #[arg(long)]
    pub reference_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Per-model defaults for horizon, runs and scale.
fn defaults(model: ModelId) -> (usize, usize, usize) {
    match model {
        ModelId::ThreeTanks => (150, 1000, 5),
        ModelId::Engine => (10000, 100, 10),
    }
}

fn parse_json_object(field: &str, text: &str) -> Result<serde_json::Map<String, Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Error::config(field, "expected a JSON object")),
        Err(e) => Err(Error::config(field, e.to_string())),
    }
}

fn parse_sets(field: &str, sets: &[String]) -> Result<BTreeMap<String, f64>> {
    sets.iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::config(field, format!("expected `var=value`, got `{s}`")))?;
            let v = v
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::config(field, format!("bad value in `{s}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Flag-level edits to one system.
struct SystemEdits<'a> {
    params: Option<&'a str>,
    scenario: Option<u8>,
    variant: Option<&'a str>,
    attacks: &'a [String],
    replace_attacks: bool,
    init: Option<&'a str>,
    sets: &'a [String],
    prefix: &'a str,
}

fn edit_system(model: ModelId, base: Option<&SystemConfig>, e: &SystemEdits<'_>) -> Result<SystemConfig> {
    let field = |f: &str| format!("{}{f}", e.prefix);
    let mut params = match base.map(|b| &b.params) {
        Some(Value::Object(m)) => m.clone(),
        _ => serde_json::Map::new(),
    };
    if let Some(text) = e.params {
        params.extend(parse_json_object(&field("params"), text)?);
    }
    if (e.scenario.is_some() || e.variant.is_some()) && model != ModelId::ThreeTanks {
        return Err(Error::config(field("scenario"), "only the three-tanks model has scenarios and variants"));
    }
    if let Some(s) = e.scenario {
        params.insert("scenario".into(), json!(s));
    }
    if let Some(v) = e.variant {
        let delta_l = match v {
            "plus" => 0.7,
            "minus" => 0.3,
            _ => return Err(Error::config(field("variant"), format!("expected plus or minus, got `{v}`"))),
        };
        params.insert("delta_l".into(), json!(delta_l));
    }
    if !e.attacks.is_empty() || e.replace_attacks {
        if model != ModelId::Engine && !e.attacks.is_empty() {
            return Err(Error::config(field("attack"), "only the engine model has attacks"));
        }
        let mut list = match (e.replace_attacks, params.get("attacks")) {
            (false, Some(Value::Array(a))) => a.clone(),
            _ => Vec::new(),
        };
        for a in e.attacks {
            let parsed: AttackConfig = a.parse().map_err(|err: Error| Error::config(field("attack"), err.to_string()))?;
            list.push(serde_json::to_value(parsed)?);
        }
        if model == ModelId::Engine {
            params.insert("attacks".into(), Value::Array(list));
        }
    }
    let resolved = ModelParams::from_json(model, &Value::Object(params))?.to_json();
    let mut overrides = base.map(|b| b.overrides.clone()).unwrap_or_default();
    overrides.extend(parse_sets(&field("set"), e.sets)?);
    Ok(SystemConfig {
        params: resolved,
        init: e
            .init
            .map(str::to_string)
            .or_else(|| base.map(|b| b.init.clone()))
            .unwrap_or_else(|| "d0".into()),
        overrides,
    })
}

fn start(command: &str, m: &ModelArgs) -> Result<(ExperimentConfig, ModelId)> {
    let loaded = m.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let model_name = match (&m.model, &loaded) {
        (Some(name), _) => name.clone(),
        (None, Some(c)) => c.model.clone(),
        (None, None) => return Err(Error::config("model", "missing --model (or --config)")),
    };
    let model: ModelId = model_name.parse()?;
    let same_model = loaded.as_ref().is_some_and(|c| c.model == model_name);
    let base = loaded.filter(|_| same_model);
    let system = edit_system(
        model,
        base.as_ref().map(|c| &c.system),
        &SystemEdits {
            params: m.params.as_deref(),
            scenario: m.scenario,
            variant: m.variant.as_deref(),
            attacks: &m.attack,
            replace_attacks: false,
            init: m.init.as_deref(),
            sets: &m.set,
            prefix: "",
        },
    )?;
    let (steps, samples, _) = defaults(model);
    let cfg = match base {
        Some(mut c) => {
            c.command = command.into();
            c.system = system;
            c
        }
        None => ExperimentConfig {
            command: command.into(),
            model: model.as_str().into(),
            system,
            steps,
            samples,
            seed: 0,
            scale: None,
            penalty: None,
            discount: None,
            obs_times: None,
            emit_samples: false,
            rhs: None,
            rhs_seed: None,
            both_directions: false,
            perturbation: None,
            stats: None,
        },
    };
    Ok((cfg, model))
}

fn apply_run(cfg: &mut ExperimentConfig, r: &RunArgs) {
    if let Some(s) = r.steps {
        cfg.steps = s;
    }
    if let Some(n) = r.samples {
        cfg.samples = n;
    }
    if let Some(s) = r.seed {
        cfg.seed = s;
    }
}

fn apply_metric(cfg: &mut ExperimentConfig, model: &Model, m: &MetricArgs, steps_flag: Option<usize>) -> Result<()> {
    let (_, _, scale) = defaults(model.id());
    cfg.scale = m.scale.or(cfg.scale).or(Some(scale));
    cfg.penalty = m.penalty.clone().or(cfg.penalty.take()).or_else(|| Some(model.default_penalty().into()));
    cfg.discount = m.discount.or(cfg.discount).or(Some(Discount::default()));
    if let Some(t) = &m.obs_times {
        cfg.obs_times = Some(t.clone());
        if steps_flag.is_none() {
            cfg.steps = t.horizon();
        }
    }
    model.penalty(cfg.penalty.as_deref().expect("set above"))?;
    cfg.times()?;
    Ok(())
}

fn parse_interval(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::config("interval", format!("expected `lo..hi`, got `{s}`"));
    let (a, b) = s.split_once("..").or_else(|| s.split_once(',')).ok_or_else(bad)?;
    let lo = a.trim().parse().map_err(|_| bad())?;
    let hi = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

/// Resolves `cli.command` into a complete experiment config (and the output directory).
pub fn resolve(command: &Command) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    match command {
        Command::Simulate(a) => {
            let (mut cfg, _) = start("simulate", &a.model)?;
            if let Some(s) = a.steps {
                cfg.steps = s;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            cfg.system.build(cfg.model_id()?)?;
            Ok((cfg, a.out.clone()))
        }
        Command::Estimate(a) => {
            let (mut cfg, _) = start("estimate", &a.model)?;
            apply_run(&mut cfg, &a.run);
            cfg.emit_samples |= a.emit_samples;
            if cfg.emit_samples && a.run.out.is_none() {
                return Err(Error::config("emit_samples", "--emit-samples needs --out"));
            }
            cfg.system.build(cfg.model_id()?)?;
            Ok((cfg, a.run.out.clone()))
        }
        Command::Distance(a) => {
            let (mut cfg, model_id) = start("distance", &a.model)?;
            apply_run(&mut cfg, &a.run);
            let model = cfg.system.build(model_id)?;
            apply_metric(&mut cfg, &model, &a.metric, a.run.steps)?;
            let rhs_base = cfg.rhs.clone().unwrap_or_else(|| cfg.system.clone());
            let rhs = edit_system(
                model_id,
                Some(&rhs_base),
                &SystemEdits {
                    params: a.rhs_params.as_deref(),
                    scenario: a.rhs_scenario,
                    variant: a.rhs_variant.as_deref(),
                    attacks: &a.rhs_attack,
                    replace_attacks: !a.rhs_attack.is_empty(),
                    init: a.rhs_init.as_deref(),
                    sets: &a.rhs_set,
                    prefix: "rhs_",
                },
            )?;
            let rhs_model = rhs.build(model_id)?;
            if !rhs_model.configuration().space().same_layout(model.configuration().space()) {
                return Err(Error::structural("the two systems live in different data spaces"));
            }
            cfg.rhs = Some(rhs);
            cfg.rhs_seed = a.seed2.or(cfg.rhs_seed);
            cfg.both_directions |= a.both_directions;
            if cfg.both_directions && a.run.out.is_none() {
                return Err(Error::config("both_directions", "--both-directions needs --out"));
            }
            Ok((cfg, a.run.out.clone()))
        }
        Command::Robustness(a) | Command::Adaptability(a) | Command::Reliability(a) => {
            let name = match command {
                Command::Robustness(_) => "robustness",
                Command::Adaptability(_) => "adaptability",
                _ => "reliability",
            };
            resolve_perturbation(name, a)
        }
        Command::Stats(a) => {
            let (mut cfg, model_id) = start("stats", &a.model)?;
            apply_run(&mut cfg, &a.run);
            let model = cfg.system.build(model_id)?;
            let previous = cfg.stats.take();
            let vars: Vec<String> = match (&a.vars, &previous) {
                (Some(v), _) => v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                (None, Some(p)) => p.vars.clone(),
                (None, None) => match model_id {
                    ModelId::ThreeTanks => vec!["l1".into(), "l2".into(), "l3".into()],
                    ModelId::Engine => vec!["temp_L".into(), "stress_L".into()],
                },
            };
            for v in &vars {
                model.configuration().space().require(v).map_err(|e| Error::config("vars", e.to_string()))?;
            }
            let reference_samples = a
                .reference_samples
                .or(previous.as_ref().map(|p| p.reference_samples))
                .unwrap_or(cfg.samples * 10);
            let reference_seed = a
                .reference_seed
                .or(previous.as_ref().map(|p| p.reference_seed))
                .unwrap_or_else(|| crate::environment::Seed(cfg.seed).derive(0x5ef).0);
            cfg.stats = Some(StatsConfig {
                vars,
                reference_samples,
                reference_seed,
            });
            Ok((cfg, a.run.out.clone()))
        }
        Command::Manifest(a) => {
            let (cfg, _) = start("manifest", &a.model)?;
            cfg.system.build(cfg.model_id()?)?;
            Ok((cfg, a.out.clone()))
        }
    }
}

fn resolve_perturbation(name: &str, a: &PerturbArgs) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let (mut cfg, model_id) = start(name, &a.model)?;
    apply_run(&mut cfg, &a.run);
    let model = cfg.system.build(model_id)?;
    let engine_window = model_id == ModelId::Engine && name == "robustness";
    if engine_window && a.metric.penalty.is_none() && cfg.penalty.is_none() {
        cfg.penalty = Some("window".into());
    }
    apply_metric(&mut cfg, &model, &a.metric, a.run.steps)?;
    let previous = cfg.perturbation.take();
    let eta1 = a.eta1.or(previous.as_ref().map(|p| p.eta1)).unwrap_or(0.3);
    let variations = a.m.or(previous.as_ref().map(|p| p.variations)).unwrap_or(100);
    let budget = a
        .budget
        .or(previous.as_ref().map(|p| p.budget))
        .unwrap_or_else(|| variations.saturating_mul(100).max(1000));
    let (interval, target_penalty) = if name == "robustness" {
        let interval = match &a.interval {
            Some(s) => parse_interval(s)?,
            None => previous.as_ref().and_then(|p| p.interval).unwrap_or((0, 0)),
        };
        let target = a
            .target_penalty
            .clone()
            .or(previous.as_ref().and_then(|p| p.target_penalty.clone()))
            .unwrap_or_else(|| {
                if engine_window {
                    model.default_penalty().to_string()
                } else {
                    cfg.penalty.clone().expect("resolved")
                }
            });
        model.penalty(&target)?;
        (Some(interval), Some(target))
    } else {
        if a.interval.is_some() || a.target_penalty.is_some() {
            return Err(Error::config("interval", format!("{name} uses one penalty and no interval")));
        }
        (None, None)
    };
    let space = model.configuration().space().clone();
    let (perturb, integer) = if !a.perturb.is_empty() {
        let ranges = a
            .perturb
            .iter()
            .map(|p| {
                let i = space.require(&p.var).map_err(|e| Error::config("perturb", e.to_string()))?;
                let spec = &space.vars()[i];
                let (lo, hi) = p.range.unwrap_or((spec.lower, spec.upper));
                Ok(PerturbRange {
                    var: p.var.clone(),
                    lo,
                    hi,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (ranges, a.perturb_int)
    } else if let Some(p) = &previous {
        (p.perturb.clone(), p.integer || a.perturb_int)
    } else {
        match (model_id, model.params()) {
            (ModelId::ThreeTanks, _) => (
                space
                    .vars()
                    .iter()
                    .map(|v| PerturbRange {
                        var: v.name.clone(),
                        lo: v.lower,
                        hi: v.upper,
                    })
                    .collect(),
                a.perturb_int,
            ),
            (ModelId::Engine, ModelParams::Engine(p)) if engine_window => {
                let awml = p.awml().ok_or_else(|| {
                    Error::config("perturb", "engine robustness without --perturb needs a windowed attack (saw:...)")
                })?;
                (
                    vec![PerturbRange {
                        var: "AW_r".into(),
                        lo: 0.0,
                        hi: (eta1 * awml).floor(),
                    }],
                    true,
                )
            }
            _ => return Err(Error::config("perturb", "no default perturbation for this model; pass --perturb")),
        }
    };
    let mut queries = previous.map(|p| p.queries).unwrap_or_default();
    queries.extend(a.query.iter().copied());
    cfg.perturbation = Some(PerturbationConfig {
        eta1,
        variations,
        budget,
        interval,
        target_penalty,
        perturb,
        integer,
        queries,
    });
    Ok((cfg, a.run.out.clone()))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("EVOMETRIC_LOG")
        .format_timestamp(None)
        .try_init();
}

/// Parses the arguments, runs the command and returns the process exit code:
/// 0 on success, 2 for invalid input, 1 for failures during a run.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match resolve(&cli.command).and_then(|(cfg, out)| execute(&cfg, out.as_deref())) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}
