//! Two refrigerated engines under an intrusion detection system, a
//! supervisor, and three attacks on sensors and actuators.
//!
//! Symbolic values are stored as integers:
//! `off=0 on=1`, `slow=0 half=1 full=2`, `ok=0 hot=1`,
//! `none=0 left=1 right=2 both=3`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataspace::{DataSpace, DataState, FnPenalty, PenaltyRef, VarSpec, VariableRatio, VariableValue};
use crate::engine::Configuration;
use crate::environment::{Environment, RandomStream};
use crate::error::{Error, Result};
use crate::process::{parse_program, Definitions, ProcRef, Process, ValidationOptions};

pub const OFF: f64 = 0.0;
pub const ON: f64 = 1.0;
pub const SLOW: f64 = 0.0;
pub const HALF: f64 = 1.0;
pub const FULL: f64 = 2.0;
pub const OK: f64 = 0.0;
pub const HOT: f64 = 1.0;
pub const ALARM_NONE: f64 = 0.0;
pub const ALARM_LEFT: f64 = 1.0;
pub const ALARM_RIGHT: f64 = 2.0;
pub const ALARM_BOTH: f64 = 3.0;

const HISTORY: usize = 6;
const COUNTER_MAX: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

impl Side {
    pub fn suffix(self) -> &'static str {
        match self {
            Side::L => "L",
            Side::R => "R",
        }
    }

    fn other(self) -> Side {
        match self {
            Side::L => Side::R,
            Side::R => Side::L,
        }
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(Side::L),
            "R" | "r" => Ok(Side::R),
            _ => Err(Error::config("attack.side", format!("expected L or R, got `{s}`"))),
        }
    }
}

/// Which engines are simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// The left engine alone (its partner's request channel stays at `half`).
    #[default]
    Left,
    /// Both engines and the supervisor.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AttackConfig {
    /// Switches the cooling off as soon as the temperature drops below `max - ac`.
    Act { side: Side, ac: f64 },
    /// Subtracts `tf` from the temperature seen by the controller.
    Sen { side: Side, tf: f64 },
    /// Subtracts `tf` while the step counter is inside the attack window.
    /// With `window` set, the attack writes it in its first step; otherwise
    /// the window is read from `AW_l`/`AW_r` in the initial data.
    Saw {
        side: Side,
        tf: f64,
        awml: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<(f64, f64)>,
    },
}

impl AttackConfig {
    pub fn side(&self) -> Side {
        match self {
            AttackConfig::Act { side, .. } | AttackConfig::Sen { side, .. } | AttackConfig::Saw { side, .. } => *side,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            AttackConfig::Act { ac, .. } if !(1.0..=3.0).contains(ac) => {
                Err(Error::config("attack.ac", format!("{ac} outside [1, 3]")))
            }
            AttackConfig::Sen { tf, .. } | AttackConfig::Saw { tf, .. } if !(*tf > 0.0) => {
                Err(Error::config("attack.tf", "must be positive"))
            }
            AttackConfig::Saw { awml, .. } if !(*awml > 0.0) => Err(Error::config("attack.awml", "must be positive")),
            AttackConfig::Saw {
                window: Some((l, r)),
                awml,
                ..
            } if !(*l >= 0.0 && l <= r && r - l <= *awml) => Err(Error::config(
                "attack.window",
                format!("need 0 <= left <= right and right - left <= {awml}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Parses `act:L:1.8`, `sen:R:0.4`, `saw:L:0.4:1000` or
/// `saw:L:0.4:1000:0:50` (explicit window).
impl FromStr for AttackConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::config("attack", format!("`{s}` is missing a field")))?
                .parse()
                .map_err(|_| Error::config("attack", format!("`{s}`: field {i} is not a number")))
        };
        let side: Side = parts
            .get(1)
            .ok_or_else(|| Error::config("attack", format!("`{s}` has no side")))?
            .parse()?;
        let attack = match (parts[0], parts.len()) {
            ("act", 3) => AttackConfig::Act { side, ac: num(2)? },
            ("sen", 3) => AttackConfig::Sen { side, tf: num(2)? },
            ("saw", 4) => AttackConfig::Saw {
                side,
                tf: num(2)?,
                awml: num(3)?,
                window: None,
            },
            ("saw", 6) => AttackConfig::Saw {
                side,
                tf: num(2)?,
                awml: num(3)?,
                window: Some((num(4)?, num(5)?)),
            },
            _ => {
                return Err(Error::config(
                    "attack",
                    format!("`{s}`: expected act:<side>:<ac>, sen:<side>:<tf> or saw:<side>:<tf>:<awml>[:<l>:<r>]"),
                ))
            }
        };
        attack.check()?;
        Ok(attack)
    }
}

impl fmt::Display for AttackConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackConfig::Act { side, ac } => write!(f, "act:{}:{ac}", side.suffix()),
            AttackConfig::Sen { side, tf } => write!(f, "sen:{}:{tf}", side.suffix()),
            AttackConfig::Saw { side, tf, awml, window } => {
                write!(f, "saw:{}:{tf}:{awml}", side.suffix())?;
                if let Some((l, r)) = window {
                    write!(f, ":{l}:{r}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams {
    pub layout: Layout,
    pub max_temp: f64,
    pub stress_incr: f64,
    pub threshold: f64,
    /// Security clearance of the left and right engine.
    pub clearance: (f64, f64),
    pub initial_temp: f64,
    pub attacks: Vec<AttackConfig>,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            layout: Layout::Left,
            max_temp: 100.0,
            stress_incr: 0.02,
            threshold: 99.8,
            clearance: (0.7, 0.7),
            initial_temp: 95.0,
            attacks: Vec::new(),
        }
    }
}

impl EngineParams {
    pub fn with_attack(mut self, attack: AttackConfig) -> Self {
        self.attacks.push(attack);
        self
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn sides(&self) -> Vec<Side> {
        match self.layout {
            Layout::Left => vec![Side::L],
            Layout::Full => vec![Side::L, Side::R],
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.threshold <= self.max_temp) {
            return Err(Error::config("threshold", "must not exceed max_temp"));
        }
        if !(self.stress_incr > 0.0 && self.stress_incr <= 1.0) {
            return Err(Error::config("stress_incr", "must lie in (0, 1]"));
        }
        let mut fake_writers = BTreeSet::new();
        let mut saws = 0;
        for a in &self.attacks {
            a.check()?;
            if !self.sides().contains(&a.side()) {
                return Err(Error::config(
                    "attacks",
                    format!("attack `{a}` targets an engine that is not simulated"),
                ));
            }
            match a {
                AttackConfig::Act { .. } => {}
                AttackConfig::Saw { .. } | AttackConfig::Sen { .. } => {
                    if !fake_writers.insert(a.side()) {
                        return Err(Error::config(
                            "attacks",
                            format!("two sensor attacks on engine {} both write temp_fake", a.side().suffix()),
                        ));
                    }
                    saws += usize::from(matches!(a, AttackConfig::Saw { .. }));
                }
            }
        }
        if self.attacks.iter().filter(|a| matches!(a, AttackConfig::Act { .. })).map(|a| a.side()).collect::<BTreeSet<_>>().len()
            < self.attacks.iter().filter(|a| matches!(a, AttackConfig::Act { .. })).count()
        {
            return Err(Error::config("attacks", "two actuator attacks on one engine"));
        }
        if saws > 1 {
            return Err(Error::config("attacks", "at most one windowed attack (the window variables are shared)"));
        }
        Ok(())
    }

    /// The maximal window length of the windowed attack, if any.
    pub fn awml(&self) -> Option<f64> {
        self.attacks.iter().find_map(|a| match a {
            AttackConfig::Saw { awml, .. } => Some(*awml),
            _ => None,
        })
    }
}

fn var(name: &str, side: Side) -> String {
    format!("{name}_{}", side.suffix())
}

fn channel_to(side: Side) -> &'static str {
    match side {
        Side::L => "ch_speed_R_to_L",
        Side::R => "ch_speed_L_to_R",
    }
}

pub fn space(params: &EngineParams) -> Result<Arc<DataSpace>> {
    let mut vars = Vec::new();
    for side in params.sides() {
        vars.push(VarSpec::continuous(var("temp", side), 0.0, 200.0));
        vars.push(VarSpec::finite(var("cool", side), &[OFF, ON]));
        vars.push(VarSpec::finite(var("speed", side), &[SLOW, HALF, FULL]));
        vars.push(VarSpec::finite(var("ch_speed", side), &[SLOW, HALF, FULL]));
        vars.push(VarSpec::continuous(var("stress", side), 0.0, 1.0));
        for k in 1..=HISTORY {
            vars.push(VarSpec::continuous(var(&format!("p{k}"), side), 0.0, 200.0));
        }
        vars.push(VarSpec::continuous(var("temp_fake", side), -100.0, 100.0));
        vars.push(VarSpec::finite(var("ch_warning", side), &[OK, HOT]));
        vars.push(VarSpec::continuous(var("fn", side), 0.0, 1.0));
        vars.push(VarSpec::continuous(var("fp", side), 0.0, 1.0));
        vars.push(VarSpec::continuous(var("overstress", side), 0.0, COUNTER_MAX));
    }
    vars.push(VarSpec::finite("ch_speed_L_to_R", &[SLOW, HALF, FULL]));
    vars.push(VarSpec::finite("ch_speed_R_to_L", &[SLOW, HALF, FULL]));
    vars.push(VarSpec::continuous("cs", 0.0, COUNTER_MAX));
    vars.push(VarSpec::continuous("AW_l", 0.0, COUNTER_MAX));
    vars.push(VarSpec::continuous("AW_r", 0.0, COUNTER_MAX));
    if params.layout == Layout::Full {
        vars.push(VarSpec::finite("ch_alarm", &[ALARM_NONE, ALARM_LEFT, ALARM_RIGHT, ALARM_BOTH]));
        vars.push(VarSpec::continuous("fn", 0.0, 1.0));
        vars.push(VarSpec::continuous("fp", 0.0, 1.0));
    }
    DataSpace::new(vars)
}

/// Temperatures and history at `initial_temp`, actuators and channels at their
/// normal settings, everything else zero.
pub fn initial_state(params: &EngineParams, space: &Arc<DataSpace>) -> Result<DataState> {
    let mut pairs: Vec<(String, f64)> = Vec::new();
    for side in params.sides() {
        pairs.push((var("temp", side), params.initial_temp));
        for k in 1..=HISTORY {
            pairs.push((var(&format!("p{k}"), side), params.initial_temp));
        }
        pairs.push((var("cool", side), OFF));
        pairs.push((var("speed", side), HALF));
        pairs.push((var("ch_speed", side), HALF));
        pairs.push((var("ch_warning", side), OK));
        pairs.push((var("temp_fake", side), 0.0));
    }
    pairs.push(("ch_speed_L_to_R".into(), HALF));
    pairs.push(("ch_speed_R_to_L".into(), HALF));
    DataState::from_pairs(space.clone(), &pairs)
}

/// One engine before renaming. `ch_temp` is spelled out as `temp + temp_fake`.
pub fn engine_text(params: &EngineParams) -> String {
    let th = params.threshold;
    let max = params.max_temp;
    format!(
        "Eng := Ctrl | IDS;\n\
         Ctrl := if [temp + temp_fake < {th:?}] √.Check else ({ON:?} -> cool).Cooling;\n\
         Cooling := √.√.√.√.Check;\n\
         Check := if [ch_speed == {SLOW:?}] ({SLOW:?}, {OFF:?} -> speed, cool).Ctrl\n\
         \x20        else (ch_in, {OFF:?} -> speed, cool).Ctrl;\n\
         IDS := if [temp > {max:?} and cool == {OFF:?}] ({HOT:?}, {SLOW:?}, {FULL:?} -> ch_warning, ch_speed, ch_out).IDS\n\
         \x20      else ({OK:?}, {HALF:?}, {HALF:?} -> ch_warning, ch_speed, ch_out).IDS;\n"
    )
}

pub const SUPERVISOR_TEXT: &str = "\
SV := if [ch_warning_L == 1 and ch_warning_R == 1] (3 -> ch_alarm).SV
      else if [ch_warning_L == 1] (1 -> ch_alarm).SV
      else if [ch_warning_R == 1] (2 -> ch_alarm).SV
      else (0 -> ch_alarm).SV;
";

/// Attack definitions for `side` (unrenamed names carry the side already).
pub fn attack_text(params: &EngineParams, attack: &AttackConfig) -> String {
    let max = params.max_temp;
    let x = attack.side().suffix();
    match attack {
        AttackConfig::Act { ac, .. } => format!(
            "Att_Act_{x} := if [temp_{x} < {max:?} - {ac:?}] ({OFF:?} -> cool_{x}).Att_Act_{x} else √.Att_Act_{x};\n"
        ),
        AttackConfig::Sen { tf, .. } => format!("Att_Sen_{x} := (-{tf:?} -> temp_fake_{x}).Att_Sen_{x};\n"),
        AttackConfig::Saw { tf, window, .. } => {
            let mut s = format!(
                "Att_Saw_Win_{x} := if [cs >= AW_l and cs <= AW_r] (-{tf:?} -> temp_fake_{x}).Att_Saw_Win_{x}\n\
                 \x20                 else (0 -> temp_fake_{x}).Att_Saw_Win_{x};\n"
            );
            if let Some((l, r)) = window {
                s.push_str(&format!("Att_Saw_{x} := ({l:?}, {r:?} -> AW_l, AW_r).Att_Saw_Win_{x};\n"));
            }
            s
        }
    }
}

fn attack_entry(attack: &AttackConfig) -> String {
    let x = attack.side().suffix();
    match attack {
        AttackConfig::Act { .. } => format!("Att_Act_{x}"),
        AttackConfig::Sen { .. } => format!("Att_Sen_{x}"),
        AttackConfig::Saw { window: Some(_), .. } => format!("Att_Saw_{x}"),
        AttackConfig::Saw { window: None, .. } => format!("Att_Saw_Win_{x}"),
    }
}

/// `Eng_X`: the generic engine with its variables and process names renamed.
pub fn renamed_engine(generic: &Definitions, side: Side) -> Definitions {
    let vars = move |v: &str| -> Option<String> {
        Some(match v {
            "ch_in" => channel_to(side).to_string(),
            "ch_out" => channel_to(side.other()).to_string(),
            other => var(other, side),
        })
    };
    let procs = move |p: &str| Some(var(p, side));
    let mut out = Definitions::new();
    for (name, body) in generic.iter() {
        out.define(&var(name.as_str(), side), body.rename(&vars, &procs));
    }
    out
}

/// The complete program: engines, supervisor (full layout) and attacks,
/// composed synchronously with the attacks rightmost.
pub fn program(params: &EngineParams) -> Result<(ProcRef, Definitions, ValidationOptions)> {
    params.check()?;
    let generic = parse_program(&engine_text(params))?.defs;
    let mut defs = Definitions::new();
    let mut parts: Vec<ProcRef> = Vec::new();
    for side in params.sides() {
        defs.extend(&renamed_engine(&generic, side));
        parts.push(Process::call(&var("Eng", side)));
    }
    if params.layout == Layout::Full {
        defs.extend(&parse_program(SUPERVISOR_TEXT)?.defs);
        parts.push(Process::call("SV"));
    }
    let mut options = ValidationOptions::default();
    for a in &params.attacks {
        defs.extend(&parse_program(&attack_text(params, a))?.defs);
        parts.push(Process::call(&attack_entry(a)));
        if let AttackConfig::Act { side, .. } = a {
            // agrees with the controller whenever both write
            options.allowed_overlap.insert(var("cool", *side));
        }
    }
    let main = Process::par_all(parts).expect("at least one engine");
    Ok((main, defs, options))
}

#[derive(Clone, Debug)]
struct SideIndex {
    temp: usize,
    cool: usize,
    speed: usize,
    stress: usize,
    history: [usize; HISTORY],
    warning: usize,
    fn_: usize,
    fp: usize,
    overstress: usize,
}

impl SideIndex {
    fn new(space: &DataSpace, side: Side) -> Result<Self> {
        let i = |n: &str| space.require(&var(n, side));
        let mut history = [0; HISTORY];
        for (k, h) in history.iter_mut().enumerate() {
            *h = i(&format!("p{}", k + 1))?;
        }
        Ok(SideIndex {
            temp: i("temp")?,
            cool: i("cool")?,
            speed: i("speed")?,
            stress: i("stress")?,
            history,
            warning: i("ch_warning")?,
            fn_: i("fn")?,
            fp: i("fp")?,
            overstress: i("overstress")?,
        })
    }
}

/// The engines' physics, stress accounting and detection statistics.
#[derive(Clone, Debug)]
pub struct EngineEnv {
    params: EngineParams,
    sides: Vec<SideIndex>,
    cs: usize,
    system: Option<(usize, usize, usize)>,
}

/// Temperature change interval for the given cooling and speed settings.
pub fn temp_delta_range(cool: f64, speed: f64) -> (f64, f64) {
    if cool == ON {
        (-1.2, -0.8)
    } else if speed == SLOW {
        (0.1, 0.3)
    } else if speed == HALF {
        (0.3, 0.7)
    } else {
        (0.7, 1.2)
    }
}

/// Running average after one more sample: `(t·avg + x) / (t + 1)`.
pub fn running_average(t: f64, avg: f64, x: f64) -> f64 {
    (t * avg + x) / (t + 1.0)
}

/// Alarm code decoded into (left raised, right raised) as 0/1.
pub fn alarm_flags(alarm: f64) -> (f64, f64) {
    let l = if alarm == ALARM_LEFT || alarm == ALARM_BOTH { 1.0 } else { 0.0 };
    let r = if alarm == ALARM_RIGHT || alarm == ALARM_BOTH { 1.0 } else { 0.0 };
    (l, r)
}

impl EngineEnv {
    pub fn new(params: EngineParams, space: &DataSpace) -> Result<Self> {
        params.check()?;
        let sides = params
            .sides()
            .into_iter()
            .map(|s| SideIndex::new(space, s))
            .collect::<Result<_>>()?;
        let system = match params.layout {
            Layout::Full => Some((space.require("ch_alarm")?, space.require("fn")?, space.require("fp")?)),
            Layout::Left => None,
        };
        Ok(EngineEnv {
            params,
            sides,
            cs: space.require("cs")?,
            system,
        })
    }

    /// Whether more than three of the last six temperatures reached `max`.
    fn stress_condition(&self, d: &DataState, side: &SideIndex) -> bool {
        side.history.iter().filter(|&&k| d.value(k) >= self.params.max_temp).count() > 3
    }
}

impl Environment for EngineEnv {
    fn id(&self) -> &str {
        "engine"
    }

    fn sample(&self, d: &DataState, rng: &mut RandomStream) -> Result<DataState> {
        let mut next = d.successor();
        let tau = d.value(self.cs);
        for s in &self.sides {
            let (lo, hi) = temp_delta_range(d.value(s.cool), d.value(s.speed));
            let temp = d.value(s.temp);
            next.set(s.temp, temp + rng.uniform(lo, hi))?;
            next.set(s.history[0], temp)?;
            for k in 1..HISTORY {
                next.set(s.history[k], d.value(s.history[k - 1]))?;
            }
            let stress = d.value(s.stress);
            if self.stress_condition(d, s) {
                next.set(s.stress, (stress + self.params.stress_incr).min(1.0))?;
                next.set(s.overstress, d.value(s.overstress) + 1.0)?;
            }
            let warning = d.value(s.warning);
            next.set(s.fn_, running_average(tau, d.value(s.fn_), (stress - warning).max(0.0)))?;
            next.set(s.fp, running_average(tau, d.value(s.fp), (warning - stress).max(0.0)))?;
        }
        if let Some((alarm, fn_, fp)) = self.system {
            let (l, r) = alarm_flags(d.value(alarm));
            let (wl, wr) = self.params.clearance;
            let (sl, sr) = (d.value(self.sides[0].stress), d.value(self.sides[1].stress));
            let miss = (wl * (sl - l).max(0.0) + wr * (sr - r).max(0.0)).min(1.0);
            let false_alarm = (wl * (l - sl).max(0.0) + wr * (r - sr).max(0.0)).min(1.0);
            next.set(fn_, running_average(tau, d.value(fn_), miss))?;
            next.set(fp, running_average(tau, d.value(fp), false_alarm))?;
        }
        next.set(self.cs, tau + 1.0)?;
        Ok(next)
    }
}

/// Penalties available on this layout: `fn_X`, `fp_X`, `stress_X`,
/// `overstress_X` (share of steps under the stress condition), `window`
/// (attack window length over its maximum) and, on the full layout, `fn`, `fp`.
pub fn penalties(params: &EngineParams, space: &DataSpace) -> Result<Vec<(String, PenaltyRef)>> {
    let mut out: Vec<(String, PenaltyRef)> = Vec::new();
    for side in params.sides() {
        for v in ["fn", "fp", "stress"] {
            let name = var(v, side);
            out.push((name.clone(), Arc::new(VariableValue::new(space, &name)?)));
        }
        let name = var("overstress", side);
        out.push((name.clone(), Arc::new(VariableRatio::new(space, name.clone(), &name, "cs")?)));
    }
    if params.layout == Layout::Full {
        out.push(("fn".into(), Arc::new(VariableValue::new(space, "fn")?)));
        out.push(("fp".into(), Arc::new(VariableValue::new(space, "fp")?)));
    }
    let awml = params.awml().unwrap_or(1000.0);
    let (l, r) = (space.require("AW_l")?, space.require("AW_r")?);
    out.push((
        "window".into(),
        Arc::new(FnPenalty::new("window", move |_, d: &DataState| (d.value(r) - d.value(l)) / awml)),
    ));
    Ok(out)
}

pub fn configuration(params: &EngineParams) -> Result<Configuration> {
    let space = space(params)?;
    let d0 = initial_state(params, &space)?;
    let env = EngineEnv::new(params.clone(), &space)?;
    let (main, defs, options) = program(params)?;
    Configuration::with_options(main, d0, Arc::new(env), Arc::new(defs), &options)
}

pub fn encodings() -> serde_json::Value {
    json!({
        "cool": { "off": OFF, "on": ON },
        "speed": { "slow": SLOW, "half": HALF, "full": FULL },
        "ch_warning": { "ok": OK, "hot": HOT },
        "ch_alarm": { "none": ALARM_NONE, "left": ALARM_LEFT, "right": ALARM_RIGHT, "both": ALARM_BOTH },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::environment::Seed;
    use crate::process::validate;

    #[test]
    fn genuine_left_engine_is_valid() {
        let p = EngineParams::default();
        let c = configuration(&p).unwrap();
        assert_eq!(c.data().get("temp_L").unwrap(), 95.0);
        assert_eq!(c.data().get("ch_speed_R_to_L").unwrap(), HALF);
    }

    #[test]
    fn renaming_wires_the_channels() {
        let p = EngineParams::default().with_layout(Layout::Full);
        let (main, defs, _) = program(&p).unwrap();
        let sp = space(&p).unwrap();
        assert!(validate(&main, &defs, &sp).is_valid());
        let check_l = defs.lookup("Check_L").unwrap().to_string();
        assert!(check_l.contains("(ch_speed_R_to_L, 0 -> speed_L, cool_L)"), "{check_l}");
        let ids_r = defs.lookup("IDS_R").unwrap().to_string();
        assert!(ids_r.contains("ch_speed_R_to_L"), "{ids_r}");
    }

    #[test]
    fn actuator_attack_needs_overlap_permission() {
        let p = EngineParams::default().with_attack("act:L:1.8".parse().unwrap());
        let (main, defs, options) = program(&p).unwrap();
        let sp = space(&p).unwrap();
        assert!(!validate(&main, &defs, &sp).is_valid());
        assert!(crate::process::validate_with(&main, &defs, &sp, &options).is_valid());
    }

    #[test]
    fn attack_parsing() {
        assert_eq!(
            "saw:L:0.4:1000".parse::<AttackConfig>().unwrap(),
            AttackConfig::Saw {
                side: Side::L,
                tf: 0.4,
                awml: 1000.0,
                window: None
            }
        );
        assert!("act:L:5".parse::<AttackConfig>().is_err());
        assert!("saw:L:0.4:10:0:50".parse::<AttackConfig>().is_err());
        assert!("zap:L:1".parse::<AttackConfig>().is_err());
        let a: AttackConfig = "sen:R:0.4".parse().unwrap();
        assert_eq!(a.to_string().parse::<AttackConfig>().unwrap(), a);
    }

    #[test]
    fn cooling_always_lowers_temperature() {
        let p = EngineParams::default();
        let sp = space(&p).unwrap();
        let env = EngineEnv::new(p.clone(), &sp).unwrap();
        let d = initial_state(&p, &sp).unwrap().update(&[("cool_L", ON)]).unwrap();
        let mut rng = Seed(3).stream(0);
        for _ in 0..1000 {
            let next = env.sample(&d, &mut rng).unwrap();
            let delta = next.get("temp_L").unwrap() - 95.0;
            assert!((-1.2..=-0.8).contains(&delta), "{delta}");
        }
    }

    #[test]
    fn history_shift_and_stress_saturation() {
        let p = EngineParams::default();
        let sp = space(&p).unwrap();
        let env = EngineEnv::new(p.clone(), &sp).unwrap();
        let d = initial_state(&p, &sp)
            .unwrap()
            .update(&[("temp_L", 101.0), ("p1_L", 100.0), ("p2_L", 101.0), ("p3_L", 102.0), ("p4_L", 103.0), ("p5_L", 97.0), ("stress_L", 1.0)])
            .unwrap();
        let next = env.sample(&d, &mut Seed(0).stream(0)).unwrap();
        assert_eq!(next.get("p1_L").unwrap(), 101.0);
        assert_eq!(next.get("p2_L").unwrap(), 100.0);
        assert_eq!(next.get("p6_L").unwrap(), 97.0);
        assert_eq!(next.get("stress_L").unwrap(), 1.0);
        assert_eq!(next.get("overstress_L").unwrap(), 1.0);
        assert_eq!(next.get("cs").unwrap(), 1.0);
    }

    #[test]
    fn false_negative_recurrence() {
        assert_eq!(running_average(0.0, 0.0, (0.5f64 - OK).max(0.0)), 0.5);
        assert_eq!(running_average(0.0, 0.0, (OK - 0.5f64).max(0.0)), 0.0);
        let (l, r) = alarm_flags(ALARM_NONE);
        let miss = (0.7 * (1.0 - l) + 0.7 * (1.0 - r)).min(1.0f64);
        assert_eq!(miss, 1.0);
        assert_eq!(alarm_flags(ALARM_BOTH), (1.0, 1.0));
        assert_eq!(alarm_flags(ALARM_RIGHT), (0.0, 1.0));
    }

    #[test]
    fn perfect_detector_has_no_errors() {
        let p = EngineParams::default();
        let sp = space(&p).unwrap();
        let env = EngineEnv::new(p.clone(), &sp).unwrap();
        for level in [0.0, 1.0] {
            let mut d = initial_state(&p, &sp).unwrap().update(&[("stress_L", level), ("ch_warning_L", level)]).unwrap();
            let mut rng = Seed(1).stream(0);
            for _ in 0..50 {
                d = env.sample(&d, &mut rng).unwrap().update(&[("stress_L", level), ("ch_warning_L", level)]).unwrap();
                assert_eq!(d.get("fn_L").unwrap(), 0.0);
                assert_eq!(d.get("fp_L").unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn controller_cools_for_five_steps() {
        let p = EngineParams::default();
        let c = configuration(&p).unwrap();
        let hot = c.with_data(c.data().update(&[("temp_L", 99.9)]).unwrap()).unwrap();
        let t = simulate(&hot, 8, &mut Seed(2).stream(0)).unwrap();
        let cool: Vec<f64> = t.states().map(|s| s.get("cool_L").unwrap()).collect();
        assert_eq!(&cool[..7], &[OFF, ON, ON, ON, ON, ON, OFF]);
    }
}
