//! Three tanks in a row: a pump fills the first, an uncontrolled inflow feeds
//! the third, an outlet pump drains it, and water moves between neighbours by
//! gravity.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataspace::{Convex, DataSpace, DataState, GoalDistance, MaxOf, PenaltyRef, VarSpec};
use crate::engine::Configuration;
use crate::environment::{Environment, RandomStream};
use crate::error::{Error, Result};
use crate::process::{parse_program, Definitions, ProcRef};

pub const PIPE_AREA: f64 = 0.5;
pub const LOSS_12: f64 = 0.75;
pub const LOSS_23: f64 = 0.75;
pub const GRAVITY: f64 = 9.81;

/// How the uncontrolled inflow `q2` evolves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Scenario {
    /// Fresh Gaussian draw around `q_med` every step.
    Gaussian,
    /// Random walk with standard normal increments, kept in `[0, q_max]`.
    RandomWalk,
}

impl TryFrom<u8> for Scenario {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Scenario::Gaussian),
            2 => Ok(Scenario::RandomWalk),
            _ => Err(Error::config("scenario", format!("expected 1 or 2, got {v}"))),
        }
    }
}

impl From<Scenario> for u8 {
    fn from(s: Scenario) -> u8 {
        match s {
            Scenario::Gaussian => 1,
            Scenario::RandomWalk => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreeTanksParams {
    pub scenario: Scenario,
    pub l_min: f64,
    pub l_max: f64,
    pub l_goal: f64,
    pub delta_l: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub q_med: f64,
    /// Variance of the Gaussian inflow in the first scenario.
    pub delta_q: f64,
    pub dt: f64,
}

impl Default for ThreeTanksParams {
    fn default() -> Self {
        ThreeTanksParams {
            scenario: Scenario::Gaussian,
            l_min: 0.0,
            l_max: 20.0,
            l_goal: 10.0,
            delta_l: 0.5,
            q_max: 6.0,
            q_step: 1.2,
            q_med: 3.0,
            delta_q: 0.5,
            dt: 0.1,
        }
    }
}

impl ThreeTanksParams {
    pub fn check(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(field, msg));
        if !(self.l_min < self.l_goal && self.l_goal < self.l_max) {
            return bad("l_goal", "need l_min < l_goal < l_max");
        }
        if !(0.0 <= self.q_step && self.q_step < self.q_max) {
            return bad("q_step", "need 0 <= q_step < q_max");
        }
        if !(self.delta_l > 0.0) {
            return bad("delta_l", "must be positive");
        }
        if !(self.delta_q > 0.0) {
            return bad("delta_q", "must be positive");
        }
        if !(0.0..=self.q_max).contains(&self.q_med) {
            return bad("q_med", "must lie in [0, q_max]");
        }
        if !(self.dt > 0.0) {
            return bad("dt", "must be positive");
        }
        Ok(())
    }

    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn with_delta_l(mut self, delta_l: f64) -> Self {
        self.delta_l = delta_l;
        self
    }
}

pub const VARIABLES: [&str; 6] = ["q1", "q2", "q3", "l1", "l2", "l3"];

pub fn space(params: &ThreeTanksParams) -> Result<Arc<DataSpace>> {
    DataSpace::new(vec![
        VarSpec::continuous("q1", 0.0, params.q_max),
        VarSpec::continuous("q2", 0.0, params.q_max),
        VarSpec::continuous("q3", 0.0, params.q_max),
        VarSpec::continuous("l1", params.l_min, params.l_max),
        VarSpec::continuous("l2", params.l_min, params.l_max),
        VarSpec::continuous("l3", params.l_min, params.l_max),
    ])
}

/// All flows zero and every tank at `level`.
pub fn state_with_levels(space: &Arc<DataSpace>, level: f64) -> Result<DataState> {
    DataState::new(space.clone(), vec![0.0, 0.0, 0.0, level, level, level])
}

/// Flow from a tank at level `from` to its neighbour at level `to`; negative
/// when the water runs backwards.
pub fn pipe_flow(loss: f64, from: f64, to: f64) -> f64 {
    if from >= to {
        loss * PIPE_AREA * (2.0 * GRAVITY * (from - to)).sqrt()
    } else {
        -loss * PIPE_AREA * (2.0 * GRAVITY * (to - from)).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct ThreeTanksEnv {
    params: ThreeTanksParams,
    id: String,
}

impl ThreeTanksEnv {
    pub fn new(params: ThreeTanksParams) -> Result<Self> {
        params.check()?;
        let id = format!("three-tanks/scenario-{}", u8::from(params.scenario));
        Ok(ThreeTanksEnv { params, id })
    }

    /// A new inflow value for the current state.
    pub fn draw_inflow(&self, d: &DataState, rng: &mut RandomStream) -> f64 {
        let p = &self.params;
        let x = match p.scenario {
            Scenario::Gaussian => rng.normal(p.q_med, p.delta_q.sqrt()),
            Scenario::RandomWalk => d.value(1) + rng.standard_normal(),
        };
        x.clamp(0.0, p.q_max)
    }

    /// The deterministic part of one step, given the inflow `x`.
    pub fn advance(&self, d: &DataState, x: f64) -> Result<DataState> {
        let dt = self.params.dt;
        let (q1, q3) = (d.value(0), d.value(2));
        let (l1, l2, l3) = (d.value(3), d.value(4), d.value(5));
        let q12 = pipe_flow(LOSS_12, l1, l2);
        let q23 = pipe_flow(LOSS_23, l2, l3);
        let mut next = d.successor();
        next.set(1, x)?;
        next.set(3, l1 + dt * (q1 - q12))?;
        next.set(4, l2 + dt * (q12 - q23))?;
        next.set(5, l3 + dt * (x + q23 - q3))?;
        Ok(next)
    }
}

impl Environment for ThreeTanksEnv {
    fn id(&self) -> &str {
        &self.id
    }

    fn sample(&self, state: &DataState, rng: &mut RandomStream) -> Result<DataState> {
        let x = self.draw_inflow(state, rng);
        self.advance(state, x)
    }
}

/// Program text of the two pump controllers with dead band `delta_l`.
pub fn program_text(params: &ThreeTanksParams) -> String {
    let ThreeTanksParams {
        l_goal,
        delta_l,
        q_max,
        q_step,
        ..
    } = params;
    format!(
        "Pin := if [l1 > {l_goal:?} + {delta_l:?}] (max(0, q1 - {q_step:?}) -> q1).Pin\n\
         \x20      else if [l1 < {l_goal:?} - {delta_l:?}] (min({q_max:?}, q1 + {q_step:?}) -> q1).Pin\n\
         \x20      else √.Pin;\n\
         Pout := if [l3 > {l_goal:?} + {delta_l:?}] (min({q_max:?}, q3 + {q_step:?}) -> q3).Pout\n\
         \x20       else if [l3 < {l_goal:?} - {delta_l:?}] (max(0, q3 - {q_step:?}) -> q3).Pout\n\
         \x20       else √.Pout;\n\
         Pin | Pout\n"
    )
}

pub fn program(params: &ThreeTanksParams) -> Result<(ProcRef, Definitions)> {
    let prog = parse_program(&program_text(params))?;
    let main = prog.main.expect("program text has an entry term");
    Ok((main, prog.defs))
}

/// `|l_i - l_goal|` normalised by the largest possible deviation.
pub fn level_penalty(space: &DataSpace, params: &ThreeTanksParams, var: &str) -> Result<GoalDistance> {
    Ok(GoalDistance::new(space, var, params.l_goal, params.l_min, params.l_max)?.with_id(var))
}

/// `l1`, `l2`, `l3`, `max3` (worst level) and `mean12` (average of the first two).
pub fn penalties(space: &DataSpace, params: &ThreeTanksParams) -> Result<Vec<(String, PenaltyRef)>> {
    let l: Vec<PenaltyRef> = ["l1", "l2", "l3"]
        .iter()
        .map(|v| Ok(Arc::new(level_penalty(space, params, v)?) as PenaltyRef))
        .collect::<Result<_>>()?;
    let max3: PenaltyRef = Arc::new(MaxOf::new("max3", l.clone())?);
    let mean12: PenaltyRef = Arc::new(Convex::new("mean12", vec![(0.5, l[0].clone()), (0.5, l[1].clone())])?);
    Ok(vec![
        ("l1".into(), l[0].clone()),
        ("l2".into(), l[1].clone()),
        ("l3".into(), l[2].clone()),
        ("max3".into(), max3),
        ("mean12".into(), mean12),
    ])
}

/// `<P_Tanks, d, E_scenario>` with every tank at `level` and all flows zero.
pub fn configuration(params: &ThreeTanksParams, level: f64) -> Result<Configuration> {
    let space = space(params)?;
    let env = ThreeTanksEnv::new(params.clone())?;
    let (main, defs) = program(params)?;
    Configuration::new(main, state_with_levels(&space, level)?, Arc::new(env), Arc::new(defs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Seed;
    use crate::process::{pstep, validate};

    #[test]
    fn torricelli_flows() {
        assert_eq!(pipe_flow(LOSS_12, 7.0, 7.0), 0.0);
        let q = pipe_flow(LOSS_12, 12.0, 10.0);
        assert!((q - 0.75 * 0.5 * (2.0 * 9.81 * 2.0f64).sqrt()).abs() < 1e-12);
        assert!((q - 2.3491).abs() < 1e-4);
        assert_eq!(pipe_flow(LOSS_12, 10.0, 12.0), -q);
    }

    #[test]
    fn program_is_valid_and_acts_jointly() {
        let params = ThreeTanksParams::default();
        let sp = space(&params).unwrap();
        let (main, defs) = program(&params).unwrap();
        assert!(validate(&main, &defs, &sp).is_valid());

        let d = DataState::new(sp.clone(), vec![3.0, 0.0, 3.0, 12.0, 10.0, 8.0]).unwrap();
        let dist = pstep(&main, &d, &defs).unwrap();
        assert_eq!(dist.len(), 1);
        let after = dist.branches()[0].effect.apply(&d).unwrap();
        assert!((after.get("q1").unwrap() - 1.8).abs() < 1e-12);
        assert!((after.get("q3").unwrap() - 1.8).abs() < 1e-12);

        // dead band: no effect
        let d = DataState::new(sp, vec![3.0, 0.0, 3.0, 10.2, 10.0, 9.7]).unwrap();
        let dist = pstep(&main, &d, &defs).unwrap();
        assert!(dist.branches()[0].effect.is_empty());
    }

    #[test]
    fn levels_telescope_without_pumps_or_inflow() {
        let params = ThreeTanksParams::default();
        let env = ThreeTanksEnv::new(params.clone()).unwrap();
        let sp = space(&params).unwrap();
        let d = DataState::new(sp, vec![0.0, 0.0, 0.0, 14.0, 9.0, 3.0]).unwrap();
        let next = env.advance(&d, 0.0).unwrap();
        let sum = |s: &DataState| s.value(3) + s.value(4) + s.value(5);
        assert!((sum(&next) - sum(&d)).abs() < 1e-12);
    }

    #[test]
    fn first_step_mean_of_third_level() {
        let params = ThreeTanksParams::default();
        let env = ThreeTanksEnv::new(params.clone()).unwrap();
        let d0 = state_with_levels(&space(&params).unwrap(), 0.0).unwrap();
        let mut rng = Seed(5).stream(0);
        let n = 100_000;
        let mean = (0..n).map(|_| env.sample(&d0, &mut rng).unwrap().value(5)).sum::<f64>() / n as f64;
        assert!((mean - 0.3).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn inflow_stays_in_range() {
        let params = ThreeTanksParams::default().with_scenario(Scenario::RandomWalk);
        let env = ThreeTanksEnv::new(params.clone()).unwrap();
        let mut d = state_with_levels(&space(&params).unwrap(), 5.0).unwrap();
        let mut rng = Seed(1).stream(0);
        for _ in 0..1000 {
            d = env.sample(&d, &mut rng).unwrap();
            assert!((0.0..=6.0).contains(&d.value(1)));
        }
    }

    #[test]
    fn bad_params_rejected() {
        let p = ThreeTanksParams {
            l_goal: 25.0,
            ..Default::default()
        };
        assert!(matches!(p.check(), Err(Error::Config { .. })));
        let json = serde_json::json!({"scenario": 3});
        assert!(serde_json::from_value::<ThreeTanksParams>(json).is_err());
    }
}
