//! A model built from scratch: a thermostat in a room that leaks heat, with a
//! penalty for straying from 20 degrees. Two hysteresis settings are compared.

use std::sync::Arc;

use evometric::dataspace::{DataSpace, DataState, GoalDistance, PenaltyRef, VarSpec};
use evometric::engine::Configuration;
use evometric::environment::{FnEnvironment, Seed};
use evometric::metric::{distance, DistanceSpec, ObservationTimes, SeedPair};
use evometric::process::{parse_program, Process};

fn thermostat(band: f64) -> evometric::Result<Configuration> {
    let program = parse_program(&format!(
        "T := if [temp < {lo}] (1 -> heat).T else if [temp > {hi}] (0 -> heat).T else √.T;",
        lo = 20.0 - band,
        hi = 20.0 + band,
    ))?;
    let space = DataSpace::new(vec![VarSpec::continuous("temp", 0.0, 40.0), VarSpec::finite("heat", &[0.0, 1.0])])?;
    let room = FnEnvironment::new("room", |d: &DataState, rng: &mut evometric::environment::RandomStream| {
        let temp = d.get("temp")?;
        let heat = d.get("heat")?;
        let next = temp + 0.8 * heat - 0.05 * (temp - 10.0) + rng.normal(0.0, 0.2);
        d.update(&[("temp", next)])
    });
    let d0 = DataState::from_pairs(space, &[("temp", 15.0), ("heat", 0.0)])?;
    Configuration::new(Process::call("T"), d0, Arc::new(room), Arc::new(program.defs))
}

fn main() -> evometric::Result<()> {
    let tight = thermostat(0.5)?;
    let loose = thermostat(2.0)?;
    let rho: PenaltyRef = Arc::new(GoalDistance::new(tight.space(), "temp", 20.0, 0.0, 40.0)?);
    let spec = DistanceSpec::new(rho, ObservationTimes::range(0, 200)?, 500, 2, SeedPair::derived(Seed(0)));
    println!("m(tight, loose) = {:.4}", distance(&tight, &loose, &spec)?.value);
    println!("m(loose, tight) = {:.4}", distance(&loose, &tight, &spec)?.value);
    Ok(())
}
