//! Evolution metric between the two inflow scenarios, in both directions.

use std::sync::Arc;

use evometric::dataspace::PenaltyRef;
use evometric::environment::Seed;
use evometric::metric::{distance, DistanceSpec, ObservationTimes, SeedPair};
use evometric::models::three_tanks::{configuration, level_penalty, Scenario, ThreeTanksParams};

fn main() -> evometric::Result<()> {
    let gaussian = ThreeTanksParams::default();
    let walk = gaussian.clone().with_scenario(Scenario::RandomWalk);
    let c1 = configuration(&gaussian, 0.0)?;
    let c2 = configuration(&walk, 0.0)?;
    let rho: PenaltyRef = Arc::new(level_penalty(c1.space(), &gaussian, "l3")?);

    let spec = DistanceSpec::new(rho, ObservationTimes::range(0, 150)?, 1000, 5, SeedPair::derived(Seed(1)));
    let forward = distance(&c1, &c2, &spec)?;
    let backward = distance(&c2, &c1, &spec)?;
    println!("m(gaussian, random walk) = {:.4} at tau = {}", forward.value, forward.argmax);
    println!("m(random walk, gaussian) = {:.4} at tau = {}", backward.value, backward.argmax);
    Ok(())
}
