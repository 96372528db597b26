//! Two controllers that differ only in their dead band, compared on every level.

use evometric::environment::Seed;
use evometric::metric::{distance, DistanceSpec, ObservationTimes, SeedPair};
use evometric::models::three_tanks::ThreeTanksParams;
use evometric::models::{Model, ModelParams};

fn main() -> evometric::Result<()> {
    let wide = Model::build(ModelParams::ThreeTanks(ThreeTanksParams::default().with_delta_l(0.7)))?;
    let narrow = Model::build(ModelParams::ThreeTanks(ThreeTanksParams::default().with_delta_l(0.3)))?;
    println!("controller with dead band 0.7:");
    print!("{}", evometric::models::three_tanks::program_text(&ThreeTanksParams::default().with_delta_l(0.7)));

    for penalty in ["l1", "l2", "l3", "max3"] {
        let spec = DistanceSpec::new(wide.penalty(penalty)?, ObservationTimes::range(0, 150)?, 500, 5, SeedPair::derived(Seed(3)));
        let a = distance(wide.configuration(), narrow.configuration(), &spec)?;
        let b = distance(narrow.configuration(), wide.configuration(), &spec)?;
        println!("{penalty:>5}: m(wide, narrow) = {:.4}   m(narrow, wide) = {:.4}", a.value, b.value);
    }
    Ok(())
}
