//! Standard errors of the level means and z-scores against a larger baseline.

use evometric::engine::estimate;
use evometric::environment::Seed;
use evometric::models::three_tanks::{configuration, Scenario, ThreeTanksParams};
use evometric::stats::{error_analysis, ReferenceMeans};

fn main() -> evometric::Result<()> {
    let params = ThreeTanksParams::default().with_scenario(Scenario::RandomWalk);
    let c = configuration(&params, 0.0)?;
    let vars = ["l1", "l2", "l3"];

    let baseline = estimate(&c, 150, 10_000, Seed(900))?;
    let reference = ReferenceMeans::from_sequence(&baseline, &vars, "N=10000 seed 900")?;
    let seq = estimate(&c, 150, 1000, Seed(1))?;
    let report = error_analysis(&seq, &vars, &reference)?;

    for v in vars {
        let rows = report.rows(v).unwrap();
        let last = rows.last().unwrap();
        println!(
            "{v}: step {} mean {:.3} +- {:.3}, |z| <= 1.96 at {:.0}% of steps",
            last.step,
            last.mean,
            last.stderr,
            100.0 * report.fraction_within(v, 1.96).unwrap()
        );
    }
    Ok(())
}
