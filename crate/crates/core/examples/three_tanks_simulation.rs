//! One trajectory of the three-tanks system, then per-step means over many runs.

use evometric::engine::{estimate, simulate};
use evometric::environment::Seed;
use evometric::models::three_tanks::{configuration, ThreeTanksParams};

fn main() -> evometric::Result<()> {
    let params = ThreeTanksParams::default();
    let c = configuration(&params, 0.0)?;

    let run = simulate(&c, 150, &mut Seed(42).stream(0))?;
    println!("step      l1      l2      l3");
    for (t, d) in run.states().enumerate().step_by(25) {
        println!("{t:>4} {:>7.3} {:>7.3} {:>7.3}", d.get("l1")?, d.get("l2")?, d.get("l3")?);
    }

    let seq = estimate(&c, 150, 1000, Seed(42))?;
    let l3 = c.space().require("l3")?;
    let mean = |t: usize| seq.column(t, l3).iter().sum::<f64>() / seq.runs() as f64;
    println!("mean l3 over {} runs: step 50 {:.3}, step 150 {:.3}", seq.runs(), mean(50), mean(150));
    Ok(())
}
