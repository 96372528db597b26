//! Average stress of the left engine, with and without attacks.

use evometric::engine::estimate;
use evometric::environment::Seed;
use evometric::models::engine::{configuration, EngineParams};

fn main() -> evometric::Result<()> {
    let k = 3000;
    for attack in [None, Some("act:L:1.8"), Some("sen:L:0.4"), Some("saw:L:0.4:1000:500:1500")] {
        let mut params = EngineParams::default();
        if let Some(a) = attack {
            params = params.with_attack(a.parse()?);
        }
        let c = configuration(&params)?;
        let seq = estimate(&c, k, 100, Seed(5))?;
        let mean = |var: &str, t: usize| -> evometric::Result<f64> {
            let i = c.space().require(var)?;
            Ok(seq.column(t, i).iter().sum::<f64>() / seq.runs() as f64)
        };
        println!(
            "{:<22} stress {:.3}  fn {:.3}  fp {:.3}",
            attack.unwrap_or("genuine"),
            mean("stress_L", k)?,
            mean("fn_L", k)?,
            mean("fp_L", k)?
        );
    }
    Ok(())
}
