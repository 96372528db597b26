//! Robustness of the engine against sawtooth attacks with short windows,
//! for three attack strengths (small scale).

use evometric::environment::Seed;
use evometric::metric::ObservationTimes;
use evometric::models::engine::EngineParams;
use evometric::models::{Model, ModelParams};
use evometric::robustness::{estimate_robustness, RobustnessSpec, UniformResample};

fn main() -> evometric::Result<()> {
    let eta1 = 0.1;
    for tf in [0.4, 0.6, 0.8] {
        let params = EngineParams::default().with_attack(format!("saw:L:{tf}:1000").parse()?);
        let model = Model::build(ModelParams::Engine(params))?;
        // windows [0, r] with r at most eta1 times the maximal length
        let sampler = UniformResample::on_ranges(vec![("AW_r".into(), 0.0, eta1 * 1000.0)])?.integers()?;
        let spec = RobustnessSpec::robustness(
            model.penalty("window")?,
            model.penalty("fn_L")?,
            (0, 0),
            eta1,
            4,
            ObservationTimes::range(0, 1000)?,
            50,
            4,
            Seed(7),
        );
        let report = estimate_robustness(&spec, model.configuration(), &sampler)?;
        println!("TF {tf}: xi(0) = {:.4}", report.xi_min());
    }
    Ok(())
}
