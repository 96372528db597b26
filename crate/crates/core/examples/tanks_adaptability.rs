//! Adaptability of the tanks from the steady state: how close perturbed starts
//! stay to the unperturbed one after a while.

use evometric::environment::Seed;
use evometric::metric::ObservationTimes;
use evometric::models::three_tanks::ThreeTanksParams;
use evometric::models::{Model, ModelParams};
use evometric::robustness::{estimate_robustness, RobustnessSpec, UniformResample};

fn main() -> evometric::Result<()> {
    let model = Model::build(ModelParams::ThreeTanks(ThreeTanksParams::default()))?.with_preset("ds")?;
    let c = model.configuration();
    let vars: Vec<&str> = c.space().names().collect();
    let sampler = UniformResample::over_domains(c.space(), &vars)?;

    let spec = RobustnessSpec::adaptability(model.penalty("l3")?, 0.3, 20, ObservationTimes::range(0, 150)?, 200, 5, Seed(1));
    let report = estimate_robustness(&spec, c, &sampler)?;
    println!("accepted {} of {} candidate starts", report.accepted, report.attempts);
    for tau in [0, 10, 30, 50, 100] {
        println!("xi({tau:>3}) = {:.4}", report.xi_at(tau).unwrap());
    }
    println!("{}", report.verdict(50, 0.1)?.label);
    Ok(())
}
