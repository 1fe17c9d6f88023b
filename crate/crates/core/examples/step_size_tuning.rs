//! Tunes each sampler's step size on the banana posterior to a target
//! acceptance rate at a fixed trajectory length.

use geomcmc::models::{synthesize_banana, BananaModel};
use geomcmc::samplers::{run_chain, tune_step_size, Method, SamplerSpec};

fn main() -> geomcmc::Result<()> {
    let data = synthesize_banana(100, 2024)?;
    let model = BananaModel::from_dataset(&data, 2.0, 1.0)?;
    for method in Method::ALL {
        let spec = SamplerSpec::new(method, 0.1, 10, 3);
        let (tuned, pilot) = tune_step_size(&model, &spec, 2.0, 0.75, 0.03, 500, 12)?;
        let chain = run_chain(&model, &tuned, 3000, 500)?;
        println!(
            "{:8} eps {:.4}  L {:3}  pilot AP {:.3}  AP {:.3}  min ESS/s {:.0}",
            method.label(),
            tuned.integrator.epsilon,
            tuned.integrator.steps,
            pilot,
            chain.acceptance_rate,
            chain.ess.min_ess_per_second
        );
    }
    Ok(())
}
