//! Posterior of a two-component Gaussian mixture fitted to bimodal data
//! with the explicit velocity-space sampler.

use geomcmc::models::{synthesize_gmm, GaussianMixtureModel, MixtureRecipe, TargetModel};
use geomcmc::samplers::{run_chain, Method, SamplerSpec};

fn main() -> geomcmc::Result<()> {
    let recipe = MixtureRecipe::Bimodal;
    let data = synthesize_gmm(recipe, 500, 3)?;
    let model = GaussianMixtureModel::from_dataset(&data, 2)?;
    println!("true components (weight, mean, sd): {:?}", recipe.components());
    println!("sampling {} unconstrained parameters", model.dim());

    let spec = SamplerSpec::new(Method::Ermlmc, 0.3, 5, 1);
    let chain = run_chain(&model, &spec, 3000, 500)?;
    println!(
        "acceptance {:.3}, ESS (min, median, max) {}",
        chain.acceptance_rate, chain.ess
    );

    let mut weights = [0.0; 2];
    let mut means = [0.0; 2];
    let mut sds = [0.0; 2];
    for row in chain.samples.row_iter() {
        let p = model.unpack(&row.transpose());
        for k in 0..2 {
            weights[k] += p.weights[k];
            means[k] += p.means[k];
            sds[k] += p.variances[k].sqrt();
        }
    }
    let n = chain.kept() as f64;
    for k in 0..2 {
        println!(
            "component {k}: weight {:.3}  mean {:+.3}  sd {:.3}",
            weights[k] / n,
            means[k] / n,
            sds[k] / n
        );
    }
    Ok(())
}
