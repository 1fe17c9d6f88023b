//! All four samplers on a synthetic Bayesian logistic regression, printed
//! as a benchmark table.

use geomcmc::experiment::{format_table, BenchmarkRow};
use geomcmc::models::{synthesize_logreg, LogisticRegressionModel, TargetModel};
use geomcmc::samplers::{run_chain, Method, SamplerSpec};

fn main() -> geomcmc::Result<()> {
    let data = synthesize_logreg(250, 2, 7)?;
    let model = LogisticRegressionModel::from_dataset(&data, LogisticRegressionModel::DEFAULT_ALPHA)?;
    println!("{} observations, {} parameters", model.n_obs(), model.dim());

    let mut rows = Vec::new();
    for (i, method) in Method::ALL.into_iter().enumerate() {
        let (eps, steps) = match method {
            Method::Hmc => (0.05, 20),
            _ => (0.4, 4),
        };
        let spec = SamplerSpec::new(method, eps, steps, 100 + i as u64);
        let chain = run_chain(&model, &spec, 3000, 1000)?;
        let mean = chain.mean();
        println!("{:8} posterior mean {:.3?}", method.label(), mean.as_slice());
        rows.push(BenchmarkRow {
            data: "synthetic".into(),
            method,
            acceptance_rate: chain.acceptance_rate,
            seconds_per_iteration: chain.seconds_per_iteration,
            ess_min: chain.ess.min,
            ess_median: chain.ess.median,
            ess_max: chain.ess.max,
            min_ess_per_second: chain.ess.min_ess_per_second,
            note: None,
        });
    }
    println!();
    print!("{}", format_table(&rows));
    Ok(())
}
