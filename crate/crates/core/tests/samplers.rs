mod common;

use common::*;
use geomcmc::models::{IsotropicGaussian, TargetModel};
use geomcmc::samplers::{run_chain, run_chain_with, tune_step_size, Method, Sampler, SamplerSpec};
use geomcmc::Error;
use nalgebra::DVector;

#[test]
fn acceptance_falls_as_step_size_grows() {
    let model = banana();
    for method in Method::ALL {
        let rates: Vec<f64> = [0.05, 0.2, 0.5]
            .iter()
            .map(|&eps| {
                let spec = SamplerSpec::new(method, eps, (1.0 / eps) as usize, 3);
                run_chain(&model, &spec, 400, 50).unwrap().acceptance_rate
            })
            .collect();
        assert!(rates[0] > 0.9, "{method}: {rates:?}");
        assert!(rates[0] >= rates[1] - 0.02 && rates[1] >= rates[2] - 0.02, "{method}: {rates:?}");
        assert!(rates[2] < rates[0], "{method}: {rates:?}");
    }
}

#[test]
fn tuning_reaches_the_target() {
    let model = banana();
    for method in [Method::Hmc, Method::Ermlmc] {
        let spec = SamplerSpec::new(method, 0.5, 2, 11);
        let (tuned, ap) = tune_step_size(&model, &spec, 3.0, 0.75, 0.05, 300, 12).unwrap();
        assert!((ap - 0.75).abs() <= 0.05, "{method}: ap {ap}");
        let l = tuned.integrator.epsilon * tuned.integrator.steps as f64;
        assert!((l - 3.0).abs() < 1e-12);
    }
    let spec = SamplerSpec::new(Method::Hmc, 0.5, 2, 11);
    assert!(matches!(tune_step_size(&model, &spec, 1.0, 1.5, 0.05, 10, 2), Err(Error::Config(_))));
}

#[test]
fn chains_are_reproducible_by_seed() {
    let model = banana();
    let spec = SamplerSpec::new(Method::Rmlmc, 0.1, 5, 21);
    let a = run_chain(&model, &spec, 100, 10).unwrap();
    let b = run_chain(&model, &spec, 100, 10).unwrap();
    assert_eq!(a.samples, b.samples);
    let c = run_chain(&model, &SamplerSpec { seed: 22, ..spec }, 100, 10).unwrap();
    assert_ne!(a.samples, c.samples);
}

#[test]
fn burn_in_is_dropped_and_counters_match() {
    let model = IsotropicGaussian { dim: 3 };
    let spec = SamplerSpec::new(Method::Ermlmc, 0.3, 3, 5);
    let summary = run_chain(&model, &spec, 250, 50).unwrap();
    assert_eq!(summary.kept(), 200);
    assert_eq!(summary.samples.ncols(), 3);
    assert!(summary.acceptance_rate > 0.5);
    assert!(summary.seconds_per_iteration > 0.0);
    assert_eq!(summary.ess.per_dimension.len(), 3);
    assert!(matches!(run_chain(&model, &spec, 50, 50), Err(Error::Config(_))));
}

#[test]
fn sampler_struct_matches_run_chain() {
    let model = banana();
    let spec = SamplerSpec::new(Method::Rmhmc, 0.1, 5, 8);
    let summary = run_chain(&model, &spec, 30, 1).unwrap();
    let mut s = Sampler::new(&model, spec, None).unwrap();
    let mut last = DVector::zeros(2);
    for it in 0..30 {
        let t = s.step();
        assert!(t.seconds >= 0.0);
        if it >= 1 {
            last = s.state().theta.clone();
            assert_eq!(summary.samples.row(it - 1).transpose(), last);
        }
    }
    assert_eq!(s.state().iteration, 30);
    assert_eq!(last, summary.samples.row(28).transpose());
}

#[test]
fn trace_callback_sees_every_trajectory() {
    let model = banana();
    let spec = SamplerSpec::new(Method::Hmc, 0.1, 6, 1);
    let mut calls = 0;
    let mut sink = |_: usize, path: &[DVector<f64>]| {
        calls += 1;
        assert!(path.len() <= 7);
    };
    run_chain_with(&model, &spec, None, 40, 10, Some(&mut sink)).unwrap();
    assert_eq!(calls, 40);
}

#[test]
fn invalid_specs_are_rejected() {
    let model = banana();
    let mut spec = SamplerSpec::new(Method::Rmhmc, 0.1, 5, 0);
    spec.mass_diag = Some(vec![1.0, 1.0]);
    assert!(matches!(run_chain(&model, &spec, 10, 1), Err(Error::Config(_))));
    let mut spec = SamplerSpec::new(Method::Hmc, 0.1, 5, 0);
    spec.mass_diag = Some(vec![1.0]);
    assert!(matches!(run_chain(&model, &spec, 10, 1), Err(Error::DimensionMismatch { .. })));
    let spec = SamplerSpec::new(Method::Hmc, -0.1, 5, 0);
    assert!(matches!(run_chain(&model, &spec, 10, 1), Err(Error::Config(_))));
}

#[test]
fn hmc_mass_matrix_targets_the_same_distribution() {
    let model = IsotropicGaussian { dim: 2 };
    let mut spec = SamplerSpec::new(Method::Hmc, 0.4, 4, 9);
    spec.mass_diag = Some(vec![4.0, 0.5]);
    let summary = run_chain(&model, &spec, 6000, 500).unwrap();
    for j in 0..2 {
        let col: Vec<f64> = summary.samples.column(j).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 5.0 * batch_means_se(&col, 20), "mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "var {var}");
    }
    assert_eq!(model.dim(), 2);
}
