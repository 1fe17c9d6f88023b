//! Metric, Christoffel symbols and connection terms of the banana
//! posterior at one point.

use geomcmc::geometry::{
    build_metric_bundle, christoffel_first, christoffel_second, omega_matrix, omega_tilde_matrix,
};
use geomcmc::models::{synthesize_banana, BananaModel, TargetModel};
use nalgebra::DVector;

fn main() -> geomcmc::Result<()> {
    let data = synthesize_banana(100, 2024)?;
    let model = BananaModel::from_dataset(&data, 2.0, 1.0)?;
    let theta = DVector::from_vec(vec![0.5, 0.7]);
    let v = DVector::from_vec(vec![1.0, -0.5]);

    let bundle = build_metric_bundle(&theta, &model)?;
    println!("θ = {:?}", theta.as_slice());
    println!("log p = {:.6}", model.log_density(&theta));
    println!("G ={}", bundle.g);
    println!("log det G = {:.6}", bundle.log_det);

    let first = christoffel_first(&bundle);
    let second = christoffel_second(&bundle);
    println!("Ω̃(v) ={}", omega_tilde_matrix(&first, &v));
    println!("Ω(v) ={}", omega_matrix(&second, &v));
    Ok(())
}
