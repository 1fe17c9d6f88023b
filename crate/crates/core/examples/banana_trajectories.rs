//! One trajectory per integrator from the same start on the banana posterior.
//!
//! Prints the energy error, log-Jacobian and fixed-point work of each, then
//! the visited positions as CSV.

use geomcmc::integrators::{integrate, AuxKind, IntegratorConfig, Stepper};
use geomcmc::models::{synthesize_banana, BananaModel};
use nalgebra::DVector;

fn main() -> geomcmc::Result<()> {
    let data = synthesize_banana(100, 2024)?;
    let model = BananaModel::from_dataset(&data, 2.0, 1.0)?;
    let theta = DVector::from_vec(vec![0.6, 0.6]);
    let v = DVector::from_vec(vec![-0.5, 0.4]);
    let config = IntegratorConfig::new(0.05, 20);

    let steppers = [
        ("HMC", Stepper::leapfrog_unit_mass(2)),
        ("RMHMC", Stepper::GeneralizedLeapfrog),
        ("RMLMC", Stepper::Rmlmc),
        ("e-RMLMC", Stepper::Ermlmc),
    ];
    let mut paths = Vec::new();
    for (name, stepper) in &steppers {
        let start = stepper.evaluate(&model, &theta)?;
        // momentum steppers start from p = G v so every path has the same initial velocity
        let aux = match (stepper.aux_kind(), &start.riemann) {
            (AuxKind::Momentum, Some(r)) => &r.bundle.g * &v,
            _ => v.clone(),
        };
        let res = integrate(&model, &start, aux, &config, stepper, true);
        println!(
            "{name:8} energy error {:+.3e}  log|J| {:+.3e}  fp iterations {}  diverged {}",
            res.energy_error(),
            res.log_jacobian,
            res.fp_iters,
            res.diverged
        );
        paths.push((name, res.trace.unwrap_or_default()));
    }

    println!("\nmethod,step,theta1,theta2");
    for (name, path) in paths {
        for (i, p) in path.iter().enumerate() {
            println!("{name},{i},{:.6},{:.6}", p[0], p[1]);
        }
    }
    Ok(())
}
