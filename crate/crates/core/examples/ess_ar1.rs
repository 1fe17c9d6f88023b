//! Effective sample size of AR(1) chains against the exact value
//! `B (1 − ρ) / (1 + ρ)`.

use geomcmc::diagnostics::ess_initial_monotone;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> geomcmc::Result<()> {
    let n = 100_000;
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for rho in [0.0, 0.5, 0.9, 0.99, -0.5] {
        let mut x = Vec::with_capacity(n);
        let mut prev: f64 = StandardNormal.sample(&mut rng);
        prev /= (1.0f64 - rho * rho).sqrt();
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = rho * prev + z;
            x.push(prev);
        }
        let ess = ess_initial_monotone(&x)?;
        let exact = (n as f64 * (1.0 - rho) / (1.0 + rho)).min(n as f64);
        println!(
            "rho {rho:+.2}: ESS {ess:9.0}  exact {exact:9.0}  relative error {:+.3}",
            ess / exact - 1.0
        );
    }
    Ok(())
}
