//! Markov chains built from the integrators: auxiliary refresh, trajectory,
//! Metropolis–Hastings correction and per-iteration timing.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{summarize, EssReport};
use crate::error::{Error, Result};
use crate::geometry::MetricBundle;
use crate::integrators::{
    energy_at, hamiltonian_at, integrate, IntegratorConfig, PositionEval, Stepper,
    TrajectoryResult,
};
use crate::models::TargetModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hmc,
    Rmhmc,
    Rmlmc,
    Ermlmc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hmc, Method::Rmhmc, Method::Rmlmc, Method::Ermlmc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hmc => "hmc",
            Method::Rmhmc => "rmhmc",
            Method::Rmlmc => "rmlmc",
            Method::Ermlmc => "ermlmc",
        }
    }

    /// Label used in printed tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Hmc => "HMC",
            Method::Rmhmc => "RMHMC",
            Method::Rmlmc => "RMLMC",
            Method::Ermlmc => "e-RMLMC",
        }
    }

    pub fn uses_fixed_point(self) -> bool {
        matches!(self, Method::Rmhmc | Method::Rmlmc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "hmc" => Ok(Method::Hmc),
            "rmhmc" => Ok(Method::Rmhmc),
            "rmlmc" => Ok(Method::Rmlmc),
            "ermlmc" => Ok(Method::Ermlmc),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub method: Method,
    pub integrator: IntegratorConfig,
    /// Diagonal of the HMC mass matrix; unit mass when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_diag: Option<Vec<f64>>,
    pub seed: u64,
    /// Include the log-Jacobian in the acceptance ratio. Turning this off
    /// gives a deliberately biased sampler.
    #[serde(default = "default_true")]
    pub volume_correction: bool,
}

fn default_true() -> bool {
    true
}

impl SamplerSpec {
    pub fn new(method: Method, epsilon: f64, steps: usize, seed: u64) -> Self {
        Self {
            method,
            integrator: IntegratorConfig::new(epsilon, steps),
            mass_diag: None,
            seed,
            volume_correction: true,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.integrator.validate()?;
        if let Some(m) = &self.mass_diag {
            if self.method != Method::Hmc {
                return Err(Error::Config("mass_diag applies to hmc only".into()));
            }
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            if m.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::Config("mass_diag entries must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn stepper(&self, dim: usize) -> Stepper {
        match self.method {
            Method::Hmc => Stepper::Leapfrog {
                inv_mass: match &self.mass_diag {
                    Some(m) => DVector::from_iterator(dim, m.iter().map(|x| 1.0 / x)),
                    None => DVector::from_element(dim, 1.0),
                },
            },
            Method::Rmhmc => Stepper::GeneralizedLeapfrog,
            Method::Rmlmc => Stepper::Rmlmc,
            Method::Ermlmc => Stepper::Ermlmc,
        }
    }
}

fn standard_normal(rng: &mut ChaCha20Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// `p = L z` with `G = L Lᵀ`, so `p ~ N(0, G)`.
pub fn refresh_momentum(bundle: &MetricBundle, rng: &mut ChaCha20Rng) -> DVector<f64> {
    &bundle.chol * standard_normal(rng, bundle.dim())
}

/// `v = L⁻ᵀ z`, so `v ~ N(0, G⁻¹)`.
pub fn refresh_velocity(bundle: &MetricBundle, rng: &mut ChaCha20Rng) -> DVector<f64> {
    let z = standard_normal(rng, bundle.dim());
    bundle
        .chol
        .tr_solve_lower_triangular(&z)
        .expect("Cholesky factor has a positive diagonal")
}

/// `−log p(θ) + ½ log det G + ½ pᵀG⁻¹p`.
pub fn hamiltonian(log_density: f64, bundle: &MetricBundle, p: &DVector<f64>) -> f64 {
    hamiltonian_at(log_density, bundle, p)
}

/// `−log p(θ) − ½ log det G + ½ vᵀGv`.
pub fn energy(log_density: f64, bundle: &MetricBundle, v: &DVector<f64>) -> f64 {
    energy_at(log_density, bundle, v)
}

/// CPU time consumed by the calling thread, in seconds.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "clock_gettime(CLOCK_THREAD_CPUTIME_ID) failed");
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: DVector<f64>,
    pub iteration: u64,
    pub accept_count: u64,
    pub cumulative_seconds: f64,
    pub divergences: u64,
    pub fp_failures: u64,
    pub fp_iters: u64,
    pub negative_determinants: u64,
    rng: ChaCha20Rng,
    eval: PositionEval,
}

impl ChainState {
    pub fn new<M: TargetModel + ?Sized>(
        model: &M,
        stepper: &Stepper,
        theta: DVector<f64>,
        seed: u64,
    ) -> Result<Self> {
        let eval = stepper.evaluate(model, &theta).map_err(|e| match e {
            Error::Diverged => Error::Model("initial position has non-finite density".into()),
            other => other,
        })?;
        Ok(Self {
            theta,
            iteration: 0,
            accept_count: 0,
            cumulative_seconds: 0.0,
            divergences: 0,
            fp_failures: 0,
            fp_iters: 0,
            negative_determinants: 0,
            rng: ChaCha20Rng::seed_from_u64(seed),
            eval,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iteration == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.iteration as f64
        }
    }
}

/// What happened in one MH iteration.
#[derive(Debug, Clone)]
pub struct Transition {
    pub accepted: bool,
    pub log_ratio: f64,
    pub trajectory: TrajectoryResult,
    pub seconds: f64,
}

/// One Metropolis–Hastings iteration: refresh, integrate, accept or reject.
pub fn mh_step<M: TargetModel + ?Sized>(
    model: &M,
    chain: &mut ChainState,
    spec: &SamplerSpec,
    stepper: &Stepper,
    trace: bool,
) -> Transition {
    let t0 = thread_cpu_seconds();
    let aux = match stepper {
        Stepper::Leapfrog { inv_mass } => {
            let z = standard_normal(&mut chain.rng, inv_mass.len());
            z.component_div(&inv_mass.map(f64::sqrt))
        }
        Stepper::GeneralizedLeapfrog => {
            refresh_momentum(&chain.eval.riemann.as_ref().expect("metric").bundle, &mut chain.rng)
        }
        Stepper::Rmlmc | Stepper::Ermlmc => {
            refresh_velocity(&chain.eval.riemann.as_ref().expect("metric").bundle, &mut chain.rng)
        }
    };
    let trajectory = integrate(model, &chain.eval, aux, &spec.integrator, stepper, trace);
    let log_ratio = if spec.volume_correction {
        trajectory.log_accept_ratio()
    } else if trajectory.log_accept_ratio() == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        trajectory.start_energy - trajectory.end_energy
    };
    let u: f64 = chain.rng.random();
    let accepted = u.ln() < log_ratio;
    if accepted {
        chain.theta = trajectory.end.theta.clone();
        chain.eval = trajectory.end_eval.clone();
        chain.accept_count += 1;
    }
    chain.iteration += 1;
    chain.fp_iters += trajectory.fp_iters as u64;
    chain.fp_failures += (trajectory.fp_failures > 0) as u64;
    chain.divergences += trajectory.diverged as u64;
    chain.negative_determinants += trajectory.negative_determinant as u64;
    let seconds = thread_cpu_seconds() - t0;
    chain.cumulative_seconds += seconds;
    Transition {
        accepted,
        log_ratio,
        trajectory,
        seconds,
    }
}

/// A chain bound to its model and configuration.
pub struct Sampler<M> {
    model: M,
    spec: SamplerSpec,
    stepper: Stepper,
    state: ChainState,
}

impl<M: TargetModel> Sampler<M> {
    /// Starts at `theta0`, or at the model's default position.
    pub fn new(model: M, spec: SamplerSpec, theta0: Option<DVector<f64>>) -> Result<Self> {
        let dim = model.dim();
        spec.validate(dim)?;
        let theta = theta0.unwrap_or_else(|| model.initial_position());
        if theta.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: theta.len(),
            });
        }
        let stepper = spec.stepper(dim);
        let state = ChainState::new(&model, &stepper, theta, spec.seed)?;
        Ok(Self {
            model,
            spec,
            stepper,
            state,
        })
    }

    pub fn step(&mut self) -> Transition {
        self.step_traced(false)
    }

    pub fn step_traced(&mut self, trace: bool) -> Transition {
        mh_step(&self.model, &mut self.state, &self.spec, &self.stepper, trace)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

#[derive(Debug, Clone)]
pub struct ChainSummary {
    pub method: Method,
    /// Kept iterations × dimension.
    pub samples: DMatrix<f64>,
    pub acceptance_rate: f64,
    pub seconds_per_iteration: f64,
    pub total_seconds: f64,
    pub ess: EssReport,
    pub divergences: u64,
    pub fp_failures: u64,
    pub mean_fp_iters: f64,
    pub negative_determinants: u64,
}

impl ChainSummary {
    pub fn kept(&self) -> usize {
        self.samples.nrows()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.samples.row_mean().transpose()
    }
}

/// Receives the iteration index and the positions of its trajectory.
pub type TraceSink<'a> = &'a mut dyn FnMut(usize, &[DVector<f64>]);

/// Runs `n_iters` iterations, keeping everything after `burn_in`.
///
/// `trace`, when given, receives the positions of every trajectory.
pub fn run_chain_with<M: TargetModel + ?Sized>(
    model: &M,
    spec: &SamplerSpec,
    theta0: Option<DVector<f64>>,
    n_iters: usize,
    burn_in: usize,
    mut trace: Option<TraceSink<'_>>,
) -> Result<ChainSummary> {
    if n_iters <= burn_in {
        return Err(Error::Config(format!(
            "n_iters ({n_iters}) must exceed burn_in ({burn_in})"
        )));
    }
    let dim = model.dim();
    spec.validate(dim)?;
    let stepper = spec.stepper(dim);
    let theta = theta0.unwrap_or_else(|| model.initial_position());
    let mut chain = ChainState::new(model, &stepper, theta, spec.seed)?;

    let kept = n_iters - burn_in;
    let mut samples = DMatrix::zeros(kept, dim);
    let mut accepted = 0u64;
    let mut seconds = 0.0;
    let mut fp_iters = 0u64;
    let mut counters_at_burn_in = (0, 0, 0);
    for it in 0..n_iters {
        if it == burn_in {
            counters_at_burn_in = (chain.divergences, chain.fp_failures, chain.negative_determinants);
        }
        let tr = mh_step(model, &mut chain, spec, &stepper, trace.is_some());
        if let (Some(sink), Some(path)) = (trace.as_mut(), tr.trajectory.trace.as_ref()) {
            sink(it, path);
        }
        if it >= burn_in {
            samples.row_mut(it - burn_in).tr_copy_from(&chain.theta);
            accepted += tr.accepted as u64;
            seconds += tr.seconds;
            fp_iters += tr.trajectory.fp_iters as u64;
        }
    }
    let ess = summarize(&samples, seconds)?;
    Ok(ChainSummary {
        method: spec.method,
        acceptance_rate: accepted as f64 / kept as f64,
        seconds_per_iteration: seconds / kept as f64,
        total_seconds: seconds,
        ess,
        divergences: chain.divergences - counters_at_burn_in.0,
        fp_failures: chain.fp_failures - counters_at_burn_in.1,
        mean_fp_iters: fp_iters as f64 / kept as f64,
        negative_determinants: chain.negative_determinants - counters_at_burn_in.2,
        samples,
    })
}

pub fn run_chain<M: TargetModel + ?Sized>(
    model: &M,
    spec: &SamplerSpec,
    n_iters: usize,
    burn_in: usize,
) -> Result<ChainSummary> {
    run_chain_with(model, spec, None, n_iters, burn_in, None)
}

/// Bisection on `log ε` at fixed trajectory length `ε L ≈ length` until the
/// pilot acceptance rate is within `tolerance` of `target`.
///
/// Returns the chosen spec and its pilot acceptance rate.
pub fn tune_step_size<M: TargetModel + ?Sized>(
    model: &M,
    spec: &SamplerSpec,
    length: f64,
    target: f64,
    tolerance: f64,
    pilot_iters: usize,
    rounds: usize,
) -> Result<(SamplerSpec, f64)> {
    if !(0.0..1.0).contains(&target) || !(length > 0.0) {
        return Err(Error::Config(format!(
            "cannot tune to acceptance {target} at trajectory length {length}"
        )));
    }
    let with_eps = |eps: f64| {
        let mut s = spec.clone();
        s.integrator.steps = (length / eps).round().max(1.0) as usize;
        s.integrator.epsilon = length / s.integrator.steps as f64;
        s
    };
    let mut lo = (spec.integrator.epsilon * 1e-3).ln();
    let mut hi = length.ln();
    let mut best = (with_eps(spec.integrator.epsilon), f64::NAN);
    let mut log_eps = spec.integrator.epsilon.ln().clamp(lo, hi);
    for _ in 0..rounds.max(1) {
        let candidate = with_eps(log_eps.exp());
        let ap = run_chain(model, &candidate, pilot_iters + 1, 1)?.acceptance_rate;
        let closer = best.1.is_nan() || (ap - target).abs() < (best.1 - target).abs();
        if closer {
            best = (candidate, ap);
        }
        if (ap - target).abs() <= tolerance {
            break;
        }
        if ap > target {
            lo = log_eps;
        } else {
            hi = log_eps;
        }
        log_eps = 0.5 * (lo + hi);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_metric_bundle;
    use crate::models::{BananaModel, IsotropicGaussian};

    #[test]
    fn method_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("nuts".parse::<Method>().is_err());
    }

    #[test]
    fn unit_metric_energy_is_minus_log_density() {
        let m = IsotropicGaussian { dim: 2 };
        let theta = DVector::from_vec(vec![0.5, -1.0]);
        let b = build_metric_bundle(&theta, &m).unwrap();
        let h = hamiltonian(m.log_density(&theta), &b, &DVector::zeros(2));
        assert!((h - 0.625).abs() < 1e-15);
    }

    #[test]
    fn energy_hamiltonian_identity_on_banana() {
        let m = BananaModel::new(&[0.3, 1.2, 2.2], 2.0, 1.0).unwrap();
        for theta in [[0.0, 0.0], [0.4, -1.1], [-2.0, 0.7]] {
            let theta = DVector::from_row_slice(&theta);
            let b = build_metric_bundle(&theta, &m).unwrap();
            let v = DVector::from_vec(vec![0.3, -0.8]);
            let lp = m.log_density(&theta);
            let lhs = energy(lp, &b, &v);
            let rhs = hamiltonian(lp, &b, &(&b.g * &v)) - b.log_det;
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn velocity_refresh_covariance() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let b = MetricBundle::from_parts(
            DVector::zeros(2),
            g,
            crate::geometry::Tensor3::zeros(2),
        )
        .unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let n = 100_000;
        let mut s = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            let v = refresh_velocity(&b, &mut rng);
            s += &v * v.transpose();
        }
        s /= n as f64;
        // var of a sample second moment of N(0, σ²) is 2σ⁴/n
        assert!((s[(0, 0)] - 0.25).abs() < 3.0 * (2.0 * 0.0625 / n as f64).sqrt());
        assert!((s[(1, 1)] - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
        assert!(s[(0, 1)].abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn velocity_times_metric_is_momentum_draw() {
        let m = BananaModel::new(&[1.0; 10], 2.0, 1.0).unwrap();
        let b = build_metric_bundle(&DVector::from_vec(vec![0.2, 0.9]), &m).unwrap();
        let p = refresh_momentum(&b, &mut ChaCha20Rng::seed_from_u64(9));
        let v = refresh_velocity(&b, &mut ChaCha20Rng::seed_from_u64(9));
        assert!((&b.g * v - p).amax() < 1e-12);
    }

    #[test]
    fn one_kept_sample_has_unit_ess() {
        let m = IsotropicGaussian { dim: 2 };
        let s = run_chain(&m, &SamplerSpec::new(Method::Hmc, 0.2, 5, 1), 11, 10).unwrap();
        assert_eq!(s.kept(), 1);
        assert_eq!(s.ess.per_dimension, vec![1.0, 1.0]);
    }

    #[test]
    fn same_seed_same_chain() {
        let m = BananaModel::new(&[1.0, 0.5, 2.0], 2.0, 1.0).unwrap();
        for method in Method::ALL {
            let spec = SamplerSpec::new(method, 0.1, 5, 42);
            let a = run_chain(&m, &spec, 50, 10).unwrap();
            let b = run_chain(&m, &spec, 50, 10).unwrap();
            assert_eq!(a.samples, b.samples, "{method}");
        }
    }

    #[test]
    fn burn_in_must_be_smaller() {
        let m = IsotropicGaussian { dim: 1 };
        assert!(run_chain(&m, &SamplerSpec::new(Method::Hmc, 0.1, 1, 0), 5, 5).is_err());
    }

    #[test]
    fn mass_matrix_only_for_hmc() {
        let mut spec = SamplerSpec::new(Method::Rmhmc, 0.1, 1, 0);
        spec.mass_diag = Some(vec![1.0]);
        assert!(spec.validate(1).is_err());
        spec.method = Method::Hmc;
        assert!(spec.validate(1).is_ok());
        assert!(spec.validate(2).is_err());
    }

    #[test]
    fn tiny_step_accepts_everything() {
        let m = BananaModel::new(&[1.0, 0.5, 2.0], 2.0, 1.0).unwrap();
        for method in Method::ALL {
            let s = run_chain(&m, &SamplerSpec::new(method, 1e-4, 3, 5), 40, 0).unwrap();
            assert_eq!(s.acceptance_rate, 1.0, "{method}");
        }
    }
}
