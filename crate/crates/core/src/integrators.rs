//! Numerical integrators for the four samplers.
//!
//! | stepper                | auxiliary | implicit solves         | volume preserving |
//! |------------------------|-----------|-------------------------|-------------------|
//! | `Leapfrog`             | momentum  | none                    | yes               |
//! | `GeneralizedLeapfrog`  | momentum  | momentum and position   | yes               |
//! | `Rmlmc`                | velocity  | first velocity half-step| no                |
//! | `Ermlmc`               | velocity  | none (two linear solves)| no                |
//!
//! The non-volume-preserving steppers report the log absolute Jacobian
//! determinant of each step, which the sampler adds to the acceptance ratio.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    build_metric_bundle, christoffel_first, christoffel_second_from_first, eta_vector,
    nu_vector, omega_matrix, omega_tilde_matrix, ChristoffelFirst, ChristoffelSecond,
    MetricBundle, MetricFactor,
};
use crate::models::TargetModel;

/// Energy change beyond which a trajectory is abandoned.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    Momentum,
    Velocity,
}

/// A point in phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub theta: DVector<f64>,
    pub aux: DVector<f64>,
    pub kind: AuxKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub epsilon: f64,
    pub steps: usize,
    /// Target sup-norm accuracy of each fixed-point solve.
    pub fp_tol: f64,
    pub fp_max: usize,
    /// Run exactly this many fixed-point iterations instead of testing for
    /// convergence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp_fixed: Option<usize>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            steps: 10,
            fp_tol: 1e-10,
            fp_max: 100,
            fp_fixed: None,
        }
    }
}

impl IntegratorConfig {
    pub fn new(epsilon: f64, steps: usize) -> Self {
        Self {
            epsilon,
            steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.epsilon)));
        }
        if self.steps == 0 {
            return Err(Error::Config("need at least one leapfrog step".into()));
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::Config(format!("fp_tol must be positive, got {}", self.fp_tol)));
        }
        if self.fp_max == 0 || self.fp_fixed == Some(0) {
            return Err(Error::Config("need at least one fixed-point iteration".into()));
        }
        Ok(())
    }
}

/// How much geometry a stepper needs at each position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GeometryLevel {
    GradientOnly,
    Metric,
    FirstKind,
    SecondKind,
}

/// Metric-dependent quantities at one position.
#[derive(Debug, Clone)]
pub struct RiemannEval {
    pub bundle: MetricBundle,
    /// `∇φ = −∇log p + ½ ∇log det G`.
    pub grad_phi: DVector<f64>,
    pub first: Option<ChristoffelFirst>,
    pub second: Option<ChristoffelSecond>,
}

/// Model evaluations cached at one position.
#[derive(Debug, Clone)]
pub struct PositionEval {
    pub theta: DVector<f64>,
    pub log_density: f64,
    pub grad_log_density: DVector<f64>,
    pub riemann: Option<RiemannEval>,
}

impl PositionEval {
    pub fn new<M: TargetModel + ?Sized>(
        model: &M,
        theta: &DVector<f64>,
        level: GeometryLevel,
    ) -> Result<Self> {
        if theta.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged);
        }
        let (log_density, grad_log_density) = model.log_density_and_grad(theta);
        if !log_density.is_finite() || grad_log_density.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged);
        }
        let riemann = if level == GeometryLevel::GradientOnly {
            None
        } else {
            let bundle = build_metric_bundle(theta, model)?;
            let grad_phi = bundle.half_grad_log_det() - &grad_log_density;
            let first = (level >= GeometryLevel::FirstKind).then(|| christoffel_first(&bundle));
            let second = (level >= GeometryLevel::SecondKind)
                .then(|| christoffel_second_from_first(&bundle, first.as_ref().expect("first kind")));
            Some(RiemannEval {
                bundle,
                grad_phi,
                first,
                second,
            })
        };
        Ok(Self {
            theta: theta.clone(),
            log_density,
            grad_log_density,
            riemann,
        })
    }

    fn riemann(&self) -> &RiemannEval {
        self.riemann
            .as_ref()
            .expect("stepper requires metric geometry at this position")
    }
}

/// Result of one integrator step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub end: PositionEval,
    pub aux: DVector<f64>,
    /// `log |det ∂(θ', aux') / ∂(θ, aux)|`; zero for volume-preserving steppers.
    pub log_jacobian: f64,
    pub fp_iters: usize,
    pub fp_converged: bool,
    /// Set when the signed Jacobian determinant of the step is negative.
    pub negative_determinant: bool,
}

#[derive(Debug, Clone, Copy)]
enum FixedPointRule {
    Tolerance { tol: f64, max: usize },
    Count(usize),
}

impl FixedPointRule {
    fn from_config(config: &IntegratorConfig) -> Self {
        match config.fp_fixed {
            Some(n) => FixedPointRule::Count(n),
            None => FixedPointRule::Tolerance {
                tol: config.fp_tol,
                max: config.fp_max,
            },
        }
    }
}

struct FixedPoint {
    value: DVector<f64>,
    iters: usize,
    converged: bool,
}

/// Successive substitution `x ← f(x)` from `init`.
///
/// In tolerance mode the iteration stops once the estimated distance to the
/// fixed point drops below `tol`.
fn fixed_point(
    init: DVector<f64>,
    rule: FixedPointRule,
    mut f: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
) -> Result<FixedPoint> {
    let mut x = init;
    let (tol, max) = match rule {
        FixedPointRule::Tolerance { tol, max } => (Some(tol), max),
        FixedPointRule::Count(n) => (None, n),
    };
    let mut prev_change: Option<f64> = None;
    for iter in 1..=max {
        let next = f(&x)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged);
        }
        let change = (&next - &x).amax();
        x = next;
        // distance to the fixed point is about change·ρ/(1−ρ) for contraction rate ρ
        let error = match prev_change {
            Some(prev) if prev > 0.0 && change < prev => {
                let rate = change / prev;
                change * (rate / (1.0 - rate)).max(1.0)
            }
            _ => change,
        };
        prev_change = Some(change);
        if let Some(tol) = tol {
            if error < tol {
                return Ok(FixedPoint {
                    value: x,
                    iters: iter,
                    converged: true,
                });
            }
        }
    }
    Ok(FixedPoint {
        value: x,
        iters: max,
        converged: tol.is_none(),
    })
}

/// `(log |det A|, det A < 0)` via LU.
fn log_abs_det(a: DMatrix<f64>) -> Result<(f64, bool)> {
    let lu = a.lu();
    let mut log = 0.0;
    let mut negative = lu.p().determinant::<f64>() < 0.0;
    for d in lu.u().diagonal().iter() {
        if *d == 0.0 || !d.is_finite() {
            return Err(Error::SingularUpdate);
        }
        log += d.abs().ln();
        negative ^= *d < 0.0;
    }
    Ok((log, negative))
}

fn check_finite(v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged)
    }
}

/// Standard leapfrog for `H = −log p(θ) + ½ pᵀ M⁻¹ p` with diagonal `M`.
pub fn leapfrog_step<M: TargetModel + ?Sized>(
    model: &M,
    start: &PositionEval,
    p: &DVector<f64>,
    epsilon: f64,
    inv_mass: &DVector<f64>,
) -> Result<StepOutput> {
    let half = p + &start.grad_log_density * (0.5 * epsilon);
    let theta = &start.theta + half.component_mul(inv_mass) * epsilon;
    check_finite(&theta)?;
    let end = PositionEval::new(model, &theta, GeometryLevel::GradientOnly)?;
    let p_new = half + &end.grad_log_density * (0.5 * epsilon);
    check_finite(&p_new)?;
    Ok(StepOutput {
        end,
        aux: p_new,
        log_jacobian: 0.0,
        fp_iters: 0,
        fp_converged: true,
        negative_determinant: false,
    })
}

/// Generalized leapfrog for the Riemannian Hamiltonian.
///
/// The momentum half-step and the position update are implicit and solved
/// by fixed-point iteration; the final momentum half-step is explicit.
/// `start` must carry at least [`GeometryLevel::Metric`].
pub fn generalized_leapfrog_step<M: TargetModel + ?Sized>(
    model: &M,
    start: &PositionEval,
    p: &DVector<f64>,
    config: &IntegratorConfig,
) -> Result<StepOutput> {
    let eps = config.epsilon;
    let rule = FixedPointRule::from_config(config);
    let here = start.riemann();

    let p_half = fixed_point(p.clone(), rule, |ph| {
        Ok(p - (&here.grad_phi - nu_vector(&here.bundle, ph) * 0.5) * (0.5 * eps))
    })?;
    let p_h = p_half.value;

    let v_here = &here.bundle.g_inv * &p_h;
    let predictor = &start.theta + &v_here * eps;
    let theta_fp = fixed_point(predictor, rule, |t| {
        let factor = MetricFactor::new(model.metric(t))?;
        Ok(&start.theta + (&v_here + factor.solve(&p_h)) * (0.5 * eps))
    })?;

    let end = PositionEval::new(model, &theta_fp.value, GeometryLevel::Metric)?;
    let there = end.riemann();
    let p_new = &p_h - (&there.grad_phi - nu_vector(&there.bundle, &p_h) * 0.5) * (0.5 * eps);
    check_finite(&p_new)?;
    Ok(StepOutput {
        aux: p_new,
        log_jacobian: 0.0,
        fp_iters: p_half.iters + theta_fp.iters,
        fp_converged: p_half.converged && theta_fp.converged,
        negative_determinant: false,
        end,
    })
}

/// Semi-explicit velocity-space step: implicit first velocity half-step,
/// explicit position update and second half-step.
///
/// `start` must carry [`GeometryLevel::SecondKind`].
pub fn rmlmc_step<M: TargetModel + ?Sized>(
    model: &M,
    start: &PositionEval,
    v: &DVector<f64>,
    config: &IntegratorConfig,
) -> Result<StepOutput> {
    let eps = config.epsilon;
    let d = v.len();
    let here = start.riemann();
    let gamma = here.second.as_ref().expect("second-kind symbols");
    let force = &here.bundle.g_inv * &here.grad_phi;

    let v_half = fixed_point(v.clone(), FixedPointRule::from_config(config), |w| {
        Ok(v - (eta_vector(gamma, w) + &force) * (0.5 * eps))
    })?;
    let v_h = v_half.value;

    let theta = &start.theta + &v_h * eps;
    check_finite(&theta)?;
    let end = PositionEval::new(model, &theta, GeometryLevel::SecondKind)?;
    let there = end.riemann();
    let gamma_new = there.second.as_ref().expect("second-kind symbols");
    let omega_new = omega_matrix(gamma_new, &v_h);
    let force_new = &there.bundle.g_inv * &there.grad_phi;
    let v_new = &v_h - (&omega_new * &v_h + force_new) * (0.5 * eps);
    check_finite(&v_new)?;

    let id = DMatrix::<f64>::identity(d, d);
    let (num, neg_num) = log_abs_det(&id - omega_new * eps)?;
    let (den, neg_den) = log_abs_det(&id + omega_matrix(gamma, &v_h) * eps)?;
    Ok(StepOutput {
        end,
        aux: v_new,
        log_jacobian: num - den,
        fp_iters: v_half.iters,
        fp_converged: v_half.converged,
        negative_determinant: neg_num ^ neg_den,
    })
}

/// Fully explicit velocity-space step.
///
/// Each velocity half-step solves `[G + (ε/2)Ω̃(θ, v_old)] v_new = G v_old − (ε/2)∇φ`.
/// `start` must carry at least [`GeometryLevel::FirstKind`].
pub fn ermlmc_step<M: TargetModel + ?Sized>(
    model: &M,
    start: &PositionEval,
    v: &DVector<f64>,
    epsilon: f64,
) -> Result<StepOutput> {
    let half = 0.5 * epsilon;

    let (v_h, ld_first, neg_first) = explicit_half_step(start.riemann(), v, half)?;
    let theta = &start.theta + &v_h * epsilon;
    check_finite(&theta)?;
    let end = PositionEval::new(model, &theta, GeometryLevel::FirstKind)?;
    let (v_new, ld_second, neg_second) = explicit_half_step(end.riemann(), &v_h, half)?;

    Ok(StepOutput {
        end,
        aux: v_new,
        log_jacobian: ld_first + ld_second,
        fp_iters: 0,
        fp_converged: true,
        negative_determinant: neg_first ^ neg_second,
    })
}

/// Returns the new velocity and `log|det(G − hΩ̃(v_new))| − log|det(G + hΩ̃(v_old))|`.
fn explicit_half_step(
    at: &RiemannEval,
    v_old: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, f64, bool)> {
    let g = &at.bundle.g;
    let first = at.first.as_ref().expect("first-kind symbols");
    let lhs = g + omega_tilde_matrix(first, v_old) * h;
    let rhs = g * v_old - &at.grad_phi * h;
    let lu = lhs.clone().lu();
    let v_new = lu.solve(&rhs).ok_or(Error::SingularUpdate)?;
    check_finite(&v_new)?;
    let (den, neg_den) = log_abs_det(lhs)?;
    let (num, neg_num) = log_abs_det(g - omega_tilde_matrix(first, &v_new) * h)?;
    Ok((v_new, num - den, neg_num ^ neg_den))
}

/// A choice of integrator.
#[derive(Debug, Clone, PartialEq)]
pub enum Stepper {
    /// Diagonal inverse mass matrix.
    Leapfrog { inv_mass: DVector<f64> },
    GeneralizedLeapfrog,
    Rmlmc,
    Ermlmc,
}

impl Stepper {
    pub fn leapfrog_unit_mass(dim: usize) -> Self {
        Stepper::Leapfrog {
            inv_mass: DVector::from_element(dim, 1.0),
        }
    }

    pub fn aux_kind(&self) -> AuxKind {
        match self {
            Stepper::Leapfrog { .. } | Stepper::GeneralizedLeapfrog => AuxKind::Momentum,
            Stepper::Rmlmc | Stepper::Ermlmc => AuxKind::Velocity,
        }
    }

    pub fn geometry_level(&self) -> GeometryLevel {
        match self {
            Stepper::Leapfrog { .. } => GeometryLevel::GradientOnly,
            Stepper::GeneralizedLeapfrog => GeometryLevel::Metric,
            Stepper::Ermlmc => GeometryLevel::FirstKind,
            Stepper::Rmlmc => GeometryLevel::SecondKind,
        }
    }

    pub fn evaluate<M: TargetModel + ?Sized>(
        &self,
        model: &M,
        theta: &DVector<f64>,
    ) -> Result<PositionEval> {
        PositionEval::new(model, theta, self.geometry_level())
    }

    /// `H(θ, p)` for momentum steppers, `E(θ, v)` for velocity steppers.
    pub fn energy(&self, at: &PositionEval, aux: &DVector<f64>) -> f64 {
        match self {
            Stepper::Leapfrog { inv_mass } => {
                -at.log_density + 0.5 * aux.component_mul(inv_mass).dot(aux)
            }
            Stepper::GeneralizedLeapfrog => {
                let b = &at.riemann().bundle;
                hamiltonian_at(at.log_density, b, aux)
            }
            Stepper::Rmlmc | Stepper::Ermlmc => {
                let b = &at.riemann().bundle;
                energy_at(at.log_density, b, aux)
            }
        }
    }

    pub fn step<M: TargetModel + ?Sized>(
        &self,
        model: &M,
        start: &PositionEval,
        aux: &DVector<f64>,
        config: &IntegratorConfig,
    ) -> Result<StepOutput> {
        match self {
            Stepper::Leapfrog { inv_mass } => {
                leapfrog_step(model, start, aux, config.epsilon, inv_mass)
            }
            Stepper::GeneralizedLeapfrog => generalized_leapfrog_step(model, start, aux, config),
            Stepper::Rmlmc => rmlmc_step(model, start, aux, config),
            Stepper::Ermlmc => ermlmc_step(model, start, aux, config.epsilon),
        }
    }
}

/// `−log p(θ) + ½ log det G + ½ pᵀG⁻¹p`.
pub(crate) fn hamiltonian_at(log_density: f64, bundle: &MetricBundle, p: &DVector<f64>) -> f64 {
    // pᵀG⁻¹p = |L⁻¹p|²
    let w = bundle
        .chol
        .solve_lower_triangular(p)
        .expect("Cholesky factor has a positive diagonal");
    -log_density + 0.5 * bundle.log_det + 0.5 * w.norm_squared()
}

/// `−log p(θ) − ½ log det G + ½ vᵀGv`.
pub(crate) fn energy_at(log_density: f64, bundle: &MetricBundle, v: &DVector<f64>) -> f64 {
    let w = bundle.chol.tr_mul(v);
    -log_density - 0.5 * bundle.log_det + 0.5 * w.norm_squared()
}

/// Outcome of an `L`-step trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub end: PhasePoint,
    /// Cached evaluation at `end.theta`.
    pub end_eval: PositionEval,
    /// Sum of per-step log-Jacobians.
    pub log_jacobian: f64,
    pub start_energy: f64,
    pub end_energy: f64,
    pub fp_iters: usize,
    /// Steps whose fixed-point iteration hit `fp_max` without converging.
    pub fp_failures: usize,
    pub diverged: bool,
    /// Why the trajectory stopped early, if it did.
    pub failure: Option<String>,
    pub negative_determinant: bool,
    pub steps_taken: usize,
    /// Positions visited, start included, when tracing was requested.
    pub trace: Option<Vec<DVector<f64>>>,
}

impl TrajectoryResult {
    /// `E_end − E_start − log|det J|`: the negated log acceptance ratio.
    ///
    /// For velocity steppers this equals the change of `H(θ, Gv)`, so it
    /// vanishes along the exact flow for every stepper.
    pub fn energy_error(&self) -> f64 {
        self.end_energy - self.start_energy - self.log_jacobian
    }

    /// Log Metropolis–Hastings ratio; `-∞` for trajectories that must be rejected.
    pub fn log_accept_ratio(&self) -> f64 {
        if self.diverged || self.fp_failures > 0 {
            f64::NEG_INFINITY
        } else {
            -self.energy_error()
        }
    }
}

/// Runs `config.steps` steps from `(start, aux)`.
///
/// Errors inside a step end the trajectory and mark it diverged; the last
/// good point is returned so that the caller can reject it.
pub fn integrate<M: TargetModel + ?Sized>(
    model: &M,
    start: &PositionEval,
    aux: DVector<f64>,
    config: &IntegratorConfig,
    stepper: &Stepper,
    trace: bool,
) -> TrajectoryResult {
    let start_energy = stepper.energy(start, &aux);
    let mut current = start.clone();
    let mut aux = aux;
    let mut result = TrajectoryResult {
        end: PhasePoint {
            theta: start.theta.clone(),
            aux: aux.clone(),
            kind: stepper.aux_kind(),
        },
        end_eval: start.clone(),
        log_jacobian: 0.0,
        start_energy,
        end_energy: start_energy,
        fp_iters: 0,
        fp_failures: 0,
        diverged: !start_energy.is_finite(),
        failure: None,
        negative_determinant: false,
        steps_taken: 0,
        trace: trace.then(|| vec![start.theta.clone()]),
    };
    if result.diverged {
        result.failure = Some("non-finite starting energy".into());
        return result;
    }

    for _ in 0..config.steps {
        let out = match stepper.step(model, &current, &aux, config) {
            Ok(out) => out,
            Err(e) => {
                result.diverged = true;
                result.failure = Some(e.to_string());
                break;
            }
        };
        result.fp_iters += out.fp_iters;
        if !out.fp_converged {
            result.fp_failures += 1;
        }
        result.negative_determinant |= out.negative_determinant;
        result.log_jacobian += out.log_jacobian;
        result.steps_taken += 1;
        current = out.end;
        aux = out.aux;
        if let Some(t) = result.trace.as_mut() {
            t.push(current.theta.clone());
        }
        let energy = stepper.energy(&current, &aux);
        result.end_energy = energy;
        let error = energy - start_energy - result.log_jacobian;
        if !error.is_finite() || error.abs() > DIVERGENCE_THRESHOLD {
            result.diverged = true;
            result.failure = Some(format!("energy error {error:e}"));
            break;
        }
    }
    result.end = PhasePoint {
        theta: current.theta.clone(),
        aux,
        kind: stepper.aux_kind(),
    };
    result.end_eval = current;
    result
}

/// Evaluates the start of `point` and integrates from it.
pub fn integrate_from<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
    stepper: &Stepper,
) -> Result<TrajectoryResult> {
    config.validate()?;
    if point.kind != stepper.aux_kind() {
        return Err(Error::Config(format!(
            "stepper expects {:?} but phase point carries {:?}",
            stepper.aux_kind(),
            point.kind
        )));
    }
    let start = stepper.evaluate(model, &point.theta)?;
    Ok(integrate(model, &start, point.aux.clone(), config, stepper, false))
}
