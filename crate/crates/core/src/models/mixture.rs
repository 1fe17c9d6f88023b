//! Finite mixture of univariate Gaussians on an unconstrained parameter space.
//!
//! Layout of the unconstrained vector (length `3K − 1`):
//! `[z_0 .. z_{K−2}, μ_0 .. μ_{K−1}, s_0 .. s_{K−1}]` where `z` are
//! stick-breaking logits for the weights and `s_k = log σ²_k`.
//!
//! Stick `j` breaks off the fraction `u_j = logistic(z_j − ln(K − 1 − j))` of
//! what remains, so `z = 0` maps to equal weights.
//!
//! The metric is the empirical Fisher information of the per-datum scores,
//! `SᵀS − ssᵀ/N`, plus a small ridge proportional to its mean diagonal.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{logistic, Dataset, TargetModel};
use crate::error::{Error, Result};
use crate::geometry::Tensor3;

const RIDGE: f64 = 1e-6;

/// Hyperparameters of the Dirichlet / Normal / inverse-Gamma prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixturePrior {
    /// Symmetric Dirichlet concentration.
    pub lambda: f64,
    /// Prior mean of every component mean.
    pub m: f64,
    /// Component means are `N(m, σ²_k / β)`.
    pub beta: f64,
    /// Inverse-Gamma shape.
    pub b: f64,
    /// Inverse-Gamma scale.
    pub c: f64,
}

impl MixturePrior {
    /// `λ = 1, m = mean(x), β = 1, b = 2, c = var(x)`.
    pub fn default_for(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            lambda: 1.0,
            m: mean,
            beta: 1.0,
            b: 2.0,
            c: var.max(f64::MIN_POSITIVE),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.lambda, self.beta, self.b, self.c]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
            && self.m.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("mixture hyperparameters must be positive: {self:?}")))
        }
    }
}

/// Mixture parameters on their natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaussianMixtureModel {
    x: Vec<f64>,
    k: usize,
    prior: MixturePrior,
}

/// Stick fractions `u_j` and their `ln u_j`, `ln(1 − u_j)`.
struct Sticks {
    u: Vec<f64>,
    log_u: Vec<f64>,
    log_1mu: Vec<f64>,
}

impl Sticks {
    fn new(z: &[f64], k: usize) -> Self {
        let mut u = Vec::with_capacity(k - 1);
        let mut log_u = Vec::with_capacity(k - 1);
        let mut log_1mu = Vec::with_capacity(k - 1);
        for (j, zj) in z.iter().enumerate() {
            let shifted = zj - ((k - 1 - j) as f64).ln();
            u.push(logistic(shifted));
            // ln σ(x) = −ln(1 + e⁻ˣ), ln(1 − σ(x)) = −ln(1 + eˣ)
            log_u.push(-super::log1p_exp(-shifted));
            log_1mu.push(-super::log1p_exp(shifted));
        }
        Self { u, log_u, log_1mu }
    }

    fn log_weights(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(k);
        let mut rest = 0.0;
        for c in 0..k {
            if c < k - 1 {
                out.push(rest + self.log_u[c]);
                rest += self.log_1mu[c];
            } else {
                out.push(rest);
            }
        }
        out
    }

    /// `∂ ln π_c / ∂ z_j`.
    fn dlog_weight(&self, c: usize, j: usize) -> f64 {
        if j < c {
            -self.u[j]
        } else if j == c {
            1.0 - self.u[j]
        } else {
            0.0
        }
    }

    /// `∂² ln π_c / ∂ z_j²`; the Hessian in `z` is diagonal.
    fn d2log_weight(&self, c: usize, j: usize) -> f64 {
        if j <= c {
            -self.u[j] * (1.0 - self.u[j])
        } else {
            0.0
        }
    }
}

/// Per-datum evaluation in unconstrained coordinates.
struct Datum {
    log_lik: f64,
    score: DVector<f64>,
    hessian: Option<DMatrix<f64>>,
}

impl GaussianMixtureModel {
    pub fn new(x: Vec<f64>, k: usize, prior: MixturePrior) -> Result<Self> {
        if k == 0 {
            return Err(Error::Model("mixture needs at least one component".into()));
        }
        if x.len() < 2 {
            return Err(Error::Model("mixture needs at least two observations".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("observations must be finite".into()));
        }
        prior.validate()?;
        Ok(Self { x, k, prior })
    }

    /// Uses [`MixturePrior::default_for`] on the observations.
    pub fn with_default_prior(x: Vec<f64>, k: usize) -> Result<Self> {
        let prior = MixturePrior::default_for(&x);
        Self::new(x, k, prior)
    }

    pub fn from_dataset(data: &Dataset, k: usize) -> Result<Self> {
        Self::with_default_prior(data.y.iter().copied().collect(), k)
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn prior(&self) -> MixturePrior {
        self.prior
    }

    fn mu_index(&self, c: usize) -> usize {
        self.k - 1 + c
    }

    fn s_index(&self, c: usize) -> usize {
        2 * self.k - 1 + c
    }

    /// Maps an unconstrained vector to weights, means and variances.
    pub fn unpack(&self, theta: &DVector<f64>) -> MixtureParams {
        let k = self.k;
        let sticks = Sticks::new(&theta.as_slice()[..k - 1], k);
        MixtureParams {
            weights: sticks.log_weights(k).into_iter().map(f64::exp).collect(),
            means: (0..k).map(|c| theta[self.mu_index(c)]).collect(),
            variances: (0..k).map(|c| theta[self.s_index(c)].exp()).collect(),
        }
    }

    /// Inverse of [`unpack`](Self::unpack) on the interior of the simplex.
    pub fn pack(&self, params: &MixtureParams) -> Result<DVector<f64>> {
        let k = self.k;
        if params.weights.len() != k || params.means.len() != k || params.variances.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: params.weights.len(),
            });
        }
        let mut theta = DVector::zeros(self.dim());
        let mut rest = 1.0;
        for j in 0..k.saturating_sub(1) {
            let u = params.weights[j] / rest;
            if !(u > 0.0 && u < 1.0) {
                return Err(Error::Model("weights must lie in the open simplex".into()));
            }
            theta[j] = (u / (1.0 - u)).ln() + ((k - 1 - j) as f64).ln();
            rest -= params.weights[j];
        }
        for c in 0..k {
            if !(params.variances[c] > 0.0) {
                return Err(Error::Model("variances must be positive".into()));
            }
            theta[self.mu_index(c)] = params.means[c];
            theta[self.s_index(c)] = params.variances[c].ln();
        }
        Ok(theta)
    }

    /// Starting point from a crude moment fit: equal weights, means at the
    /// component quantiles of the data, variances `var(x)/K`.
    pub fn moment_start(&self) -> DVector<f64> {
        let k = self.k;
        let mut sorted = self.x.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let means = (0..k)
            .map(|c| {
                let q = (c as f64 + 0.5) / k as f64;
                sorted[((q * n as f64) as usize).min(n - 1)]
            })
            .collect();
        let params = MixtureParams {
            weights: vec![1.0 / k as f64; k],
            means,
            variances: vec![(var / k as f64).max(1e-6); k],
        };
        self.pack(&params).expect("moment start lies in the interior")
    }

    fn datum(&self, xi: f64, sticks: &Sticks, log_w: &[f64], theta: &DVector<f64>, hess: bool) -> Datum {
        let k = self.k;
        let d = self.dim();
        let mut a = vec![0.0; k];
        for c in 0..k {
            let s = theta[self.s_index(c)];
            let r = xi - theta[self.mu_index(c)];
            a[c] = log_w[c] - 0.5 * (2.0 * PI).ln() - 0.5 * s - 0.5 * r * r * (-s).exp();
        }
        let amax = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = a.iter().map(|v| (v - amax).exp()).sum();
        let log_lik = amax + sum.ln();
        let resp: Vec<f64> = a.iter().map(|v| (v - amax).exp() / sum).collect();

        let mut score = DVector::zeros(d);
        let mut hessian = hess.then(|| DMatrix::zeros(d, d));
        // Gradient of a_c is sparse: the first c+1 stick logits, μ_c and s_c.
        let mut grad_a = DVector::zeros(d);
        for c in 0..k {
            grad_a.fill(0.0);
            for j in 0..(k - 1) {
                grad_a[j] = sticks.dlog_weight(c, j);
            }
            let inv_var = (-theta[self.s_index(c)]).exp();
            let r = xi - theta[self.mu_index(c)];
            let (im, is) = (self.mu_index(c), self.s_index(c));
            grad_a[im] = r * inv_var;
            grad_a[is] = -0.5 + 0.5 * r * r * inv_var;
            score.axpy(resp[c], &grad_a, 1.0);

            if let Some(h) = hessian.as_mut() {
                let w = resp[c];
                h.ger(w, &grad_a, &grad_a, 1.0);
                for j in 0..(k - 1) {
                    h[(j, j)] += w * sticks.d2log_weight(c, j);
                }
                h[(im, im)] -= w * inv_var;
                h[(im, is)] -= w * r * inv_var;
                h[(is, im)] -= w * r * inv_var;
                h[(is, is)] -= w * 0.5 * r * r * inv_var;
            }
        }
        if let Some(h) = hessian.as_mut() {
            h.ger(-1.0, &score, &score, 1.0);
        }
        Datum {
            log_lik,
            score,
            hessian,
        }
    }

    /// Log prior on the natural scale plus the log-Jacobian of the map from
    /// the unconstrained vector, with its gradient.
    fn log_prior_and_grad(&self, theta: &DVector<f64>, sticks: &Sticks, log_w: &[f64]) -> (f64, DVector<f64>) {
        let k = self.k;
        let MixturePrior { lambda, m, beta, b, c } = self.prior;
        let mut lp = 0.0;
        let mut grad = DVector::zeros(self.dim());

        // Dirichlet and stick-breaking Jacobian.
        lp += (lambda - 1.0) * log_w.iter().sum::<f64>();
        let mut rest = 0.0;
        for j in 0..(k - 1) {
            lp += sticks.log_u[j] + sticks.log_1mu[j] + rest;
            rest += sticks.log_1mu[j];
            let u = sticks.u[j];
            let later_sticks = (k - 2 - j) as f64;
            let later_weights = (k - 1 - j) as f64;
            grad[j] = (1.0 - 2.0 * u) - u * later_sticks + (lambda - 1.0) * ((1.0 - u) - u * later_weights);
        }

        for comp in 0..k {
            let s = theta[self.s_index(comp)];
            let inv_var = (-s).exp();
            let dm = theta[self.mu_index(comp)] - m;
            // N(μ | m, σ²/β) + IG(σ² | b, c) + ln|dσ²/ds|
            lp += -0.5 * s - 0.5 * beta * dm * dm * inv_var;
            lp += -(b + 1.0) * s - c * inv_var;
            lp += s;
            grad[self.mu_index(comp)] = -beta * dm * inv_var;
            grad[self.s_index(comp)] = -0.5 + 0.5 * beta * dm * dm * inv_var - (b + 1.0) + c * inv_var + 1.0;
        }
        (lp, grad)
    }

    /// Per-datum score matrix `S` (N × D), rows `∂ log p(x_i | θ) / ∂θ`.
    pub fn scores(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let sticks = Sticks::new(&theta.as_slice()[..self.k - 1], self.k);
        let log_w = sticks.log_weights(self.k);
        let mut s = DMatrix::zeros(self.x.len(), self.dim());
        for (i, &xi) in self.x.iter().enumerate() {
            let dat = self.datum(xi, &sticks, &log_w, theta, false);
            s.set_row(i, &dat.score.transpose());
        }
        s
    }

    /// Sum of per-datum log-likelihoods, without prior or Jacobian.
    pub fn log_likelihood(&self, theta: &DVector<f64>) -> f64 {
        let sticks = Sticks::new(&theta.as_slice()[..self.k - 1], self.k);
        let log_w = sticks.log_weights(self.k);
        self.x
            .iter()
            .map(|&xi| self.datum(xi, &sticks, &log_w, theta, false).log_lik)
            .sum()
    }

    fn empirical_fisher(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let n = scores.nrows() as f64;
        let total = scores.row_sum().transpose();
        let mut g = scores.tr_mul(scores);
        g.ger(-1.0 / n, &total, &total, 1.0);
        g
    }

    fn add_ridge(g: &mut DMatrix<f64>, scale: f64) {
        for i in 0..g.nrows() {
            g[(i, i)] += scale;
        }
    }
}

impl TargetModel for GaussianMixtureModel {
    fn dim(&self) -> usize {
        3 * self.k - 1
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        self.log_density_and_grad(theta).0
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.log_density_and_grad(theta).1
    }

    fn log_density_and_grad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let sticks = Sticks::new(&theta.as_slice()[..self.k - 1], self.k);
        let log_w = sticks.log_weights(self.k);
        let (mut lp, mut grad) = self.log_prior_and_grad(theta, &sticks, &log_w);
        for &xi in &self.x {
            let dat = self.datum(xi, &sticks, &log_w, theta, false);
            lp += dat.log_lik;
            grad += dat.score;
        }
        (lp, grad)
    }

    fn metric(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut g = self.empirical_fisher(&self.scores(theta));
        let ridge = RIDGE * g.diagonal().mean();
        Self::add_ridge(&mut g, ridge);
        g
    }

    fn metric_deriv(&self, theta: &DVector<f64>) -> Tensor3 {
        self.metric_and_deriv(theta).1
    }

    fn metric_and_deriv(&self, theta: &DVector<f64>) -> (DMatrix<f64>, Tensor3) {
        let d = self.dim();
        let n = self.x.len();
        let sticks = Sticks::new(&theta.as_slice()[..self.k - 1], self.k);
        let log_w = sticks.log_weights(self.k);

        let mut scores = DMatrix::zeros(n, d);
        // cross[e] = Σ_i H_i[:, e] S_iᵀ
        let mut cross = vec![DMatrix::zeros(d, d); d];
        let mut dtotal = DMatrix::zeros(d, d); // column e is ∂s/∂θ_e
        for (i, &xi) in self.x.iter().enumerate() {
            let dat = self.datum(xi, &sticks, &log_w, theta, true);
            let h = dat.hessian.expect("hessian requested");
            for (e, ce) in cross.iter_mut().enumerate() {
                ce.ger(1.0, &h.column(e), &dat.score, 1.0);
            }
            dtotal += &h;
            scores.set_row(i, &dat.score.transpose());
        }
        let total = scores.row_sum().transpose();
        let mut g = self.empirical_fisher(&scores);
        let ridge = RIDGE * g.diagonal().mean();
        Self::add_ridge(&mut g, ridge);

        let slices: Vec<DMatrix<f64>> = cross
            .into_iter()
            .enumerate()
            .map(|(e, ce)| {
                let ds = dtotal.column(e).into_owned();
                let mut slice = &ce + ce.transpose();
                slice.ger(-1.0 / n as f64, &ds, &total, 1.0);
                slice.ger(-1.0 / n as f64, &total, &ds, 1.0);
                let ridge = RIDGE * slice.diagonal().mean();
                Self::add_ridge(&mut slice, ridge);
                slice
            })
            .collect();
        (g, Tensor3::from_slices(&slices))
    }

    fn initial_position(&self) -> DVector<f64> {
        self.moment_start()
    }
}
