//! Target distributions together with their Riemannian metrics.
//!
//! Every model supplies its metric derivative analytically. The samplers
//! never differentiate numerically.

mod banana;
mod dataset;
mod logistic;
mod mixture;
mod toy;

pub use banana::BananaModel;
pub use dataset::{
    load_dataset, synthesize_banana, synthesize_gmm, synthesize_logreg, BenchmarkDataset,
    Dataset, DatasetFormat, MixtureRecipe, Provenance, BENCHMARK_DATASETS,
};
pub(crate) use dataset::fmt_f64;
pub use logistic::LogisticRegressionModel;
pub use mixture::{GaussianMixtureModel, MixtureParams, MixturePrior};
pub use toy::{IsotropicGaussian, QuadraticMetricGaussian, RandomMetricGaussian};

use nalgebra::{DMatrix, DVector};

use crate::geometry::Tensor3;

/// The boundary between target models and samplers.
///
/// `log_density` is the unnormalized log posterior. `metric` must be
/// symmetric positive definite wherever the sampler is expected to go, and
/// `metric_deriv(theta).slice(i)` must equal `∂ metric / ∂θ_i`.
pub trait TargetModel {
    fn dim(&self) -> usize;

    fn log_density(&self, theta: &DVector<f64>) -> f64;

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64>;

    fn metric(&self, theta: &DVector<f64>) -> DMatrix<f64>;

    fn metric_deriv(&self, theta: &DVector<f64>) -> Tensor3;

    fn log_density_and_grad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.log_density(theta), self.grad_log_density(theta))
    }

    /// Models that share work between `G` and `∂G` override this.
    fn metric_and_deriv(&self, theta: &DVector<f64>) -> (DMatrix<f64>, Tensor3) {
        (self.metric(theta), self.metric_deriv(theta))
    }

    /// Where chains start when the caller gives no position.
    fn initial_position(&self) -> DVector<f64> {
        DVector::zeros(self.dim())
    }
}

impl<M: TargetModel + ?Sized> TargetModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        (**self).log_density(theta)
    }
    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        (**self).grad_log_density(theta)
    }
    fn metric(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        (**self).metric(theta)
    }
    fn metric_deriv(&self, theta: &DVector<f64>) -> Tensor3 {
        (**self).metric_deriv(theta)
    }
    fn log_density_and_grad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        (**self).log_density_and_grad(theta)
    }
    fn metric_and_deriv(&self, theta: &DVector<f64>) -> (DMatrix<f64>, Tensor3) {
        (**self).metric_and_deriv(theta)
    }
    fn initial_position(&self) -> DVector<f64> {
        (**self).initial_position()
    }
}

impl<M: TargetModel + ?Sized> TargetModel for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        (**self).log_density(theta)
    }
    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        (**self).grad_log_density(theta)
    }
    fn metric(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        (**self).metric(theta)
    }
    fn metric_deriv(&self, theta: &DVector<f64>) -> Tensor3 {
        (**self).metric_deriv(theta)
    }
    fn log_density_and_grad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        (**self).log_density_and_grad(theta)
    }
    fn metric_and_deriv(&self, theta: &DVector<f64>) -> (DMatrix<f64>, Tensor3) {
        (**self).metric_and_deriv(theta)
    }
    fn initial_position(&self) -> DVector<f64> {
        (**self).initial_position()
    }
}

/// `log(1 + eˣ)` without overflow.
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
