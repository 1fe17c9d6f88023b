//! Small models with hand-checkable geometry, used by tests and examples.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TargetModel;
use crate::geometry::Tensor3;

/// Standard normal in `dim` dimensions with the identity metric.
#[derive(Debug, Clone, Copy)]
pub struct IsotropicGaussian {
    pub dim: usize,
}

impl TargetModel for IsotropicGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        -0.5 * theta.norm_squared()
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        -theta
    }

    fn metric(&self, _theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    fn metric_deriv(&self, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(self.dim)
    }
}

/// One-dimensional standard normal with metric `G(θ) = offset + θ²`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticMetricGaussian {
    pub offset: f64,
}

impl TargetModel for QuadraticMetricGaussian {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        -0.5 * theta[0] * theta[0]
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        -theta
    }

    fn metric(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.offset + theta[0] * theta[0])
    }

    fn metric_deriv(&self, theta: &DVector<f64>) -> Tensor3 {
        let mut t = Tensor3::zeros(1);
        t[(0, 0, 0)] = 2.0 * theta[0];
        t
    }
}

/// Standard normal whose metric `I + B(θ)B(θ)ᵀ` has a random affine factor
/// `B(θ) = B₀ + Σᵢ θᵢ Bᵢ`.
///
/// Every entry of `∂G` is generically nonzero, which makes it a good stress
/// case for the connection terms.
#[derive(Debug, Clone)]
pub struct RandomMetricGaussian {
    base: DMatrix<f64>,
    slopes: Vec<DMatrix<f64>>,
}

impl RandomMetricGaussian {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self::with_scale(dim, seed, 0.5)
    }

    pub fn with_scale(dim: usize, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut draw = |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        };
        let base = DMatrix::from_fn(dim, dim, &mut draw);
        let slopes = (0..dim).map(|_| DMatrix::from_fn(dim, dim, &mut draw)).collect();
        Self { base, slopes }
    }

    fn factor(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut b = self.base.clone();
        for (t, s) in theta.iter().zip(&self.slopes) {
            b += s * *t;
        }
        b
    }
}

impl TargetModel for RandomMetricGaussian {
    fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        -0.5 * theta.norm_squared()
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        -theta
    }

    fn metric(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let b = self.factor(theta);
        let d = self.dim();
        DMatrix::identity(d, d) + &b * b.transpose()
    }

    fn metric_deriv(&self, theta: &DVector<f64>) -> Tensor3 {
        let b = self.factor(theta);
        let slices: Vec<DMatrix<f64>> = self
            .slopes
            .iter()
            .map(|s| {
                let half = s * b.transpose();
                &half + half.transpose()
            })
            .collect();
        Tensor3::from_slices(&slices)
    }
}
