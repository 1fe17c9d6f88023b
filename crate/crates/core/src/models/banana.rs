use nalgebra::{DMatrix, DVector};

use super::{Dataset, TargetModel};
use crate::error::{Error, Result};
use crate::geometry::Tensor3;

/// Posterior of `θ` for `y | θ ~ N(θ₁ + θ₂², σ_y²)`, `θ ~ N(0, σ_θ² I)`.
///
/// The metric is the expected Fisher information of the likelihood plus the
/// prior precision: `(N/σ_y²) JᵀJ + I/σ_θ²` with `J = [1, 2θ₂]`.
#[derive(Debug, Clone)]
pub struct BananaModel {
    n: f64,
    sum_y: f64,
    sum_y2: f64,
    sigma_y: f64,
    sigma_theta: f64,
}

impl BananaModel {
    pub fn new(y: &[f64], sigma_y: f64, sigma_theta: f64) -> Result<Self> {
        if !(sigma_y > 0.0) || !(sigma_theta > 0.0) {
            return Err(Error::Model(format!(
                "banana scales must be positive, got sigma_y={sigma_y}, sigma_theta={sigma_theta}"
            )));
        }
        if y.is_empty() {
            return Err(Error::Model("banana model needs at least one observation".into()));
        }
        Ok(Self {
            n: y.len() as f64,
            sum_y: y.iter().sum(),
            sum_y2: y.iter().map(|v| v * v).sum(),
            sigma_y,
            sigma_theta,
        })
    }

    pub fn from_dataset(data: &Dataset, sigma_y: f64, sigma_theta: f64) -> Result<Self> {
        Self::new(data.y.as_slice(), sigma_y, sigma_theta)
    }

    pub fn n_obs(&self) -> usize {
        self.n as usize
    }

    fn data_precision(&self) -> f64 {
        self.n / (self.sigma_y * self.sigma_y)
    }

    fn check(theta: &DVector<f64>) {
        assert_eq!(theta.len(), 2, "banana model is two-dimensional");
    }
}

impl TargetModel for BananaModel {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        Self::check(theta);
        let mean = theta[0] + theta[1] * theta[1];
        let sq = self.sum_y2 - 2.0 * mean * self.sum_y + self.n * mean * mean;
        -sq / (2.0 * self.sigma_y * self.sigma_y)
            - theta.norm_squared() / (2.0 * self.sigma_theta * self.sigma_theta)
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        Self::check(theta);
        let mean = theta[0] + theta[1] * theta[1];
        let resid = (self.sum_y - self.n * mean) / (self.sigma_y * self.sigma_y);
        let prior = 1.0 / (self.sigma_theta * self.sigma_theta);
        DVector::from_vec(vec![
            resid - theta[0] * prior,
            resid * 2.0 * theta[1] - theta[1] * prior,
        ])
    }

    fn metric(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        Self::check(theta);
        let c = self.data_precision();
        let prior = 1.0 / (self.sigma_theta * self.sigma_theta);
        let t = theta[1];
        DMatrix::from_row_slice(
            2,
            2,
            &[c + prior, 2.0 * c * t, 2.0 * c * t, 4.0 * c * t * t + prior],
        )
    }

    fn metric_deriv(&self, theta: &DVector<f64>) -> Tensor3 {
        Self::check(theta);
        let c = self.data_precision();
        let mut dg = Tensor3::zeros(2);
        dg[(1, 0, 1)] = 2.0 * c;
        dg[(1, 1, 0)] = 2.0 * c;
        dg[(1, 1, 1)] = 8.0 * c * theta[1];
        dg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_on_theta2_zero_is_diagonal() {
        let m = BananaModel::new(&[1.0; 100], 2.0, 1.0).unwrap();
        let g = m.metric(&DVector::from_vec(vec![0.7, 0.0]));
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[26.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn log_density_matches_direct_sum() {
        let y = [0.5, 1.5, -0.2, 3.0];
        let m = BananaModel::new(&y, 2.0, 1.0).unwrap();
        let theta = DVector::from_vec(vec![0.3, -0.7]);
        let mean = 0.3 + 0.49;
        let direct = -y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0
            - (0.09 + 0.49) / 2.0;
        assert!((m.log_density(&theta) - direct).abs() < 1e-13);
    }

    #[test]
    fn invalid_scales_rejected() {
        assert!(BananaModel::new(&[1.0], 0.0, 1.0).is_err());
        assert!(BananaModel::new(&[1.0], 1.0, -1.0).is_err());
        assert!(BananaModel::new(&[], 1.0, 1.0).is_err());
    }
}
