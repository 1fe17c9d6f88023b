use nalgebra::{DMatrix, DVector};

use super::{log1p_exp, logistic, Dataset, TargetModel};
use crate::error::{Error, Result};
use crate::geometry::Tensor3;

/// Bayesian logistic regression with a `N(0, αI)` prior, using the Fisher
/// information plus prior precision as metric.
#[derive(Debug, Clone)]
pub struct LogisticRegressionModel {
    x: DMatrix<f64>,
    y: DVector<f64>,
    alpha: f64,
}

impl LogisticRegressionModel {
    pub const DEFAULT_ALPHA: f64 = 100.0;

    /// `x` is the full design matrix, intercept column included.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, alpha: f64) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Model(format!("prior variance must be positive, got {alpha}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("design matrix has non-finite entries".into()));
        }
        if let Some(bad) = y.iter().find(|&&l| l != 0.0 && l != 1.0) {
            return Err(Error::Model(format!("labels must be 0 or 1, found {bad}")));
        }
        Ok(Self { x, y, alpha })
    }

    pub fn from_dataset(data: &Dataset, alpha: f64) -> Result<Self> {
        Self::new(data.x.clone(), data.y.clone(), alpha)
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn linear_predictor(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.x * theta
    }

    /// `Xᵀ diag(w) X`.
    fn weighted_gram(&self, w: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let (n, d) = self.x.shape();
        let mut out = DMatrix::zeros(d, d);
        for row in 0..n {
            let wn = w(row);
            if wn == 0.0 {
                continue;
            }
            for a in 0..d {
                let xa = wn * self.x[(row, a)];
                for b in a..d {
                    out[(a, b)] += xa * self.x[(row, b)];
                }
            }
        }
        out.fill_lower_triangle_with_upper_triangle();
        out
    }
}

impl TargetModel for LogisticRegressionModel {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        self.log_density_and_grad(theta).0
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.log_density_and_grad(theta).1
    }

    fn log_density_and_grad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let eta = self.linear_predictor(theta);
        let mut lp = 0.0;
        let mut resid = DVector::zeros(eta.len());
        for (n, &e) in eta.iter().enumerate() {
            lp += self.y[n] * e - log1p_exp(e);
            resid[n] = self.y[n] - logistic(e);
        }
        lp -= theta.norm_squared() / (2.0 * self.alpha);
        let grad = self.x.tr_mul(&resid) - theta / self.alpha;
        (lp, grad)
    }

    fn metric(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let eta = self.linear_predictor(theta);
        let mut g = self.weighted_gram(|n| {
            let s = logistic(eta[n]);
            s * (1.0 - s)
        });
        for i in 0..g.nrows() {
            g[(i, i)] += 1.0 / self.alpha;
        }
        g
    }

    fn metric_deriv(&self, theta: &DVector<f64>) -> Tensor3 {
        let eta = self.linear_predictor(theta);
        let third: Vec<f64> = eta
            .iter()
            .map(|&e| {
                let s = logistic(e);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            })
            .collect();
        let slices: Vec<DMatrix<f64>> = (0..self.dim())
            .map(|d| self.weighted_gram(|n| third[n] * self.x[(n, d)]))
            .collect();
        Tensor3::from_slices(&slices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LogisticRegressionModel {
        let x = DMatrix::from_row_slice(
            4,
            2,
            &[1.0, -0.5, 1.0, 0.3, 1.0, 1.2, 1.0, -1.1],
        );
        let y = DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0]);
        LogisticRegressionModel::new(x, y, 100.0).unwrap()
    }

    #[test]
    fn log_density_at_origin() {
        let m = toy();
        let lp = m.log_density(&DVector::zeros(2));
        assert!((lp + 4.0 * 2f64.ln()).abs() < 1e-14);

        let single = LogisticRegressionModel::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            1.0,
        )
        .unwrap();
        assert!((single.log_density(&DVector::zeros(1)) + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn metric_at_origin_is_quarter_gram() {
        let m = toy();
        let g = m.metric(&DVector::zeros(2));
        let expected = m.x.tr_mul(&m.x) * 0.25 + DMatrix::identity(2, 2) / 100.0;
        assert!((g - expected).amax() < 1e-14);
        assert_eq!(m.metric_deriv(&DVector::zeros(2)).max_abs(), 0.0);
    }

    #[test]
    fn metric_saturates_to_prior_precision() {
        let m = toy();
        let g = m.metric(&DVector::from_vec(vec![800.0, 900.0]));
        assert!((g - DMatrix::identity(2, 2) / 100.0).amax() < 1e-12);
    }

    #[test]
    fn one_dimensional_deriv_by_hand() {
        let m = LogisticRegressionModel::new(
            DMatrix::from_element(1, 1, 2.0),
            DVector::from_element(1, 1.0),
            1.0,
        )
        .unwrap();
        let theta = DVector::from_element(1, 0.3);
        let s = logistic(0.6);
        let expected = s * (1.0 - s) * (1.0 - 2.0 * s) * 2.0 * 2.0 * 2.0;
        assert!((m.metric_deriv(&theta)[(0, 0, 0)] - expected).abs() < 1e-15);
    }

    #[test]
    fn extreme_predictor_is_finite() {
        let m = toy();
        let (lp, g) = m.log_density_and_grad(&DVector::from_vec(vec![1e4, -1e4]));
        assert!(lp.is_finite());
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_labels() {
        let err = LogisticRegressionModel::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 2.0),
            1.0,
        );
        assert!(err.is_err());
    }
}
