//! Independent numerical oracles shared by the integration tests.
//!
//! Nothing here calls into the geometry or integrator code under test
//! except through the public one-step maps being checked.

#![allow(dead_code)]

use geomcmc::geometry::Tensor3;
use geomcmc::models::{synthesize_banana, BananaModel, TargetModel};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_iterator(
        n,
        (0..n).map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)),
    )
}

/// Draw from `N(0, cov)` by an eigendecomposition, not a Cholesky factor.
pub fn mvn(rng: &mut ChaCha20Rng, cov: &DMatrix<f64>) -> DVector<f64> {
    let eig = cov.clone().symmetric_eigen();
    let z = normal_vec(rng, cov.nrows(), 1.0);
    let scaled = DVector::from_iterator(
        z.len(),
        z.iter().zip(eig.eigenvalues.iter()).map(|(z, l)| z * l.sqrt()),
    );
    &eig.eigenvectors * scaled
}

/// The banana posterior used throughout: 100 draws of `y ~ N(1, 2²)`,
/// `σ_y = 2`, `σ_θ = 1`.
pub fn banana() -> BananaModel {
    let data = synthesize_banana(100, 2024).unwrap();
    BananaModel::from_dataset(&data, 2.0, 1.0).unwrap()
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        }),
    )
}

/// Central-difference derivative of the metric, slice `i` = `∂G/∂θ_i`.
pub fn fd_metric_deriv<M: TargetModel + ?Sized>(model: &M, x: &DVector<f64>, h: f64) -> Tensor3 {
    let slices: Vec<DMatrix<f64>> = (0..x.len())
        .map(|i| {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            (model.metric(&a) - model.metric(&b)) / (2.0 * h)
        })
        .collect();
    Tensor3::from_slices(&slices)
}

/// Central-difference Jacobian of a vector map.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut a = x.clone();
        let mut b = x.clone();
        a[j] += h;
        b[j] -= h;
        jac.set_column(j, &((f(&a) - f(&b)) / (2.0 * h)));
    }
    jac
}

pub fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

pub fn split(z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let d = z.len() / 2;
    (z.rows(0, d).into_owned(), z.rows(d, d).into_owned())
}

/// A model with the log density of `inner` and the identity metric.
pub struct FlatMetric<M>(pub M);

impl<M: TargetModel> TargetModel for FlatMetric<M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        self.0.log_density(theta)
    }
    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.0.grad_log_density(theta)
    }
    fn metric(&self, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }
    fn metric_deriv(&self, _: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(self.dim())
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Standard normal CDF through a high-accuracy erfc approximation
/// (Numerical Recipes `erfcc`, fractional error below 1.2e-7).
pub fn normal_cdf(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let erfc = t * poly.exp();
    if x >= 0.0 {
        1.0 - 0.5 * erfc
    } else {
        0.5 * erfc
    }
}

/// Lag-window-free batch-means standard error of a chain's mean.
pub fn batch_means_se(series: &[f64], batches: usize) -> f64 {
    let size = series.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}
