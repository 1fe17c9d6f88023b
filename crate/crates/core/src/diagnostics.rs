//! Effective sample size by Geyer's initial monotone sequence estimator.

use std::fmt;

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Series longer than this use the FFT autocovariance.
pub const DIRECT_MAX_LEN: usize = 10_000;

fn centered(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: series.len(),
        });
    }
    let first = series[0];
    if series.iter().all(|&x| x == first) {
        return Err(Error::DegenerateSeries);
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse("series contains non-finite values".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    Ok(series.iter().map(|x| x - mean).collect())
}

fn lag_sum(x: &[f64], k: usize) -> f64 {
    x[..x.len() - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum()
}

/// Biased sample autocovariances `γ̂(k) = (1/B) Σ (x_t − x̄)(x_{t+k} − x̄)` for
/// `k = 0..=max_lag`, by direct summation.
pub fn autocovariance_direct(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let x = centered(series)?;
    let n = x.len();
    Ok((0..=max_lag.min(n - 1))
        .map(|k| lag_sum(&x, k) / n as f64)
        .collect())
}

/// Same as [`autocovariance_direct`], through a zero-padded FFT.
pub fn autocovariance_fft(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let x = centered(series)?;
    let n = x.len();
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / (len as f64 * n as f64);
    Ok(buf[..=max_lag.min(n - 1)]
        .iter()
        .map(|c| c.re * scale)
        .collect())
}

/// Picks the direct or FFT path by series length.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= DIRECT_MAX_LEN {
        autocovariance_direct(series, max_lag)
    } else {
        autocovariance_fft(series, max_lag)
    }
}

/// Initial monotone sequence from autocovariances `γ̂(0), γ̂(1), ...`.
///
/// Returns the number of pair sums kept and their sum after the monotone
/// envelope is applied.
pub fn initial_monotone_sum(gamma: &[f64]) -> (usize, f64) {
    let mut kept = 0;
    let mut sum = 0.0;
    let mut envelope = f64::INFINITY;
    for pair in gamma.chunks_exact(2) {
        let g = pair[0] + pair[1];
        if g < 0.0 {
            break;
        }
        envelope = envelope.min(g);
        sum += envelope;
        kept += 1;
    }
    (kept, sum)
}

/// `B γ̂(0) / σ̂²` with `σ̂² = −γ̂(0) + 2 Σ_m Γ̂_m`, clamped to `[1, B]`.
fn ess_from_gamma(n: usize, gamma: &[f64]) -> f64 {
    let (_, sum) = initial_monotone_sum(gamma);
    let sigma2 = -gamma[0] + 2.0 * sum;
    let b = n as f64;
    if sigma2 <= 0.0 {
        return b;
    }
    (b * gamma[0] / sigma2).clamp(1.0, b)
}

/// Effective sample size of a scalar chain.
pub fn ess_initial_monotone(series: &[f64]) -> Result<f64> {
    let n = series.len();
    let max_lag = (n / 2).max(1);
    if n > DIRECT_MAX_LEN {
        let gamma = autocovariance_fft(series, max_lag)?;
        return Ok(ess_from_gamma(n, &gamma));
    }
    // direct path: extend lags only until the first negative pair sum
    let x = centered(series)?;
    let mut gamma = Vec::new();
    let mut k = 0;
    while k < max_lag.min(n - 1) {
        let a = lag_sum(&x, k) / n as f64;
        let b = lag_sum(&x, k + 1) / n as f64;
        gamma.push(a);
        gamma.push(b);
        if a + b < 0.0 {
            break;
        }
        k += 2;
    }
    if gamma.is_empty() {
        gamma.push(lag_sum(&x, 0) / n as f64);
    }
    Ok(ess_from_gamma(n, &gamma))
}

/// Per-dimension ESS and its summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    pub per_dimension: Vec<f64>,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub min_ess_per_second: f64,
}

impl EssReport {
    pub fn from_values(per_dimension: Vec<f64>, seconds: f64) -> Self {
        let mut sorted = per_dimension.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let min = sorted.first().copied().unwrap_or(f64::NAN);
        Self {
            min,
            median,
            max: sorted.last().copied().unwrap_or(f64::NAN),
            min_ess_per_second: min / seconds,
            per_dimension,
        }
    }
}

impl fmt::Display for EssReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.0}, {:.0}, {:.0})", self.min, self.median, self.max)
    }
}

/// ESS for every column of `samples` (rows are iterations).
///
/// Constant columns, including single-row chains, count as one effective
/// sample.
pub fn summarize(samples: &DMatrix<f64>, seconds: f64) -> Result<EssReport> {
    let values = samples
        .column_iter()
        .map(|col| {
            let series: Vec<f64> = col.iter().copied().collect();
            match ess_initial_monotone(&series) {
                Ok(ess) => Ok(ess),
                Err(Error::DegenerateSeries | Error::SeriesTooShort { .. }) => Ok(1.0),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EssReport::from_values(values, seconds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let scale = (1.0 - rho * rho).sqrt();
        let mut x: f64 = StandardNormal.sample(&mut rng);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + scale * z;
                x
            })
            .collect()
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(
            autocovariance(&[0.1; 10], 3),
            Err(Error::DegenerateSeries)
        ));
        assert!(matches!(
            ess_initial_monotone(&[2.0; 10]),
            Err(Error::DegenerateSeries)
        ));
    }

    #[test]
    fn alternating_series_is_anticorrelated() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let g = autocovariance(&x, 1).unwrap();
        assert!((g[1] / g[0] + 1.0).abs() < 2e-3);
        assert_eq!(ess_initial_monotone(&x).unwrap(), 1000.0);
    }

    #[test]
    fn direct_and_fft_agree() {
        let x = ar1(0.7, 3000, 4);
        let a = autocovariance_direct(&x, 200).unwrap();
        let b = autocovariance_fft(&x, 200).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn ar1_autocorrelation() {
        let x = ar1(0.9, 100_000, 7);
        let g = autocovariance(&x, 10).unwrap();
        for k in 0..=10 {
            assert!((g[k] / g[0] - 0.9f64.powi(k as i32)).abs() < 0.02, "lag {k}");
        }
    }

    #[test]
    fn single_column_summary() {
        let x = ar1(0.5, 500, 1);
        let m = DMatrix::from_column_slice(500, 1, &x);
        let r = summarize(&m, 2.0).unwrap();
        assert_eq!(r.min, r.median);
        assert_eq!(r.median, r.max);
        let r2 = summarize(&m, 4.0).unwrap();
        assert_eq!(r.min_ess_per_second, 2.0 * r2.min_ess_per_second);
    }

    #[test]
    fn one_row_chain_has_unit_ess() {
        let r = summarize(&DMatrix::from_row_slice(1, 2, &[0.3, 0.4]), 1.0).unwrap();
        assert_eq!(r.per_dimension, vec![1.0, 1.0]);
    }

    #[test]
    fn display_is_triple() {
        let r = EssReport::from_values(vec![8561.2, 10262.0, 9595.4], 1.0);
        assert_eq!(r.to_string(), "(8561, 9595, 10262)");
    }
}
