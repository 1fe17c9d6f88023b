mod common;

use common::*;
use geomcmc::diagnostics::{
    autocovariance_direct, autocovariance_fft, ess_initial_monotone, summarize, DIRECT_MAX_LEN,
};
use geomcmc::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Textbook estimator: every autocovariance by a double loop, pair sums
/// truncated at the first negative one, then a running minimum.
fn brute_force_ess(x: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let gamma = |k: usize| {
        let mut s = 0.0;
        for t in 0..n - k {
            s += (x[t] - mean) * (x[t + k] - mean);
        }
        s / n as f64
    };
    let mut pairs = Vec::new();
    let mut m = 0;
    while 2 * m < n / 2 {
        let p = gamma(2 * m) + gamma(2 * m + 1);
        if p < 0.0 {
            break;
        }
        pairs.push(p);
        m += 1;
    }
    for i in 1..pairs.len() {
        if pairs[i] > pairs[i - 1] {
            pairs[i] = pairs[i - 1];
        }
    }
    let sigma2 = -gamma(0) + 2.0 * pairs.iter().sum::<f64>();
    if sigma2 <= 0.0 {
        return n as f64;
    }
    (n as f64 * gamma(0) / sigma2).clamp(1.0, n as f64)
}

fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let z = normal_vec(&mut r, n, 1.0);
    let mut x = vec![0.0; n];
    x[0] = z[0] / (1.0 - rho * rho).sqrt();
    for t in 1..n {
        x[t] = rho * x[t - 1] + z[t];
    }
    x
}

#[test]
fn matches_brute_force_on_short_series() {
    let mut checked = 0;
    for n in 4..=64 {
        for (i, rho) in [-0.6, 0.0, 0.5, 0.9].iter().enumerate() {
            let x = ar1(*rho, n, 1000 + 10 * n as u64 + i as u64);
            let got = ess_initial_monotone(&x).unwrap();
            let want = brute_force_ess(&x);
            assert!(
                (got - want).abs() <= 1e-10 * want,
                "n={n} rho={rho}: {got} vs {want}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 61 * 4);
}

#[test]
fn invariant_under_affine_maps() {
    let x = ar1(0.7, 2000, 3);
    let base = ess_initial_monotone(&x).unwrap();
    for (a, b) in [(3.0, -7.0), (-0.01, 1e3), (1e4, 0.5)] {
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let e = ess_initial_monotone(&y).unwrap();
        assert!((e - base).abs() / base < 1e-10, "a={a} b={b}: {e} vs {base}");
    }
}

#[test]
fn direct_and_fft_agree() {
    for (n, rho) in [(500, 0.3), (DIRECT_MAX_LEN, 0.95), (DIRECT_MAX_LEN + 1, -0.4)] {
        let x = ar1(rho, n, n as u64);
        let a = autocovariance_direct(&x, 200).unwrap();
        let b = autocovariance_fft(&x, 200).unwrap();
        for (k, (u, v)) in a.iter().zip(&b).enumerate() {
            assert!((u - v).abs() <= 1e-8 * a[0], "n={n} lag {k}: {u} vs {v}");
        }
    }
}

#[test]
fn estimator_is_continuous_across_the_fft_switch() {
    let x = ar1(0.8, DIRECT_MAX_LEN + 1, 17);
    let long = ess_initial_monotone(&x).unwrap();
    let short = ess_initial_monotone(&x[..DIRECT_MAX_LEN]).unwrap();
    assert!((long - short).abs() / short < 0.05, "{long} vs {short}");
}

#[test]
fn degenerate_and_short_inputs() {
    assert!(matches!(ess_initial_monotone(&[1.0; 10]), Err(Error::DegenerateSeries)));
    assert!(matches!(ess_initial_monotone(&[1.0]), Err(Error::SeriesTooShort { .. })));
    let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, -1.0]);
    let report = summarize(&m, 2.0).unwrap();
    assert_eq!(report.per_dimension[0], 1.0);
    assert!(report.per_dimension[1] >= 1.0);
    assert_eq!(report.min_ess_per_second, report.min / 2.0);
}

#[test]
fn antithetic_series_is_capped_at_length() {
    let x: Vec<f64> = (0..1000).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert_eq!(ess_initial_monotone(&x).unwrap(), 1000.0);
}

proptest! {
    #[test]
    fn ess_stays_in_range(values in prop::collection::vec(-1e6f64..1e6, 2..300)) {
        match ess_initial_monotone(&values) {
            Ok(ess) => {
                prop_assert!(ess >= 1.0);
                prop_assert!(ess <= values.len() as f64);
            }
            Err(e) => prop_assert!(matches!(e, Error::DegenerateSeries)),
        }
    }
}
