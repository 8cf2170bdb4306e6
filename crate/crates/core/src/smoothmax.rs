//! LogSumExp on vectors and LogIntExp on sampled windows.
//!
//! Both are evaluated in max-shifted form, `m + (1/k) log sum exp(k (w_i - m))`,
//! so that no exponent is positive regardless of `k` or the sample values.

use crate::error::{Error, Result};

/// LogIntExp of a sampled window together with its derivative density.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothMaxResult {
    pub value: f64,
    /// `d value / d w_i = weights[i] * dt`; non-negative with `dt * sum = 1`.
    pub weights: Vec<f64>,
    pub k: f64,
}

fn check_sharpness(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::BadSharpness(k))
    }
}

/// `(1/k) log sum_i exp(k v_i)`.
pub fn lse(values: &[f64], k: f64) -> Result<f64> {
    check_sharpness(k)?;
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values.iter().map(|&v| (k * (v - m)).exp()).sum();
    Ok(m + s.ln() / k)
}

/// Rectangle-rule LogIntExp `(1/k) log(dt sum_i exp(k w_i))` of a window.
pub fn lie_window(window: &[f64], dt: f64, k: f64) -> Result<SmoothMaxResult> {
    check_sharpness(k)?;
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mut weights = vec![0.0; window.len()];
    let value = lie_strided(window, 0, window.len(), 1, dt, k, Some(&mut weights));
    Ok(SmoothMaxResult { value, weights, k })
}

/// Componentwise [`lie_window`] for a window of `N` samples of an `n`-vector,
/// stored sample-major (`window[i * n + c]`). Weights use the same layout.
pub fn lie_vector_window(window: &[f64], n: usize, dt: f64, k: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_sharpness(k)?;
    if n == 0 || window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if !window.len().is_multiple_of(n) {
        return Err(Error::DimensionMismatch(format!("window of {} values is not a multiple of n = {n}", window.len())));
    }
    let samples = window.len() / n;
    let mut values = vec![0.0; n];
    let mut weights = vec![0.0; window.len()];
    let mut scratch = vec![0.0; samples];
    for (c, value) in values.iter_mut().enumerate() {
        *value = lie_strided(window, c, samples, n, dt, k, Some(&mut scratch));
        for (i, w) in scratch.iter().enumerate() {
            weights[i * n + c] = *w;
        }
    }
    Ok((values, weights))
}

/// `exp(x)`, with the underflow region short-circuited; bitwise equal to `x.exp()`.
#[inline]
fn shifted_exp(x: f64) -> f64 {
    if x < UNDERFLOW {
        0.0
    } else {
        x.exp()
    }
}

/// Below this, `exp` rounds to zero.
const UNDERFLOW: f64 = -746.0;

/// LogIntExp over `len` samples `values[start + i * stride]`.
///
/// When `weights` is given it receives the density `exp(k (w_i - m)) / (dt S)`.
/// Callers guarantee `k > 0` and `len >= 1`.
pub(crate) fn lie_strided(
    values: &[f64],
    start: usize,
    len: usize,
    stride: usize,
    dt: f64,
    k: f64,
    weights: Option<&mut [f64]>,
) -> f64 {
    let sample = |i: usize| values[start + i * stride];
    let mut m = f64::NEG_INFINITY;
    for i in 0..len {
        m = m.max(sample(i));
    }
    match weights {
        Some(w) => {
            let mut s = 0.0;
            for (i, wi) in w.iter_mut().enumerate().take(len) {
                let e = shifted_exp(k * (sample(i) - m));
                *wi = e;
                s += e;
            }
            let mass = dt * s;
            for wi in w.iter_mut().take(len) {
                *wi /= mass;
            }
            m + mass.ln() / k
        }
        None => {
            let mut s = 0.0;
            for i in 0..len {
                s += shifted_exp(k * (sample(i) - m));
            }
            m + (dt * s).ln() / k
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lse_examples() {
        assert_relative_eq!(lse(&[0.0, 0.0], 1.0).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(lse(&[0.25], 1.0).unwrap(), 0.25);
        assert_eq!(lse(&[-3.25], 1e8).unwrap(), -3.25);
        // log(1 + e), evaluated directly from the unshifted definition
        let direct = (0f64.exp() + 1f64.exp()).ln();
        assert_relative_eq!(lse(&[0.0, 1.0], 1.0).unwrap(), direct, epsilon = 1e-15);
        assert_relative_eq!(direct, 1.313261687518223, epsilon = 1e-15);
    }

    #[test]
    fn lse_errors() {
        assert!(matches!(lse(&[1.0], 0.0), Err(Error::BadSharpness(_))));
        assert!(matches!(lse(&[1.0], -1.0), Err(Error::BadSharpness(_))));
        assert!(matches!(lse(&[], 1.0), Err(Error::EmptyInput)));
    }

    #[test]
    fn constant_window_gives_log_tau_offset() {
        let dt = 0.01;
        let window = vec![1.5; 20];
        let tau = 20.0 * dt;
        for k in [1.0, 10.0, 1e4] {
            let r = lie_window(&window, dt, k).unwrap();
            assert_relative_eq!(r.value, 1.5 + f64::ln(tau) / k, epsilon = 1e-14);
            for w in &r.weights {
                assert_relative_eq!(*w, 1.0 / tau, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_window_unit_length() {
        let r = lie_window(&[0.0; 10], 0.1, 37.0).unwrap();
        assert!(r.value.abs() < 1e-15);
        assert!(r.weights.iter().all(|w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn spike_concentrates_weight() {
        let dt = 0.1;
        let k = 100.0;
        let r = lie_window(&[0.0, 1.0, 0.0], dt, k).unwrap();
        let total: f64 = r.weights.iter().sum();
        assert!(r.weights[1] / total > 0.999);
        // unshifted quadrature formula; e^100 is still representable
        let brute = (dt * (1.0 + k.exp() + 1.0)).ln() / k;
        assert_relative_eq!(r.value, brute, epsilon = 1e-14);
        assert!(r.value >= 1.0 + f64::ln(0.1) / 100.0);
        assert!(r.value <= 1.0 + f64::ln(0.3) / 100.0);
    }

    #[test]
    fn underflow_shortcut_is_exact() {
        for x in [-745.0, -745.1, -745.2, -745.9, -746.0, -746.1, -800.0, -1e6, f64::NEG_INFINITY] {
            assert_eq!(shifted_exp(x).to_bits(), x.exp().to_bits(), "{x}");
        }
    }

    #[test]
    fn huge_sharpness_does_not_overflow() {
        let r = lie_window(&[1.0, 2.0, -3.0], 1e-3, 1e9).unwrap();
        assert!(r.value.is_finite());
        assert!(r.weights.iter().all(|w| w.is_finite()));
        assert_relative_eq!(r.weights[1], 1e3, epsilon = 1e-9);
    }

    #[test]
    fn window_errors() {
        assert!(matches!(lie_window(&[], 0.1, 1.0), Err(Error::EmptyWindow)));
        assert!(matches!(lie_window(&[1.0], 0.1, 0.0), Err(Error::BadSharpness(_))));
    }

    #[test]
    fn vector_window_is_componentwise() {
        let dt = 0.1;
        let k = 100.0;
        // component 0 constant 2, component 1 = [0, 1, 0]
        let window = [2.0, 0.0, 2.0, 1.0, 2.0, 0.0];
        let (values, weights) = lie_vector_window(&window, 2, dt, k).unwrap();
        let a = lie_window(&[2.0, 2.0, 2.0], dt, k).unwrap();
        let b = lie_window(&[0.0, 1.0, 0.0], dt, k).unwrap();
        assert_eq!(values, vec![a.value, b.value]);
        for i in 0..3 {
            assert_eq!(weights[2 * i], a.weights[i]);
            assert_eq!(weights[2 * i + 1], b.weights[i]);
        }

        let (v1, w1) = lie_vector_window(&[0.0, 1.0, 0.0], 1, dt, k).unwrap();
        assert_eq!(v1[0], b.value);
        assert_eq!(w1, b.weights);

        let (vv, ww) = lie_vector_window(&[0.3, 0.3, -1.0, -1.0], 2, dt, k).unwrap();
        assert_eq!(vv[0], vv[1]);
        assert_eq!(ww[0], ww[1]);
        assert!(lie_vector_window(&[0.0; 5], 2, dt, k).is_err());
    }
}
