//! Kolmogorov–Smirnov statistics and asymptotic critical values.

use crate::error::{invalid, Result};

/// `sup_x |F_a(x) − F_b(x)|` between two empirical distributions.
///
/// Inputs need not be sorted. Ties across samples are handled by
/// advancing past every copy of a value before comparing.
pub fn two_sample_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS needs non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(invalid("KS samples contain NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// `sup_x |F_a(x) − F(x)|` against a continuous reference CDF.
pub fn one_sample_statistic(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if a.is_empty() {
        return Err(invalid("KS needs a non-empty sample"));
    }
    let mut a = a.to_vec();
    a.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    Ok(a.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// `c(α) = √(−ln(α/2)/2)`.
pub fn c_alpha(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// Rejection threshold of the two-sample test at level `alpha`.
pub fn two_sample_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    c_alpha(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Rejection threshold of the one-sample test at level `alpha`.
pub fn one_sample_critical_value(n: usize, alpha: f64) -> f64 {
    c_alpha(alpha) / (n as f64).sqrt()
}
