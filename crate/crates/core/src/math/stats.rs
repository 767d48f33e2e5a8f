use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

/// Smallest `σ` such that `N(0, σ²I)` and `m + N(0, σ²I)` are
/// `(eps, delta)`-close for every shift with `‖m‖ ≤ sensitivity`.
pub fn gaussian_sigma(eps: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be > 0, got {eps}")));
    }
    check_unit_open("delta", delta)?;
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(invalid(format!("sensitivity must be > 0, got {sensitivity}")));
    }
    Ok(sensitivity * 2.0 * (2.0 / delta).ln().sqrt() / eps)
}

/// Laurent–Massart thresholds for a `χ²_k` variable `Q`:
/// `Pr[Q ≤ lower] ≤ e^{-x}` and `Pr[Q ≥ upper] ≤ e^{-x}`.
///
/// `lower` is returned as computed and may be negative, in which case the
/// lower tail statement is vacuous.
pub fn chi2_thresholds(k: usize, x: f64) -> Result<(f64, f64)> {
    if k < 1 {
        return Err(invalid("k must be >= 1"));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid(format!("x must be > 0, got {x}")));
    }
    let kf = k as f64;
    let r = (x / kf).sqrt();
    Ok((kf * (1.0 - 2.0 * r), kf * (1.0 + 2.0 * r + 2.0 * x / kf)))
}

/// High-probability bound on `‖Wx‖` for `‖x‖ ≤ 1` and `W` with i.i.d.
/// `N(0, 1/k)` entries: `Pr[‖Wx‖ ≥ c_δ] ≤ δ`.
pub fn c_delta(k: usize, delta: f64) -> Result<f64> {
    if k < 1 {
        return Err(invalid("k must be >= 1"));
    }
    check_unit_open("delta", delta)?;
    let l = (1.0 / delta).ln() / k as f64;
    Ok((1.0 + 2.0 * l.sqrt() + 2.0 * l).sqrt())
}

/// `Pr[N(0,1) > z]`, accurate far into the tail.
pub fn normal_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// CDF of `χ²_k` at `x`.
pub fn chi2_cdf(k: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ChiSquared::new(k as f64)
        .expect("k >= 1 is a valid chi-square degree")
        .cdf(x)
}

/// Quantile of `χ²_k`, found by bisection on the CDF to full `f64` resolution.
pub fn chi2_quantile(k: usize, p: f64) -> Result<f64> {
    if k < 1 {
        return Err(invalid("k must be >= 1"));
    }
    check_unit_open("p", p)?;
    let dist = ChiSquared::new(k as f64).expect("valid degree");
    let mut hi = k as f64 + 10.0 * (2.0 * k as f64).sqrt() + 10.0;
    while dist.cdf(hi) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dist.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub(crate) fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {v}")))
    }
}
