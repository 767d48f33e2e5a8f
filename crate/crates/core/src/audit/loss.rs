//! Privacy-loss Monte Carlo for shifted Gaussians and noisy projections.
//!
//! For `y ~ N(m, σ²I)` against the reference `N(0, σ²I)` the log density
//! ratio is `L(y) = (⟨y, m⟩ − ‖m‖²/2)/σ²`, distributed exactly as
//! `N(μ, 2μ)` with `μ = ‖m‖²/(2σ²)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::calibrate::ProtocolParams;
use crate::math::{c_delta, normal_tail};
use crate::rng::{gaussian_vec, standard_normal, Seed};
use crate::vector::RealVector;

/// Samples per independent RNG stream; fixes the reduction layout so
/// results do not depend on the thread count.
const CHUNK: usize = 1024;

const MIN_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLossEstimate {
    pub eps_target: f64,
    /// The probability budget the estimate is compared against, if any.
    pub delta_target: Option<f64>,
    /// Fraction of samples with `|L| > ε` (among all samples).
    pub empirical_exceed_rate: f64,
    /// Fraction of samples hitting the conditioning bad event.
    pub bad_event_rate: f64,
    /// `bad_event_rate + empirical_exceed_rate`.
    pub combined_rate: f64,
    /// Binomial SE of `combined_rate`.
    pub standard_error: f64,
    pub samples: usize,
}

impl PrivacyLossEstimate {
    fn from_counts(eps: f64, delta_target: Option<f64>, exceed: usize, bad: usize, samples: usize) -> Self {
        let n = samples as f64;
        let combined = (exceed + bad) as f64 / n;
        PrivacyLossEstimate {
            eps_target: eps,
            delta_target,
            empirical_exceed_rate: exceed as f64 / n,
            bad_event_rate: bad as f64 / n,
            combined_rate: combined,
            standard_error: (combined * (1.0 - combined) / n).sqrt(),
            samples,
        }
    }

    pub fn with_delta_target(mut self, delta: f64) -> Self {
        self.delta_target = Some(delta);
        self
    }

    /// `combined_rate ≤ delta_target + 3·SE`; false without a target.
    pub fn within_target(&self) -> bool {
        self.delta_target
            .is_some_and(|d| self.combined_rate <= d + 3.0 * self.standard_error)
    }
}

/// `L(y)` for one sample.
pub fn privacy_loss(y: &[f64], m: &[f64], sigma: f64) -> f64 {
    let dot: f64 = y.iter().zip(m).map(|(a, b)| a * b).sum();
    let mm: f64 = m.iter().map(|v| v * v).sum();
    (dot - mm / 2.0) / (sigma * sigma)
}

/// `Pr[|L| > ε]` in closed form.
pub fn analytic_exceed_probability(shift_norm: f64, sigma: f64, eps: f64) -> f64 {
    if shift_norm == 0.0 {
        return 0.0;
    }
    let s = shift_norm / sigma;
    let mu = s * s / 2.0;
    normal_tail((eps - mu) / s) + normal_tail((eps + mu) / s)
}

fn check_loss_args(shift_norm: f64, sigma: f64, k: usize, eps: f64, samples: usize) -> Result<()> {
    if !(shift_norm >= 0.0 && shift_norm.is_finite()) {
        return Err(invalid(format!("shift_norm must be finite and >= 0, got {shift_norm}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be finite and > 0, got {sigma}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be finite and > 0, got {eps}")));
    }
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    if samples < MIN_SAMPLES {
        return Err(invalid(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    Ok(())
}

/// Runs `f(rng, sample_count)` over fixed-size chunks and adds up the
/// `(exceed, bad)` counts.
fn chunked<F>(samples: usize, seed: &Seed, f: F) -> (usize, usize)
where
    F: Fn(&mut crate::rng::StreamRng, usize) -> (usize, usize) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(samples - c * CHUNK);
            f(&mut seed.derive_indexed("chunk", c as u64).rng(), len)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Empirical `Pr[|L| > ε]` for `y ~ N(m, σ²I_k)` with `‖m‖ = shift_norm`.
pub fn privacy_loss_mc(shift_norm: f64, sigma: f64, k: usize, eps: f64, samples: usize, seed: &Seed) -> Result<PrivacyLossEstimate> {
    check_loss_args(shift_norm, sigma, k, eps, samples)?;
    // rotation invariance: putting m on the first axis loses nothing
    let mut m = vec![0.0; k];
    m[0] = shift_norm;
    let (exceed, _) = chunked(samples, seed, |rng, len| {
        let mut hits = 0;
        for _ in 0..len {
            let mut y = gaussian_vec(rng, k, sigma);
            y[0] += shift_norm;
            if privacy_loss(&y, &m, sigma).abs() > eps {
                hits += 1;
            }
        }
        (hits, 0)
    });
    Ok(PrivacyLossEstimate::from_counts(eps, None, exceed, 0, samples))
}

/// Monte Carlo of the noisy-projection privacy claim for input `x`.
///
/// Each sample draws a fresh projection image `Wx`, flags it bad when
/// `‖Wx‖ > c_δ`, and otherwise evaluates one privacy-loss draw with shift
/// `Wx` and the worst-case noise `σ_v²` left when `|T| = S − 1`. The noise
/// is `k`-dimensional, matching the projection output.
///
/// `Wx` is drawn directly: for `W` with i.i.d. `N(0, 1/k)` entries its
/// coordinates are i.i.d. `N(0, ‖x‖²/k)`, so no `k×d` matrix is built.
pub fn conditioned_projection_privacy(
    params: &ProtocolParams,
    x: &RealVector,
    samples: usize,
    seed: &Seed,
) -> Result<PrivacyLossEstimate> {
    let xn = x.norm();
    if xn > 1.0 + 1e-12 {
        return Err(invalid(format!("need ‖x‖ <= 1, got {xn}")));
    }
    if x.dim() != params.dim {
        return Err(crate::Error::DimensionMismatch { expected: params.dim, actual: x.dim() });
    }
    let k = params.proj_dim;
    let worst_noise = params.sigma_v; // (S − |T|)·σ_v² with |T| = S − 1
    check_loss_args(xn, worst_noise, k, params.eps, samples)?;
    let cd = c_delta(k, params.delta)?;
    let scale = xn / (k as f64).sqrt();
    let (exceed, bad) = chunked(samples, seed, |rng, len| {
        let (mut hits, mut bads) = (0, 0);
        for _ in 0..len {
            let wx: Vec<f64> = (0..k).map(|_| scale * standard_normal(rng)).collect();
            if crate::vector::l2(&wx) > cd {
                bads += 1;
                continue;
            }
            let noise = gaussian_vec(rng, k, worst_noise);
            let y: Vec<f64> = wx.iter().zip(&noise).map(|(a, b)| a + b).collect();
            if privacy_loss(&y, &wx, worst_noise).abs() > params.eps {
                hits += 1;
            }
        }
        (hits, bads)
    });
    Ok(PrivacyLossEstimate::from_counts(params.eps, Some(2.0 * params.delta), exceed, bad, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::ks;
    use crate::math::calibrate::{calibrate, CalibrationRequest};
    use crate::math::{gaussian_sigma, ProjectionMatrix, SeedProvenance};

    #[test]
    fn zero_shift_never_exceeds() {
        let e = privacy_loss_mc(0.0, 1.0, 8, 0.1, 2000, &Seed::from_u64(1)).unwrap();
        assert_eq!(e.empirical_exceed_rate, 0.0);
        assert_eq!(analytic_exceed_probability(0.0, 1.0, 0.1), 0.0);
    }

    #[test]
    fn doubling_sigma_reduces_exceed_rate() {
        let seed = Seed::from_u64(2);
        let a = privacy_loss_mc(1.0, 1.0, 4, 0.5, 20_000, &seed).unwrap();
        let b = privacy_loss_mc(1.0, 2.0, 4, 0.5, 20_000, &seed).unwrap();
        assert!(b.empirical_exceed_rate < a.empirical_exceed_rate);
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let e = privacy_loss_mc(1.0, 1.0, 3, 1.0, 50_000, &Seed::from_u64(3)).unwrap();
        let p = analytic_exceed_probability(1.0, 1.0, 1.0);
        assert!((e.empirical_exceed_rate - p).abs() < 4.0 * (p * (1.0 - p) / 50_000.0).sqrt());
    }

    #[test]
    fn calibrated_sigma_meets_delta() {
        let sigma = gaussian_sigma(1.0, 1e-2, 1.0).unwrap();
        let e = privacy_loss_mc(1.0, sigma, 1, 1.0, 10_000, &Seed::from_u64(4)).unwrap().with_delta_target(1e-2);
        assert!(e.within_target());
    }

    #[test]
    fn argument_checks() {
        let s = Seed::from_u64(0);
        assert!(privacy_loss_mc(-1.0, 1.0, 1, 1.0, 1000, &s).is_err());
        assert!(privacy_loss_mc(1.0, 0.0, 1, 1.0, 1000, &s).is_err());
        assert!(privacy_loss_mc(1.0, 1.0, 1, 1.0, 999, &s).is_err());
    }

    #[test]
    fn zero_input_has_no_loss() {
        let p = calibrate(&CalibrationRequest::new(1.0, 1e-2, 0.05, 2, 64, 16)).unwrap().params;
        let e = conditioned_projection_privacy(&p, &RealVector::zeros(16), 2000, &Seed::from_u64(5)).unwrap();
        assert_eq!((e.bad_event_rate, e.empirical_exceed_rate), (0.0, 0.0));
    }

    #[test]
    fn direct_projection_draw_matches_full_matrix() {
        // ‖Wx‖ from full matrices vs the direct coordinate draw
        let (k, d) = (8, 5);
        let x = RealVector::new(vec![0.6, 0.0, -0.8, 0.0, 0.0]).unwrap();
        let full: Vec<f64> = (0..3000)
            .map(|t| {
                let w = ProjectionMatrix::sample(k, d, Seed::from_u64(6).derive_indexed("w", t), SeedProvenance::SharedRandomness).unwrap();
                w.apply(&x).unwrap().norm()
            })
            .collect();
        let mut rng = Seed::from_u64(7).rng();
        let direct: Vec<f64> = (0..3000)
            .map(|_| crate::vector::l2(&gaussian_vec(&mut rng, k, 1.0 / (k as f64).sqrt())))
            .collect();
        let stat = ks::two_sample_statistic(&full, &direct).unwrap();
        assert!(stat < ks::two_sample_critical_value(3000, 3000, 1e-3));
    }
}
