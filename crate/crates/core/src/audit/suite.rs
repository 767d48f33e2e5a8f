//! The audit battery behind `robustsum audit`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::closeness::{
    norm_view_marginals, real_norm_view, real_share_view, simulated_norm_view, simulated_share_view,
    two_sample_closeness, Verdict,
};
use super::loss::{analytic_exceed_probability, conditioned_projection_privacy, privacy_loss_mc};
use super::rate::count_parallel;
use super::report::AuditRow;
use super::tails::chi2_tail_frequencies;
use crate::aggregate::MassPattern;
use crate::error::Result;
use crate::experiment::{completeness_trial, soundness_trial};
use crate::math::calibrate::{calibrate, CalibrationRequest};
use crate::math::gaussian_sigma;
use crate::norm::WMode;
use crate::rng::Seed;
use crate::sharing::Truncation;
use crate::vector::RealVector;

/// Sample sizes for the battery. [`SuiteConfig::default`] uses the full
/// sizes; [`SuiteConfig::quick`] trades power for speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub loss_samples: usize,
    pub chi2_samples: usize,
    pub closeness_samples: usize,
    pub rate_trials: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            loss_samples: 100_000,
            chi2_samples: 1_000_000,
            closeness_samples: 10_000,
            rate_trials: 10_000,
        }
    }
}

impl SuiteConfig {
    pub fn quick() -> Self {
        SuiteConfig {
            seed: 0,
            loss_samples: 10_000,
            chi2_samples: 100_000,
            closeness_samples: 2_000,
            rate_trials: 1_000,
        }
    }
}

/// Proper non-empty coalitions of `1..s` (never containing verifier 0).
pub fn coalitions_without_zero(s: usize) -> Vec<BTreeSet<usize>> {
    (1u32..(1 << (s - 1)))
        .map(|mask| (1..s).filter(|i| mask & (1 << (i - 1)) != 0).collect())
        .collect()
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<AuditRow>> {
    let master = Seed::from_u64(cfg.seed);
    let mut rows = Vec::new();

    // Gaussian mechanism, sampled at inflated δ and analytic at 1e-5
    let sigma = gaussian_sigma(1.0, 1e-2, 1.0)?;
    let e = privacy_loss_mc(1.0, sigma, 1, 1.0, cfg.loss_samples, &master.derive("gaussian"))?.with_delta_target(1e-2);
    rows.push(AuditRow::new(
        "gaussian-loss-mc",
        "eps=1 delta=1e-2 shift=1",
        e.combined_rate,
        1e-2 + 3.0 * e.standard_error,
        e.within_target(),
    ));
    let sigma5 = gaussian_sigma(1.0, 1e-5, 1.0)?;
    let p = analytic_exceed_probability(1.0, sigma5, 1.0);
    rows.push(AuditRow::new("gaussian-loss-analytic", "eps=1 delta=1e-5 shift=1", p, 1e-5, p <= 1e-5));

    // noisy projection at k = 64
    let params = calibrate(&CalibrationRequest::new(1.0, 1e-2, 0.05, 2, 64, 32))?.params;
    let x = MassPattern::Random.vector(&mut master.derive("x").rng(), 32, 1.0);
    let e = conditioned_projection_privacy(&params, &x, cfg.loss_samples, &master.derive("projection"))?;
    let se_bad = (e.bad_event_rate * (1.0 - e.bad_event_rate) / e.samples as f64).sqrt();
    rows.push(AuditRow::new(
        "projection-privacy",
        "eps=1 delta=1e-2 k=64 |x|=1",
        e.combined_rate,
        2e-2 + 3.0 * e.standard_error,
        e.within_target(),
    ));
    rows.push(AuditRow::new(
        "projection-bad-event",
        "delta=1e-2 k=64 |x|=1",
        e.bad_event_rate,
        1e-2 + 3.0 * se_bad,
        e.bad_event_rate <= 1e-2 + 3.0 * se_bad,
    ));

    for k in [8, 64, 256] {
        for x in [1.0, 3.0, 4.6] {
            let t = chi2_tail_frequencies(k, x, cfg.chi2_samples, &master.derive_indexed("chi2", (k as u64) << 8 | x as u64))?;
            for (side, r) in [("lower", t.lower), ("upper", t.upper)] {
                let thr = t.bound + 3.0 * r.standard_error;
                rows.push(AuditRow::new(&format!("chi2-tail-{side}"), format!("k={k} x={x}"), r.rate, thr, r.rate <= thr));
            }
        }
    }

    for s in [2, 3] {
        let params = calibrate(&CalibrationRequest::new(1.0, 1e-2, 0.05, s, 16, 4))?.params;
        let x = RealVector::new(vec![0.5; 4])?;
        for t in coalitions_without_zero(s) {
            let label = format!("S={s} T={t:?}");
            let seed = master.derive(&format!("closeness {label}"));
            let r = two_sample_closeness(
                ("real", |sd| real_share_view(&x, &t, &params, sd)),
                ("simulator", |sd| simulated_share_view(&t, &params, sd)),
                t.len() * params.dim,
                cfg.closeness_samples,
                &seed.derive("shares"),
            )?;
            rows.push(AuditRow::new("share-simulation", label.clone(), r.max_statistic(), r.threshold, r.verdict == Verdict::Consistent));
            let r = two_sample_closeness(
                ("real", |sd| real_norm_view(&x, &t, &params, sd)),
                ("simulator", |sd| simulated_norm_view(&t, &params, sd)),
                norm_view_marginals(&params, t.len()),
                cfg.closeness_samples,
                &seed.derive("norm"),
            )?;
            rows.push(AuditRow::new("norm-simulation", label, r.max_statistic(), r.threshold, r.verdict == Verdict::Consistent));
        }
    }

    let params = calibrate(&CalibrationRequest::new(1.0, 1e-2, 0.05, 2, 64, 32))?.params;
    let r = count_parallel(cfg.rate_trials, &master.derive("completeness"), |sd| {
        completeness_trial(&params, 1.0, MassPattern::Random, WMode::Shared, sd)
    })?;
    rows.push(AuditRow::new("completeness", "beta=0.05 S=2 k=64 d=32", r.rate, 0.95 - 3.0 * r.standard_error, r.at_least(0.95)));
    for pattern in [MassPattern::Concentrated, MassPattern::Spread] {
        let r = count_parallel(cfg.rate_trials, &master.derive(&format!("soundness {pattern:?}")), |sd| {
            soundness_trial(&params, params.rho, pattern, WMode::Shared, sd)
        })?;
        rows.push(AuditRow::new(
            "soundness",
            format!("beta=0.05 S=2 k=64 d=32 pattern={pattern:?}"),
            r.rate,
            0.05 + 3.0 * r.standard_error,
            r.at_most(0.05),
        ));
    }

    let clamp = Truncation::new(127.0, 1.0)?.clamp_probability(20.0);
    rows.push(AuditRow::new("truncation-clamp", "B=127 sigma=20", clamp, 1e-8, clamp <= 1e-8));
    Ok(rows)
}
