use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::AggregateResult;
use crate::error::{invalid, Result};
use crate::math::calibrate::ProtocolParams;
use crate::rng::Seed;
use crate::sim::scenario::{run_scenario, Scenario};

/// Empirical frequency with a 95% Wald interval clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
    pub standard_error: f64,
    pub ci95: (f64, f64),
}

impl RateEstimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(trials > 0 && successes <= trials, "need 0 <= successes <= trials, trials > 0");
        let n = trials as f64;
        let p = successes as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        RateEstimate {
            successes,
            trials,
            rate: p,
            standard_error: se,
            ci95: ((p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0)),
        }
    }

    /// `rate ≤ bound + 3·SE`.
    pub fn at_most(&self, bound: f64) -> bool {
        self.rate <= bound + 3.0 * self.standard_error
    }

    /// `rate ≥ bound − 3·SE`.
    pub fn at_least(&self, bound: f64) -> bool {
        self.rate >= bound - 3.0 * self.standard_error
    }
}

/// Counts `event` over `trials` independent draws, trial `t` using
/// `seed.derive_indexed("trial", t)`. Order-independent, so the parallel
/// run is reproducible.
pub fn count_parallel<F>(trials: usize, seed: &Seed, event: F) -> Result<RateEstimate>
where
    F: Fn(Seed) -> Result<bool> + Sync,
{
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| event(seed.derive_indexed("trial", t as u64)).map(u64::from))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(RateEstimate::new(hits, trials as u64))
}

/// Frequency of `event` over independent runs of `scenario`.
pub fn rate_estimate<F>(
    scenario: &Scenario,
    params: &ProtocolParams,
    event: F,
    trials: usize,
    seed: &Seed,
) -> Result<RateEstimate>
where
    F: Fn(&AggregateResult) -> bool + Sync,
{
    if trials < 100 {
        return Err(invalid(format!("rate_estimate needs >= 100 trials, got {trials}")));
    }
    scenario.validate()?;
    count_parallel(trials, seed, |s| Ok(event(&run_scenario(scenario, params, s)?.0)))
}
