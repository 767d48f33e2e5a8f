use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rate::RateEstimate;
use crate::error::{invalid, Result};
use crate::math::chi2_thresholds;
use crate::rng::Seed;

const CHUNK: usize = 1 << 14;

/// Empirical lower and upper tail frequencies of `χ²_k` at the
/// Laurent–Massart thresholds for `x`, each to be compared with `e^{−x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTail {
    pub k: usize,
    pub x: f64,
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    pub lower: RateEstimate,
    pub upper: RateEstimate,
    pub bound: f64,
}

impl ChiSquareTail {
    pub fn holds(&self) -> bool {
        self.lower.at_most(self.bound) && self.upper.at_most(self.bound)
    }
}

pub fn chi2_tail_frequencies(k: usize, x: f64, samples: usize, seed: &Seed) -> Result<ChiSquareTail> {
    let (lo, hi) = chi2_thresholds(k, x)?;
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let dist = ChiSquared::new(k as f64).map_err(|e| invalid(e.to_string()))?;
    let (below, above) = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.derive_indexed("chunk", c as u64).rng();
            let len = CHUNK.min(samples - c * CHUNK);
            let (mut b, mut a) = (0u64, 0u64);
            for _ in 0..len {
                let q: f64 = dist.sample(&mut rng);
                b += u64::from(q <= lo);
                a += u64::from(q >= hi);
            }
            (b, a)
        })
        .reduce(|| (0, 0), |p, q| (p.0 + q.0, p.1 + q.1));
    Ok(ChiSquareTail {
        k,
        x,
        lower_threshold: lo,
        upper_threshold: hi,
        lower: RateEstimate::new(below, samples as u64),
        upper: RateEstimate::new(above, samples as u64),
        bound: (-x).exp(),
    })
}
