//! Per-marginal two-sample tests between real and simulated views.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ks;
use crate::error::{invalid, Error, Result};
use crate::math::calibrate::ProtocolParams;
use crate::norm::{run_norm_verification, simulate_norm_verification, WMode};
use crate::rng::Seed;
use crate::sharing::{share_vector, simulate_share_view};
use crate::sim::message::Message;
use crate::sim::party::{ClientId, PartyId};
use crate::sim::transcript::view_of;
use crate::sim::wire::Payload;
use crate::vector::RealVector;

/// Family-wise significance level of one closeness test.
pub const FAMILY_ALPHA: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Consistent,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub p_label: String,
    pub q_label: String,
    /// KS statistic per marginal.
    pub statistics: Vec<f64>,
    /// Per-marginal rejection threshold after Bonferroni correction.
    pub threshold: f64,
    pub alpha: f64,
    pub samples: usize,
    pub verdict: Verdict,
}

impl ClosenessReport {
    pub fn max_statistic(&self) -> f64 {
        self.statistics.iter().copied().fold(0.0, f64::max)
    }
}

/// Draws `samples` views from each sampler and runs one KS test per
/// marginal at level `FAMILY_ALPHA / marginals`.
///
/// Sample `t` of both samplers receives `seed.derive_indexed("sample", t)`;
/// samplers that must be independent should derive their own sub-seeds.
pub fn two_sample_closeness<P, Q>(
    (p_label, p): (&str, P),
    (q_label, q): (&str, Q),
    marginals: usize,
    samples: usize,
    seed: &Seed,
) -> Result<ClosenessReport>
where
    P: Fn(Seed) -> Result<Vec<f64>> + Sync,
    Q: Fn(Seed) -> Result<Vec<f64>> + Sync,
{
    if marginals == 0 || samples < 2 {
        return Err(invalid("need at least one marginal and two samples"));
    }
    let draw = |f: &(dyn Fn(Seed) -> Result<Vec<f64>> + Sync)| -> Result<Vec<Vec<f64>>> {
        let rows: Vec<Vec<f64>> = (0..samples)
            .into_par_iter()
            .map(|t| f(seed.derive_indexed("sample", t as u64)))
            .collect::<Result<_>>()?;
        if let Some(r) = rows.iter().find(|r| r.len() != marginals) {
            return Err(Error::ShapeMismatch(format!("sampler emitted {} marginals, expected {marginals}", r.len())));
        }
        // transpose to one column per marginal
        Ok((0..marginals).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
    };
    let a = draw(&p)?;
    let b = draw(&q)?;
    let statistics = a
        .par_iter()
        .zip(&b)
        .map(|(x, y)| ks::two_sample_statistic(x, y))
        .collect::<Result<Vec<_>>>()?;
    let alpha = FAMILY_ALPHA / marginals as f64;
    let threshold = ks::two_sample_critical_value(samples, samples, alpha);
    let verdict = if statistics.iter().any(|&s| s > threshold) { Verdict::Rejected } else { Verdict::Consistent };
    Ok(ClosenessReport {
        p_label: p_label.to_string(),
        q_label: q_label.to_string(),
        statistics,
        threshold,
        alpha,
        samples,
        verdict,
    })
}

/// Flattens the numeric content of a view: vectors coordinate-wise,
/// matrices entry-wise, accept bits as 0/1.
pub fn flatten_view(view: &[&Message]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for m in view {
        match Payload::decode(m.kind, &m.payload)? {
            Payload::Share { vector, .. } | Payload::Reply { vector, .. } | Payload::PartialSum(vector) => {
                out.extend_from_slice(vector.as_slice())
            }
            Payload::Matrix { entries, .. } => out.extend(entries),
            Payload::AcceptBit { accept, .. } => out.push(f64::from(u8::from(accept))),
            Payload::AcceptedSet(ids) => out.push(ids.len() as f64),
        }
    }
    Ok(out)
}

fn coalition(subset: &BTreeSet<usize>) -> BTreeSet<PartyId> {
    subset.iter().map(|&i| PartyId::Verifier(i)).collect()
}

/// Number of marginals of a norm-verification view for a coalition of
/// `t` verifiers (none of them verifier 0).
pub fn norm_view_marginals(params: &ProtocolParams, t: usize) -> usize {
    t * (params.dim + params.proj_dim * params.dim + 1)
}

// The view samplers below derive disjoint sub-seeds so that a real and a
// simulated view drawn from the same seed are independent.

/// The shares seen by `subset` when the prover shares `x`.
pub fn real_share_view(x: &RealVector, subset: &BTreeSet<usize>, params: &ProtocolParams, seed: Seed) -> Result<Vec<f64>> {
    let seed = seed.derive("real-view");
    let b = share_vector(ClientId::new("prover"), x, params.verifiers, params.sigma_ss, seed)?;
    Ok(b.restrict(subset).into_values().flat_map(RealVector::into_inner).collect())
}

pub fn simulated_share_view(subset: &BTreeSet<usize>, params: &ProtocolParams, seed: Seed) -> Result<Vec<f64>> {
    let seed = seed.derive("simulated-view");
    let v = simulate_share_view(subset, params.verifiers, params.dim, params.sigma_ss, seed)?;
    Ok(v.messages.into_values().flat_map(RealVector::into_inner).collect())
}

/// Everything `subset` receives in one real norm verification of `x`.
pub fn real_norm_view(x: &RealVector, subset: &BTreeSet<usize>, params: &ProtocolParams, seed: Seed) -> Result<Vec<f64>> {
    let seed = seed.derive("real-view");
    let id = ClientId::new("prover");
    let b = share_vector(id, x, params.verifiers, params.sigma_ss, seed.derive("shares"))?;
    let (_, t) = run_norm_verification(&b, params, seed.derive("session"), WMode::Shared)?;
    flatten_view(&view_of(&t, &coalition(subset))?)
}

/// The simulator's view for `subset`, with honest coalition replies.
pub fn simulated_norm_view(subset: &BTreeSet<usize>, params: &ProtocolParams, seed: Seed) -> Result<Vec<f64>> {
    let seed = seed.derive("simulated-view");
    let id = ClientId::new("prover");
    let sigma_v = params.sigma_v;
    let mut noise = seed.derive("coalition-noise").rng();
    let replier = |_i: usize, g: &RealVector, w: &crate::math::ProjectionMatrix| {
        let mut y = w.apply(g).expect("share dimension matches W");
        let e = crate::rng::gaussian_vec(&mut noise, y.dim(), sigma_v);
        y.add_assign(&RealVector::from_vec_unchecked(e)).expect("same dimension");
        y
    };
    let sim = simulate_norm_verification(id, subset, params, replier, seed)?;
    flatten_view(&view_of(&sim.transcript, &coalition(subset))?)
}
