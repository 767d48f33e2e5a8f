//! Gaussian additive secret sharing of real vectors.
//!
//! A prover holding `x` draws `g_1 … g_{S−1} ~ N(0, σ_ss²·I_d)`, sends `g_i`
//! to verifier `i` and `x − Σ g_i` to verifier 0. Any coalition missing
//! verifier 0 sees independent Gaussians, so its view can be produced
//! exactly by [`simulate_share_view`]; a coalition that includes verifier 0
//! sees `x` masked by `N(0, (S−|T|)·σ_ss²·I_d)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::stats::normal_tail;
use crate::rng::{gaussian_vec, Seed};
use crate::sim::party::ClientId;
use crate::vector::RealVector;

/// The `S` additive shares produced by one prover. Share 0 goes to
/// verifier 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ShareBundle {
    pub client_id: ClientId,
    shares: Vec<RealVector>,
}

impl ShareBundle {
    pub fn new(client_id: ClientId, shares: Vec<RealVector>) -> Result<Self> {
        if shares.len() < 2 {
            return Err(invalid(format!("need at least 2 shares, got {}", shares.len())));
        }
        let d = shares[0].dim();
        if let Some(bad) = shares.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.dim(),
            });
        }
        Ok(ShareBundle { client_id, shares })
    }

    pub fn shares(&self) -> &[RealVector] {
        &self.shares
    }

    pub fn num_shares(&self) -> usize {
        self.shares.len()
    }

    pub fn dim(&self) -> usize {
        self.shares[0].dim()
    }

    /// Messages the verifiers in `subset` receive.
    pub fn restrict(&self, subset: &BTreeSet<usize>) -> BTreeMap<usize, RealVector> {
        subset
            .iter()
            .filter_map(|&i| self.shares.get(i).map(|s| (i, s.clone())))
            .collect()
    }

    pub fn truncated(&self, t: &Truncation) -> ShareBundle {
        ShareBundle {
            client_id: self.client_id.clone(),
            shares: self.shares.iter().map(|s| t.apply(s)).collect(),
        }
    }
}

pub fn share_vector(
    client_id: ClientId,
    x: &RealVector,
    verifiers: usize,
    sigma_ss: f64,
    seed: Seed,
) -> Result<ShareBundle> {
    if verifiers < 2 {
        return Err(invalid(format!("need at least 2 verifiers, got {verifiers}")));
    }
    if !(sigma_ss > 0.0 && sigma_ss.is_finite()) {
        return Err(invalid(format!("sigma_ss must be > 0, got {sigma_ss}")));
    }
    let d = x.dim();
    let mut rng = seed.rng();
    let mut first = x.clone();
    let mut shares = Vec::with_capacity(verifiers);
    shares.push(RealVector::zeros(d));
    for _ in 1..verifiers {
        let g = RealVector::from_vec_unchecked(gaussian_vec(&mut rng, d, sigma_ss));
        first.sub_assign(&g)?;
        shares.push(g);
    }
    shares[0] = first;
    Ok(ShareBundle { client_id, shares })
}

/// Coordinatewise sum of all shares.
pub fn reconstruct(bundle: &ShareBundle) -> Result<RealVector> {
    sum_vectors(bundle.shares.iter())
}

pub(crate) fn sum_vectors<'a>(mut it: impl Iterator<Item = &'a RealVector>) -> Result<RealVector> {
    let mut acc = it
        .next()
        .ok_or_else(|| invalid("cannot sum an empty collection"))?
        .clone();
    for v in it {
        acc.add_assign(v)?;
    }
    Ok(acc)
}

/// Simulated messages to a coalition `T` of verifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedShareView {
    pub subset: BTreeSet<usize>,
    pub messages: BTreeMap<usize, RealVector>,
}

pub(crate) fn check_proper_subset(subset: &BTreeSet<usize>, verifiers: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("coalition must be non-empty".into()));
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= verifiers) {
        return Err(Error::InvalidSubset(format!(
            "verifier {i} out of range for S = {verifiers}"
        )));
    }
    if subset.len() >= verifiers {
        return Err(Error::InvalidSubset(
            "coalition must exclude at least one verifier".into(),
        ));
    }
    Ok(())
}

/// Produces `T`'s view of a sharing without knowing the secret.
///
/// Verifiers `i ≠ 0` in `T` get fresh `N(0, σ_ss²)` vectors. If verifier 0
/// is in `T` it gets `g − Σ_{i∈T, i≠0} g_i` with `g ~ N(0, (S−|T|)·σ_ss²)`.
pub fn simulate_share_view(
    subset: &BTreeSet<usize>,
    verifiers: usize,
    dim: usize,
    sigma_ss: f64,
    seed: Seed,
) -> Result<SimulatedShareView> {
    check_proper_subset(subset, verifiers)?;
    if dim < 1 {
        return Err(invalid("dimension must be >= 1"));
    }
    if !(sigma_ss > 0.0 && sigma_ss.is_finite()) {
        return Err(invalid(format!("sigma_ss must be > 0, got {sigma_ss}")));
    }
    let mut rng = seed.rng();
    let mut messages = BTreeMap::new();
    for &i in subset.iter().filter(|&&i| i != 0) {
        messages.insert(
            i,
            RealVector::from_vec_unchecked(gaussian_vec(&mut rng, dim, sigma_ss)),
        );
    }
    if subset.contains(&0) {
        let spread = ((verifiers - subset.len()) as f64).sqrt() * sigma_ss;
        let mut m0 = RealVector::from_vec_unchecked(gaussian_vec(&mut rng, dim, spread));
        for g in messages.values() {
            m0.sub_assign(g)?;
        }
        messages.insert(0, m0);
    }
    Ok(SimulatedShareView {
        subset: subset.clone(),
        messages,
    })
}

/// Clamp-and-round post-processing of shares onto a grid of width `step`
/// inside `[−bound, bound]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub bound: f64,
    pub step: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            bound: 127.0,
            step: 1.0,
        }
    }
}

impl Truncation {
    pub fn new(bound: f64, step: f64) -> Result<Self> {
        let t = Truncation { bound, step };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(invalid(format!("truncation bound must be > 0, got {}", self.bound)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("quantization step must be > 0, got {}", self.step)));
        }
        if self.max_code() > (1i64 << 52) {
            return Err(invalid("bound/step ratio too large to quantize exactly"));
        }
        Ok(())
    }

    /// Largest representable grid index.
    pub fn max_code(&self) -> i64 {
        (self.bound / self.step).floor() as i64
    }

    /// Grid index of a single coordinate.
    pub fn code(&self, v: f64) -> i64 {
        let max = self.max_code();
        let c = (v.clamp(-self.bound, self.bound) / self.step).round() as i64;
        c.clamp(-max, max)
    }

    pub fn apply(&self, share: &RealVector) -> RealVector {
        RealVector::from_vec_unchecked(
            share
                .as_slice()
                .iter()
                .map(|&v| self.code(v) as f64 * self.step)
                .collect(),
        )
    }

    /// Per-coordinate probability that a `N(0, σ²)` share is clamped.
    pub fn clamp_probability(&self, sigma: f64) -> f64 {
        2.0 * normal_tail(self.bound / sigma)
    }
}

/// Clamps every coordinate to `[−bound, bound]` and rounds it to the
/// nearest multiple of `step`.
pub fn truncate_share(share: &RealVector, bound: f64, step: f64) -> Result<RealVector> {
    Ok(Truncation::new(bound, step)?.apply(share))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id() -> ClientId {
        ClientId::new("c0")
    }

    #[test]
    fn zero_vector_shares_sum_to_zero() {
        let b = share_vector(id(), &RealVector::zeros(5), 3, 4.0, Seed::from_u64(1)).unwrap();
        let r = reconstruct(&b).unwrap();
        assert!(r.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_share_identity() {
        let x = RealVector::new(vec![0.3, -0.4, 0.5]).unwrap();
        let b = share_vector(id(), &x, 2, 7.0, Seed::from_u64(2)).unwrap();
        for j in 0..3 {
            assert!((b.shares()[0][j] + b.shares()[1][j] - x[j]).abs() <= 1e-9);
        }
    }

    #[test]
    fn share_vector_errors() {
        let x = RealVector::zeros(2);
        assert!(share_vector(id(), &x, 1, 1.0, Seed::from_u64(0)).is_err());
        assert!(share_vector(id(), &x, 2, 0.0, Seed::from_u64(0)).is_err());
        assert!(share_vector(id(), &x, 2, f64::NAN, Seed::from_u64(0)).is_err());
    }

    #[test]
    fn share_vector_is_deterministic() {
        let x = RealVector::new(vec![0.1; 4]).unwrap();
        let a = share_vector(id(), &x, 3, 2.0, Seed::from_u64(9)).unwrap();
        let b = share_vector(id(), &x, 3, 2.0, Seed::from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reconstruct_mismatch_and_zero() {
        assert!(ShareBundle::new(id(), vec![RealVector::zeros(2), RealVector::zeros(3)]).is_err());
        let b = ShareBundle::new(id(), vec![RealVector::zeros(3); 4]).unwrap();
        assert_eq!(reconstruct(&b).unwrap(), RealVector::zeros(3));
    }

    #[test]
    fn simulator_subset_rules() {
        let full: BTreeSet<usize> = [0, 1].into();
        assert!(simulate_share_view(&full, 2, 3, 1.0, Seed::from_u64(0)).is_err());
        assert!(simulate_share_view(&BTreeSet::new(), 2, 3, 1.0, Seed::from_u64(0)).is_err());
        assert!(simulate_share_view(&[5].into(), 2, 3, 1.0, Seed::from_u64(0)).is_err());
        let v = simulate_share_view(&[1].into(), 2, 3, 1.0, Seed::from_u64(0)).unwrap();
        assert_eq!(v.messages.len(), 1);
        assert_eq!(v.messages[&1].dim(), 3);
    }

    #[test]
    fn truncation_examples() {
        let v = RealVector::new(vec![200.0, -3.0, 126.6, -500.0]).unwrap();
        let t = truncate_share(&v, 127.0, 1.0).unwrap();
        assert_eq!(t.as_slice(), &[127.0, -3.0, 127.0, -127.0]);
        assert_eq!(truncate_share(&t, 127.0, 1.0).unwrap(), t);
        assert!(truncate_share(&v, 0.0, 1.0).is_err());
        assert!(truncate_share(&v, 1.0, 0.0).is_err());
    }

    #[test]
    fn truncation_stays_inside_bound_off_grid() {
        let t = Truncation::new(1.5, 1.0).unwrap();
        let out = t.apply(&RealVector::new(vec![2.0, -9.0, 1.49]).unwrap());
        assert_eq!(out.as_slice(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn clamp_probability_for_eight_bit_example() {
        let t = Truncation::default();
        assert!(t.clamp_probability(20.0) <= 1e-8);
    }
}
