//! Robust secure aggregation across many clients.
//!
//! Schedule (one session, synchronous rounds):
//!
//! 0. each client sends its share `z_i^j` to verifier `i`
//! 1. verifier 0 sends the session's `W` to verifiers `1..S`
//! 2. each verifier `i ≥ 1` replies `y_i^j = W·z_i^j + noise` for every
//!    client it heard from
//! 3. verifier 0 keeps the clients heard by everyone (`J`), runs the norm
//!    test on each and sends the accepted set `J*`
//! 4. unless the optional validity check aborts, each verifier `i ≥ 1`
//!    sends `s_i = Σ_{j∈J*} z_i^j` and verifier 0 returns `Σ_i s_i`

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::calibrate::ProtocolParams;
use crate::norm::{decision_seed, decode_matrix, project_reply, reply_seed, verifier0_decide, ProjectionReply, VerificationOutcome, WMode};
use crate::rng::{gaussian_vec, Seed};
use crate::sharing::share_vector;
use crate::sim::bus::Bus;
use crate::sim::message::MessageKind;
use crate::sim::party::{ClientId, PartyId};
use crate::sim::transcript::Transcript;
use crate::sim::wire::{self, Payload, VectorEncoding};
use crate::vector::RealVector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    #[default]
    Honest,
    /// Shares a vector of (possibly) large norm.
    NormInflating,
    /// Sends one verifier a share of the wrong dimension.
    InconsistentShares,
    /// Skips one verifier entirely.
    PartialSend,
}

/// How an adversarial vector distributes its mass across coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassPattern {
    /// Uniformly random direction.
    #[default]
    Random,
    /// All mass on the first coordinate.
    Concentrated,
    /// Equal mass on every coordinate.
    Spread,
}

impl MassPattern {
    pub fn vector<R: Rng + ?Sized>(self, rng: &mut R, dim: usize, norm: f64) -> RealVector {
        match self {
            MassPattern::Random => RealVector::random_with_norm(rng, dim, norm),
            MassPattern::Concentrated => {
                let mut v = vec![0.0; dim];
                v[0] = norm;
                RealVector::from_vec_unchecked(v)
            }
            MassPattern::Spread => RealVector::from_vec_unchecked(vec![norm / (dim as f64).sqrt(); dim]),
        }
    }
}

/// Everything one client puts on the wire, one optional payload per
/// verifier. Payloads are raw values; verifiers validate them on receipt.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientSubmission {
    pub client_id: ClientId,
    pub behavior: Behavior,
    pub payloads: Vec<Option<Vec<f64>>>,
    /// The vector an honest client meant to contribute.
    pub input: Option<RealVector>,
}

impl ClientSubmission {
    pub fn honest(client_id: ClientId, x: &RealVector, params: &ProtocolParams, seed: Seed) -> Result<Self> {
        let bundle = share_vector(client_id.clone(), x, params.verifiers, params.sigma_ss, seed)?;
        Ok(ClientSubmission {
            client_id,
            behavior: Behavior::Honest,
            payloads: bundle.shares().iter().map(|s| Some(s.as_slice().to_vec())).collect(),
            input: Some(x.clone()),
        })
    }

    /// Well-formed Gaussian shares of `target`, whatever its norm.
    pub fn norm_inflating(client_id: ClientId, target: &RealVector, params: &ProtocolParams, seed: Seed) -> Result<Self> {
        let mut s = Self::honest(client_id, target, params, seed)?;
        s.behavior = Behavior::NormInflating;
        s.input = None;
        Ok(s)
    }

    pub fn partial_send(client_id: ClientId, x: &RealVector, params: &ProtocolParams, omit: usize, seed: Seed) -> Result<Self> {
        if omit >= params.verifiers {
            return Err(invalid(format!("cannot omit verifier {omit} of {}", params.verifiers)));
        }
        let mut s = Self::honest(client_id, x, params, seed)?;
        s.behavior = Behavior::PartialSend;
        s.payloads[omit] = None;
        Ok(s)
    }

    pub fn inconsistent_shares(client_id: ClientId, x: &RealVector, params: &ProtocolParams, target: usize, seed: Seed) -> Result<Self> {
        if target >= params.verifiers {
            return Err(invalid(format!("no verifier {target} among {}", params.verifiers)));
        }
        let mut s = Self::honest(client_id, x, params, seed)?;
        s.behavior = Behavior::InconsistentShares;
        if let Some(p) = s.payloads[target].as_mut() {
            p.push(0.0);
        }
        Ok(s)
    }

    /// `Σ_i z_i` when every payload is present and has the same length.
    pub fn share_sum(&self) -> Option<Vec<f64>> {
        let first = self.payloads.first()?.as_ref()?;
        let mut acc = first.clone();
        for p in &self.payloads[1..] {
            let p = p.as_ref()?;
            if p.len() != acc.len() {
                return None;
            }
            acc.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        Some(acc)
    }
}

/// Accept iff `|J*| ≥ threshold_fraction · n`.
pub fn validity_check(accepted: usize, n: usize, threshold_fraction: f64) -> bool {
    accepted as f64 >= threshold_fraction * n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationOptions {
    pub w_mode: WMode,
    /// Abort unless `|J*| ≥ fraction · n`.
    pub validity_threshold: Option<f64>,
    /// Std of Gaussian noise each verifier adds to its partial sum.
    pub output_noise: Option<f64>,
}

impl Default for AggregationOptions {
    fn default() -> Self {
        AggregationOptions {
            w_mode: WMode::Shared,
            validity_threshold: None,
            output_noise: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    /// Absent when the session aborted.
    pub sum: Option<RealVector>,
    /// `J*`, in submission order.
    pub accepted: Vec<ClientId>,
    /// `J`: clients whose shares reached every verifier.
    pub eligible: Vec<ClientId>,
    pub aborted: bool,
    pub per_client_outcomes: BTreeMap<ClientId, VerificationOutcome>,
}

impl AggregateResult {
    pub fn is_accepted(&self, id: &ClientId) -> bool {
        self.accepted.contains(id)
    }
}

fn abort(e: Error) -> Error {
    Error::ProtocolAbort(e.to_string())
}

/// Runs one aggregation session over the message bus.
pub fn run_aggregation(
    submissions: &[ClientSubmission],
    params: &ProtocolParams,
    options: &AggregationOptions,
    seed: Seed,
) -> Result<(AggregateResult, Transcript)> {
    params.validate()?;
    if let Some(f) = options.validity_threshold {
        if !(f > 0.0 && f <= 1.0) {
            return Err(invalid(format!("validity threshold must lie in (0, 1], got {f}")));
        }
    }
    if let Some(s) = options.output_noise {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(invalid(format!("output noise must be >= 0, got {s}")));
        }
    }
    let s = params.verifiers;
    let d = params.dim;
    let mut seen = HashSet::new();
    for sub in submissions {
        if !seen.insert(&sub.client_id) {
            return Err(Error::DuplicateClientId(sub.client_id.to_string()));
        }
        if sub.payloads.len() != s {
            return Err(invalid(format!(
                "client {} lists {} payload slots for {s} verifiers",
                sub.client_id,
                sub.payloads.len()
            )));
        }
    }
    let enc = VectorEncoding::from_truncation(params.truncation.as_ref());
    let mut bus = Bus::new();

    // round 0: shares
    for sub in submissions {
        let from = PartyId::Client(sub.client_id.clone());
        for (i, p) in sub.payloads.iter().enumerate() {
            if let Some(values) = p {
                bus.send(from.clone(), PartyId::Verifier(i), MessageKind::Share, wire::encode_share(&sub.client_id, values, &enc));
            }
        }
    }
    bus.deliver();

    // every verifier ingests the shares it received: V_i
    let mut received: Vec<Vec<(ClientId, RealVector)>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut vi = Vec::new();
        let mut ids = HashSet::new();
        for m in bus.take_inbox(&PartyId::Verifier(i)) {
            let PartyId::Client(sender) = &m.sender else { continue };
            if m.kind != MessageKind::Share {
                continue;
            }
            // malformed or mislabelled shares count as not received
            if let Ok(Payload::Share { client, vector }) = Payload::decode(m.kind, &m.payload) {
                if &client == sender && vector.dim() == d && ids.insert(client.clone()) {
                    vi.push((client, vector));
                }
            }
        }
        received.push(vi);
    }

    // round 1: projection matrix
    let w = options.w_mode.sample_matrix(&seed, params.proj_dim, d)?;
    let w_bytes = wire::encode_matrix(w.rows(), w.cols(), w.entries());
    for i in 1..s {
        bus.send(PartyId::Verifier(0), PartyId::Verifier(i), MessageKind::Matrix, w_bytes.clone());
    }
    bus.deliver();

    // round 2: projections
    for i in 1..s {
        let me = PartyId::Verifier(i);
        let matrix = bus
            .take_inbox(&me)
            .into_iter()
            .find(|m| m.kind == MessageKind::Matrix)
            .map(|m| decode_matrix(&m.payload, params, options.w_mode))
            .ok_or_else(|| Error::ProtocolAbort(format!("verifier {i} received no matrix")))?
            .map_err(abort)?;
        for (client, z) in &received[i] {
            let r = project_reply(client.clone(), i, z, &matrix, params.sigma_v, reply_seed(&seed, i, client))?;
            bus.send(me.clone(), PartyId::Verifier(0), MessageKind::Reply, wire::encode_reply(client, &r.y));
        }
    }
    bus.deliver();

    // round 3: decisions at verifier 0
    let v0 = PartyId::Verifier(0);
    let mut replies: HashMap<ClientId, Vec<ProjectionReply>> = HashMap::new();
    for m in bus.take_inbox(&v0) {
        let (MessageKind::Reply, PartyId::Verifier(i)) = (m.kind, &m.sender) else { continue };
        match Payload::decode(m.kind, &m.payload).map_err(abort)? {
            Payload::Reply { client, vector } => replies.entry(client.clone()).or_default().push(ProjectionReply {
                client_id: client,
                verifier_index: *i,
                y: vector,
            }),
            _ => unreachable!(),
        }
    }
    let mut eligible = Vec::new();
    let mut accepted = Vec::new();
    let mut outcomes = BTreeMap::new();
    for (client, z0) in &received[0] {
        let Some(rs) = replies.get(client) else { continue };
        if rs.len() != s - 1 {
            continue;
        }
        eligible.push(client.clone());
        let o = verifier0_decide(client.clone(), z0, rs, &w, s, params.sigma_v, params.tau, decision_seed(&seed, client))?;
        if o.accept {
            accepted.push(client.clone());
        }
        outcomes.insert(client.clone(), o);
    }
    let set_bytes = wire::encode_accepted_set(&accepted);
    for i in 1..s {
        bus.send(v0.clone(), PartyId::Verifier(i), MessageKind::AcceptedSet, set_bytes.clone());
    }
    bus.deliver();

    let aborted = options
        .validity_threshold
        .is_some_and(|f| !validity_check(accepted.len(), submissions.len(), f));
    if aborted {
        let result = AggregateResult {
            sum: None,
            accepted,
            eligible,
            aborted: true,
            per_client_outcomes: outcomes,
        };
        return Ok((result, Transcript::new(seed, params.clone(), bus.into_messages())));
    }

    // round 4: partial sums
    let partial = |i: usize, set: &[ClientId]| -> Result<RealVector> {
        let by_id: HashMap<&ClientId, &RealVector> = received[i].iter().map(|(c, z)| (c, z)).collect();
        let mut acc = RealVector::zeros(d);
        for c in set {
            let z = by_id
                .get(c)
                .ok_or_else(|| Error::ProtocolAbort(format!("verifier {i} has no share for accepted client {c}")))?;
            acc.add_assign(z)?;
        }
        if let Some(sigma) = options.output_noise.filter(|&s| s > 0.0) {
            let noise = gaussian_vec(&mut PartyId::Verifier(i).seed(&seed).derive("output-noise").rng(), d, sigma);
            acc.add_assign(&RealVector::from_vec_unchecked(noise))?;
        }
        Ok(acc)
    };
    for i in 1..s {
        let me = PartyId::Verifier(i);
        let set = bus
            .take_inbox(&me)
            .into_iter()
            .find(|m| m.kind == MessageKind::AcceptedSet)
            .map(|m| Payload::decode(m.kind, &m.payload))
            .ok_or_else(|| Error::ProtocolAbort(format!("verifier {i} received no accepted set")))?
            .map_err(abort)?;
        let Payload::AcceptedSet(set) = set else { unreachable!() };
        let si = partial(i, &set)?;
        bus.send(me, v0.clone(), MessageKind::PartialSum, wire::encode_partial_sum(&si));
    }
    bus.deliver();

    let mut total = partial(0, &accepted)?;
    let mut sums: Vec<(usize, RealVector)> = Vec::with_capacity(s - 1);
    for m in bus.take_inbox(&v0) {
        let (MessageKind::PartialSum, PartyId::Verifier(i)) = (m.kind, &m.sender) else { continue };
        let Payload::PartialSum(si) = Payload::decode(m.kind, &m.payload).map_err(abort)? else { unreachable!() };
        sums.push((*i, si));
    }
    sums.sort_by_key(|(i, _)| *i);
    for (_, si) in &sums {
        total.add_assign(si)?;
    }

    let result = AggregateResult {
        sum: Some(total),
        accepted,
        eligible,
        aborted: false,
        per_client_outcomes: outcomes,
    };
    Ok((result, Transcript::new(seed, params.clone(), bus.into_messages())))
}

/// `‖sum_with − sum_without‖₂`.
pub fn robustness_delta(with: &AggregateResult, without: &AggregateResult) -> Result<f64> {
    match (&with.sum, &without.sum) {
        (Some(a), Some(b)) if !with.aborted && !without.aborted => a.distance(b),
        _ => Err(Error::AbortedInput),
    }
}
