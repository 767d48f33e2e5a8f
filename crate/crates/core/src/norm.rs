//! Norm verification over secret shares.
//!
//! Verifier 0 broadcasts a `k × d` Gaussian projection `W`. Every other
//! verifier `i` replies with `y_i = W·z_i + N(0, σ_v²·I_k)`. Verifier 0
//! forms `v = W·z_0 + Σ y_i + N(0, σ_v²·I_k)` and accepts iff `‖v‖ < τ`.
//! Because projection is linear, `v` depends on the shares only through
//! `W·Σz_i`, so the verifiers never see `x` itself.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::calibrate::ProtocolParams;
use crate::math::projection::{ProjectionMatrix, SeedProvenance};
use crate::rng::{gaussian_vec, Seed};
use crate::sharing::{check_proper_subset, ShareBundle};
use crate::sim::bus::Bus;
use crate::sim::message::MessageKind;
use crate::sim::party::{ClientId, PartyId};
use crate::sim::transcript::Transcript;
use crate::sim::wire::{self, Payload, VectorEncoding};
use crate::vector::RealVector;

/// Where the projection matrix comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WMode {
    /// Verifier 0's private stream; privacy needs an honest verifier 0.
    Verifier0,
    /// A stream all verifiers can recompute.
    #[default]
    Shared,
}

impl WMode {
    pub fn provenance(self) -> SeedProvenance {
        match self {
            WMode::Verifier0 => SeedProvenance::Verifier0Private,
            WMode::Shared => SeedProvenance::SharedRandomness,
        }
    }

    /// Seed of the session's projection matrix.
    pub fn matrix_seed(self, master: &Seed) -> Seed {
        match self {
            WMode::Verifier0 => PartyId::Verifier(0).seed(master).derive("projection"),
            WMode::Shared => master.derive("shared-randomness").derive("projection"),
        }
    }

    pub fn sample_matrix(self, master: &Seed, k: usize, d: usize) -> Result<ProjectionMatrix> {
        ProjectionMatrix::sample(k, d, self.matrix_seed(master), self.provenance())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReply {
    pub client_id: ClientId,
    pub verifier_index: usize,
    pub y: RealVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub client_id: ClientId,
    pub accept: bool,
    pub v_norm: f64,
    pub tau: f64,
}

fn check_sigma(sigma_v: f64) -> Result<()> {
    if sigma_v > 0.0 && sigma_v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("sigma_v must be finite and > 0, got {sigma_v}")))
    }
}

/// `W·noise`-free part plus fresh `N(0, σ_v²·I_k)` noise drawn from `seed`.
pub fn project_reply(
    client_id: ClientId,
    verifier_index: usize,
    share: &RealVector,
    w: &ProjectionMatrix,
    sigma_v: f64,
    seed: Seed,
) -> Result<ProjectionReply> {
    check_sigma(sigma_v)?;
    let mut y = w.apply(share)?;
    let noise = RealVector::from_vec_unchecked(gaussian_vec(&mut seed.rng(), w.rows(), sigma_v));
    y.add_assign(&noise)?;
    Ok(ProjectionReply {
        client_id,
        verifier_index,
        y,
    })
}

/// Verifier 0's aggregation and threshold test.
///
/// `replies` must hold exactly one reply for each verifier `1..verifiers`.
#[allow(clippy::too_many_arguments)]
pub fn verifier0_decide(
    client_id: ClientId,
    share0: &RealVector,
    replies: &[ProjectionReply],
    w: &ProjectionMatrix,
    verifiers: usize,
    sigma_v: f64,
    tau: f64,
    seed: Seed,
) -> Result<VerificationOutcome> {
    check_sigma(sigma_v)?;
    if !(tau > 0.0) {
        return Err(invalid(format!("tau must be > 0, got {tau}")));
    }
    let mut seen = vec![false; verifiers];
    for r in replies {
        if r.verifier_index == 0 || r.verifier_index >= verifiers {
            return Err(invalid(format!("reply from out-of-range verifier {}", r.verifier_index)));
        }
        if std::mem::replace(&mut seen[r.verifier_index], true) {
            return Err(invalid(format!("two replies from verifier {}", r.verifier_index)));
        }
        if r.y.dim() != w.rows() {
            return Err(Error::DimensionMismatch {
                expected: w.rows(),
                actual: r.y.dim(),
            });
        }
    }
    if let Some(missing) = (1..verifiers).find(|&i| !seen[i]) {
        return Err(Error::MissingReply(missing));
    }
    let mut sorted: Vec<&ProjectionReply> = replies.iter().collect();
    sorted.sort_by_key(|r| r.verifier_index);

    let mut v = w.apply(share0)?;
    for r in sorted {
        v.add_assign(&r.y)?;
    }
    let noise = RealVector::from_vec_unchecked(gaussian_vec(&mut seed.rng(), w.rows(), sigma_v));
    v.add_assign(&noise)?;
    let v_norm = v.norm();
    Ok(VerificationOutcome {
        client_id,
        // reject iff ‖v‖ ≥ τ
        accept: v_norm < tau,
        v_norm,
        tau,
    })
}

pub(crate) fn reply_seed(master: &Seed, verifier: usize, client: &ClientId) -> Seed {
    PartyId::Verifier(verifier)
        .seed(master)
        .derive("projection-noise")
        .derive(client.as_str())
}

pub(crate) fn decision_seed(master: &Seed, client: &ClientId) -> Seed {
    PartyId::Verifier(0)
        .seed(master)
        .derive("decision-noise")
        .derive(client.as_str())
}

pub(crate) fn decode_matrix(bytes: &[u8], params: &ProtocolParams, mode: WMode) -> Result<ProjectionMatrix> {
    match Payload::decode(MessageKind::Matrix, bytes)? {
        Payload::Matrix { rows, cols, entries } if rows == params.proj_dim && cols == params.dim => {
            ProjectionMatrix::from_entries(rows, cols, entries, mode.provenance())
        }
        Payload::Matrix { rows, cols, .. } => Err(Error::ShapeMismatch(format!(
            "received a {rows}x{cols} matrix, expected {}x{}",
            params.proj_dim, params.dim
        ))),
        _ => unreachable!("decode returns the requested kind"),
    }
}

/// Runs the whole single-client protocol over the message bus.
///
/// Message schedule: the prover sends one share to each of the `S`
/// verifiers, verifier 0 sends `W` to verifiers `1..S`, they reply, and
/// verifier 0 broadcasts the accept bit: `S + 3·(S − 1)` messages.
pub fn run_norm_verification(
    bundle: &ShareBundle,
    params: &ProtocolParams,
    session_seed: Seed,
    mode: WMode,
) -> Result<(VerificationOutcome, Transcript)> {
    params.validate()?;
    let s = params.verifiers;
    if bundle.num_shares() != s {
        return Err(invalid(format!(
            "bundle has {} shares for {s} verifiers",
            bundle.num_shares()
        )));
    }
    if bundle.dim() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            actual: bundle.dim(),
        });
    }
    let client = PartyId::Client(bundle.client_id.clone());
    let enc = VectorEncoding::from_truncation(params.truncation.as_ref());
    let abort = |e: Error| Error::ProtocolAbort(e.to_string());

    let mut bus = Bus::new();
    for (i, share) in bundle.shares().iter().enumerate() {
        bus.send(
            client.clone(),
            PartyId::Verifier(i),
            MessageKind::Share,
            wire::encode_share(&bundle.client_id, share.as_slice(), &enc),
        );
    }
    bus.deliver();

    let w = mode.sample_matrix(&session_seed, params.proj_dim, params.dim)?;
    let w_bytes = wire::encode_matrix(w.rows(), w.cols(), w.entries());
    for i in 1..s {
        bus.send(PartyId::Verifier(0), PartyId::Verifier(i), MessageKind::Matrix, w_bytes.clone());
    }
    bus.deliver();

    for i in 1..s {
        let me = PartyId::Verifier(i);
        let inbox = bus.take_inbox(&me);
        let mut share = None;
        let mut matrix = None;
        for m in inbox {
            match m.kind {
                MessageKind::Share => match Payload::decode(m.kind, &m.payload).map_err(abort)? {
                    Payload::Share { client, vector } if client == bundle.client_id => share = Some(vector),
                    _ => return Err(Error::ProtocolAbort("share names the wrong client".into())),
                },
                MessageKind::Matrix => matrix = Some(decode_matrix(&m.payload, params, mode).map_err(abort)?),
                _ => {}
            }
        }
        let share = share.ok_or_else(|| Error::ProtocolAbort(format!("verifier {i} received no share")))?;
        let matrix = matrix.ok_or_else(|| Error::ProtocolAbort(format!("verifier {i} received no matrix")))?;
        let reply = project_reply(
            bundle.client_id.clone(),
            i,
            &share,
            &matrix,
            params.sigma_v,
            reply_seed(&session_seed, i, &bundle.client_id),
        )
        .map_err(abort)?;
        bus.send(me, PartyId::Verifier(0), MessageKind::Reply, wire::encode_reply(&reply.client_id, &reply.y));
    }
    bus.deliver();

    let v0 = PartyId::Verifier(0);
    let mut share0 = None;
    let mut replies = Vec::with_capacity(s - 1);
    for m in bus.take_inbox(&v0) {
        match (m.kind, &m.sender) {
            (MessageKind::Share, _) => match Payload::decode(m.kind, &m.payload).map_err(abort)? {
                Payload::Share { client, vector } if client == bundle.client_id => share0 = Some(vector),
                _ => return Err(Error::ProtocolAbort("share names the wrong client".into())),
            },
            (MessageKind::Reply, PartyId::Verifier(i)) => match Payload::decode(m.kind, &m.payload).map_err(abort)? {
                Payload::Reply { client, vector } if client == bundle.client_id => replies.push(ProjectionReply {
                    client_id: client,
                    verifier_index: *i,
                    y: vector,
                }),
                _ => return Err(Error::ProtocolAbort("reply names the wrong client".into())),
            },
            _ => {}
        }
    }
    let share0 = share0.ok_or_else(|| Error::ProtocolAbort("verifier 0 received no share".into()))?;
    let outcome = verifier0_decide(
        bundle.client_id.clone(),
        &share0,
        &replies,
        &w,
        s,
        params.sigma_v,
        params.tau,
        decision_seed(&session_seed, &bundle.client_id),
    )?;
    let bit = wire::encode_accept_bit(&outcome.client_id, outcome.accept);
    for i in 1..s {
        bus.send(v0.clone(), PartyId::Verifier(i), MessageKind::AcceptBit, bit.clone());
    }
    bus.deliver();

    Ok((outcome, Transcript::new(session_seed, params.clone(), bus.into_messages())))
}

/// Output of the norm-verification simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedVerification {
    pub transcript: Transcript,
    pub v_sim: RealVector,
    pub accept: bool,
}

/// Simulates a coalition `T` (with `0 ∉ T`) without the prover's input.
///
/// `replier` plays the coalition: given its index, the simulated share it
/// received and `W`, it returns the projection it sends back, honest or not.
pub fn simulate_norm_verification<F>(
    client_id: ClientId,
    subset: &BTreeSet<usize>,
    params: &ProtocolParams,
    mut replier: F,
    seed: Seed,
) -> Result<SimulatedVerification>
where
    F: FnMut(usize, &RealVector, &ProjectionMatrix) -> RealVector,
{
    params.validate()?;
    check_proper_subset(subset, params.verifiers)?;
    if subset.contains(&0) {
        return Err(Error::InvalidSubset(
            "the norm-verification simulator requires 0 ∉ T; use simulate_composed_view".into(),
        ));
    }
    let d = params.dim;
    let k = params.proj_dim;
    let client = PartyId::Client(client_id.clone());
    let enc = VectorEncoding::from_truncation(params.truncation.as_ref());
    let mut rng = seed.derive("shares").rng();
    let mut bus = Bus::new();

    let mut shares = Vec::with_capacity(subset.len());
    for &i in subset {
        let mut g = RealVector::from_vec_unchecked(gaussian_vec(&mut rng, d, params.sigma_ss));
        if let Some(t) = &params.truncation {
            g = t.apply(&g);
        }
        bus.send(client.clone(), PartyId::Verifier(i), MessageKind::Share, wire::encode_share(&client_id, g.as_slice(), &enc));
        shares.push((i, g));
    }
    bus.deliver();

    let w = ProjectionMatrix::sample(k, d, seed.derive("projection"), SeedProvenance::SharedRandomness)?;
    let w_bytes = wire::encode_matrix(k, d, w.entries());
    for &i in subset {
        bus.send(PartyId::Verifier(0), PartyId::Verifier(i), MessageKind::Matrix, w_bytes.clone());
    }
    bus.deliver();

    let mut v = RealVector::zeros(k);
    for (i, g) in &shares {
        let y = replier(*i, g, &w);
        if y.dim() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: y.dim() });
        }
        bus.send(PartyId::Verifier(*i), PartyId::Verifier(0), MessageKind::Reply, wire::encode_reply(&client_id, &y));
        v.add_assign(&y)?;
        v.sub_assign(&w.apply(g)?)?;
    }
    bus.deliver();

    let spread = ((params.verifiers - subset.len()) as f64).sqrt() * params.sigma_v;
    let noise = RealVector::from_vec_unchecked(gaussian_vec(&mut seed.derive("noise").rng(), k, spread));
    v.add_assign(&noise)?;
    let accept = v.norm() < params.tau;
    let bit = wire::encode_accept_bit(&client_id, accept);
    for &i in subset {
        bus.send(PartyId::Verifier(0), PartyId::Verifier(i), MessageKind::AcceptBit, bit.clone());
    }
    bus.deliver();

    Ok(SimulatedVerification {
        transcript: Transcript::new(seed, params.clone(), bus.into_messages()),
        v_sim: v,
        accept,
    })
}

/// What a coalition containing verifier 0 sees in one verification.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalitionView {
    /// Shares received by coalition members, by verifier index.
    pub shares: Vec<(usize, RealVector)>,
    pub matrix: ProjectionMatrix,
    /// Replies from verifiers outside the coalition.
    pub outside_replies: Vec<(usize, RealVector)>,
    pub accept: bool,
}

/// Simulator for coalitions that include verifier 0.
///
/// Composes the share simulator with simulated outside replies: the
/// outside shares are drawn as Gaussians conditioned to sum to the
/// negation of verifier 0's mask, so the only difference from a real run
/// is the absent `x` (in `z_0`) and `W·x` (in the replies).
pub fn simulate_composed_view(subset: &BTreeSet<usize>, params: &ProtocolParams, seed: Seed) -> Result<CoalitionView> {
    params.validate()?;
    check_proper_subset(subset, params.verifiers)?;
    if !subset.contains(&0) {
        return Err(Error::InvalidSubset("composed simulator expects 0 ∈ T".into()));
    }
    let d = params.dim;
    let k = params.proj_dim;
    let s = params.verifiers;
    let mut rng = seed.derive("shares").rng();
    let outside: Vec<usize> = (1..s).filter(|i| !subset.contains(i)).collect();

    let mut shares = Vec::new();
    for &i in subset.iter().filter(|&&i| i != 0) {
        shares.push((i, RealVector::from_vec_unchecked(gaussian_vec(&mut rng, d, params.sigma_ss))));
    }
    let mask = RealVector::from_vec_unchecked(gaussian_vec(
        &mut rng,
        d,
        (outside.len() as f64).sqrt() * params.sigma_ss,
    ));
    let mut z0 = mask.clone();
    for (_, g) in &shares {
        z0.sub_assign(g)?;
    }
    shares.insert(0, (0, z0.clone()));

    // h_i iid, then shift so that Σ outside shares = −mask
    let m = outside.len() as f64;
    let hs: Vec<RealVector> = outside
        .iter()
        .map(|_| RealVector::from_vec_unchecked(gaussian_vec(&mut rng, d, params.sigma_ss)))
        .collect();
    let mut correction = mask.clone();
    for h in &hs {
        correction.add_assign(h)?;
    }
    let correction = correction.scale(1.0 / m);

    let w = ProjectionMatrix::sample(k, d, seed.derive("projection"), SeedProvenance::SharedRandomness)?;
    let mut noise_rng = seed.derive("reply-noise").rng();
    let mut outside_replies = Vec::new();
    let mut v = w.apply(&z0)?;
    for (&i, h) in outside.iter().zip(&hs) {
        let g = h.sub(&correction)?;
        let mut y = w.apply(&g)?;
        y.add_assign(&RealVector::from_vec_unchecked(gaussian_vec(&mut noise_rng, k, params.sigma_v)))?;
        v.add_assign(&y)?;
        outside_replies.push((i, y));
    }
    // coalition members other than 0 reply honestly
    for (i, g) in shares.iter().skip(1) {
        let y = project_reply(ClientId::new("sim"), *i, g, &w, params.sigma_v, seed.derive_indexed("member-noise", *i as u64))?;
        v.add_assign(&y.y)?;
    }
    v.add_assign(&RealVector::from_vec_unchecked(gaussian_vec(&mut noise_rng, k, params.sigma_v)))?;
    Ok(CoalitionView {
        shares,
        matrix: w,
        outside_replies,
        accept: v.norm() < params.tau,
    })
}
