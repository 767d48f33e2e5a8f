//! Closed-form byte costs of one aggregation session.
//!
//! With unquantized shares, id lengths `L_j`, `n` clients that reach every
//! verifier and an accepted set `J*`:
//!
//! - client to servers: `Σ_j S·(7 + L_j + 8d)`
//! - between servers: `(S−1)·[(8 + 8kd) + Σ_j (7 + L_j + 8k) + (4 + Σ_{J*} (2 + L_j)) + (5 + 8d)]`
//!
//! so a client pays `Θ(d·S)` and the servers `Θ(d·k + n·k + d·S)`. The
//! partial-sum term is absent when the session aborts.

use serde::{Deserialize, Serialize};

use crate::math::calibrate::ProtocolParams;
use crate::sim::message::Message;
use crate::sim::party::ClientId;
use crate::sim::transcript::Transcript;
use crate::sim::wire::{ACCEPTED_SET_HEADER, CLIENT_ID_HEADER, MATRIX_HEADER, VECTOR_HEADER};

/// Width of one unquantized coordinate.
pub const F64_WIDTH: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteCounts {
    pub client_to_server: usize,
    pub inter_server: usize,
}

impl ByteCounts {
    pub fn total(&self) -> usize {
        self.client_to_server + self.inter_server
    }
}

/// Byte totals actually recorded in a transcript.
pub fn measured(t: &Transcript) -> ByteCounts {
    ByteCounts {
        client_to_server: t.total_bytes(Message::is_client_to_server),
        inter_server: t.total_bytes(Message::is_inter_server),
    }
}

/// Size of one unquantized share message.
pub fn share_message_bytes(id: &ClientId, dim: usize) -> usize {
    CLIENT_ID_HEADER + id.as_str().len() + VECTOR_HEADER + F64_WIDTH * dim
}

/// Closed-form prediction for a session in which every client reaches
/// every verifier with a well-formed unquantized share.
pub fn predicted(params: &ProtocolParams, clients: &[ClientId], accepted: &[ClientId], aborted: bool) -> ByteCounts {
    let s = params.verifiers;
    let (d, k) = (params.dim, params.proj_dim);
    let client_to_server = clients.iter().map(|c| s * share_message_bytes(c, d)).sum();
    let matrix = MATRIX_HEADER + F64_WIDTH * k * d;
    let replies: usize = clients
        .iter()
        .map(|c| CLIENT_ID_HEADER + c.as_str().len() + VECTOR_HEADER + F64_WIDTH * k)
        .sum();
    let set = ACCEPTED_SET_HEADER + accepted.iter().map(|c| CLIENT_ID_HEADER + c.as_str().len()).sum::<usize>();
    let partial = if aborted { 0 } else { VECTOR_HEADER + F64_WIDTH * d };
    ByteCounts {
        client_to_server,
        inter_server: (s - 1) * (matrix + replies + set + partial),
    }
}
