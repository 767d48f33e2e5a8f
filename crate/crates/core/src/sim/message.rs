use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::party::PartyId;
use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    /// Client → verifier secret share.
    Share,
    /// Verifier 0 → verifier projection matrix.
    Matrix,
    /// Verifier → verifier 0 noisy projection of one client's share.
    Reply,
    /// Verifier 0 → verifier accept/reject decision (single-client runs).
    AcceptBit,
    /// Verifier 0 → verifier set of accepted clients.
    AcceptedSet,
    /// Verifier → verifier 0 sum of accepted shares.
    PartialSum,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::Share,
        MessageKind::Matrix,
        MessageKind::Reply,
        MessageKind::AcceptBit,
        MessageKind::AcceptedSet,
        MessageKind::PartialSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Share => "share",
            MessageKind::Matrix => "matrix",
            MessageKind::Reply => "reply",
            MessageKind::AcceptBit => "accept-bit",
            MessageKind::AcceptedSet => "accepted-set",
            MessageKind::PartialSum => "partial-sum",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        MessageKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Decode(format!("unknown message kind {s:?}")))
    }
}

/// One recorded inter-party message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    /// Position in the transcript; unique per transcript.
    pub seq: u64,
    pub round: u32,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub kind: MessageKind,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn byte_size(&self) -> usize {
        self.payload.len()
    }

    pub fn is_client_to_server(&self) -> bool {
        matches!(self.sender, PartyId::Client(_)) && self.receiver.is_verifier()
    }

    pub fn is_inter_server(&self) -> bool {
        self.sender.is_verifier() && self.receiver.is_verifier()
    }
}
