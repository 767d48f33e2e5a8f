use std::collections::BTreeMap;

use super::message::{Message, MessageKind};
use super::party::PartyId;

/// Synchronous round-based message bus.
///
/// Messages sent during round `r` are recorded immediately and become
/// visible to their receivers only after [`Bus::deliver`] closes the round.
/// Per-receiver order equals send order.
#[derive(Debug, Default)]
pub struct Bus {
    round: u32,
    record: Vec<Message>,
    pending: Vec<usize>,
    inboxes: BTreeMap<PartyId, Vec<usize>>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn send(&mut self, sender: PartyId, receiver: PartyId, kind: MessageKind, payload: Vec<u8>) {
        let seq = self.record.len() as u64;
        self.pending.push(self.record.len());
        self.record.push(Message {
            seq,
            round: self.round,
            sender,
            receiver,
            kind,
            payload,
        });
    }

    /// Closes the current round and delivers its messages.
    pub fn deliver(&mut self) {
        for idx in self.pending.drain(..) {
            let receiver = self.record[idx].receiver.clone();
            self.inboxes.entry(receiver).or_default().push(idx);
        }
        self.round += 1;
    }

    /// Drains everything delivered to `party` so far.
    pub fn take_inbox(&mut self, party: &PartyId) -> Vec<&Message> {
        let idx = self.inboxes.remove(party).unwrap_or_default();
        idx.into_iter().map(|i| &self.record[i]).collect()
    }

    pub fn into_messages(self) -> Vec<Message> {
        self.record
    }
}
