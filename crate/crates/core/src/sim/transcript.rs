use std::collections::BTreeSet;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::message::{Message, MessageKind};
use super::party::PartyId;
use crate::error::{Error, Result};
use crate::math::calibrate::ProtocolParams;
use crate::rng::Seed;

pub const TRANSCRIPT_SCHEMA: &str = "robustsum-transcript/1";

/// Ordered record of every message exchanged in one protocol run.
#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub master_seed: Seed,
    pub params: ProtocolParams,
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new(master_seed: Seed, params: ProtocolParams, messages: Vec<Message>) -> Self {
        Transcript {
            master_seed,
            params,
            messages,
        }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Verifiers `0..S` plus every sender and receiver on record.
    pub fn parties(&self) -> BTreeSet<PartyId> {
        let mut out: BTreeSet<PartyId> = (0..self.params.verifiers).map(PartyId::Verifier).collect();
        for m in &self.messages {
            out.insert(m.sender.clone());
            out.insert(m.receiver.clone());
        }
        out
    }

    pub fn total_bytes(&self, mut pred: impl FnMut(&Message) -> bool) -> usize {
        self.messages.iter().filter(|m| pred(m)).map(Message::byte_size).sum()
    }

    pub fn count(&self, mut pred: impl FnMut(&Message) -> bool) -> usize {
        self.messages.iter().filter(|m| pred(m)).count()
    }

    /// SHA-256 over the seed, parameters and every message in order.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(TRANSCRIPT_SCHEMA.as_bytes());
        h.update(self.master_seed.as_bytes());
        let p = self.params.canonical_bytes();
        h.update((p.len() as u64).to_le_bytes());
        h.update(&p);
        for m in &self.messages {
            h.update(m.seq.to_le_bytes());
            h.update(m.round.to_le_bytes());
            for party in [&m.sender, &m.receiver] {
                let s = party.to_string();
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            h.update([m.kind.tag()]);
            h.update((m.payload.len() as u64).to_le_bytes());
            h.update(&m.payload);
        }
        h.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    /// Writes the newline-delimited export: one header line, then one line
    /// per message.
    pub fn write_ndjson<W: Write>(&self, mut w: W, include_payload: bool) -> io::Result<()> {
        let header = TranscriptHeader {
            schema: TRANSCRIPT_SCHEMA.to_string(),
            master_seed: self.master_seed.to_hex(),
            params: self.params.clone(),
            message_count: self.messages.len(),
            transcript_sha256: self.hash_hex(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for m in &self.messages {
            serde_json::to_writer(&mut w, &MessageRecord::from_message(m, include_payload))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self, include_payload: bool) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf, include_payload)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Rebuilds a transcript from an export that carries full payloads and
    /// checks it against the recorded hash.
    pub fn from_ndjson(text: &str) -> Result<Transcript> {
        let file = TranscriptFile::parse(text)?;
        let seed = Seed::from_hex(&file.header.master_seed)
            .ok_or_else(|| Error::Decode("master_seed is not 32 hex bytes".into()))?;
        let mut messages = Vec::with_capacity(file.records.len());
        for r in file.records {
            let payload = r
                .payload
                .ok_or_else(|| Error::Decode(format!("message {} has no payload", r.seq)))?;
            messages.push(Message {
                seq: r.seq,
                round: r.round,
                sender: r.sender,
                receiver: r.receiver,
                kind: r.kind,
                payload,
            });
        }
        let t = Transcript::new(seed, file.header.params, messages);
        if t.hash_hex() != file.header.transcript_sha256 {
            return Err(Error::Decode("transcript hash does not match its messages".into()));
        }
        Ok(t)
    }
}

/// Order-preserving restriction to messages received by `subset`.
pub fn view_of<'a>(transcript: &'a Transcript, subset: &BTreeSet<PartyId>) -> Result<Vec<&'a Message>> {
    let parties = transcript.parties();
    if let Some(p) = subset.iter().find(|p| !parties.contains(p)) {
        return Err(Error::UnknownParty(p.to_string()));
    }
    Ok(transcript
        .messages
        .iter()
        .filter(|m| subset.contains(&m.receiver))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptHeader {
    pub schema: String,
    pub master_seed: String,
    pub params: ProtocolParams,
    pub message_count: usize,
    pub transcript_sha256: String,
}

/// One exported message line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRecord {
    pub seq: u64,
    pub round: u32,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub kind: MessageKind,
    pub byte_size: usize,
    pub payload_sha256: String,
    #[serde(default, with = "hex_opt", skip_serializing_if = "Option::is_none")]
    pub payload: Option<Vec<u8>>,
}

impl MessageRecord {
    fn from_message(m: &Message, include_payload: bool) -> Self {
        MessageRecord {
            seq: m.seq,
            round: m.round,
            sender: m.sender.clone(),
            receiver: m.receiver.clone(),
            kind: m.kind,
            byte_size: m.byte_size(),
            payload_sha256: hex::encode(Sha256::digest(&m.payload)),
            payload: include_payload.then(|| m.payload.clone()),
        }
    }
}

mod hex_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_str(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| hex::decode(s).map_err(serde::de::Error::custom)).transpose()
    }
}

/// A parsed transcript export.
#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptFile {
    pub header: TranscriptHeader,
    pub records: Vec<MessageRecord>,
}

impl TranscriptFile {
    /// Parses and cross-checks an export: schema, message count, sequence
    /// order, byte sizes and payload digests.
    pub fn parse(text: &str) -> Result<TranscriptFile> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines
            .next()
            .ok_or_else(|| Error::Decode("empty transcript file".into()))?;
        let header: TranscriptHeader =
            serde_json::from_str(first).map_err(|e| Error::Decode(format!("header: {e}")))?;
        if header.schema != TRANSCRIPT_SCHEMA {
            return Err(Error::Decode(format!("unsupported schema {:?}", header.schema)));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let r: MessageRecord =
                serde_json::from_str(line).map_err(|e| Error::Decode(format!("line {}: {e}", i + 2)))?;
            if r.seq != i as u64 {
                return Err(Error::Decode(format!("line {}: expected seq {i}, got {}", i + 2, r.seq)));
            }
            if let Some(p) = &r.payload {
                if p.len() != r.byte_size {
                    return Err(Error::Decode(format!("line {}: byte_size does not match payload", i + 2)));
                }
                if hex::encode(Sha256::digest(p)) != r.payload_sha256 {
                    return Err(Error::Decode(format!("line {}: payload digest mismatch", i + 2)));
                }
            }
            records.push(r);
        }
        if records.len() != header.message_count {
            return Err(Error::Decode(format!(
                "header announces {} messages, found {}",
                header.message_count,
                records.len()
            )));
        }
        Ok(TranscriptFile { header, records })
    }
}
