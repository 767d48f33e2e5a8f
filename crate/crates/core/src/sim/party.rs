use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Opaque client identifier: 1 to 64 printable ASCII characters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClientId(String);

pub const MAX_CLIENT_ID_LEN: usize = 64;

impl ClientId {
    /// Panics on an invalid identifier; use [`ClientId::parse`] for
    /// untrusted input.
    pub fn new(id: impl Into<String>) -> Self {
        Self::parse(id).expect("invalid client id")
    }

    pub fn parse(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.len() > MAX_CLIENT_ID_LEN {
            return Err(Error::Decode(format!(
                "client id must be 1..={MAX_CLIENT_ID_LEN} bytes, got {}",
                id.len()
            )));
        }
        if !id.bytes().all(|b| b.is_ascii_graphic()) {
            return Err(Error::Decode("client id must be printable ASCII".into()));
        }
        Ok(ClientId(id))
    }

    /// A 16-hex-digit random nonce.
    pub fn random_nonce<R: Rng + ?Sized>(rng: &mut R) -> Self {
        ClientId(format!("{:016x}", rng.random::<u64>()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ClientId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        ClientId::parse(s)
    }
}

impl From<ClientId> for String {
    fn from(c: ClientId) -> String {
        c.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartyId {
    Client(ClientId),
    Verifier(usize),
}

impl PartyId {
    /// The party's private randomness, a function of the master seed and
    /// the party identity only.
    pub fn seed(&self, master: &Seed) -> Seed {
        master.derive("party").derive(&self.to_string())
    }

    pub fn is_verifier(&self) -> bool {
        matches!(self, PartyId::Verifier(_))
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Client(c) => write!(f, "client:{c}"),
            PartyId::Verifier(i) => write!(f, "verifier:{i}"),
        }
    }
}

impl FromStr for PartyId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(id) = s.strip_prefix("client:") {
            return Ok(PartyId::Client(ClientId::parse(id)?));
        }
        if let Some(i) = s.strip_prefix("verifier:") {
            if i.is_empty() || !i.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::Decode(format!("bad verifier index {i:?}")));
            }
            return i
                .parse()
                .map(PartyId::Verifier)
                .map_err(|_| Error::Decode(format!("bad verifier index {i:?}")));
        }
        Err(Error::Decode(format!("unknown party syntax {s:?}")))
    }
}

impl Serialize for PartyId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartyId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn party_round_trip() {
        for p in [
            PartyId::Verifier(0),
            PartyId::Verifier(12),
            PartyId::Client(ClientId::new("a1b2")),
        ] {
            assert_eq!(p.to_string().parse::<PartyId>().unwrap(), p);
        }
        assert!("verifier:".parse::<PartyId>().is_err());
        assert!("verifier:+1".parse::<PartyId>().is_err());
        assert!("server:1".parse::<PartyId>().is_err());
        assert!("client:".parse::<PartyId>().is_err());
    }

    #[test]
    fn client_id_rules() {
        assert!(ClientId::parse("").is_err());
        assert!(ClientId::parse("a b").is_err());
        assert!(ClientId::parse("x".repeat(65)).is_err());
        let mut rng = Seed::from_u64(0).rng();
        assert_eq!(ClientId::random_nonce(&mut rng).as_str().len(), 16);
    }

    #[test]
    fn party_seeds_are_distinct() {
        let m = Seed::from_u64(5);
        assert_ne!(PartyId::Verifier(0).seed(&m), PartyId::Verifier(1).seed(&m));
    }
}
