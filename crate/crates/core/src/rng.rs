//! Seed derivation and Gaussian sampling.
//!
//! Every random draw in the crate comes from a ChaCha20 stream keyed by a
//! [`Seed`]. Seeds form a tree: a master seed is hashed together with a
//! label (and optionally an index) to obtain the seed of a party, a client,
//! or one specific purpose such as "projection noise for client j". Removing
//! or altering one branch therefore never perturbs draws made on another.
//!
//! Normal variates use the ziggurat sampler of `rand_distr::StandardNormal`,
//! which is deterministic for a given stream.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed([u8; 32]);

impl Seed {
    pub const fn from_bytes(bytes: [u8; 32]) -> Self {
        Seed(bytes)
    }

    /// Expands a user-facing integer seed into a master seed.
    pub fn from_u64(value: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"robustsum/master");
        h.update(value.to_le_bytes());
        Seed(h.finalize().into())
    }

    pub fn derive(&self, label: &str) -> Seed {
        self.hash_child(label, None)
    }

    pub fn derive_indexed(&self, label: &str, index: u64) -> Seed {
        self.hash_child(label, Some(index))
    }

    fn hash_child(&self, label: &str, index: Option<u64>) -> Seed {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        match index {
            Some(i) => {
                h.update([1u8]);
                h.update(i.to_le_bytes());
            }
            None => h.update([0u8]),
        }
        Seed(h.finalize().into())
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha20Rng::from_seed(self.0)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Seed> {
        let bytes = hex::decode(s).ok()?;
        Some(Seed(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `len` i.i.d. draws from `N(0, sigma²)`.
pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, sigma: f64) -> Vec<f64> {
    (0..len).map(|_| sigma * standard_normal(rng)).collect()
}
