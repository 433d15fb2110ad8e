//! Named RNG substreams.
//!
//! A master seed is hashed together with a path of labels and indices
//! (`"select"`, round number, client id, ...) into a 64-bit key that seeds a
//! ChaCha8 generator. Two streams with the same path always produce the same
//! draws, and streams for different clients never depend on the order in
//! which clients are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A deterministic position in the substream tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    key: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix(seed),
        }
    }

    /// Child stream identified by a label.
    pub fn derive(&self, label: &str) -> Self {
        Self {
            key: splitmix(self.key ^ splitmix(fnv1a(label))),
        }
    }

    /// Child stream identified by an integer (round, client id, ...).
    pub fn index(&self, i: u64) -> Self {
        Self {
            key: splitmix(self.key.rotate_left(17) ^ splitmix(i.wrapping_mul(GOLDEN))),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}
