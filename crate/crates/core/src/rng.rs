//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, domain, index)`. The key depends only on the seed and the domain
//! label, and the replicate index selects the ChaCha stream id, so replicate
//! `i` sees the same numbers no matter which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root of a family of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    key: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            key: splitmix64(seed),
        }
    }

    /// Derive a child family for a named sub-task.
    pub fn child(&self, domain: &str) -> Self {
        Streams {
            key: splitmix64(self.key ^ fnv1a(domain.as_bytes())),
        }
    }

    /// Derive a child family keyed by an integer (block size, family index, ...).
    pub fn child_index(&self, index: u64) -> Self {
        Streams {
            key: splitmix64(self.key.wrapping_add(splitmix64(index ^ 0xA076_1D64_78BD_642F))),
        }
    }

    /// The stream for replicate `index`.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(index);
        rng
    }

    /// A 64-bit value identifying stream `index`, suitable for manifests.
    pub fn stream_seed(&self, index: u64) -> u64 {
        splitmix64(self.key ^ splitmix64(index))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
