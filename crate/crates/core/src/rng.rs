//! Seeded, splittable random streams.
//!
//! Every random draw in the library comes from a [`StreamKey`]: a user seed,
//! a purpose tag and an index (replicate, bootstrap draw, ...). Two keys that
//! differ in any component give independent ChaCha8 streams, so parallel
//! workers never share a generator and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purposes that partition the stream space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Simulate = 1,
    Jitter = 2,
    Bootstrap = 3,
    Rectangle = 4,
    Resample = 5,
    Test = 99,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose, index: u64) -> Self {
        Self {
            seed,
            purpose,
            index,
        }
    }

    /// Key for a sub-task of this one (e.g. the jitter matrix of a replicate).
    pub fn child(&self, purpose: Purpose, index: u64) -> Self {
        Self {
            seed: splitmix(self.seed ^ splitmix(self.purpose as u64 ^ (self.index << 8))),
            purpose,
            index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(&splitmix(self.seed).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.index);
        rng
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
