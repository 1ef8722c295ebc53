//! Named, versioned, splittable random streams.
//!
//! Every stochastic operation takes a [`SeedTree`] node: a master seed plus a
//! path of labels. The path is hashed into the 64-bit ChaCha20 stream id, so
//! draws depend only on `(seed, path)` and never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier recorded in every output artifact that depends on random draws.
pub const RNG_ID: &str = "chacha20/seed_from_u64/fnv1a-splitmix-path/v1";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    seed: u64,
    path: u64,
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        SeedTree {
            seed: master_seed,
            path: FNV_OFFSET,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.seed
    }

    /// Child node for an integer label (trial index, layer index, ...).
    pub fn child(&self, label: u64) -> Self {
        let mut h = self.path;
        for b in splitmix(label).to_le_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
        }
        SeedTree {
            seed: self.seed,
            path: h,
        }
    }

    /// Child node for a string label.
    pub fn named(&self, label: &str) -> Self {
        let mut h = FNV_OFFSET;
        for b in label.bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
        }
        self.child(h)
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut r = ChaCha20Rng::seed_from_u64(self.seed);
        r.set_stream(self.path);
        r
    }
}
