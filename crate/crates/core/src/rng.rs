//! Seeds and reproducible substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! `master_seed` with `stream_index` selecting the ChaCha stream. Child
//! streams are derived by hashing `(stream_index, tag, index)`, so the
//! value a replicate sees depends only on its identifiers and never on
//! evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

/// Tags separating the families of child streams.
pub mod tag {
    pub const TRUTH: u64 = 0x7452_5554;
    pub const OUTER: u64 = 0x4f55_5452;
    pub const BOOT: u64 = 0x424f_4f54;
    pub const REP: u64 = 0x5245_5053;
    pub const CHECK: u64 = 0x4348_4543;
    pub const SETTING: u64 = 0x5345_5454;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_index,
        }
    }

    /// A child stream identified by `(tag, index)`.
    pub fn derive(&self, tag: u64, index: u64) -> SeedSpec {
        let h = splitmix64(self.stream_index ^ splitmix64(tag ^ splitmix64(index)));
        SeedSpec {
            master_seed: self.master_seed,
            stream_index: h,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut s = self.master_seed;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }
}
