//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a [`StreamKey`]: a master seed, a
//! purpose tag and a replicate index. The seed and purpose select a ChaCha key,
//! the replicate index selects the ChaCha stream, so replicate `r` always sees
//! the same numbers no matter how replicates are distributed over workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator handed to samplers.
pub type StreamRng = ChaCha8Rng;

/// What a family of substreams is used for. Combined with a sub-index so that
/// e.g. every point of an `n` grid gets its own family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Environment,
    Clan,
    Renewal,
    HarmonicDraws,
    DualityH,
    DualityV,
    Strata,
    Oracle,
    Diagnostics,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Environment => 1,
            Purpose::Clan => 2,
            Purpose::Renewal => 3,
            Purpose::HarmonicDraws => 4,
            Purpose::DualityH => 5,
            Purpose::DualityV => 6,
            Purpose::Strata => 7,
            Purpose::Oracle => 8,
            Purpose::Diagnostics => 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub sub: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        StreamKey { seed, purpose, sub: 0 }
    }

    /// Derive a sibling family, e.g. one per grid point.
    pub fn sub(self, sub: u64) -> Self {
        StreamKey { sub, ..self }
    }

    /// Generator for replicate `replicate` of this family.
    pub fn rng(&self, replicate: u64) -> StreamRng {
        let mut state = self.seed ^ 0x6a09_e667_f3bc_c908;
        let mut key = [0u8; 32];
        let words = [
            splitmix64(&mut state),
            splitmix64(&mut state) ^ self.purpose.tag().wrapping_mul(0x9e37_79b9_7f4a_7c15),
            splitmix64(&mut state) ^ self.sub.wrapping_mul(0xbf58_476d_1ce4_e5b9),
            splitmix64(&mut state),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(replicate);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
