//! Keyed random streams.
//!
//! Every draw in the crate comes from a ChaCha20 stream whose 256-bit key is
//! derived from `(seed, tag, index)` with a SplitMix64 expansion. ChaCha20 is
//! specified independently of the host, so a given key yields the same words
//! on every platform and thread count. Keys never overlap between purposes,
//! which is what lets a sweep add sample sizes or ranks without perturbing the
//! draws of the cells it already had.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for. The discriminant is part of the key and must
/// never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    FactorLeft = 1,
    FactorRight = 2,
    TrueParameter = 3,
    Design = 4,
    Noise = 5,
    DictionaryBasis = 6,
    DictionaryMixing = 7,
    DictionaryLatent = 8,
    DictionaryNoise = 9,
    Oracle = 10,
    ProblemGenerator = 11,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 32-byte ChaCha key for `(seed, tag, index)`.
pub fn stream_key(seed: u64, tag: StreamTag, index: u64) -> [u8; 32] {
    let mut state = seed;
    // fold the three components through the mixer so that nearby keys
    // decorrelate completely
    let mut acc = splitmix64(&mut state);
    state = acc ^ (tag as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    acc = splitmix64(&mut state);
    state = acc ^ index.wrapping_mul(0xA076_1D64_78BD_642F);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

pub fn stream(seed: u64, tag: StreamTag, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(stream_key(seed, tag, index))
}
