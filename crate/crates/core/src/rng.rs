//! Counter-keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose key is a hash of
//! `(master_seed, sample_index)` and whose stream id is a caller-chosen
//! counter (the matrix row for samplers). Draws never depend on the order in
//! which streams are created or consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 256-bit key derived from a list of words.
fn derive_key(words: &[u64]) -> [u8; 32] {
    let mut state = 0x6A09_E667_F3BC_C908u64;
    for &w in words {
        state = splitmix64(state ^ w);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Generator for `(master_seed, sample_index, stream)`.
pub fn stream(master_seed: u64, sample_index: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(derive_key(&[master_seed, sample_index]));
    rng.set_stream(stream);
    rng
}

/// Seed for an auxiliary experiment component (baselines, path samplers).
pub fn sub_seed(master_seed: u64, tag: &str) -> u64 {
    let mut h = master_seed;
    for b in tag.bytes() {
        h = splitmix64(h ^ b as u64);
    }
    h
}
