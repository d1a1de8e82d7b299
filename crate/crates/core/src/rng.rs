//! Deterministic RNG stream derivation.
//!
//! Every stochastic routine in this crate derives its randomness from a
//! master seed plus a small list of context tags (step index, batch element,
//! trial index, ...). Two consequences:
//!
//! * results are reproducible bit-for-bit given the same seed, and
//! * independent work items (trials, batch elements) own disjoint streams,
//!   so they can run on any number of threads without changing the output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; a cheap, well-mixed 64-bit hash step.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent RNG stream from `seed` and the given context tags.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = derive_seed(seed, tags);
    for chunk in key.chunks_exact_mut(8) {
        s = mix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derives a sub-seed for components that take a seed of their own.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut state = mix(seed ^ 0x57c_fa11); // domain-separated from raw seed use
    for &t in tags {
        state = mix(state ^ mix(t));
    }
    state
}
