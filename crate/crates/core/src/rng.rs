//! Counter-based random-number substreams.
//!
//! Every random draw in the library comes from a stream keyed by
//! `(seed, purpose, index)`. A stream is a ChaCha12 generator whose key is
//! derived with a fixed SplitMix64 expansion, so any component of an
//! experiment (the word of trial 17, the attacker noise of trial 2041, ...)
//! can be regenerated in isolation, and parallel executions that assign
//! streams by trial index produce exactly the sequential results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// What a substream is used for. The discriminant is part of the key
/// derivation, so reordering variants changes every derived stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    /// Transmitted word of a detection trial.
    Word = 1,
    /// Receiver noise under the legitimate hypothesis.
    BobNoise = 2,
    /// Attacker observation noise.
    EveNoise = 3,
    /// Attack combiner noise and attacked-receiver noise.
    Attack = 4,
    /// Monte-Carlo divergence oracle, one stream per batch.
    Oracle = 5,
    /// Random policy perturbations in optimality checks.
    Perturb = 6,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the deterministic substream for `(seed, purpose, index)`.
pub fn substream(seed: u64, purpose: StreamPurpose, index: u64) -> ChaCha12Rng {
    let mut state = seed ^ (purpose as u64).wrapping_mul(0xa076_1d64_78bd_642f);
    state ^= index.wrapping_mul(0xe703_7ed1_a0b4_28db);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
