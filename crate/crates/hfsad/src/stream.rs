//! Deterministic RNG stream derivation.
//!
//! Every random decision in a run draws from its own stream, keyed by
//! (root seed, trial, node id, purpose). Participation draws therefore
//! never perturb data generation across scenario comparisons.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Data,
    Participation,
    Baseline,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Data => 0xD47A,
            Purpose::Participation => 0x9A67,
            Purpose::Baseline => 0xBA5E,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent RNG from the root seed and a stream key.
pub fn derive_rng(seed: u64, trial: u64, node: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut state = seed;
    for word in [trial, node, purpose.tag()] {
        state ^= splitmix64(&mut state).wrapping_add(word.wrapping_mul(0x2545_F491_4F6C_DD1D));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Node id for client `j` of cluster `l`.
pub fn client_node_id(l: usize, j: usize) -> u64 {
    1 + ((l as u64) << 32) + j as u64
}

/// Node id for cluster head `l`.
pub fn cluster_node_id(l: usize) -> u64 {
    (1u64 << 56) + l as u64
}
