//! Seeded RNG construction.
//!
//! Every source of randomness in the crate flows through an explicitly seeded
//! `ChaCha8Rng`, so a run is a pure function of its seeds. Parallel work
//! derives one independent stream per unit of work with [`stream_rng`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mix a stream index into a master seed (SplitMix64 finalizer, so nearby
/// stream indices decorrelate).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = stream.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    seed ^ z
}

/// Independent deterministic stream `stream` under a master `seed`.
///
/// Used to fan replications, ensemble members, and seeds out across worker
/// threads without sharing RNG state: the result depends only on
/// `(seed, stream)`, never on scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
