//! Seeded randomness. Every consumer draws from its own named ChaCha stream
//! derived from one run seed, so adding draws in one component never shifts
//! another component's values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the stream name.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Deterministic generator for `(seed, name)`.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}
