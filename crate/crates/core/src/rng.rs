//! Seeded generator streams.
//!
//! All randomness comes from xoshiro256**. Workers never share a generator:
//! each (run seed, generation, slot) triple gets its own stream, so a run's
//! output does not depend on how offspring are scheduled across threads.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256StarStar as Generator;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> Generator {
    Generator::seed_from_u64(seed)
}

/// Independent generator for one offspring slot of one generation.
pub fn stream(seed: u64, generation: u64, slot: u64) -> Generator {
    let key = mix64(mix64(mix64(seed) ^ generation) ^ slot.rotate_left(32));
    Generator::seed_from_u64(key)
}
