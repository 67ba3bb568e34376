//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit generator. Independent
//! substreams are derived by hashing `(master_seed, domain, index)`, so a
//! replicate's stream never depends on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Domain tags keep substreams for different purposes apart.
pub mod domain {
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const NET: u64 = 0x4e45_5400;
    pub const PAIRS: u64 = 0x5041_4952;
    pub const TAILS: u64 = 0x5441_494c;
    pub const ROW: u64 = 0x524f_5700;
    pub const PROBE: u64 = 0x5052_4f42;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of substream `index` within `domain` for a master seed.
pub fn substream_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(
        splitmix64(master ^ splitmix64(domain))
            ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)),
    )
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(master: u64, domain: u64, index: u64) -> Stream {
    stream(substream_seed(master, domain, index))
}
