//! Seed derivation.
//!
//! Every random stream in a simulation is keyed by a base seed plus a short
//! tuple of coordinates (client id, round, purpose tag). Streams never depend
//! on the order in which they are requested, so clients can train in any order
//! or in parallel and still produce bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags separating the streams that share a (seed, client, round) key.
pub mod tag {
    pub const PARTICIPANTS: u64 = 0x7061_7274;
    pub const LOCAL_TRAIN: u64 = 0x7472_6169;
    pub const ADVERSARY: u64 = 0x6164_7673;
    pub const PERTURB: u64 = 0x7065_7274;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const ASSIGN: u64 = 0x6173_7367;
    pub const DRAW: u64 = 0x6472_6177;
    pub const DOUBLE: u64 = 0x6462_6c65;
    pub const DATA: u64 = 0x6461_7461;
    pub const INIT: u64 = 0x696e_6974;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `base` with each coordinate in turn.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(base), |acc, &c| splitmix64(acc.rotate_left(23) ^ splitmix64(c)))
}

pub fn stream(base: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, coords))
}
