//! Deterministic seed splitting.
//!
//! Every random stream in an experiment is seeded from the master seed and a
//! path of integers, e.g. `[day index, null-model code, replicate]`:
//!
//! ```text
//! s_0 = splitmix64(master)
//! s_k = splitmix64(s_{k-1} ^ path[k-1])
//! ```
//!
//! Streams with different paths are independent for practical purposes and
//! identical paths always give identical streams, whatever the execution
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |s, &p| splitmix64(s ^ p))
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
