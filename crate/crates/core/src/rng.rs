//! Deterministic random streams.
//!
//! Every stochastic quantity in the simulator (QAM data, pilot signs, path
//! gains, noise) is drawn from a ChaCha8 stream seeded by a `u64`. ChaCha8 is
//! specified bit-for-bit and independent of platform, so fixed seeds yield
//! identical test vectors everywhere.
//!
//! Sub-streams are derived from a master seed with [`derive_seed`]: the
//! master seed and each label are folded through the SplitMix64 finalizer.
//! A trial's streams therefore depend only on `(master, labels...)`, never on
//! the order in which threads pick up work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a path of labels.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(master), |acc, &label| {
        splitmix64(acc ^ splitmix64(label))
    })
}
