//! Seed plumbing.
//!
//! Every random object in the crate is built from a `u64` seed through
//! [`seeded_rng`]. Child seeds for realizations, nodes and subsystems are
//! derived with [`derive_seed`] so that a single master seed reproduces an
//! entire experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type DetRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> DetRng {
    DetRng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `master`, a subsystem `tag` and an
/// `index` (realization, node, ...).
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ tag.rotate_left(17)) ^ index.rotate_left(41))
}

/// Subsystem tags for [`derive_seed`].
pub mod tags {
    pub const GRAPH: u64 = 0x6772_6170;
    pub const FEATURES: u64 = 0x6665_6174;
    pub const DATA: u64 = 0x6461_7461;
    pub const PARTITION: u64 = 0x7061_7274;
    pub const NODE: u64 = 0x6e6f_6465;
    pub const MODEL: u64 = 0x6d6f_6465;
    pub const REALIZATION: u64 = 0x7265_616c;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let a = derive_seed(1, tags::GRAPH, 0);
        assert_eq!(a, derive_seed(1, tags::GRAPH, 0));
        assert_ne!(a, derive_seed(1, tags::GRAPH, 1));
        assert_ne!(a, derive_seed(1, tags::DATA, 0));
        assert_ne!(a, derive_seed(2, tags::GRAPH, 0));
    }
}
