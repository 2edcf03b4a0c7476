//! Seed derivation for independent, reproducible generator streams.
//!
//! Every trial, sweep cell and auxiliary stream gets its own 64-bit seed
//! derived from a master seed and an index with the SplitMix64 finalizer, so
//! results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in run metadata.
pub const MIXING_FUNCTION: &str = "splitmix64";

/// Generator used for every stream.
pub type SimRng = ChaCha8Rng;

pub const GENERATOR: &str = "chacha8";

/// Stream used for the state draw of a trial, separate from agent draws.
pub(crate) const STATE_STREAM: u64 = 0x5EED_0F57_A7E0_0001;

/// Namespace for pilot calibration runs; never used by ordinary experiments.
pub const PILOT_NAMESPACE: u64 = 0xCA11_B8A7_E000_0000;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference SplitMix64 generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
